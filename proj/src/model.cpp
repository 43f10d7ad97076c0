#include "t2t/model.hpp"

#include <deque>
#include <functional>
#include <stdexcept>

#include "t2t/errors.hpp"

namespace t2t {

using diff::LstmState;
using diff::Tape;
using diff::Var;

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoParentFeed: return "no-pf";
    case Variant::NoAttention: return "no-attn";
  }
  return "full";
}

Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::Full;
  if (name == "no-pf") return Variant::NoParentFeed;
  if (name == "no-attn") return Variant::NoAttention;
  throw std::invalid_argument("unknown variant '" + std::string(name) + "'");
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

Model::Model(const ModelConfig& config) : config_(config) {
  const std::size_t d = config.hidden;
  if (d == 0 || config.source_vocab == 0 || config.target_vocab == 0)
    throw ShapeError("model dimensions must be positive");
  if (config.eos >= config.target_vocab) throw VocabError("<EOS> index outside the target vocabulary");

  ids_.source_embedding = params_.add("src_embed", {d, config.source_vocab});
  ids_.encoder = diff::add_tree_lstm_cell(params_, "encoder", d, d);
  ids_.target_embedding = params_.add("tgt_embed", {d, config.target_vocab});
  // Parent attention feeding widens the child cells' input to [B t; e_t].
  const std::size_t child_input = config.variant == Variant::Full ? 2 * d : d;
  ids_.left = diff::add_lstm_cell(params_, "lstm_L", d, child_input);
  ids_.right = diff::add_lstm_cell(params_, "lstm_R", d, child_input);
  ids_.output = params_.add("out_W", {config.target_vocab, d});
  if (config.variant != Variant::NoAttention) {
    ids_.att_w0 = params_.add("att_W0", {d, d});
    ids_.att_w1 = params_.add("att_W1", {d, d});
    ids_.att_w2 = params_.add("att_W2", {d, d});
  }
}

EncoderStates Model::encode(Tape& tape, const EncodedTree& source) const {
  if (source.empty()) throw ShapeError("cannot encode an empty source tree");
  for (int label : source.label)
    if (label < 0 || static_cast<std::size_t>(label) >= config_.source_vocab)
      throw VocabError("source label index " + std::to_string(label) + " outside the source vocabulary");

  const std::size_t d = config_.hidden;
  const Var zero = tape.zeros(d);
  const LstmState missing{zero, zero};

  EncoderStates enc;
  enc.nodes.resize(source.size());
  std::function<void(int)> visit = [&](int i) {
    LstmState left = missing;
    LstmState right = missing;
    if (source.left[i] >= 0) {
      visit(source.left[i]);
      left = enc.nodes[source.left[i]];
    }
    if (source.right[i] >= 0) {
      visit(source.right[i]);
      right = enc.nodes[source.right[i]];
    }
    Var x = tape.column(ids_.source_embedding, static_cast<std::size_t>(source.label[i]));
    enc.nodes[i] = diff::tree_lstm_cell(tape, ids_.encoder, left, right, x);
  };
  visit(0);
  return enc;
}

Attention Model::attend(Tape& tape, Var h, const EncoderStates& enc) const {
  if (!ids_.att_w0) throw std::logic_error("attention is disabled for this variant");
  auto states = enc.attend_view();
  if (states.empty()) throw ShapeError("attention over an empty encoding");
  std::vector<Var> hs;
  hs.reserve(states.size());
  for (const auto& s : states) hs.push_back(s.h);
  Var query = tape.matvec(*ids_.att_w0, h);
  Var weights = tape.softmax(tape.dots(hs, query));
  return {weights, tape.weighted_sum(weights, hs)};
}

Var Model::combine(Tape& tape, Var context, Var h) const {
  if (!ids_.att_w1) throw std::logic_error("attention is disabled for this variant");
  return tape.tanh(tape.add(tape.matvec(*ids_.att_w1, context), tape.matvec(*ids_.att_w2, h)));
}

Var Model::node_embedding(Tape& tape, Var h, const EncoderStates& enc) const {
  if (config_.variant == Variant::NoAttention) return h;
  return combine(tape, attend(tape, h, enc).context, h);
}

Var Model::predict_value(Tape& tape, Var e_t) const { return tape.softmax(tape.matvec(ids_.output, e_t)); }

std::pair<LstmState, LstmState> Model::expand(Tape& tape, LstmState node, std::size_t token, Var e_t,
                                              const std::optional<DropoutContext>& dropout) const {
  if (token == config_.eos) throw EosExpandError();
  if (token >= config_.target_vocab) throw VocabError("target token index outside the vocabulary");
  Var input = tape.column(ids_.target_embedding, token);
  if (config_.variant == Variant::Full) input = tape.concat(input, e_t);
  if (dropout) input = tape.dropout(input, dropout->rate, true, *dropout->rng);
  return {diff::lstm_cell(tape, ids_.left, node, input), diff::lstm_cell(tape, ids_.right, node, input)};
}

EncodedTree Model::decode_greedy(const EncodedTree& source, const DecodeLimits& limits) const {
  Tape tape(params_);
  const EncoderStates enc = encode(tape, source);

  struct Pending {
    LstmState state;
    int parent;
    bool is_left;
    std::size_t depth;
  };
  std::deque<Pending> queue;
  queue.push_back({enc.root(), -1, false, 0});

  EncodedTree out;
  std::size_t popped = 0;
  while (!queue.empty()) {
    Pending p = queue.front();
    queue.pop_front();
    if (++popped > limits.max_nodes) throw LimitExceeded(LimitExceeded::Kind::Nodes, limits.max_nodes);

    Var e_t = node_embedding(tape, p.state.h, enc);
    const std::size_t token = argmax(tape.value(predict_value(tape, e_t)));
    if (token == config_.eos) continue;
    if (p.depth > limits.max_depth) throw LimitExceeded(LimitExceeded::Kind::Depth, limits.max_depth);

    const int self = static_cast<int>(out.size());
    out.label.push_back(static_cast<int>(token));
    out.left.push_back(-1);
    out.right.push_back(-1);
    if (p.parent >= 0) (p.is_left ? out.left : out.right)[p.parent] = self;

    auto [left, right] = expand(tape, p.state, token, e_t);
    queue.push_back({left, self, true, p.depth + 1});
    queue.push_back({right, self, false, p.depth + 1});
  }
  return out;
}

LossResult Model::teacher_forced_loss(Tape& tape, const EncodedTree& source, const EncodedTree& target,
                                      const std::optional<DropoutContext>& dropout) const {
  for (int label : target.label)
    if (label < 0 || static_cast<std::size_t>(label) >= config_.target_vocab ||
        static_cast<std::size_t>(label) == config_.eos)
      throw VocabError("target label index " + std::to_string(label) + " is not a valid node value");

  const EncoderStates enc = encode(tape, source);
  std::vector<Var> terms;
  terms.reserve(2 * target.size() + 1);

  // Scores one prediction site and returns the unperturbed e_t.
  auto site = [&](LstmState state, std::size_t gold) {
    Var e_t = node_embedding(tape, state.h, enc);
    Var fed = dropout ? tape.dropout(e_t, dropout->rate, true, *dropout->rng) : e_t;
    terms.push_back(tape.cross_entropy(predict_value(tape, fed), gold));
    return e_t;
  };

  if (target.empty()) {
    site(enc.root(), config_.eos);
  } else {
    std::function<void(int, LstmState)> visit = [&](int i, LstmState state) {
      const auto label = static_cast<std::size_t>(target.label[i]);
      Var e_t = site(state, label);
      auto [left, right] = expand(tape, state, label, e_t, dropout);
      if (target.left[i] >= 0) {
        visit(target.left[i], left);
      } else {
        site(left, config_.eos);
      }
      if (target.right[i] >= 0) {
        visit(target.right[i], right);
      } else {
        site(right, config_.eos);
      }
    };
    visit(0, enc.root());
  }

  const std::size_t n = terms.size();
  return {tape.scale(tape.sum(terms), 1.0 / static_cast<double>(n)), n};
}

}  // namespace t2t
