#include "t2t/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <json.hpp>
#include <limits>
#include <ostream>

#include "t2t/errors.hpp"

namespace t2t {

namespace {

struct EncodedPair {
  EncodedTree source;
  EncodedTree target;
};

std::vector<EncodedPair> encode_split(const std::vector<DatasetRecord>& records, const VocabPair& vocab,
                                      const char* split) {
  std::vector<EncodedPair> pairs;
  pairs.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      pairs.push_back({encode_tree(to_lcrs(ast_to_tree(records[i].source_ast)), vocab.source),
                       encode_tree(to_lcrs(ast_to_tree(records[i].target_ast)), vocab.target)});
    } catch (const VocabError& e) {
      throw DataError(std::string(split) + " record " + std::to_string(i) + ": " + e.what());
    }
  }
  return pairs;
}

double mean_encoded_loss(const Model& model, const std::vector<EncodedPair>& pairs) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : pairs) {
    diff::Tape tape(model.params());
    total += tape.value(model.teacher_forced_loss(tape, p.source, p.target).loss)[0];
  }
  return total / static_cast<double>(pairs.size());
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::unique_ptr<diff::Optimizer> make_optimizer(diff::OptimizerKind kind, const diff::ParamSet& params) {
  if (kind == diff::OptimizerKind::Sgd) return std::make_unique<diff::Sgd>();
  return std::make_unique<diff::Adam>(params);
}

}  // namespace

std::string format_log_record(const LogRecord& record, bool timestamp) {
  nlohmann::ordered_json j = {
      {"epoch", record.epoch},
      {"minibatch", record.minibatch},
      {"train_loss", record.train_loss},
      {"dev_loss", record.dev_loss ? nlohmann::ordered_json(*record.dev_loss) : nlohmann::ordered_json(nullptr)},
      {"lr", record.lr},
  };
  if (timestamp) j["timestamp"] = utc_timestamp();
  return j.dump();
}

TrainResult train(const DatasetSplits& splits, const TrainOptions& options) {
  const diff::Hyperparams& hp = options.hyper;
  hp.validate();
  if (splits.train.empty()) throw DataError("training split is empty");
  if (options.eval_every == 0) throw std::invalid_argument("eval_every must be positive");

  TrainResult result;
  result.vocab = build_vocab(splits.train);
  const auto train_pairs = encode_split(splits.train, result.vocab, "train");
  const auto dev_pairs = encode_split(splits.dev, result.vocab, "dev");
  encode_split(splits.test, result.vocab, "test");

  ModelConfig config;
  config.hidden = hp.hidden;
  config.source_vocab = result.vocab.source.size();
  config.target_vocab = result.vocab.target.size();
  config.eos = static_cast<std::size_t>(result.vocab.target.eos());
  config.variant = options.variant;
  Model model(config);
  model.init_uniform(hp.init_range, hp.seed);

  std::mt19937_64 rng(hp.seed ^ 0x9e3779b97f4a7c15ULL);
  auto optimizer = make_optimizer(hp.optimizer, model.params());
  diff::LrSchedule schedule(hp.lr0, hp.decay_factor, hp.plateau_window);

  TrainState& state = result.state;
  state.seed = hp.seed;
  state.lr = schedule.lr();
  state.best_dev_loss = std::numeric_limits<double>::infinity();

  std::size_t last_eval = 0;
  auto evaluate_dev = [&](LogRecord& record) {
    if (dev_pairs.empty() || state.minibatch == last_eval) return;
    const double dev = mean_encoded_loss(model, dev_pairs);
    record.dev_loss = dev;
    if (dev < state.best_dev_loss) {
      state.best_dev_loss = dev;
      result.model = std::make_unique<Model>(model);
    }
    state.lr = schedule.observe(dev, state.minibatch - last_eval);
    state.batches_since_best = schedule.since_best();
    last_eval = state.minibatch;
  };

  std::vector<std::size_t> order(train_pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  DropoutContext dropout{hp.dropout, &rng};
  const std::optional<DropoutContext> maybe_dropout =
      hp.dropout > 0.0 ? std::optional<DropoutContext>(dropout) : std::nullopt;

  for (state.epoch = 1; state.epoch <= hp.epochs; ++state.epoch) {
    // Fisher-Yates with our own uniform draw, so the order does not depend
    // on the standard library's distribution code.
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      const std::size_t end = std::min(order.size(), start + hp.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      model.params().zero_grad();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& pair = train_pairs[order[k]];
        diff::Tape tape(model.params());
        const auto loss = model.teacher_forced_loss(tape, pair.source, pair.target, maybe_dropout).loss;
        batch_loss += tape.value(loss)[0];
        tape.backward(tape.scale(loss, inv));
      }
      diff::clip_gradients(model.params(), hp.grad_clip);
      optimizer->step(model.params(), state.lr);
      ++state.minibatch;

      LogRecord record{state.epoch, state.minibatch, batch_loss * inv, std::nullopt, state.lr};
      const bool last_batch = state.epoch == hp.epochs && end == order.size();
      if (state.minibatch % options.eval_every == 0 || last_batch) evaluate_dev(record);
      state.history.push_back(record);
      if (options.log) *options.log << format_log_record(record, options.log_timestamps) << '\n';
    }
    if (options.on_epoch && !options.on_epoch(state, model)) {
      LogRecord record{state.epoch, state.minibatch, state.history.back().train_loss, std::nullopt, state.lr};
      evaluate_dev(record);
      if (record.dev_loss) {
        state.history.push_back(record);
        if (options.log) *options.log << format_log_record(record, options.log_timestamps) << '\n';
      }
      break;
    }
  }
  if (state.epoch > hp.epochs) state.epoch = hp.epochs;
  if (!result.model) result.model = std::make_unique<Model>(model);
  if (options.log) options.log->flush();
  return result;
}

double token_accuracy(const Tokens& pred, const Tokens& gold) {
  if (gold.empty()) return pred.empty() ? 1.0 : 0.0;
  const std::size_t n = std::min(pred.size(), gold.size());
  std::size_t same = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (pred[i] == gold[i]) ++same;
  return static_cast<double>(same) / static_cast<double>(gold.size());
}

double program_accuracy(std::span<const std::optional<GeneralTree>> pred, std::span<const GeneralTree> gold) {
  if (pred.size() != gold.size()) throw std::invalid_argument("prediction and gold counts differ");
  if (gold.empty()) return 0.0;
  std::size_t exact = 0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (pred[i] && *pred[i] == gold[i]) ++exact;
  return static_cast<double>(exact) / static_cast<double>(gold.size());
}

EvalReport score(std::span<const Prediction> predictions, std::span<const GeneralTree> gold) {
  if (predictions.size() != gold.size()) throw std::invalid_argument("prediction and gold counts differ");
  EvalReport report;
  report.count = gold.size();
  if (gold.empty()) return report;
  double token_total = 0.0;
  std::vector<std::optional<GeneralTree>> trees;
  trees.reserve(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const Prediction& p = predictions[i];
    if (p.outcome == Outcome::Truncated) ++report.truncated;
    if (p.outcome == Outcome::Failed) ++report.errors;
    const bool usable = p.outcome == Outcome::Decoded && p.tree;
    trees.push_back(usable ? p.tree : std::nullopt);
    if (usable) {
      token_total += token_accuracy(serialize_dfs(*p.tree), serialize_dfs(gold[i]));
      if (*p.tree == gold[i]) ++report.exact;
    }
  }
  report.token_accuracy = token_total / static_cast<double>(gold.size());
  report.program_accuracy = program_accuracy(trees, gold);
  return report;
}

Prediction predict(const Model& model, const VocabPair& vocab, const GeneralTree& source,
                   const DecodeLimits& limits) {
  const EncodedTree encoded = encode_tree(to_lcrs(source), vocab.source);
  Prediction p;
  try {
    const EncodedTree decoded = model.decode_greedy(encoded, limits);
    p.tree = from_lcrs(decode_tree(decoded, vocab.target));
    p.outcome = Outcome::Decoded;
  } catch (const LimitExceeded&) {
    p.outcome = Outcome::Truncated;
  } catch (const ShapeError&) {
    p.outcome = Outcome::Failed;
  }
  return p;
}

EvalReport evaluate(const Model& model, const VocabPair& vocab, const std::vector<DatasetRecord>& records,
                    const DecodeLimits& limits) {
  std::vector<Prediction> predictions;
  std::vector<GeneralTree> gold;
  predictions.reserve(records.size());
  gold.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      predictions.push_back(predict(model, vocab, ast_to_tree(records[i].source_ast), limits));
    } catch (const VocabError& e) {
      throw DataError("record " + std::to_string(i) + ": " + e.what());
    }
    gold.push_back(ast_to_tree(records[i].target_ast));
  }
  return score(predictions, gold);
}

double mean_loss(const Model& model, const VocabPair& vocab, const std::vector<DatasetRecord>& records) {
  return mean_encoded_loss(model, encode_split(records, vocab, "evaluation"));
}

std::string format_report(const EvalReport& report) {
  const nlohmann::ordered_json j = {
      {"count", report.count},
      {"token_accuracy", report.token_accuracy},
      {"program_accuracy", report.program_accuracy},
      {"exact", report.exact},
      {"truncated", report.truncated},
      {"errors", report.errors},
  };
  return j.dump(2) + "\n";
}

}  // namespace t2t
