#pragma once

// Tree-to-tree translator: Tree-LSTM encoder over the source binary tree,
// soft attention over all source nodes, and a FIFO binary-tree decoder whose
// children are produced by two separate LSTM cells.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "t2t/diff.hpp"
#include "t2t/treecodec.hpp"

namespace t2t {

enum class Variant {
  Full,          // attention + parent attention feeding
  NoParentFeed,  // attention, children see only the parent's token embedding
  NoAttention,   // e_t = h
};

std::string_view variant_name(Variant v);
// Accepts "full", "no-pf", "no-attn". Throws std::invalid_argument otherwise.
Variant parse_variant(std::string_view name);

struct ModelConfig {
  std::size_t hidden = 256;
  std::size_t source_vocab = 0;
  std::size_t target_vocab = 0;
  // Index of <EOS> in the target vocabulary.
  std::size_t eos = 0;
  Variant variant = Variant::Full;
};

// Per-node encoder states, indexed like the source EncodedTree.
class EncoderStates {
 public:
  std::vector<diff::LstmState> nodes;

  std::size_t size() const { return nodes.size(); }
  const diff::LstmState& root() const { return nodes.at(0); }

  // Attention reads every state through here, so tests can confirm that a
  // variant never looks past the root.
  std::span<const diff::LstmState> attend_view() const {
    ++attention_reads_;
    return nodes;
  }
  std::size_t attention_reads() const { return attention_reads_; }

 private:
  mutable std::size_t attention_reads_ = 0;
};

struct Attention {
  diff::Var weights;  // distribution over the source nodes
  diff::Var context;  // expected source hidden state
};

struct DecodeLimits {
  // Maximum number of nodes popped from the expansion queue.
  std::size_t max_nodes = 1000;
  // Maximum depth of a decoded binary-tree node (root at depth 0).
  std::size_t max_depth = 80;
};

// Training-mode dropout. Absent means inference.
struct DropoutContext {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
};

struct LossResult {
  diff::Var loss;  // mean cross-entropy over prediction sites
  std::size_t sites = 0;
};

class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  diff::ParamSet& params() { return params_; }
  const diff::ParamSet& params() const { return params_; }

  void init_uniform(double range, std::uint64_t seed) { params_.init_uniform(-range, range, seed); }

  // Post-order Tree-LSTM over the source; missing children are zero states.
  // Throws VocabError on an out-of-range label.
  EncoderStates encode(diff::Tape& tape, const EncodedTree& source) const;

  // Softmax over all source nodes of h_s^T W0 h_t and the weighted sum of h_s.
  Attention attend(diff::Tape& tape, diff::Var h, const EncoderStates& enc) const;
  // tanh(W1 e_s + W2 h)
  diff::Var combine(diff::Tape& tape, diff::Var context, diff::Var h) const;
  // The vector fed to the output layer for a node with hidden state h.
  diff::Var node_embedding(diff::Tape& tape, diff::Var h, const EncoderStates& enc) const;
  // softmax(W e_t)
  diff::Var predict_value(diff::Tape& tape, diff::Var e_t) const;
  // Child states of an expanded node. Throws EosExpandError for <EOS>.
  std::pair<diff::LstmState, diff::LstmState> expand(diff::Tape& tape, diff::LstmState node, std::size_t token,
                                                     diff::Var e_t,
                                                     const std::optional<DropoutContext>& dropout = {}) const;

  // Greedy FIFO decode. Throws LimitExceeded when a budget is hit.
  EncodedTree decode_greedy(const EncodedTree& source, const DecodeLimits& limits = {}) const;

  // Teacher-forced loss: one site per target node (its label) and one per
  // absent child slot (<EOS>); an empty target has a single root site.
  LossResult teacher_forced_loss(diff::Tape& tape, const EncodedTree& source, const EncodedTree& target,
                                 const std::optional<DropoutContext>& dropout = {}) const;

  struct Ids {
    diff::ParamId source_embedding;
    diff::TreeLstmCellParams encoder;
    diff::ParamId target_embedding;  // B, d x V_t
    diff::LstmCellParams left;
    diff::LstmCellParams right;
    diff::ParamId output;  // W, V_t x d
    std::optional<diff::ParamId> att_w0;
    std::optional<diff::ParamId> att_w1;
    std::optional<diff::ParamId> att_w2;
  };
  const Ids& ids() const { return ids_; }

 private:
  ModelConfig config_;
  diff::ParamSet params_;
  Ids ids_{};
};

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace t2t
