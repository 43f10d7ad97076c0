#pragma once

// Mini-batch training with a dev-loss learning-rate schedule, and the token
// and program accuracy metrics.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "t2t/diff.hpp"
#include "t2t/generator.hpp"
#include "t2t/model.hpp"
#include "t2t/treecodec.hpp"

namespace t2t {

struct LogRecord {
  std::size_t epoch = 0;
  std::size_t minibatch = 0;
  double train_loss = 0.0;
  std::optional<double> dev_loss;
  double lr = 0.0;
};

struct TrainState {
  std::size_t epoch = 0;
  std::size_t minibatch = 0;
  double lr = 0.0;
  double best_dev_loss = 0.0;
  std::size_t batches_since_best = 0;
  std::uint64_t seed = 0;
  std::vector<LogRecord> history;
};

struct TrainOptions {
  diff::Hyperparams hyper;
  Variant variant = Variant::Full;
  // Mini-batches between dev-loss evaluations.
  std::size_t eval_every = 500;
  // JSON-lines log sink; one line per mini-batch.
  std::ostream* log = nullptr;
  bool log_timestamps = true;
  // Called after every epoch with the current parameters; returning false
  // stops training early.
  std::function<bool(const TrainState&, const Model&)> on_epoch;
};

struct TrainResult {
  // Parameters with the lowest dev loss seen (the final ones if dev is empty).
  std::unique_ptr<Model> model;
  VocabPair vocab;
  TrainState state;
};

// Vocabularies come from the train split. Throws DataError if a dev or test
// record uses a token outside them, or if train is empty.
TrainResult train(const DatasetSplits& splits, const TrainOptions& options);

// One JSON object per line: {epoch, minibatch, train_loss, dev_loss, lr[, timestamp]}.
std::string format_log_record(const LogRecord& record, bool timestamp);

struct EvalReport {
  double token_accuracy = 0.0;
  double program_accuracy = 0.0;
  std::size_t count = 0;
  std::size_t exact = 0;
  std::size_t truncated = 0;
  std::size_t errors = 0;

  bool operator==(const EvalReport&) const = default;
};

std::string format_report(const EvalReport& report);

// Matching positions below min(|pred|, |gold|) over |gold|. An empty gold
// scores 1 against an empty prediction and 0 otherwise.
double token_accuracy(const Tokens& pred, const Tokens& gold);

// Fraction of pairs whose trees are equal; a missing prediction (decode
// truncated or failed) is wrong.
double program_accuracy(std::span<const std::optional<GeneralTree>> pred, std::span<const GeneralTree> gold);

enum class Outcome { Decoded, Truncated, Failed };

struct Prediction {
  Outcome outcome = Outcome::Failed;
  std::optional<GeneralTree> tree;
};

// Scores predictions against gold trees; token accuracy is averaged over
// pairs, on format-T serializations.
EvalReport score(std::span<const Prediction> predictions, std::span<const GeneralTree> gold);

// Greedy-decodes a source and recovers the general tree.
Prediction predict(const Model& model, const VocabPair& vocab, const GeneralTree& source,
                   const DecodeLimits& limits = {});

EvalReport evaluate(const Model& model, const VocabPair& vocab, const std::vector<DatasetRecord>& records,
                    const DecodeLimits& limits = {});

// Mean teacher-forced loss without dropout.
double mean_loss(const Model& model, const VocabPair& vocab, const std::vector<DatasetRecord>& records);

}  // namespace t2t
