#pragma once

// Dense tensors, named parameters, and a vector-level reverse-mode tape with
// the cells and update rules the tree-to-tree model is built from.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace t2t::diff {

class Tensor {
 public:
  Tensor() = default;
  // Zero-filled.
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  // Matrices are rows x cols, row-major; vectors report cols() == 1.
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  void fill(double v);
  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// A trainable tensor with its gradient accumulator.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

using ParamId = std::size_t;

class ParamSet {
 public:
  // Throws ShapeError if the name is already registered.
  ParamId add(std::string name, std::vector<std::size_t> shape);

  std::size_t size() const { return params_.size(); }
  Param& operator[](ParamId id) { return params_[id]; }
  const Param& operator[](ParamId id) const { return params_[id]; }
  std::optional<ParamId> find(const std::string& name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  // Every entry uniform in [lo, hi), reproducible from the seed.
  void init_uniform(double lo, double hi, std::uint64_t seed);
  void zero_grad();
  double grad_norm() const;
  std::size_t value_count() const;

 private:
  std::vector<Param> params_;
};

// Handle to a vector recorded on a Tape.
class Var {
 public:
  Var() = default;
  bool valid() const { return tape_ != 0; }

 private:
  friend class Tape;
  Var(std::uint32_t id, std::uint32_t tape) : id_(id), tape_(tape) {}
  std::uint32_t id_ = 0;
  std::uint32_t tape_ = 0;
};

// Records vector operations and propagates gradients back into the inputs
// and into the ParamSet's accumulators. Single-threaded; use one tape per
// example and sum accumulators when running examples concurrently.
class Tape {
 public:
  explicit Tape(ParamSet& params);
  // Inference-only tape: backward() throws GraphError.
  explicit Tape(const ParamSet& params);
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  const ParamSet& params() const { return *params_; }

  Var input(std::span<const double> values);
  Var zeros(std::size_t n);

  // Column `col` of a rows x cols parameter (embedding lookup).
  Var column(ParamId matrix, std::size_t col);
  Var matvec(ParamId matrix, Var x);
  Var affine(ParamId matrix, Var x, ParamId bias);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double k);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var concat(Var a, Var b);
  Var slice(Var a, std::size_t offset, std::size_t length);
  Var dot(Var a, Var b);
  // [rows[i] . v for each i]
  Var dots(std::span<const Var> rows, Var v);
  // sum_i weights[i] * rows[i]
  Var weighted_sum(Var weights, std::span<const Var> rows);
  Var sum(std::span<const Var> scalars);
  Var softmax(Var logits);
  // -log(max(probs[target], 1e-12)); throws IndexError for a bad target.
  Var cross_entropy(Var probs, std::size_t target);
  // Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
  // Identity when !training or p == 0.
  Var dropout(Var x, double p, bool training, std::mt19937_64& rng);

  std::span<const double> value(Var v) const;
  std::span<const double> grad(Var v) const;
  std::size_t length(Var v) const;
  std::size_t node_count() const;

  // Throws GraphError if `loss` is not a scalar recorded on this tape.
  void backward(Var loss);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  ParamSet* params_;
  bool read_only_ = false;
  std::uint32_t serial_;
};

struct LstmState {
  Var h;
  Var c;
};

// Plain LSTM cell: gates i, f, o, g stacked in one (4*hidden) x (hidden + input)
// matrix applied to [h; x].
struct LstmCellParams {
  ParamId weight = 0;
  ParamId bias = 0;
  std::size_t hidden = 0;
  std::size_t input = 0;
};

// Binary Tree-LSTM cell: gates i, f_L, f_R, o, u stacked in one
// (5*hidden) x (2*hidden + input) matrix applied to [h_L; h_R; x].
struct TreeLstmCellParams {
  ParamId weight = 0;
  ParamId bias = 0;
  std::size_t hidden = 0;
  std::size_t input = 0;
};

LstmCellParams add_lstm_cell(ParamSet& params, const std::string& prefix, std::size_t hidden,
                             std::size_t input);
TreeLstmCellParams add_tree_lstm_cell(ParamSet& params, const std::string& prefix, std::size_t hidden,
                                      std::size_t input);

// c' = f*c + i*g, h' = o*tanh(c'). Throws ShapeError on size mismatch.
LstmState lstm_cell(Tape& tape, const LstmCellParams& p, LstmState prev, Var x);
// c = i*u + f_L*c_L + f_R*c_R, h = o*tanh(c). Missing children are passed as
// zero states by the caller.
LstmState tree_lstm_cell(Tape& tape, const TreeLstmCellParams& p, LstmState left, LstmState right, Var x);

// Rescales all gradients so that their global L2 norm is at most
// `threshold`. Returns the norm before clipping.
double clip_gradients(ParamSet& params, double threshold);

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(ParamSet& params, double lr) = 0;
};

// p <- p - lr * g
class Sgd final : public Optimizer {
 public:
  void step(ParamSet& params, double lr) override;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(const ParamSet& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ParamSet& params, double lr) override;

 private:
  double beta1_;
  double beta2_;
  double eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// Global-norm clip at `threshold`, then an SGD step.
void clip_and_step(ParamSet& params, double lr, double threshold = 5.0);

// Multiplies the learning rate by `factor` whenever `window` mini-batches
// pass without a new best validation loss. The counter restarts on
// improvement and after each decay.
class LrSchedule {
 public:
  explicit LrSchedule(double lr0 = 0.005, double factor = 0.8, std::size_t window = 500);

  // Reports a validation loss observed after `batches` further mini-batches.
  double observe(double validation_loss, std::size_t batches = 1);

  double lr() const { return lr_; }
  double best() const { return best_; }
  std::size_t since_best() const { return since_best_; }
  std::size_t decays() const { return decays_; }

 private:
  double lr0_;
  double lr_;
  double factor_;
  std::size_t window_;
  double best_;
  std::size_t since_best_ = 0;
  std::size_t decays_ = 0;
};

enum class OptimizerKind { Sgd, Adam };

struct Hyperparams {
  std::size_t batch_size = 100;
  std::size_t layers = 1;
  std::size_t hidden = 256;
  std::size_t embedding = 256;
  double lr0 = 0.005;
  double decay_factor = 0.8;
  std::size_t plateau_window = 500;
  double dropout = 0.5;
  double grad_clip = 5.0;
  double init_range = 0.1;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;

  // Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

}  // namespace t2t::diff
