#include "t2t/diff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "t2t/errors.hpp"
#include "t2t/generator.hpp"

namespace t2t::diff {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::atomic<std::uint32_t> next_tape_serial{1};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)), data_(product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != product(shape_)) throw ShapeError("tensor values do not match shape");
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

ParamId ParamSet::add(std::string name, std::vector<std::size_t> shape) {
  if (find(name)) throw ShapeError("duplicate parameter name '" + name + "'");
  Tensor value(shape);
  Tensor grad(std::move(shape));
  params_.push_back({std::move(name), std::move(value), std::move(grad)});
  return params_.size() - 1;
}

std::optional<ParamId> ParamSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  return std::nullopt;
}

void ParamSet::init_uniform(double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : params_)
    for (auto& v : p.value.data()) v = lo + (hi - lo) * uniform01(rng);
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

double ParamSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_)
    for (double g : p.grad.data()) sq += g * g;
  return std::sqrt(sq);
}

std::size_t ParamSet::value_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

// ---------------------------------------------------------------------------
// Tape

namespace {

enum class Op {
  Input,
  Column,
  MatVec,
  Affine,
  Add,
  Mul,
  Scale,
  Tanh,
  Sigmoid,
  Concat,
  Slice,
  Dot,
  Dots,
  WeightedSum,
  Sum,
  Softmax,
  CrossEntropy,
  Dropout,
};

struct Node {
  Op op = Op::Input;
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::size_t list_off = 0;  // into Impl::lists for variadic ops
  std::size_t list_len = 0;
  std::size_t p1 = 0;  // parameter ids
  std::size_t p2 = 0;
  std::size_t aux = 0;  // slice offset, column, target index, mask offset
  std::size_t off = 0;  // value/grad slice in the arenas
  std::size_t len = 0;
  double k = 0.0;
};

constexpr double kProbFloor = 1e-12;

}  // namespace

struct Tape::Impl {
  std::vector<Node> nodes;
  std::vector<double> values;
  std::vector<double> grads;
  std::vector<std::uint32_t> lists;
  std::vector<double> masks;

  std::uint32_t push(Node n, std::size_t len) {
    n.off = values.size();
    n.len = len;
    values.resize(values.size() + len, 0.0);
    nodes.push_back(n);
    return static_cast<std::uint32_t>(nodes.size() - 1);
  }

  double* val(std::uint32_t id) { return values.data() + nodes[id].off; }
  double* grd(std::uint32_t id) { return grads.data() + nodes[id].off; }
  std::size_t len(std::uint32_t id) const { return nodes[id].len; }
};

Tape::Tape(ParamSet& params)
    : impl_(std::make_unique<Impl>()), params_(&params), serial_(next_tape_serial.fetch_add(1)) {
  impl_->nodes.reserve(1024);
  impl_->values.reserve(1 << 16);
}

// The parameter set is only written to by backward(), which is disabled here.
Tape::Tape(const ParamSet& params) : Tape(const_cast<ParamSet&>(params)) { read_only_ = true; }

Tape::~Tape() = default;

namespace {

void check_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw ShapeError(std::string(what) + ": size mismatch " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace

#define T2T_CHECK_VAR(v)                                                          \
  do {                                                                            \
    if ((v).tape_ != serial_ || (v).id_ >= impl_->nodes.size())                   \
      throw GraphError("variable does not belong to this tape");                  \
  } while (0)

Var Tape::input(std::span<const double> values) {
  Node n;
  n.op = Op::Input;
  auto id = impl_->push(n, values.size());
  std::copy(values.begin(), values.end(), impl_->val(id));
  return {id, serial_};
}

Var Tape::zeros(std::size_t size) {
  Node n;
  n.op = Op::Input;
  return {impl_->push(n, size), serial_};
}

Var Tape::column(ParamId matrix, std::size_t col) {
  const Tensor& w = (*params_)[matrix].value;
  if (col >= w.cols()) throw IndexError("column " + std::to_string(col) + " out of range for " + (*params_)[matrix].name);
  Node n;
  n.op = Op::Column;
  n.p1 = matrix;
  n.aux = col;
  auto id = impl_->push(n, w.rows());
  double* out = impl_->val(id);
  for (std::size_t r = 0; r < w.rows(); ++r) out[r] = w.at(r, col);
  return {id, serial_};
}

Var Tape::matvec(ParamId matrix, Var x) {
  T2T_CHECK_VAR(x);
  const Tensor& w = (*params_)[matrix].value;
  check_same(w.cols(), impl_->len(x.id_), "matvec");
  Node n;
  n.op = Op::MatVec;
  n.a = x.id_;
  n.p1 = matrix;
  auto id = impl_->push(n, w.rows());
  ConstMatMap W(w.data().data(), static_cast<Eigen::Index>(w.rows()), static_cast<Eigen::Index>(w.cols()));
  VecMap(impl_->val(id), static_cast<Eigen::Index>(w.rows())).noalias() =
      W * ConstVecMap(impl_->val(x.id_), static_cast<Eigen::Index>(w.cols()));
  return {id, serial_};
}

Var Tape::affine(ParamId matrix, Var x, ParamId bias) {
  T2T_CHECK_VAR(x);
  const Tensor& w = (*params_)[matrix].value;
  const Tensor& b = (*params_)[bias].value;
  check_same(w.cols(), impl_->len(x.id_), "affine");
  check_same(w.rows(), b.size(), "affine bias");
  Node n;
  n.op = Op::Affine;
  n.a = x.id_;
  n.p1 = matrix;
  n.p2 = bias;
  auto id = impl_->push(n, w.rows());
  const auto rows = static_cast<Eigen::Index>(w.rows());
  ConstMatMap W(w.data().data(), rows, static_cast<Eigen::Index>(w.cols()));
  VecMap out(impl_->val(id), rows);
  out.noalias() = W * ConstVecMap(impl_->val(x.id_), static_cast<Eigen::Index>(w.cols()));
  out += ConstVecMap(b.data().data(), rows);
  return {id, serial_};
}

Var Tape::add(Var a, Var b) {
  T2T_CHECK_VAR(a);
  T2T_CHECK_VAR(b);
  const std::size_t len = impl_->len(a.id_);
  check_same(len, impl_->len(b.id_), "add");
  Node n;
  n.op = Op::Add;
  n.a = a.id_;
  n.b = b.id_;
  auto id = impl_->push(n, len);
  double* out = impl_->val(id);
  const double* x = impl_->val(a.id_);
  const double* y = impl_->val(b.id_);
  for (std::size_t i = 0; i < len; ++i) out[i] = x[i] + y[i];
  return {id, serial_};
}

Var Tape::mul(Var a, Var b) {
  T2T_CHECK_VAR(a);
  T2T_CHECK_VAR(b);
  const std::size_t len = impl_->len(a.id_);
  check_same(len, impl_->len(b.id_), "mul");
  Node n;
  n.op = Op::Mul;
  n.a = a.id_;
  n.b = b.id_;
  auto id = impl_->push(n, len);
  double* out = impl_->val(id);
  const double* x = impl_->val(a.id_);
  const double* y = impl_->val(b.id_);
  for (std::size_t i = 0; i < len; ++i) out[i] = x[i] * y[i];
  return {id, serial_};
}

Var Tape::scale(Var a, double k) {
  T2T_CHECK_VAR(a);
  Node n;
  n.op = Op::Scale;
  n.a = a.id_;
  n.k = k;
  const std::size_t len = impl_->len(a.id_);
  auto id = impl_->push(n, len);
  double* out = impl_->val(id);
  const double* x = impl_->val(a.id_);
  for (std::size_t i = 0; i < len; ++i) out[i] = k * x[i];
  return {id, serial_};
}

Var Tape::tanh(Var a) {
  T2T_CHECK_VAR(a);
  Node n;
  n.op = Op::Tanh;
  n.a = a.id_;
  const std::size_t len = impl_->len(a.id_);
  auto id = impl_->push(n, len);
  double* out = impl_->val(id);
  const double* x = impl_->val(a.id_);
  for (std::size_t i = 0; i < len; ++i) out[i] = std::tanh(x[i]);
  return {id, serial_};
}

Var Tape::sigmoid(Var a) {
  T2T_CHECK_VAR(a);
  Node n;
  n.op = Op::Sigmoid;
  n.a = a.id_;
  const std::size_t len = impl_->len(a.id_);
  auto id = impl_->push(n, len);
  double* out = impl_->val(id);
  const double* x = impl_->val(a.id_);
  for (std::size_t i = 0; i < len; ++i) out[i] = diff::sigmoid(x[i]);
  return {id, serial_};
}

Var Tape::concat(Var a, Var b) {
  T2T_CHECK_VAR(a);
  T2T_CHECK_VAR(b);
  Node n;
  n.op = Op::Concat;
  n.a = a.id_;
  n.b = b.id_;
  const std::size_t la = impl_->len(a.id_);
  const std::size_t lb = impl_->len(b.id_);
  auto id = impl_->push(n, la + lb);
  double* out = impl_->val(id);
  std::copy_n(impl_->val(a.id_), la, out);
  std::copy_n(impl_->val(b.id_), lb, out + la);
  return {id, serial_};
}

Var Tape::slice(Var a, std::size_t offset, std::size_t length) {
  T2T_CHECK_VAR(a);
  if (offset + length > impl_->len(a.id_)) throw ShapeError("slice out of range");
  Node n;
  n.op = Op::Slice;
  n.a = a.id_;
  n.aux = offset;
  auto id = impl_->push(n, length);
  std::copy_n(impl_->val(a.id_) + offset, length, impl_->val(id));
  return {id, serial_};
}

Var Tape::dot(Var a, Var b) {
  T2T_CHECK_VAR(a);
  T2T_CHECK_VAR(b);
  const std::size_t len = impl_->len(a.id_);
  check_same(len, impl_->len(b.id_), "dot");
  Node n;
  n.op = Op::Dot;
  n.a = a.id_;
  n.b = b.id_;
  auto id = impl_->push(n, 1);
  const double* x = impl_->val(a.id_);
  const double* y = impl_->val(b.id_);
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) s += x[i] * y[i];
  *impl_->val(id) = s;
  return {id, serial_};
}

Var Tape::dots(std::span<const Var> rows, Var v) {
  T2T_CHECK_VAR(v);
  const std::size_t len = impl_->len(v.id_);
  Node n;
  n.op = Op::Dots;
  n.a = v.id_;
  n.list_off = impl_->lists.size();
  n.list_len = rows.size();
  for (Var r : rows) {
    T2T_CHECK_VAR(r);
    check_same(impl_->len(r.id_), len, "dots");
    impl_->lists.push_back(r.id_);
  }
  auto id = impl_->push(n, rows.size());
  const double* y = impl_->val(v.id_);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const double* x = impl_->val(rows[j].id_);
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += x[i] * y[i];
    impl_->val(id)[j] = s;
  }
  return {id, serial_};
}

Var Tape::weighted_sum(Var weights, std::span<const Var> rows) {
  T2T_CHECK_VAR(weights);
  check_same(impl_->len(weights.id_), rows.size(), "weighted_sum");
  if (rows.empty()) throw ShapeError("weighted_sum over no rows");
  T2T_CHECK_VAR(rows[0]);
  const std::size_t len = impl_->len(rows[0].id_);
  Node n;
  n.op = Op::WeightedSum;
  n.a = weights.id_;
  n.list_off = impl_->lists.size();
  n.list_len = rows.size();
  for (Var r : rows) {
    T2T_CHECK_VAR(r);
    check_same(impl_->len(r.id_), len, "weighted_sum");
    impl_->lists.push_back(r.id_);
  }
  auto id = impl_->push(n, len);
  double* out = impl_->val(id);
  const double* w = impl_->val(weights.id_);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const double* x = impl_->val(rows[j].id_);
    for (std::size_t i = 0; i < len; ++i) out[i] += w[j] * x[i];
  }
  return {id, serial_};
}

Var Tape::sum(std::span<const Var> scalars) {
  Node n;
  n.op = Op::Sum;
  n.list_off = impl_->lists.size();
  n.list_len = scalars.size();
  for (Var s : scalars) {
    T2T_CHECK_VAR(s);
    check_same(impl_->len(s.id_), 1, "sum");
    impl_->lists.push_back(s.id_);
  }
  auto id = impl_->push(n, 1);
  double total = 0.0;
  for (Var s : scalars) total += *impl_->val(s.id_);
  *impl_->val(id) = total;
  return {id, serial_};
}

Var Tape::softmax(Var logits) {
  T2T_CHECK_VAR(logits);
  const std::size_t len = impl_->len(logits.id_);
  if (len == 0) throw ShapeError("softmax of an empty vector");
  Node n;
  n.op = Op::Softmax;
  n.a = logits.id_;
  auto id = impl_->push(n, len);
  const double* x = impl_->val(logits.id_);
  double* out = impl_->val(id);
  const double mx = *std::max_element(x, x + len);
  double z = 0.0;
  for (std::size_t i = 0; i < len; ++i) z += (out[i] = std::exp(x[i] - mx));
  for (std::size_t i = 0; i < len; ++i) out[i] /= z;
  return {id, serial_};
}

Var Tape::cross_entropy(Var probs, std::size_t target) {
  T2T_CHECK_VAR(probs);
  if (target >= impl_->len(probs.id_))
    throw IndexError("cross-entropy target " + std::to_string(target) + " out of range");
  Node n;
  n.op = Op::CrossEntropy;
  n.a = probs.id_;
  n.aux = target;
  auto id = impl_->push(n, 1);
  *impl_->val(id) = -std::log(std::max(impl_->val(probs.id_)[target], kProbFloor));
  return {id, serial_};
}

Var Tape::dropout(Var x, double p, bool training, std::mt19937_64& rng) {
  T2T_CHECK_VAR(x);
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw std::invalid_argument("dropout rate must be in [0, 1)");
  const std::size_t len = impl_->len(x.id_);
  Node n;
  n.op = Op::Dropout;
  n.a = x.id_;
  n.aux = impl_->masks.size();
  const double keep_scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < len; ++i) impl_->masks.push_back(uniform01(rng) < p ? 0.0 : keep_scale);
  auto id = impl_->push(n, len);
  const double* in = impl_->val(x.id_);
  double* out = impl_->val(id);
  const double* mask = impl_->masks.data() + n.aux;
  for (std::size_t i = 0; i < len; ++i) out[i] = in[i] * mask[i];
  return {id, serial_};
}

std::span<const double> Tape::value(Var v) const {
  T2T_CHECK_VAR(v);
  const auto& n = impl_->nodes[v.id_];
  return {impl_->values.data() + n.off, n.len};
}

std::span<const double> Tape::grad(Var v) const {
  T2T_CHECK_VAR(v);
  const auto& n = impl_->nodes[v.id_];
  if (impl_->grads.size() < n.off + n.len) throw GraphError("backward has not been run");
  return {impl_->grads.data() + n.off, n.len};
}

std::size_t Tape::length(Var v) const {
  T2T_CHECK_VAR(v);
  return impl_->len(v.id_);
}

std::size_t Tape::node_count() const { return impl_->nodes.size(); }

void Tape::backward(Var loss) {
  if (!loss.valid() || loss.tape_ != serial_ || loss.id_ >= impl_->nodes.size())
    throw GraphError("loss is not connected to this tape");
  if (impl_->len(loss.id_) != 1) throw GraphError("loss must be a scalar");
  if (read_only_) throw GraphError("backward on an inference-only tape");

  Impl& t = *impl_;
  t.grads.assign(t.values.size(), 0.0);
  *t.grd(loss.id_) = 1.0;

  for (std::size_t idx = loss.id_ + 1; idx-- > 0;) {
    const Node& n = t.nodes[idx];
    const auto id = static_cast<std::uint32_t>(idx);
    const double* g = t.grd(id);
    const double* y = t.val(id);
    const std::size_t len = n.len;
    if (std::all_of(g, g + len, [](double v) { return v == 0.0; })) continue;

    switch (n.op) {
      case Op::Input:
        break;
      case Op::Column: {
        Tensor& gw = (*params_)[n.p1].grad;
        for (std::size_t r = 0; r < len; ++r) gw.at(r, n.aux) += g[r];
        break;
      }
      case Op::MatVec:
      case Op::Affine: {
        const Tensor& w = (*params_)[n.p1].value;
        Tensor& gw = (*params_)[n.p1].grad;
        const auto rows = static_cast<Eigen::Index>(w.rows());
        const auto cols = static_cast<Eigen::Index>(w.cols());
        ConstVecMap gy(g, rows);
        ConstVecMap x(t.val(n.a), cols);
        MatMap(gw.data().data(), rows, cols).noalias() += gy * x.transpose();
        VecMap(t.grd(n.a), cols).noalias() += ConstMatMap(w.data().data(), rows, cols).transpose() * gy;
        if (n.op == Op::Affine) VecMap((*params_)[n.p2].grad.data().data(), rows) += gy;
        break;
      }
      case Op::Add: {
        double* ga = t.grd(n.a);
        double* gb = t.grd(n.b);
        for (std::size_t i = 0; i < len; ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::Mul: {
        const double* a = t.val(n.a);
        const double* b = t.val(n.b);
        double* ga = t.grd(n.a);
        double* gb = t.grd(n.b);
        for (std::size_t i = 0; i < len; ++i) {
          ga[i] += g[i] * b[i];
          gb[i] += g[i] * a[i];
        }
        break;
      }
      case Op::Scale: {
        double* ga = t.grd(n.a);
        for (std::size_t i = 0; i < len; ++i) ga[i] += n.k * g[i];
        break;
      }
      case Op::Tanh: {
        double* ga = t.grd(n.a);
        for (std::size_t i = 0; i < len; ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case Op::Sigmoid: {
        double* ga = t.grd(n.a);
        for (std::size_t i = 0; i < len; ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case Op::Concat: {
        const std::size_t la = t.len(n.a);
        double* ga = t.grd(n.a);
        double* gb = t.grd(n.b);
        for (std::size_t i = 0; i < la; ++i) ga[i] += g[i];
        for (std::size_t i = la; i < len; ++i) gb[i - la] += g[i];
        break;
      }
      case Op::Slice: {
        double* ga = t.grd(n.a) + n.aux;
        for (std::size_t i = 0; i < len; ++i) ga[i] += g[i];
        break;
      }
      case Op::Dot: {
        const std::size_t m = t.len(n.a);
        const double* a = t.val(n.a);
        const double* b = t.val(n.b);
        double* ga = t.grd(n.a);
        double* gb = t.grd(n.b);
        for (std::size_t i = 0; i < m; ++i) {
          ga[i] += g[0] * b[i];
          gb[i] += g[0] * a[i];
        }
        break;
      }
      case Op::Dots: {
        const std::size_t m = t.len(n.a);
        const double* v = t.val(n.a);
        for (std::size_t j = 0; j < n.list_len; ++j) {
          const std::uint32_t r = t.lists[n.list_off + j];
          const double* x = t.val(r);
          double* gx = t.grd(r);
          double* gv = t.grd(n.a);
          for (std::size_t i = 0; i < m; ++i) {
            gx[i] += g[j] * v[i];
            gv[i] += g[j] * x[i];
          }
        }
        break;
      }
      case Op::WeightedSum: {
        const double* w = t.val(n.a);
        for (std::size_t j = 0; j < n.list_len; ++j) {
          const std::uint32_t r = t.lists[n.list_off + j];
          const double* x = t.val(r);
          double* gx = t.grd(r);
          double gw = 0.0;
          for (std::size_t i = 0; i < len; ++i) {
            gx[i] += w[j] * g[i];
            gw += g[i] * x[i];
          }
          t.grd(n.a)[j] += gw;
        }
        break;
      }
      case Op::Sum: {
        for (std::size_t j = 0; j < n.list_len; ++j) *t.grd(t.lists[n.list_off + j]) += g[0];
        break;
      }
      case Op::Softmax: {
        double inner = 0.0;
        for (std::size_t i = 0; i < len; ++i) inner += g[i] * y[i];
        double* ga = t.grd(n.a);
        for (std::size_t i = 0; i < len; ++i) ga[i] += y[i] * (g[i] - inner);
        break;
      }
      case Op::CrossEntropy: {
        const double p = t.val(n.a)[n.aux];
        if (p >= kProbFloor) t.grd(n.a)[n.aux] -= g[0] / p;
        break;
      }
      case Op::Dropout: {
        const double* mask = t.masks.data() + n.aux;
        double* ga = t.grd(n.a);
        for (std::size_t i = 0; i < len; ++i) ga[i] += g[i] * mask[i];
        break;
      }
    }
  }
}

#undef T2T_CHECK_VAR

// ---------------------------------------------------------------------------
// Cells

LstmCellParams add_lstm_cell(ParamSet& params, const std::string& prefix, std::size_t hidden, std::size_t input) {
  LstmCellParams p;
  p.hidden = hidden;
  p.input = input;
  p.weight = params.add(prefix + ".W", {4 * hidden, hidden + input});
  p.bias = params.add(prefix + ".b", {4 * hidden});
  return p;
}

TreeLstmCellParams add_tree_lstm_cell(ParamSet& params, const std::string& prefix, std::size_t hidden,
                                      std::size_t input) {
  TreeLstmCellParams p;
  p.hidden = hidden;
  p.input = input;
  p.weight = params.add(prefix + ".W", {5 * hidden, 2 * hidden + input});
  p.bias = params.add(prefix + ".b", {5 * hidden});
  return p;
}

LstmState lstm_cell(Tape& tape, const LstmCellParams& p, LstmState prev, Var x) {
  const std::size_t d = p.hidden;
  check_same(tape.length(prev.h), d, "lstm_cell h");
  check_same(tape.length(prev.c), d, "lstm_cell c");
  check_same(tape.length(x), p.input, "lstm_cell input");
  Var z = tape.affine(p.weight, tape.concat(prev.h, x), p.bias);
  Var i = tape.sigmoid(tape.slice(z, 0, d));
  Var f = tape.sigmoid(tape.slice(z, d, d));
  Var o = tape.sigmoid(tape.slice(z, 2 * d, d));
  Var g = tape.tanh(tape.slice(z, 3 * d, d));
  Var c = tape.add(tape.mul(f, prev.c), tape.mul(i, g));
  Var h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

LstmState tree_lstm_cell(Tape& tape, const TreeLstmCellParams& p, LstmState left, LstmState right, Var x) {
  const std::size_t d = p.hidden;
  check_same(tape.length(left.h), d, "tree_lstm_cell h_L");
  check_same(tape.length(right.h), d, "tree_lstm_cell h_R");
  check_same(tape.length(left.c), d, "tree_lstm_cell c_L");
  check_same(tape.length(right.c), d, "tree_lstm_cell c_R");
  check_same(tape.length(x), p.input, "tree_lstm_cell input");
  Var z = tape.affine(p.weight, tape.concat(tape.concat(left.h, right.h), x), p.bias);
  Var i = tape.sigmoid(tape.slice(z, 0, d));
  Var f_left = tape.sigmoid(tape.slice(z, d, d));
  Var f_right = tape.sigmoid(tape.slice(z, 2 * d, d));
  Var o = tape.sigmoid(tape.slice(z, 3 * d, d));
  Var u = tape.tanh(tape.slice(z, 4 * d, d));
  Var c = tape.add(tape.mul(i, u), tape.add(tape.mul(f_left, left.c), tape.mul(f_right, right.c)));
  Var h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

// ---------------------------------------------------------------------------
// Updates

double clip_gradients(ParamSet& params, double threshold) {
  const double norm = params.grad_norm();
  if (norm > threshold && norm > 0.0) {
    const double k = threshold / norm;
    for (auto& p : params)
      for (auto& g : p.grad.data()) g *= k;
  }
  return norm;
}

void Sgd::step(ParamSet& params, double lr) {
  for (auto& p : params) {
    auto v = p.value.data();
    auto g = p.grad.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
  }
}

Adam::Adam(const ParamSet& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params) {
    m_.emplace_back(p.value.size(), 0.0);
    v_.emplace_back(p.value.size(), 0.0);
  }
}

void Adam::step(ParamSet& params, double lr) {
  if (params.size() != m_.size()) throw ShapeError("Adam state does not match parameter set");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::size_t k = 0;
  for (auto& p : params) {
    auto v = p.value.data();
    auto g = p.grad.data();
    auto& m1 = m_[k];
    auto& m2 = v_[k];
    for (std::size_t i = 0; i < v.size(); ++i) {
      m1[i] = beta1_ * m1[i] + (1.0 - beta1_) * g[i];
      m2[i] = beta2_ * m2[i] + (1.0 - beta2_) * g[i] * g[i];
      v[i] -= lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps_);
    }
    ++k;
  }
}

void clip_and_step(ParamSet& params, double lr, double threshold) {
  clip_gradients(params, threshold);
  Sgd().step(params, lr);
}

LrSchedule::LrSchedule(double lr0, double factor, std::size_t window)
    : lr0_(lr0), lr_(lr0), factor_(factor), window_(window), best_(std::numeric_limits<double>::infinity()) {}

double LrSchedule::observe(double validation_loss, std::size_t batches) {
  if (validation_loss < best_) {
    best_ = validation_loss;
    since_best_ = 0;
    return lr_;
  }
  since_best_ += batches;
  if (since_best_ >= window_) {
    since_best_ = 0;
    ++decays_;
    lr_ = lr0_ * std::pow(factor_, static_cast<double>(decays_));
  }
  return lr_;
}

void Hyperparams::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (layers != 1) throw std::invalid_argument("only single-layer cells are supported");
  if (hidden == 0 || embedding == 0) throw std::invalid_argument("hidden and embedding sizes must be positive");
  if (embedding != hidden) throw std::invalid_argument("embedding size must equal hidden size");
  if (!(lr0 > 0.0)) throw std::invalid_argument("initial learning rate must be positive");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw std::invalid_argument("decay factor must be in (0, 1]");
  if (plateau_window == 0) throw std::invalid_argument("plateau window must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
  if (!(grad_clip > 0.0)) throw std::invalid_argument("gradient clip threshold must be positive");
  if (!(init_range > 0.0)) throw std::invalid_argument("init range must be positive");
}

}  // namespace t2t::diff
