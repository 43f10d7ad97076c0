#include "t2t/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "t2t/generator.hpp"
#include "t2t/model.hpp"

namespace t2t {

using diff::ParamId;
using diff::ParamSet;
using diff::Tape;
using diff::Var;

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradcheckResult check_gradients(const std::string& name, ParamSet& params,
                                const std::function<Var(Tape&)>& build, const GradcheckOptions& options) {
  params.zero_grad();
  {
    Tape tape(params);
    tape.backward(build(tape));
  }
  auto evaluate = [&] {
    Tape tape(static_cast<const ParamSet&>(params));
    return tape.value(build(tape))[0];
  };

  GradcheckResult result{name, 0.0, 0};
  for (auto& p : params) {
    auto values = p.value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + options.epsilon;
      const double up = evaluate();
      values[i] = saved - options.epsilon;
      const double down = evaluate();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      result.max_relative_error =
          std::max(result.max_relative_error, relative_error(p.grad[i], numeric, options.floor));
      ++result.entries;
    }
  }
  return result;
}

namespace {

struct OpFixture {
  ParamSet params;
  std::vector<double> probe;

  OpFixture(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x5eedULL);
    probe.resize(n);
    for (auto& v : probe) v = 2.0 * uniform01(rng) - 1.0;
  }
  ParamId vec(const std::string& name, std::size_t n) { return params.add(name, {n, 1}); }
  ParamId mat(const std::string& name, std::size_t r, std::size_t c) { return params.add(name, {r, c}); }
  void init(std::uint64_t seed) { params.init_uniform(-1.0, 1.0, seed); }
  // Projects a vector onto a fixed random direction so every output entry
  // carries a distinct gradient.
  Var reduce(Tape& t, Var v) const {
    return t.dot(v, t.input(std::span<const double>(probe).first(t.length(v))));
  }
};

// Random binary tree with n nodes in preorder, labels below `vocab`.
EncodedTree random_tree(std::size_t n, std::size_t vocab, std::mt19937_64& rng) {
  EncodedTree tree;
  std::function<int(std::size_t)> grow = [&](std::size_t count) -> int {
    if (count == 0) return -1;
    const int self = static_cast<int>(tree.size());
    tree.label.push_back(static_cast<int>(uniform01(rng) * static_cast<double>(vocab)));
    tree.left.push_back(-1);
    tree.right.push_back(-1);
    const auto left_count = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(count));
    const int l = grow(left_count);
    const int r = grow(count - 1 - left_count);
    tree.left[self] = l;
    tree.right[self] = r;
    return self;
  };
  grow(n);
  return tree;
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck_suite(std::size_t dim, std::uint64_t seed,
                                                 const GradcheckOptions& options) {
  std::vector<GradcheckResult> results;
  const std::size_t d = dim;
  std::uint64_t case_seed = seed;

  auto op_case = [&](const std::string& name, auto&& setup) {
    OpFixture f(4 * d + 8, case_seed);
    auto build = setup(f);
    f.init(case_seed++);
    results.push_back(check_gradients(name, f.params, build, options));
  };

  op_case("column", [&](OpFixture& f) {
    ParamId m = f.mat("m", d, 3);
    return [&f, m](Tape& t) { return f.reduce(t, t.column(m, 1)); };
  });
  op_case("matvec", [&](OpFixture& f) {
    ParamId m = f.mat("m", d + 1, d);
    ParamId x = f.vec("x", d);
    return [&f, m, x](Tape& t) { return f.reduce(t, t.matvec(m, t.column(x, 0))); };
  });
  op_case("affine", [&](OpFixture& f) {
    ParamId m = f.mat("m", d, d + 2);
    ParamId x = f.vec("x", d + 2);
    ParamId b = f.vec("b", d);
    return [&f, m, x, b](Tape& t) { return f.reduce(t, t.affine(m, t.column(x, 0), b)); };
  });
  op_case("add", [&](OpFixture& f) {
    ParamId a = f.vec("a", d);
    ParamId b = f.vec("b", d);
    return [&f, a, b](Tape& t) { return f.reduce(t, t.add(t.column(a, 0), t.column(b, 0))); };
  });
  op_case("mul", [&](OpFixture& f) {
    ParamId a = f.vec("a", d);
    ParamId b = f.vec("b", d);
    return [&f, a, b](Tape& t) { return f.reduce(t, t.mul(t.column(a, 0), t.column(b, 0))); };
  });
  op_case("scale", [&](OpFixture& f) {
    ParamId a = f.vec("a", d);
    return [&f, a](Tape& t) { return f.reduce(t, t.scale(t.column(a, 0), -1.7)); };
  });
  op_case("tanh", [&](OpFixture& f) {
    ParamId a = f.vec("a", d);
    return [&f, a](Tape& t) { return f.reduce(t, t.tanh(t.column(a, 0))); };
  });
  op_case("sigmoid", [&](OpFixture& f) {
    ParamId a = f.vec("a", d);
    return [&f, a](Tape& t) { return f.reduce(t, t.sigmoid(t.column(a, 0))); };
  });
  op_case("concat", [&](OpFixture& f) {
    ParamId a = f.vec("a", d);
    ParamId b = f.vec("b", 3);
    return [&f, a, b](Tape& t) { return f.reduce(t, t.concat(t.column(a, 0), t.column(b, 0))); };
  });
  op_case("slice", [&](OpFixture& f) {
    ParamId a = f.vec("a", d + 4);
    return [&f, a, d](Tape& t) { return f.reduce(t, t.slice(t.column(a, 0), 2, d)); };
  });
  op_case("dot", [&](OpFixture& f) {
    ParamId a = f.vec("a", d);
    ParamId b = f.vec("b", d);
    return [a, b](Tape& t) { return t.dot(t.column(a, 0), t.column(b, 0)); };
  });
  op_case("dots", [&](OpFixture& f) {
    ParamId rows = f.mat("rows", d, 4);
    ParamId v = f.vec("v", d);
    return [&f, rows, v](Tape& t) {
      std::vector<Var> rs;
      for (std::size_t i = 0; i < 4; ++i) rs.push_back(t.column(rows, i));
      return f.reduce(t, t.dots(rs, t.column(v, 0)));
    };
  });
  op_case("weighted_sum", [&](OpFixture& f) {
    ParamId rows = f.mat("rows", d, 4);
    ParamId w = f.vec("w", 4);
    return [&f, rows, w](Tape& t) {
      std::vector<Var> rs;
      for (std::size_t i = 0; i < 4; ++i) rs.push_back(t.column(rows, i));
      return f.reduce(t, t.weighted_sum(t.column(w, 0), rs));
    };
  });
  op_case("sum", [&](OpFixture& f) {
    ParamId a = f.vec("a", 5);
    return [a](Tape& t) {
      std::vector<Var> parts;
      Var v = t.column(a, 0);
      for (std::size_t i = 0; i < 5; ++i) parts.push_back(t.slice(t.mul(v, v), i, 1));
      return t.sum(parts);
    };
  });
  op_case("softmax", [&](OpFixture& f) {
    ParamId a = f.vec("a", d);
    return [&f, a](Tape& t) { return f.reduce(t, t.softmax(t.column(a, 0))); };
  });
  op_case("cross_entropy", [&](OpFixture& f) {
    ParamId a = f.vec("a", d);
    return [a](Tape& t) { return t.cross_entropy(t.softmax(t.column(a, 0)), 1); };
  });
  op_case("dropout", [&](OpFixture& f) {
    ParamId a = f.vec("a", d);
    const std::uint64_t mask_seed = case_seed;
    return [&f, a, mask_seed](Tape& t) {
      std::mt19937_64 rng(mask_seed);
      return f.reduce(t, t.dropout(t.column(a, 0), 0.5, true, rng));
    };
  });
  op_case("lstm_cell", [&](OpFixture& f) {
    auto cell = diff::add_lstm_cell(f.params, "cell", d, d + 1);
    ParamId h = f.vec("h", d);
    ParamId c = f.vec("c", d);
    ParamId x = f.vec("x", d + 1);
    return [&f, cell, h, c, x](Tape& t) {
      auto s = diff::lstm_cell(t, cell, {t.column(h, 0), t.column(c, 0)}, t.column(x, 0));
      return t.add(f.reduce(t, s.h), f.reduce(t, t.scale(s.c, 0.5)));
    };
  });
  op_case("tree_lstm_cell", [&](OpFixture& f) {
    auto cell = diff::add_tree_lstm_cell(f.params, "cell", d, d);
    ParamId hl = f.vec("hl", d);
    ParamId cl = f.vec("cl", d);
    ParamId hr = f.vec("hr", d);
    ParamId cr = f.vec("cr", d);
    ParamId x = f.vec("x", d);
    return [&f, cell, hl, cl, hr, cr, x](Tape& t) {
      auto s = diff::tree_lstm_cell(t, cell, {t.column(hl, 0), t.column(cl, 0)}, {t.column(hr, 0), t.column(cr, 0)},
                                    t.column(x, 0));
      return t.add(f.reduce(t, s.h), f.reduce(t, t.scale(s.c, 0.5)));
    };
  });

  std::mt19937_64 rng(seed);
  for (Variant variant : {Variant::Full, Variant::NoParentFeed, Variant::NoAttention}) {
    ModelConfig config;
    config.hidden = d;
    config.source_vocab = 6;
    config.target_vocab = 7;
    config.eos = 6;
    config.variant = variant;
    Model model(config);
    // A wider init than training uses, so the gates are away from their
    // linear regime and every path carries a visible gradient.
    model.params().init_uniform(-0.5, 0.5, case_seed++);
    const auto source_size = 3 + static_cast<std::size_t>(uniform01(rng) * 5.0);
    const auto target_size = 3 + static_cast<std::size_t>(uniform01(rng) * 5.0);
    const EncodedTree source = random_tree(source_size, config.source_vocab, rng);
    const EncodedTree target = random_tree(target_size, config.target_vocab - 1, rng);
    const std::uint64_t mask_seed = case_seed++;
    auto build = [&](Tape& t) {
      std::mt19937_64 masks(mask_seed);
      return model.teacher_forced_loss(t, source, target, DropoutContext{0.3, &masks}).loss;
    };
    results.push_back(check_gradients("loss/" + std::string(variant_name(variant)), model.params(), build, options));
  }
  return results;
}

}  // namespace t2t
