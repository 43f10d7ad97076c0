#include "t2t/generator.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <span>
#include <unordered_set>

#include "t2t/errors.hpp"

namespace t2t {

void GenConfig::validate() const {
  auto check = [](std::span<const double> w, const char* what) {
    if (std::any_of(w.begin(), w.end(), [](double x) { return !(x >= 0.0); }))
      throw GenerationError(std::string("negative production weight in ") + what);
    if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0)
      throw GenerationError(std::string("all production weights are zero in ") + what);
  };
  check(statement_weights, "Statement");
  check(seq_weights, "Seq");
  check(single_weights, "Single");
  check(expr_weights, "Expr");
  check(cmp_weights, "Cmp");
  // Assign and the atomic Expr forms are the only exits from recursion.
  if (single_weights[0] <= 0.0) throw GenerationError("Single -> Assign must have positive weight");
  if (expr_weights[0] + expr_weights[1] <= 0.0) throw GenerationError("Expr needs an atomic production");
  if (max_depth < 1) throw GenerationError("max_depth must be at least 1");
  if (variables.empty() || literals.empty()) throw GenerationError("empty variable or literal pool");
  if (min_length > max_length) throw GenerationError("min_length exceeds max_length");
}

GenConfig preset_config(const std::string& name) {
  GenConfig c;
  if (name == "syn-s") {
    c.preset = "syn-s";
    c.statement_weights = {0.25, 0.75};
    c.seq_weights = {0.9, 0.1};
    c.single_weights = {0.35, 0.30, 0.35};
    c.expr_weights = {0.375, 0.375, 0.0625, 0.0625, 0.0625, 0.0625};
    c.target_mean_length = 20.0;
    c.min_length = 18;
    c.max_length = 26;
    c.max_depth = 4;
    return c;
  }
  if (name == "syn-l") {
    c.preset = "syn-l";
    c.statement_weights = {0.4, 0.6};
    c.seq_weights = {0.7, 0.3};
    c.single_weights = {0.35, 0.30, 0.35};
    c.expr_weights = {0.375, 0.375, 0.0625, 0.0625, 0.0625, 0.0625};
    c.target_mean_length = 50.0;
    c.min_length = 42;
    c.max_length = 60;
    c.max_depth = 6;
    return c;
  }
  throw GenerationError("unknown preset '" + name + "'");
}

namespace {

class Sampler {
 public:
  Sampler(const GenConfig& config, std::mt19937_64& rng) : cfg_(config), rng_(rng) {}

  Stmt statement(std::size_t level) {
    if (can_recurse(level) && choose(cfg_.statement_weights) == 0) {
      std::vector<Stmt> singles;
      singles.push_back(single(level));
      singles.push_back(single(level));
      while (choose(cfg_.seq_weights) == 1) singles.push_back(single(level));
      return Stmt::seq(std::move(singles));
    }
    return single(level);
  }

 private:
  bool can_recurse(std::size_t level) const { return level < cfg_.max_depth; }

  template <std::size_t N>
  std::size_t choose(const std::array<double, N>& weights, std::size_t allowed = N) {
    double total = 0.0;
    for (std::size_t i = 0; i < allowed; ++i) total += weights[i];
    double r = uniform01(rng_) * total;
    for (std::size_t i = 0; i < allowed; ++i) {
      if (r < weights[i]) return i;
      r -= weights[i];
    }
    // Rounding at the top of the range: last production with positive weight.
    for (std::size_t i = allowed; i-- > 0;)
      if (weights[i] > 0.0) return i;
    throw GenerationError("no applicable production");
  }

  const std::string& pick(const std::vector<std::string>& pool) {
    auto i = static_cast<std::size_t>(uniform01(rng_) * static_cast<double>(pool.size()));
    return pool[std::min(i, pool.size() - 1)];
  }

  Atom var() { return Atom::var(pick(cfg_.variables)); }
  Atom constant() { return Atom::constant(pick(cfg_.literals)); }

  Expr expr(std::size_t level) {
    const std::size_t allowed = can_recurse(level) ? 6 : 2;
    switch (choose(cfg_.expr_weights, allowed)) {
      case 0: return Expr::atom(var());
      case 1: return Expr::atom(constant());
      case 2: return expr(level + 1).plus(var());
      case 3: return expr(level + 1).plus(constant());
      case 4: return expr(level + 1).minus(var());
      default: return expr(level + 1).minus(constant());
    }
  }

  Cmp cmp(std::size_t level) {
    Cmp c;
    c.lhs = expr(level);
    c.op = static_cast<CmpOp>(choose(cfg_.cmp_weights));
    c.rhs = expr(level);
    return c;
  }

  Stmt single(std::size_t level) {
    const std::size_t allowed = can_recurse(level) ? 3 : 1;
    switch (choose(cfg_.single_weights, allowed)) {
      case 0: {
        std::string v = var().text;
        return Stmt::assign(std::move(v), expr(level + 1));
      }
      case 1: {
        Cmp c = cmp(level + 1);
        Stmt a = statement(level + 1);
        Stmt b = statement(level + 1);
        return Stmt::if_then_else(std::move(c), std::move(a), std::move(b));
      }
      default: {
        std::string v = var().text;
        Expr init = expr(level + 1);
        Cmp c = cmp(level + 1);
        Expr step = expr(level + 1);
        Stmt body = statement(level + 1);
        return Stmt::for_loop(std::move(v), std::move(init), std::move(c), std::move(step), std::move(body));
      }
    }
  }

  const GenConfig& cfg_;
  std::mt19937_64& rng_;
};

LengthStats length_stats(const std::vector<const DatasetRecord*>& records, const Tokens DatasetRecord::*field) {
  LengthStats s;
  if (records.empty()) return s;
  s.min = std::numeric_limits<std::size_t>::max();
  double total = 0.0;
  for (const auto* r : records) {
    const std::size_t n = (r->*field).size();
    s.min = std::min(s.min, n);
    s.max = std::max(s.max, n);
    total += static_cast<double>(n);
  }
  s.mean = total / static_cast<double>(records.size());
  return s;
}

}  // namespace

Stmt sample_program(const GenConfig& config, std::mt19937_64& rng) {
  return Sampler(config, rng).statement(1);
}

DatasetRecord make_record(const Stmt& source, OracleMode mode) {
  DatasetRecord r;
  r.source_ast = source;
  r.target_ast = translate(source, mode);
  r.source_p = render_for(r.source_ast);
  r.target_p = render_lambda(r.target_ast);
  r.source_t = serialize_dfs(ast_to_tree(r.source_ast));
  r.target_t = serialize_dfs(ast_to_tree(r.target_ast));
  return r;
}

DatasetSplits build_dataset(const GenConfig& config, std::size_t n_train, std::size_t n_dev, std::size_t n_test) {
  config.validate();
  const std::size_t total = n_train + n_dev + n_test;
  const std::size_t budget = 100 * std::max<std::size_t>(total, 1);

  std::mt19937_64 rng(config.seed);
  std::unordered_set<std::string> seen;
  std::vector<DatasetRecord> unique;
  unique.reserve(total);

  std::size_t attempts = 0;
  while (unique.size() < total) {
    if (attempts++ >= budget) {
      throw ExhaustionError("retry budget of " + std::to_string(budget) + " samples exhausted after " +
                                std::to_string(unique.size()) + " of " + std::to_string(total) +
                                " unique programs",
                            unique.size());
    }
    Stmt program = sample_program(config, rng);
    Tokens p = render_for(program);
    if (p.size() < config.min_length || p.size() > config.max_length) continue;
    if (!seen.insert(join_tokens(p)).second) continue;
    unique.push_back(make_record(program));
  }

  DatasetSplits splits;
  auto take = [&unique](std::size_t from, std::size_t n) {
    return std::vector<DatasetRecord>(std::make_move_iterator(unique.begin() + static_cast<std::ptrdiff_t>(from)),
                                      std::make_move_iterator(unique.begin() + static_cast<std::ptrdiff_t>(from + n)));
  };
  splits.train = take(0, n_train);
  splits.dev = take(n_train, n_dev);
  splits.test = take(n_train + n_dev, n_test);
  return splits;
}

DatasetStats compute_stats(const std::vector<const DatasetRecord*>& records) {
  DatasetStats s;
  s.count = records.size();
  s.source_p = length_stats(records, &DatasetRecord::source_p);
  s.target_p = length_stats(records, &DatasetRecord::target_p);
  s.source_t = length_stats(records, &DatasetRecord::source_t);
  s.target_t = length_stats(records, &DatasetRecord::target_t);
  return s;
}

DatasetStats compute_stats(const std::vector<DatasetRecord>& records) {
  std::vector<const DatasetRecord*> ptrs;
  ptrs.reserve(records.size());
  for (const auto& r : records) ptrs.push_back(&r);
  return compute_stats(ptrs);
}

VocabPair build_vocab(const std::vector<DatasetRecord>& records) {
  std::vector<GeneralTree> src;
  std::vector<GeneralTree> tgt;
  src.reserve(records.size());
  tgt.reserve(records.size());
  for (const auto& r : records) {
    src.push_back(ast_to_tree(r.source_ast));
    tgt.push_back(ast_to_tree(r.target_ast));
  }
  return build_vocab(src, tgt);
}

}  // namespace t2t
