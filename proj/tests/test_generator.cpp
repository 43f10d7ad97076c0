#include <doctest.h>

#include <set>

#include "t2t/errors.hpp"
#include "t2t/generator.hpp"
#include "t2t/oracle.hpp"
#include "t2t/treecodec.hpp"

using namespace t2t;

TEST_CASE("depth cap 1 forces an atomic assignment") {
  GenConfig config = preset_config("syn-s");
  config.max_depth = 1;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const Stmt s = sample_program(config, rng);
    REQUIRE(s.kind == Stmt::Kind::Assign);
    CHECK(s.expr.tail.empty());
  }
}

TEST_CASE("sampling is a function of the seed") {
  GenConfig config = preset_config("syn-l");
  std::mt19937_64 a(99), b(99);
  for (int i = 0; i < 50; ++i) CHECK(sample_program(config, a) == sample_program(config, b));
}

TEST_CASE("syn-s mean source length") {
  GenConfig config = preset_config("syn-s");
  config.seed = 2;
  const DatasetStats s = compute_stats(build_dataset(config, 10000, 0, 0).train);
  CHECK(s.source_p.mean >= 16.0);
  CHECK(s.source_p.mean <= 24.0);
  CHECK(s.target_p.mean >= 24.0);
  CHECK(s.target_p.mean <= 36.0);
  // Observed target P range inside [22/1.5, 44*1.5].
  CHECK(static_cast<double>(s.target_p.min) >= 22.0 / 1.5);
  CHECK(static_cast<double>(s.target_p.max) <= 44.0 * 1.5);
}

TEST_CASE("syn-l mean source length") {
  GenConfig config = preset_config("syn-l");
  config.seed = 2;
  const DatasetStats s = compute_stats(build_dataset(config, 2000, 0, 0).train);
  CHECK(s.source_p.mean >= 40.0);
  CHECK(s.source_p.mean <= 60.0);
}

TEST_CASE("small dataset is unique and disjoint") {
  GenConfig config = preset_config("syn-s");
  config.seed = 7;
  const DatasetSplits d = build_dataset(config, 10, 2, 2);
  CHECK(d.train.size() == 10);
  CHECK(d.dev.size() == 2);
  CHECK(d.test.size() == 2);
  std::set<std::string> keys;
  for (const auto* part : {&d.train, &d.dev, &d.test})
    for (const auto& r : *part) keys.insert(join_tokens(r.source_p));
  CHECK(keys.size() == 14);

  const DatasetSplits again = build_dataset(config, 10, 2, 2);
  for (std::size_t i = 0; i < d.train.size(); ++i) CHECK(again.train[i].source_p == d.train[i].source_p);
}

TEST_CASE("empty splits are allowed") {
  GenConfig config = preset_config("syn-s");
  const DatasetSplits d = build_dataset(config, 0, 3, 0);
  CHECK(d.train.empty());
  CHECK(d.dev.size() == 3);
}

TEST_CASE("records are consistent with the oracle and codec") {
  GenConfig config = preset_config("syn-s");
  config.seed = 12;
  for (const auto& r : build_dataset(config, 200, 0, 0).train) {
    CHECK(translate(r.source_ast) == r.target_ast);
    CHECK(render_for(r.source_ast) == r.source_p);
    CHECK(render_lambda(r.target_ast) == r.target_p);
    CHECK(deserialize_dfs(r.source_t) == ast_to_tree(r.source_ast));
    CHECK(deserialize_dfs(r.target_t) == ast_to_tree(r.target_ast));
  }
}

TEST_CASE("an exhausted program space reports what it achieved") {
  GenConfig config = preset_config("syn-s");
  config.max_depth = 1;
  config.min_length = 0;
  config.variables = {"x"};
  config.literals = {"1"};
  // Only "x = x" and "x = 1" exist.
  try {
    build_dataset(config, 5, 0, 0);
    FAIL("expected exhaustion");
  } catch (const ExhaustionError& e) {
    CHECK(e.achieved() == 2);
  }
}

TEST_CASE("invalid configurations are rejected") {
  GenConfig config = preset_config("syn-s");
  config.single_weights = {0.0, 0.5, 0.5};
  CHECK_THROWS_AS(config.validate(), GenerationError);
  config = preset_config("syn-s");
  config.expr_weights[0] = -1.0;
  CHECK_THROWS_AS(config.validate(), GenerationError);
  CHECK_THROWS_AS(preset_config("syn-xl"), GenerationError);
}

TEST_CASE("uniform draws stay in the unit interval") {
  std::mt19937_64 rng(0);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform01(rng);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(lo < 0.001);
  CHECK(hi > 0.999);
}
