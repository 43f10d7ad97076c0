#pragma once

// pCFG sampler for FOR programs and dataset assembly.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "t2t/oracle.hpp"
#include "t2t/syntax.hpp"
#include "t2t/treecodec.hpp"

namespace t2t {

// Production weights are normalized per nonterminal when sampling.
struct GenConfig {
  std::string preset = "custom";

  // Statement ::= Seq | Single
  std::array<double, 2> statement_weights{0.5, 0.5};
  // Seq ::= Single ; Single | Seq ; Single  (the second extends the sequence)
  std::array<double, 2> seq_weights{0.6, 0.4};
  // Single ::= Assign | If | For
  std::array<double, 3> single_weights{0.4, 0.3, 0.3};
  // Expr ::= Var | Const | Expr + Var | Expr + Const | Expr - Var | Expr - Const
  std::array<double, 6> expr_weights{0.35, 0.35, 0.075, 0.075, 0.075, 0.075};
  // Cmp ::= Expr == Expr | Expr > Expr | Expr < Expr
  std::array<double, 3> cmp_weights{1.0, 1.0, 1.0};

  // Mean source length (format P tokens) the preset is calibrated for.
  double target_mean_length = 20.0;
  // Samples whose source P length falls outside [min_length, max_length] are rejected.
  std::size_t min_length = 5;
  std::size_t max_length = 60;
  // Nesting levels that may still pick a recursive production; at the cap
  // Statement -> Assign and Expr -> Var | Const are forced.
  std::size_t max_depth = 6;

  std::vector<std::string> variables{"i", "x", "y", "z", "a", "b"};
  std::vector<std::string> literals{"0", "1", "2", "3", "4", "5", "6", "7", "8", "9"};

  std::uint64_t seed = 0;

  // Throws GenerationError for negative weights, empty pools or depth 0.
  void validate() const;
};

// Named presets calibrated so that source length averages ~20 (syn-s) or
// ~50 (syn-l) tokens. Throws GenerationError for an unknown name.
GenConfig preset_config(const std::string& name);

// Well-formed FOR program drawn from the pCFG, without length rejection.
Stmt sample_program(const GenConfig& config, std::mt19937_64& rng);

struct DatasetRecord {
  Stmt source_ast;
  Term target_ast;
  Tokens source_p;
  Tokens source_t;
  Tokens target_p;
  Tokens target_t;
};

DatasetRecord make_record(const Stmt& source, OracleMode mode = OracleMode::InitArgument);

struct DatasetSplits {
  std::vector<DatasetRecord> train;
  std::vector<DatasetRecord> dev;
  std::vector<DatasetRecord> test;
};

// Deterministic in (config, sizes). Records are unique by source P string
// across all splits. Throws ExhaustionError when the retry budget (100x the
// requested total) runs out.
DatasetSplits build_dataset(const GenConfig& config, std::size_t n_train, std::size_t n_dev,
                            std::size_t n_test);

struct LengthStats {
  std::size_t min = 0;
  std::size_t max = 0;
  double mean = 0.0;
};

// Length statistics of the four serializations over a record collection.
struct DatasetStats {
  std::size_t count = 0;
  LengthStats source_p;
  LengthStats target_p;
  LengthStats source_t;
  LengthStats target_t;
};

DatasetStats compute_stats(const std::vector<const DatasetRecord*>& records);
DatasetStats compute_stats(const std::vector<DatasetRecord>& records);

VocabPair build_vocab(const std::vector<DatasetRecord>& records);

// Uniform double in [0, 1) from the top 53 bits, independent of the
// standard library's distribution implementations.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace t2t
