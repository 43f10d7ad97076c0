#pragma once

// Central finite-difference checks of the tape's gradients, for single
// operations and for the full teacher-forced loss.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "t2t/diff.hpp"

namespace t2t {

struct GradcheckResult {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t entries = 0;
};

struct GradcheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor so that two near-zero gradients are not compared
  // relative to each other.
  double floor = 1e-5;
};

double relative_error(double analytic, double numeric, double floor = 1e-5);

// `build` records a scalar loss on the tape it is given. Every entry of every
// parameter is perturbed by +-epsilon and compared to the backward pass.
GradcheckResult check_gradients(const std::string& name, diff::ParamSet& params,
                                const std::function<diff::Var(diff::Tape&)>& build,
                                const GradcheckOptions& options = {});

// Every differentiable tape operation and cell, then the teacher-forced loss
// of all three model variants on random 3-7 node trees.
std::vector<GradcheckResult> run_gradcheck_suite(std::size_t dim, std::uint64_t seed,
                                                 const GradcheckOptions& options = {});

}  // namespace t2t
