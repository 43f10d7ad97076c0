#pragma once

// Ground-truth FOR -> LAMBDA translator.

#include "t2t/syntax.hpp"

namespace t2t {

enum class OracleMode {
  // The loop function is first applied to the loop's initial value.
  InitArgument,
  // The loop function is first applied to the step expression, as the
  // reference translator code literally does.
  StepArgument,
};

Term translate(const Stmt& ast, OracleMode mode = OracleMode::InitArgument);

}  // namespace t2t
