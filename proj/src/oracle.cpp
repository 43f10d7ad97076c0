#include "t2t/oracle.hpp"

#include <string>
#include <utility>

namespace t2t {

namespace {

// Sequencing: a single "let v = e in ()" absorbs the continuation in place of
// its unit body; anything else is bound to the blank variable.
Term sequence(Term first, Term rest) {
  if (first.kind == Term::Kind::Let && first.sub.at(1).kind == Term::Kind::Unit) {
    first.sub[1] = std::move(rest);
    return first;
  }
  return Term::let(std::string(kw::kBlank), std::move(first), std::move(rest));
}

Term translate_stmt(const Stmt& s, OracleMode mode) {
  switch (s.kind) {
    case Stmt::Kind::Assign:
      return Term::let(s.var, Term::of_expr(s.expr), Term::unit());
    case Stmt::Kind::If:
      return Term::if_then_else(s.cond, translate_stmt(s.body.at(0), mode),
                                translate_stmt(s.body.at(1), mode));
    case Stmt::Kind::For: {
      const std::string fn(kw::kLoopFn);
      Term loop_body = Term::let(std::string(kw::kBlank), translate_stmt(s.body.at(0), mode),
                                 Term::app(fn, {s.step}));
      Term fn_body = Term::if_then_else(s.cond, std::move(loop_body), Term::unit());
      const Expr& first_arg = mode == OracleMode::InitArgument ? s.expr : s.step;
      return Term::letrec(fn, s.var, std::move(fn_body), Term::app(fn, {first_arg}));
    }
    case Stmt::Kind::Seq: {
      // Seq is left-recursive in the grammar, so fold from the left.
      Term acc = translate_stmt(s.body.at(0), mode);
      for (std::size_t i = 1; i < s.body.size(); ++i)
        acc = sequence(std::move(acc), translate_stmt(s.body[i], mode));
      return acc;
    }
  }
  return Term::unit();
}

}  // namespace

Term translate(const Stmt& ast, OracleMode mode) { return translate_stmt(ast, mode); }

}  // namespace t2t
