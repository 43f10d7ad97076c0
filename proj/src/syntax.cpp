#include "t2t/syntax.hpp"

#include <cctype>
#include <sstream>
#include <utility>

#include "t2t/errors.hpp"

namespace t2t {

std::string_view spelling(ArithOp op) { return op == ArithOp::Add ? kw::kPlus : kw::kMinus; }

std::string_view spelling(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return kw::kEq;
    case CmpOp::Gt: return kw::kGt;
    case CmpOp::Lt: return kw::kLt;
  }
  return kw::kEq;
}

Expr Expr::plus(Atom a) const {
  Expr e = *this;
  e.tail.push_back({ArithOp::Add, std::move(a)});
  return e;
}

Expr Expr::minus(Atom a) const {
  Expr e = *this;
  e.tail.push_back({ArithOp::Sub, std::move(a)});
  return e;
}

Stmt Stmt::assign(std::string var, Expr value) {
  Stmt s;
  s.kind = Kind::Assign;
  s.var = std::move(var);
  s.expr = std::move(value);
  return s;
}

Stmt Stmt::if_then_else(Cmp cond, Stmt then_branch, Stmt else_branch) {
  Stmt s;
  s.kind = Kind::If;
  s.cond = std::move(cond);
  s.body.push_back(std::move(then_branch));
  s.body.push_back(std::move(else_branch));
  return s;
}

Stmt Stmt::for_loop(std::string var, Expr init, Cmp cond, Expr step, Stmt body) {
  Stmt s;
  s.kind = Kind::For;
  s.var = std::move(var);
  s.expr = std::move(init);
  s.cond = std::move(cond);
  s.step = std::move(step);
  s.body.push_back(std::move(body));
  return s;
}

Stmt Stmt::seq(std::vector<Stmt> singles) {
  Stmt s;
  s.kind = Kind::Seq;
  // Flatten so that a Seq only ever holds Singles.
  for (auto& single : singles) {
    if (single.kind == Kind::Seq) {
      for (auto& inner : single.body) s.body.push_back(std::move(inner));
    } else {
      s.body.push_back(std::move(single));
    }
  }
  return s;
}

Term Term::unit() { return Term{}; }

Term Term::of_expr(Expr e) {
  Term t;
  t.kind = Kind::Expr;
  t.expr = std::move(e);
  return t;
}

Term Term::app(std::string fn, std::vector<Expr> args) {
  Term t;
  t.kind = Kind::App;
  t.name = std::move(fn);
  t.args = std::move(args);
  return t;
}

Term Term::let(std::string var, Term bound, Term body) {
  Term t;
  t.kind = Kind::Let;
  t.name = std::move(var);
  t.sub.push_back(std::move(bound));
  t.sub.push_back(std::move(body));
  return t;
}

Term Term::letrec(std::string fn, std::string param, Term fn_body, Term body) {
  Term t;
  t.kind = Kind::LetRec;
  t.name = std::move(fn);
  t.param = std::move(param);
  t.sub.push_back(std::move(fn_body));
  t.sub.push_back(std::move(body));
  return t;
}

Term Term::if_then_else(Cmp cond, Term then_branch, Term else_branch) {
  Term t;
  t.kind = Kind::If;
  t.cond = std::move(cond);
  t.sub.push_back(std::move(then_branch));
  t.sub.push_back(std::move(else_branch));
  return t;
}

namespace {

void emit(Tokens& out, std::string_view tok) { out.emplace_back(tok); }

void render_expr(const Expr& e, Tokens& out) {
  out.push_back(e.head.text);
  for (const auto& step : e.tail) {
    emit(out, spelling(step.op));
    out.push_back(step.operand.text);
  }
}

void render_cmp(const Cmp& c, Tokens& out) {
  render_expr(c.lhs, out);
  emit(out, spelling(c.op));
  render_expr(c.rhs, out);
}

void render_stmt(const Stmt& s, Tokens& out) {
  switch (s.kind) {
    case Stmt::Kind::Assign:
      out.push_back(s.var);
      emit(out, kw::kAssign);
      render_expr(s.expr, out);
      break;
    case Stmt::Kind::If:
      emit(out, kw::kIf);
      render_cmp(s.cond, out);
      emit(out, kw::kThen);
      render_stmt(s.body.at(0), out);
      emit(out, kw::kElse);
      render_stmt(s.body.at(1), out);
      emit(out, kw::kEndIf);
      break;
    case Stmt::Kind::For:
      emit(out, kw::kFor);
      out.push_back(s.var);
      emit(out, kw::kAssign);
      render_expr(s.expr, out);
      emit(out, kw::kSemi);
      render_cmp(s.cond, out);
      emit(out, kw::kSemi);
      render_expr(s.step, out);
      emit(out, kw::kDo);
      render_stmt(s.body.at(0), out);
      emit(out, kw::kEndFor);
      break;
    case Stmt::Kind::Seq:
      for (std::size_t i = 0; i < s.body.size(); ++i) {
        if (i > 0) emit(out, kw::kSemi);
        render_stmt(s.body[i], out);
      }
      break;
  }
}

void render_term(const Term& t, Tokens& out) {
  switch (t.kind) {
    case Term::Kind::Unit:
      emit(out, kw::kUnit);
      break;
    case Term::Kind::Expr:
      render_expr(t.expr, out);
      break;
    case Term::Kind::App:
      out.push_back(t.name);
      for (const auto& a : t.args) render_expr(a, out);
      break;
    case Term::Kind::Let:
      emit(out, kw::kLet);
      out.push_back(t.name);
      emit(out, kw::kAssign);
      render_term(t.sub.at(0), out);
      emit(out, kw::kIn);
      render_term(t.sub.at(1), out);
      break;
    case Term::Kind::LetRec:
      emit(out, kw::kLetRec);
      out.push_back(t.name);
      out.push_back(t.param);
      emit(out, kw::kAssign);
      render_term(t.sub.at(0), out);
      emit(out, kw::kIn);
      render_term(t.sub.at(1), out);
      break;
    case Term::Kind::If:
      emit(out, kw::kIf);
      render_cmp(t.cond, out);
      emit(out, kw::kThen);
      render_term(t.sub.at(0), out);
      emit(out, kw::kElse);
      render_term(t.sub.at(1), out);
      break;
  }
}

bool is_keyword(std::string_view tok) {
  for (auto k : {kw::kFor, kw::kDo, kw::kEndFor, kw::kIf, kw::kThen, kw::kElse, kw::kEndIf,
                 kw::kLet, kw::kLetRec, kw::kIn})
    if (tok == k) return true;
  return false;
}

bool is_identifier(std::string_view tok) {
  if (tok.empty() || is_keyword(tok)) return false;
  if (!(std::isalpha(static_cast<unsigned char>(tok[0])) || tok[0] == '_')) return false;
  for (char ch : tok)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_')) return false;
  return true;
}

bool is_literal(std::string_view tok) {
  if (tok.empty()) return false;
  for (char ch : tok)
    if (!std::isdigit(static_cast<unsigned char>(ch))) return false;
  return true;
}

// Recursive-descent parser over format-P tokens of the FOR language.
class ForParser {
 public:
  explicit ForParser(const Tokens& tokens) : toks_(tokens) {}

  Stmt parse_program() {
    Stmt s = parse_statement();
    if (!at_end()) fail("unexpected trailing token '" + toks_[pos_] + "'");
    return s;
  }

 private:
  bool at_end() const { return pos_ >= toks_.size(); }
  bool peek_is(std::string_view tok) const { return !at_end() && toks_[pos_] == tok; }

  [[noreturn]] void fail(const std::string& what) const { throw SyntaxError(pos_, what); }

  void expect(std::string_view tok) {
    if (!peek_is(tok)) {
      fail("expected '" + std::string(tok) + "'" +
           (at_end() ? std::string(" but input ended") : ", found '" + toks_[pos_] + "'"));
    }
    ++pos_;
  }

  std::string expect_identifier() {
    if (at_end() || !is_identifier(toks_[pos_])) fail("expected a variable");
    return toks_[pos_++];
  }

  Atom parse_atom() {
    if (!at_end()) {
      const auto& tok = toks_[pos_];
      if (is_identifier(tok)) {
        ++pos_;
        return Atom::var(tok);
      }
      if (is_literal(tok)) {
        ++pos_;
        return Atom::constant(tok);
      }
    }
    fail("expected a variable or constant");
  }

  Expr parse_expr() {
    Expr e = Expr::atom(parse_atom());
    while (peek_is(kw::kPlus) || peek_is(kw::kMinus)) {
      ArithOp op = peek_is(kw::kPlus) ? ArithOp::Add : ArithOp::Sub;
      ++pos_;
      e.tail.push_back({op, parse_atom()});
    }
    return e;
  }

  Cmp parse_cmp() {
    Cmp c;
    c.lhs = parse_expr();
    if (peek_is(kw::kEq)) {
      c.op = CmpOp::Eq;
    } else if (peek_is(kw::kGt)) {
      c.op = CmpOp::Gt;
    } else if (peek_is(kw::kLt)) {
      c.op = CmpOp::Lt;
    } else {
      fail("expected a comparison operator");
    }
    ++pos_;
    c.rhs = parse_expr();
    return c;
  }

  Stmt parse_single() {
    if (peek_is(kw::kFor)) {
      ++pos_;
      std::string var = expect_identifier();
      expect(kw::kAssign);
      Expr init = parse_expr();
      expect(kw::kSemi);
      Cmp cond = parse_cmp();
      expect(kw::kSemi);
      Expr step = parse_expr();
      expect(kw::kDo);
      Stmt body = parse_statement();
      expect(kw::kEndFor);
      return Stmt::for_loop(std::move(var), std::move(init), std::move(cond), std::move(step),
                            std::move(body));
    }
    if (peek_is(kw::kIf)) {
      ++pos_;
      Cmp cond = parse_cmp();
      expect(kw::kThen);
      Stmt then_branch = parse_statement();
      expect(kw::kElse);
      Stmt else_branch = parse_statement();
      expect(kw::kEndIf);
      return Stmt::if_then_else(std::move(cond), std::move(then_branch), std::move(else_branch));
    }
    std::string var = expect_identifier();
    expect(kw::kAssign);
    return Stmt::assign(std::move(var), parse_expr());
  }

  Stmt parse_statement() {
    Stmt first = parse_single();
    if (!peek_is(kw::kSemi)) return first;
    std::vector<Stmt> singles;
    singles.push_back(std::move(first));
    while (peek_is(kw::kSemi)) {
      ++pos_;
      singles.push_back(parse_single());
    }
    return Stmt::seq(std::move(singles));
  }

  const Tokens& toks_;
  std::size_t pos_ = 0;
};

}  // namespace

Tokens render_for(const Stmt& ast) {
  Tokens out;
  render_stmt(ast, out);
  return out;
}

Tokens render_lambda(const Term& ast) {
  Tokens out;
  render_term(ast, out);
  return out;
}

Stmt parse_for(const Tokens& tokens) { return ForParser(tokens).parse_program(); }

Tokens split_tokens(std::string_view line) {
  Tokens out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace t2t
