#pragma once

// Abstract syntax of the FOR (imperative source) and LAMBDA (functional
// target) languages, their flat token rendering, and a parser for FOR.

#include <string>
#include <string_view>
#include <vector>

namespace t2t {

using Token = std::string;
using Tokens = std::vector<Token>;

// Keyword and operator spellings shared by renderers, parsers and tree labels.
namespace kw {
inline constexpr std::string_view kFor = "for";
inline constexpr std::string_view kDo = "do";
inline constexpr std::string_view kEndFor = "endfor";
inline constexpr std::string_view kIf = "if";
inline constexpr std::string_view kThen = "then";
inline constexpr std::string_view kElse = "else";
inline constexpr std::string_view kEndIf = "endif";
inline constexpr std::string_view kLet = "let";
inline constexpr std::string_view kLetRec = "letrec";
inline constexpr std::string_view kIn = "in";
inline constexpr std::string_view kUnit = "()";
inline constexpr std::string_view kSemi = ";";
inline constexpr std::string_view kAssign = "=";
inline constexpr std::string_view kPlus = "+";
inline constexpr std::string_view kMinus = "-";
inline constexpr std::string_view kEq = "==";
inline constexpr std::string_view kGt = ">";
inline constexpr std::string_view kLt = "<";
// Placeholder binder introduced by the translator ("let _ = ... in ...").
inline constexpr std::string_view kBlank = "_";
// Name of the recursive function introduced for every loop.
inline constexpr std::string_view kLoopFn = "f";
}  // namespace kw

// A variable or an integer literal.
struct Atom {
  enum class Kind { Var, Const };
  Kind kind = Kind::Var;
  std::string text;

  static Atom var(std::string name) { return {Kind::Var, std::move(name)}; }
  static Atom constant(std::string literal) { return {Kind::Const, std::move(literal)}; }
  static Atom constant(int value) { return {Kind::Const, std::to_string(value)}; }

  bool operator==(const Atom&) const = default;
};

enum class ArithOp { Add, Sub };
enum class CmpOp { Eq, Gt, Lt };

std::string_view spelling(ArithOp op);
std::string_view spelling(CmpOp op);

// Expr ::= Atom | Expr (+|-) Atom, stored as a left-associated chain.
struct Expr {
  struct Step {
    ArithOp op = ArithOp::Add;
    Atom operand;
    bool operator==(const Step&) const = default;
  };

  Atom head;
  std::vector<Step> tail;

  static Expr atom(Atom a) { return {std::move(a), {}}; }
  static Expr var(std::string name) { return atom(Atom::var(std::move(name))); }
  static Expr constant(int value) { return atom(Atom::constant(value)); }
  Expr plus(Atom a) const;
  Expr minus(Atom a) const;

  bool operator==(const Expr&) const = default;
};

struct Cmp {
  Expr lhs;
  CmpOp op = CmpOp::Eq;
  Expr rhs;

  bool operator==(const Cmp&) const = default;
};

// FOR statement. Assign/If/For are the Single productions; Seq holds two or
// more Singles (never a nested Seq).
struct Stmt {
  enum class Kind { Assign, If, For, Seq };

  Kind kind = Kind::Assign;
  std::string var;         // Assign target, For loop variable
  Expr expr;               // Assign value, For init
  Cmp cond;                // If / For condition
  Expr step;               // For step
  std::vector<Stmt> body;  // If: {then, else}; For: {body}; Seq: singles

  static Stmt assign(std::string var, Expr value);
  static Stmt if_then_else(Cmp cond, Stmt then_branch, Stmt else_branch);
  static Stmt for_loop(std::string var, Expr init, Cmp cond, Expr step, Stmt body);
  static Stmt seq(std::vector<Stmt> singles);

  bool operator==(const Stmt&) const = default;
};

// LAMBDA term.
struct Term {
  enum class Kind { Unit, Expr, App, Let, LetRec, If };

  Kind kind = Kind::Unit;
  std::string name;        // Let binder ("_" for blank), LetRec / App function
  std::string param;       // LetRec parameter
  Expr expr;               // Expr term
  Cmp cond;                // If
  std::vector<Expr> args;  // App arguments, at least one
  std::vector<Term> sub;   // Let {bound, body}; LetRec {fn_body, body}; If {then, else}

  static Term unit();
  static Term of_expr(Expr e);
  static Term app(std::string fn, std::vector<Expr> args);
  static Term let(std::string var, Term bound, Term body);
  static Term letrec(std::string fn, std::string param, Term fn_body, Term body);
  static Term if_then_else(Cmp cond, Term then_branch, Term else_branch);

  bool operator==(const Term&) const = default;
};

// Format P: the flat token sequence of the program text.
Tokens render_for(const Stmt& ast);
Tokens render_lambda(const Term& ast);

// Throws SyntaxError carrying the index of the offending token.
Stmt parse_for(const Tokens& tokens);

// Whitespace tokenization / joining for format P lines.
Tokens split_tokens(std::string_view line);
std::string join_tokens(const Tokens& tokens);

}  // namespace t2t
