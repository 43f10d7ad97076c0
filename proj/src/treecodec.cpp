#include "t2t/treecodec.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>

#include "t2t/errors.hpp"

namespace t2t {

namespace labels {
constexpr std::string_view kAssign = "Assign";
constexpr std::string_view kIf = "If";
constexpr std::string_view kFor = "For";
constexpr std::string_view kSeq = "Seq";
constexpr std::string_view kLet = "Let";
constexpr std::string_view kLetRec = "LetRec";
constexpr std::string_view kIfTerm = "IfTerm";
constexpr std::string_view kApp = "App";
}  // namespace labels

std::size_t GeneralTree::size() const {
  std::size_t n = 1;
  for (const auto& c : children) n += c.size();
  return n;
}

std::size_t BinaryTree::depth() const {
  if (nodes.empty()) return 0;
  std::function<std::size_t(int)> walk = [&](int i) -> std::size_t {
    std::size_t d = 0;
    if (nodes[i].left >= 0) d = std::max(d, 1 + walk(nodes[i].left));
    if (nodes[i].right >= 0) d = std::max(d, 1 + walk(nodes[i].right));
    return d;
  };
  return walk(0);
}

bool operator==(const BinaryTree& a, const BinaryTree& b) {
  if (a.size() != b.size()) return false;
  if (a.empty()) return true;
  std::function<bool(int, int)> same = [&](int i, int j) {
    if (i < 0 || j < 0) return i < 0 && j < 0;
    const auto& x = a.nodes[i];
    const auto& y = b.nodes[j];
    return x.label == y.label && same(x.left, y.left) && same(x.right, y.right);
  };
  return same(0, 0);
}

namespace {

GeneralTree leaf(std::string label) { return {std::move(label), {}}; }
GeneralTree leaf(std::string_view label) { return {std::string(label), {}}; }

GeneralTree node(std::string_view label, std::vector<GeneralTree> children) {
  return {std::string(label), std::move(children)};
}

// Operators label their node; the operands are its children.
GeneralTree expr_tree(const Expr& e) {
  GeneralTree t = leaf(e.head.text);
  for (const auto& step : e.tail) t = node(spelling(step.op), {std::move(t), leaf(step.operand.text)});
  return t;
}

GeneralTree cmp_tree(const Cmp& c) {
  return node(spelling(c.op), {expr_tree(c.lhs), expr_tree(c.rhs)});
}

// Statements keep their keyword and punctuation terminals as leaves, in the
// order they appear in the program text.
GeneralTree stmt_tree(const Stmt& s) {
  switch (s.kind) {
    case Stmt::Kind::Assign:
      return node(labels::kAssign, {leaf(s.var), leaf(kw::kAssign), expr_tree(s.expr)});
    case Stmt::Kind::If:
      return node(labels::kIf, {leaf(kw::kIf), cmp_tree(s.cond), leaf(kw::kThen), stmt_tree(s.body.at(0)),
                                leaf(kw::kElse), stmt_tree(s.body.at(1)), leaf(kw::kEndIf)});
    case Stmt::Kind::For:
      return node(labels::kFor, {leaf(kw::kFor), leaf(s.var), leaf(kw::kAssign), expr_tree(s.expr),
                                 leaf(kw::kSemi), cmp_tree(s.cond), leaf(kw::kSemi), expr_tree(s.step),
                                 leaf(kw::kDo), stmt_tree(s.body.at(0)), leaf(kw::kEndFor)});
    case Stmt::Kind::Seq: {
      std::vector<GeneralTree> children;
      for (std::size_t i = 0; i < s.body.size(); ++i) {
        if (i > 0) children.push_back(leaf(kw::kSemi));
        children.push_back(stmt_tree(s.body[i]));
      }
      return node(labels::kSeq, std::move(children));
    }
  }
  return {};
}

GeneralTree term_tree(const Term& t) {
  switch (t.kind) {
    case Term::Kind::Unit:
      return leaf(kw::kUnit);
    case Term::Kind::Expr:
      return expr_tree(t.expr);
    case Term::Kind::App: {
      std::vector<GeneralTree> children{leaf(t.name)};
      for (const auto& a : t.args) children.push_back(expr_tree(a));
      return node(labels::kApp, std::move(children));
    }
    case Term::Kind::Let:
      return node(labels::kLet, {leaf(kw::kLet), leaf(t.name), leaf(kw::kAssign), term_tree(t.sub.at(0)),
                                 leaf(kw::kIn), term_tree(t.sub.at(1))});
    case Term::Kind::LetRec:
      return node(labels::kLetRec, {leaf(kw::kLetRec), leaf(t.name), leaf(t.param), leaf(kw::kAssign),
                                    term_tree(t.sub.at(0)), leaf(kw::kIn), term_tree(t.sub.at(1))});
    case Term::Kind::If:
      return node(labels::kIfTerm, {leaf(kw::kIf), cmp_tree(t.cond), leaf(kw::kThen), term_tree(t.sub.at(0)),
                                    leaf(kw::kElse), term_tree(t.sub.at(1))});
  }
  return {};
}

[[noreturn]] void bad_shape(const GeneralTree& t, const std::string& what) {
  throw ShapeError("malformed parse tree at '" + t.label + "': " + what);
}

void expect_arity(const GeneralTree& t, std::size_t n) {
  if (t.children.size() != n)
    bad_shape(t, "expected " + std::to_string(n) + " children, got " +
                     std::to_string(t.children.size()));
}

void expect_terminal(const GeneralTree& parent, std::size_t i, std::string_view tok) {
  const auto& c = parent.children.at(i);
  if (c.label != tok || !c.children.empty())
    bad_shape(parent, "expected terminal '" + std::string(tok) + "' as child " + std::to_string(i));
}

bool is_name(const Token& tok) {
  return !tok.empty() && (std::isalpha(static_cast<unsigned char>(tok[0])) || tok[0] == '_') &&
         std::all_of(tok.begin(), tok.end(),
                     [](char ch) { return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_'; });
}

bool is_number(const Token& tok) {
  return !tok.empty() &&
         std::all_of(tok.begin(), tok.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); });
}

bool is_reserved(const Token& tok) {
  for (auto l : {labels::kAssign, labels::kIf, labels::kFor, labels::kSeq, labels::kLet, labels::kLetRec,
                 labels::kIfTerm, labels::kApp, kw::kFor, kw::kDo, kw::kEndFor, kw::kIf, kw::kThen,
                 kw::kElse, kw::kEndIf, kw::kLet, kw::kLetRec, kw::kIn})
    if (tok == l) return true;
  return false;
}

std::string name_of(const GeneralTree& t) {
  if (!t.children.empty() || !is_name(t.label) || is_reserved(t.label))
    bad_shape(t, "expected a variable leaf");
  return t.label;
}

Atom atom_of(const GeneralTree& t) {
  if (!t.children.empty()) bad_shape(t, "expected a variable or constant leaf");
  if (is_number(t.label)) return Atom::constant(t.label);
  return Atom::var(name_of(t));
}

bool is_arith(const Token& tok) { return tok == kw::kPlus || tok == kw::kMinus; }

Expr expr_of(const GeneralTree& t) {
  if (is_arith(t.label)) {
    expect_arity(t, 2);
    Expr lhs = expr_of(t.children[0]);
    Atom rhs = atom_of(t.children[1]);
    return t.label == kw::kPlus ? lhs.plus(std::move(rhs)) : lhs.minus(std::move(rhs));
  }
  return Expr::atom(atom_of(t));
}

Cmp cmp_of(const GeneralTree& t) {
  Cmp c;
  if (t.label == kw::kEq) {
    c.op = CmpOp::Eq;
  } else if (t.label == kw::kGt) {
    c.op = CmpOp::Gt;
  } else if (t.label == kw::kLt) {
    c.op = CmpOp::Lt;
  } else {
    bad_shape(t, "expected a comparison");
  }
  expect_arity(t, 2);
  c.lhs = expr_of(t.children[0]);
  c.rhs = expr_of(t.children[1]);
  return c;
}

Stmt single_of(const GeneralTree& t);

Stmt stmt_of(const GeneralTree& t) {
  if (t.label == labels::kSeq) {
    const std::size_t n = t.children.size();
    if (n < 3 || n % 2 == 0) bad_shape(t, "a sequence needs at least two ';'-separated statements");
    std::vector<Stmt> singles;
    for (std::size_t i = 0; i < n; ++i) {
      if (i % 2 == 1) {
        expect_terminal(t, i, kw::kSemi);
      } else {
        singles.push_back(single_of(t.children[i]));
      }
    }
    return Stmt::seq(std::move(singles));
  }
  return single_of(t);
}

Stmt single_of(const GeneralTree& t) {
  if (t.label == labels::kAssign) {
    expect_arity(t, 3);
    expect_terminal(t, 1, kw::kAssign);
    return Stmt::assign(name_of(t.children[0]), expr_of(t.children[2]));
  }
  if (t.label == labels::kIf) {
    expect_arity(t, 7);
    expect_terminal(t, 0, kw::kIf);
    expect_terminal(t, 2, kw::kThen);
    expect_terminal(t, 4, kw::kElse);
    expect_terminal(t, 6, kw::kEndIf);
    return Stmt::if_then_else(cmp_of(t.children[1]), stmt_of(t.children[3]), stmt_of(t.children[5]));
  }
  if (t.label == labels::kFor) {
    expect_arity(t, 11);
    expect_terminal(t, 0, kw::kFor);
    expect_terminal(t, 2, kw::kAssign);
    expect_terminal(t, 4, kw::kSemi);
    expect_terminal(t, 6, kw::kSemi);
    expect_terminal(t, 8, kw::kDo);
    expect_terminal(t, 10, kw::kEndFor);
    return Stmt::for_loop(name_of(t.children[1]), expr_of(t.children[3]), cmp_of(t.children[5]),
                          expr_of(t.children[7]), stmt_of(t.children[9]));
  }
  bad_shape(t, "expected a statement");
}

Term term_of(const GeneralTree& t) {
  if (t.label == kw::kUnit) {
    expect_arity(t, 0);
    return Term::unit();
  }
  if (t.label == labels::kApp) {
    if (t.children.size() < 2) bad_shape(t, "an application needs a function and an argument");
    std::vector<Expr> args;
    for (std::size_t i = 1; i < t.children.size(); ++i) args.push_back(expr_of(t.children[i]));
    return Term::app(name_of(t.children[0]), std::move(args));
  }
  if (t.label == labels::kLet) {
    expect_arity(t, 6);
    expect_terminal(t, 0, kw::kLet);
    expect_terminal(t, 2, kw::kAssign);
    expect_terminal(t, 4, kw::kIn);
    return Term::let(name_of(t.children[1]), term_of(t.children[3]), term_of(t.children[5]));
  }
  if (t.label == labels::kLetRec) {
    expect_arity(t, 7);
    expect_terminal(t, 0, kw::kLetRec);
    expect_terminal(t, 3, kw::kAssign);
    expect_terminal(t, 5, kw::kIn);
    return Term::letrec(name_of(t.children[1]), name_of(t.children[2]), term_of(t.children[4]),
                        term_of(t.children[6]));
  }
  if (t.label == labels::kIfTerm) {
    expect_arity(t, 6);
    expect_terminal(t, 0, kw::kIf);
    expect_terminal(t, 2, kw::kThen);
    expect_terminal(t, 4, kw::kElse);
    return Term::if_then_else(cmp_of(t.children[1]), term_of(t.children[3]), term_of(t.children[5]));
  }
  return Term::of_expr(expr_of(t));
}

int append_lcrs(const GeneralTree& t, BinaryTree& out) {
  const int self = static_cast<int>(out.nodes.size());
  out.nodes.push_back({t.label, -1, -1});
  int prev = -1;
  for (const auto& child : t.children) {
    const int c = append_lcrs(child, out);
    if (prev < 0) {
      out.nodes[self].left = c;
    } else {
      out.nodes[prev].right = c;
    }
    prev = c;
  }
  return self;
}

GeneralTree general_from(const BinaryTree& b, int i) {
  GeneralTree t{b.nodes[i].label, {}};
  for (int c = b.nodes[i].left; c >= 0; c = b.nodes[c].right) t.children.push_back(general_from(b, c));
  return t;
}

void serialize_into(const GeneralTree& t, Tokens& out) {
  out.push_back(t.label);
  if (t.children.empty()) return;
  out.emplace_back(kOpenBracket);
  for (const auto& c : t.children) serialize_into(c, out);
  out.emplace_back(kCloseBracket);
}

GeneralTree deserialize_at(const Tokens& toks, std::size_t& pos) {
  if (pos >= toks.size()) throw SyntaxError(pos, "expected a label but input ended");
  if (toks[pos] == kOpenBracket || toks[pos] == kCloseBracket)
    throw SyntaxError(pos, "expected a label, found '" + toks[pos] + "'");
  GeneralTree t{toks[pos++], {}};
  if (pos < toks.size() && toks[pos] == kOpenBracket) {
    ++pos;
    if (pos < toks.size() && toks[pos] == kCloseBracket) throw SyntaxError(pos, "empty child list");
    while (pos < toks.size() && toks[pos] != kCloseBracket) t.children.push_back(deserialize_at(toks, pos));
    if (pos >= toks.size()) throw SyntaxError(pos, "unterminated child list");
    ++pos;
  }
  return t;
}

void collect_labels(const GeneralTree& t, std::set<Token>& out) {
  out.insert(t.label);
  for (const auto& c : t.children) collect_labels(c, out);
}

}  // namespace

GeneralTree ast_to_tree(const Stmt& ast) { return stmt_tree(ast); }
GeneralTree ast_to_tree(const Term& ast) { return term_tree(ast); }

Stmt tree_to_for(const GeneralTree& tree) { return stmt_of(tree); }
Term tree_to_lambda(const GeneralTree& tree) { return term_of(tree); }

BinaryTree to_lcrs(const GeneralTree& tree) {
  BinaryTree out;
  out.nodes.reserve(tree.size());
  append_lcrs(tree, out);
  return out;
}

GeneralTree from_lcrs(const BinaryTree& tree) {
  if (tree.empty()) throw ShapeError("cannot recover a tree from an empty binary tree");
  if (tree.nodes[0].right >= 0) throw ShapeError("binary tree root has a right sibling");
  return general_from(tree, 0);
}

Tokens serialize_dfs(const GeneralTree& tree) {
  Tokens out;
  serialize_into(tree, out);
  return out;
}

GeneralTree deserialize_dfs(const Tokens& tokens) {
  std::size_t pos = 0;
  GeneralTree t = deserialize_at(tokens, pos);
  if (pos != tokens.size()) throw SyntaxError(pos, "trailing tokens after tree");
  return t;
}

Vocabulary::Vocabulary(std::vector<Token> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw VocabError("duplicate vocabulary token '" + tokens_[i] + "'");
  }
}

const Token& Vocabulary::token(std::size_t index) const {
  if (index >= tokens_.size()) throw IndexError("vocabulary index " + std::to_string(index) + " out of range");
  return tokens_[index];
}

int Vocabulary::index(const Token& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) throw VocabError("token '" + token + "' not in vocabulary");
  return it->second;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 1099511628211ULL;
  };
  for (const auto& t : tokens_) {
    for (char ch : t) mix(static_cast<unsigned char>(ch));
    mix(0);
  }
  return h;
}

VocabPair build_vocab(std::span<const GeneralTree> source_trees, std::span<const GeneralTree> target_trees) {
  std::set<Token> src;
  std::set<Token> tgt;
  for (const auto& t : source_trees) collect_labels(t, src);
  for (const auto& t : target_trees) collect_labels(t, tgt);
  std::vector<Token> tgt_tokens(tgt.begin(), tgt.end());
  tgt_tokens.emplace_back(Vocabulary::kEos);
  return {Vocabulary({src.begin(), src.end()}), Vocabulary(std::move(tgt_tokens))};
}

EncodedTree encode_tree(const BinaryTree& tree, const Vocabulary& vocab) {
  EncodedTree out;
  out.label.reserve(tree.size());
  for (const auto& n : tree.nodes) {
    out.label.push_back(vocab.index(n.label));
    out.left.push_back(n.left);
    out.right.push_back(n.right);
  }
  return out;
}

BinaryTree decode_tree(const EncodedTree& tree, const Vocabulary& vocab) {
  BinaryTree out;
  for (std::size_t i = 0; i < tree.size(); ++i)
    out.nodes.push_back({vocab.token(static_cast<std::size_t>(tree.label[i])), tree.left[i], tree.right[i]});
  return out;
}

}  // namespace t2t
