#pragma once

// Labeled ordered trees, their left-child right-sibling binary form, and the
// bracketed depth-first serialization (format T).

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "t2t/syntax.hpp"

namespace t2t {

// Version tag of the format-T bracket scheme, recorded in dataset headers.
inline constexpr std::string_view kCodecVersion = "t-bracket-v1";
inline constexpr std::string_view kOpenBracket = "(";
inline constexpr std::string_view kCloseBracket = ")";

struct GeneralTree {
  Token label;
  std::vector<GeneralTree> children;

  std::size_t size() const;
  bool operator==(const GeneralTree&) const = default;
};

// Binary tree stored as a node array in preorder; node 0 is the root.
// An empty node array is the empty tree.
struct BinaryTree {
  struct Node {
    Token label;
    int left = -1;
    int right = -1;
  };

  std::vector<Node> nodes;

  bool empty() const { return nodes.empty(); }
  std::size_t size() const { return nodes.size(); }
  // Number of edges on the longest root-to-leaf path (0 for a single node).
  std::size_t depth() const;

  // Structural equality; independent of node numbering.
  friend bool operator==(const BinaryTree& a, const BinaryTree& b);
};

GeneralTree ast_to_tree(const Stmt& ast);
GeneralTree ast_to_tree(const Term& ast);

// Inverses of ast_to_tree. Throw ShapeError when the tree is not a well-formed
// FOR / LAMBDA parse tree (e.g. a decoder output that broke the grammar).
Stmt tree_to_for(const GeneralTree& tree);
Term tree_to_lambda(const GeneralTree& tree);

BinaryTree to_lcrs(const GeneralTree& tree);
// Throws ShapeError if the binary tree is empty or its root has a right child.
GeneralTree from_lcrs(const BinaryTree& tree);

Tokens serialize_dfs(const GeneralTree& tree);
// Throws SyntaxError on a malformed bracket sequence.
GeneralTree deserialize_dfs(const Tokens& tokens);

class Vocabulary {
 public:
  static constexpr std::string_view kEos = "<EOS>";

  Vocabulary() = default;
  // Tokens must be unique.
  explicit Vocabulary(std::vector<Token> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<Token>& tokens() const { return tokens_; }
  const Token& token(std::size_t index) const;
  // Throws VocabError for unknown tokens.
  int index(const Token& token) const;
  bool contains(const Token& token) const { return index_.contains(token); }
  bool has_eos() const { return contains(Token(kEos)); }
  int eos() const { return index(Token(kEos)); }
  // FNV-1a over the token list, used to tie checkpoints to vocabularies.
  std::uint64_t hash() const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<Token> tokens_;
  std::unordered_map<Token, int> index_;
};

struct VocabPair {
  Vocabulary source;
  Vocabulary target;
};

// Labels sorted lexicographically; <EOS> appended last to the target side.
VocabPair build_vocab(std::span<const GeneralTree> source_trees,
                      std::span<const GeneralTree> target_trees);

// Binary tree with labels replaced by vocabulary indices; the model's input.
struct EncodedTree {
  std::vector<int> label;
  std::vector<int> left;
  std::vector<int> right;

  std::size_t size() const { return label.size(); }
  bool empty() const { return label.empty(); }
};

EncodedTree encode_tree(const BinaryTree& tree, const Vocabulary& vocab);
BinaryTree decode_tree(const EncodedTree& tree, const Vocabulary& vocab);

}  // namespace t2t
