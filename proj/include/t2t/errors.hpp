#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace t2t {

// Every error raised by the library derives from Error so the CLI can map
// families of failures onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, const std::string& what)
      : Error("syntax error at token " + std::to_string(position) + ": " + what),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class ExhaustionError : public Error {
 public:
  ExhaustionError(const std::string& what, std::size_t achieved)
      : Error(what), achieved_(achieved) {}

  // Number of unique records that had been collected when the budget ran out.
  std::size_t achieved() const noexcept { return achieved_; }

 private:
  std::size_t achieved_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class GraphError : public Error {
 public:
  using Error::Error;
};

class VocabError : public Error {
 public:
  using Error::Error;
};

class EosExpandError : public Error {
 public:
  EosExpandError() : Error("cannot expand a node labeled <EOS>") {}
};

class LimitExceeded : public Error {
 public:
  enum class Kind { Nodes, Depth };

  LimitExceeded(Kind kind, std::size_t limit)
      : Error(std::string("decode limit exceeded: ") +
              (kind == Kind::Nodes ? "nodes" : "depth") + " > " + std::to_string(limit)),
        kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace t2t
