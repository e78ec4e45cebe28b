#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace symts {

enum class ErrorKind {
  Grammar,
  IncompleteExpression,
  Arity,
  ExhaustedLibrary,
  ExpansionExhausted,
  TerminalNode,
  Contract,
  UndefinedVariance,
  EmptyProblem,
  Shape,
  Vocabulary,
  TrainingDivergence,
  Format,
  InsufficientData,
  Parse,
  Ordering,
  Configuration,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

// All library failures surface as this type; `kind` drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace symts
