#include "symts/error.hpp"

namespace symts {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Grammar: return "grammar";
    case ErrorKind::IncompleteExpression: return "incomplete_expression";
    case ErrorKind::Arity: return "arity";
    case ErrorKind::ExhaustedLibrary: return "exhausted_library";
    case ErrorKind::ExpansionExhausted: return "expansion_exhausted";
    case ErrorKind::TerminalNode: return "terminal_node";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::UndefinedVariance: return "undefined_variance";
    case ErrorKind::EmptyProblem: return "empty_problem";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Vocabulary: return "vocabulary";
    case ErrorKind::TrainingDivergence: return "training_divergence";
    case ErrorKind::Format: return "format";
    case ErrorKind::InsufficientData: return "insufficient_data";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Ordering: return "ordering";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace symts
