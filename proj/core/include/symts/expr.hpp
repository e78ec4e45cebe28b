#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace symts {

// Grammar tokens. The numeric value doubles as the network action index.
enum class Symbol : std::uint8_t {
  Add,
  Sub,
  Mul,
  Div,
  Sin,
  Cos,
  Log,
  Exp,
  Sqrt,
  Pow,
  Var,
  Const,
  Augmented,
};

inline constexpr std::size_t kSymbolCount = 13;

enum class SymbolKind { BinaryOp, UnaryOp, Variable, ConstantPlaceholder, Augmented };

constexpr std::size_t index_of(Symbol s) noexcept { return static_cast<std::size_t>(s); }

int arity(Symbol s) noexcept;
SymbolKind kind(Symbol s) noexcept;
std::string_view name(Symbol s) noexcept;
std::optional<Symbol> symbol_from_name(std::string_view text) noexcept;
std::optional<Symbol> symbol_from_index(std::size_t index) noexcept;

// Argument position still waiting for a subtree. The exponent of pow only
// accepts the constant placeholder.
enum class SlotKind : std::uint8_t { Any, ConstOnly };

/// Pre-order token sequence with arity-driven slot accounting.
///
/// A fresh path has one open slot (the root). Each pushed token fills the
/// next open slot and opens `arity` new ones, so
/// `open_slots == 1 + sum(arity - 1)`. The path is complete once no slot is
/// left open; nothing may be appended after that.
class ExpressionPath {
 public:
  ExpressionPath();

  /// Builds a path by pushing `tokens` in order. Throws on grammar violations.
  static ExpressionPath from_tokens(std::span<const Symbol> tokens);

  void push(Symbol s);
  /// Inlines a complete pattern into the next open slot.
  void append_pattern(const ExpressionPath& pattern);

  bool accepts(Symbol s) const noexcept;
  bool accepts_pattern(const ExpressionPath& pattern) const noexcept;

  bool is_complete() const noexcept { return !tokens_.empty() && slots_.empty(); }
  std::size_t open_slots() const noexcept { return slots_.size(); }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  std::span<const Symbol> tokens() const noexcept { return tokens_; }
  std::optional<SlotKind> next_slot() const noexcept;

  /// Fills every open slot with `t` (or `C` for pow exponents).
  ExpressionPath autocompleted() const;

  /// Space-separated symbol names, e.g. "mul C sin t".
  std::string to_prefix() const;

  friend bool operator==(const ExpressionPath& a, const ExpressionPath& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<Symbol> tokens_;
  // Stack of pending slots; the back is filled next.
  std::vector<SlotKind> slots_;
};

ExpressionPath push_token(const ExpressionPath& path, Symbol s);
bool is_complete(const ExpressionPath& path) noexcept;

/// Parses the prefix token-list format written by `ExpressionPath::to_prefix`.
ExpressionPath parse_prefix(std::string_view text);

/// Parsed expression with its coefficient slots enumerated left to right.
class ExpressionTree {
 public:
  static ExpressionTree from_path(const ExpressionPath& path);

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t coefficient_count() const noexcept { return slots_.size(); }
  std::span<const Symbol> nodes() const noexcept { return nodes_; }
  /// Node positions (pre-order) of the constant placeholders.
  std::span<const std::size_t> coefficient_slots() const noexcept { return slots_; }

  /// Returns NaN for domain violations or non-finite intermediate values.
  double evaluate(std::span<const double> coeffs, double t) const;
  void evaluate(std::span<const double> coeffs, std::span<const double> ts,
                std::span<double> out) const;

  std::string to_infix(std::span<const double> coeffs) const;
  ExpressionPath path() const;

 private:
  double eval_at(std::size_t node, std::span<const double> coeffs, double t) const noexcept;
  void infix_at(std::size_t node, std::span<const double> coeffs, std::string& out) const;
  void check_coefficients(std::span<const double> coeffs) const;

  std::vector<Symbol> nodes_;
  std::vector<std::uint32_t> subtree_end_;
  std::vector<std::int32_t> coeff_index_;
  std::vector<std::size_t> slots_;
};

ExpressionTree to_tree(const ExpressionPath& path);
double evaluate(const ExpressionTree& tree, std::span<const double> coeffs, double t);
std::string to_infix(const ExpressionTree& tree, std::span<const double> coeffs);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_number(double value);

}  // namespace symts
