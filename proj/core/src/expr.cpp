#include "symts/expr.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <limits>

#include "symts/error.hpp"

namespace symts {
namespace {

struct SymbolInfo {
  std::string_view name;
  int arity;
  SymbolKind kind;
};

constexpr std::array<SymbolInfo, kSymbolCount> kSymbols{{
    {"add", 2, SymbolKind::BinaryOp},
    {"sub", 2, SymbolKind::BinaryOp},
    {"mul", 2, SymbolKind::BinaryOp},
    {"div", 2, SymbolKind::BinaryOp},
    {"sin", 1, SymbolKind::UnaryOp},
    {"cos", 1, SymbolKind::UnaryOp},
    {"log", 1, SymbolKind::UnaryOp},
    {"exp", 1, SymbolKind::UnaryOp},
    {"sqrt", 1, SymbolKind::UnaryOp},
    {"pow", 2, SymbolKind::BinaryOp},
    {"t", 0, SymbolKind::Variable},
    {"C", 0, SymbolKind::ConstantPlaceholder},
    {"aug", 0, SymbolKind::Augmented},
}};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double finite_or_nan(double v) noexcept { return std::isfinite(v) ? v : kNaN; }

}  // namespace

int arity(Symbol s) noexcept { return kSymbols[index_of(s)].arity; }
SymbolKind kind(Symbol s) noexcept { return kSymbols[index_of(s)].kind; }
std::string_view name(Symbol s) noexcept { return kSymbols[index_of(s)].name; }

std::optional<Symbol> symbol_from_name(std::string_view text) noexcept {
  for (std::size_t i = 0; i < kSymbols.size(); ++i) {
    if (kSymbols[i].name == text) return static_cast<Symbol>(i);
  }
  return std::nullopt;
}

std::optional<Symbol> symbol_from_index(std::size_t index) noexcept {
  if (index >= kSymbolCount) return std::nullopt;
  return static_cast<Symbol>(index);
}

// --- ExpressionPath ---------------------------------------------------------

ExpressionPath::ExpressionPath() : slots_{SlotKind::Any} {}

ExpressionPath ExpressionPath::from_tokens(std::span<const Symbol> tokens) {
  ExpressionPath path;
  for (Symbol s : tokens) path.push(s);
  return path;
}

std::optional<SlotKind> ExpressionPath::next_slot() const noexcept {
  if (slots_.empty()) return std::nullopt;
  return slots_.back();
}

bool ExpressionPath::accepts(Symbol s) const noexcept {
  if (slots_.empty() || s == Symbol::Augmented) return false;
  return slots_.back() == SlotKind::Any || s == Symbol::Const;
}

bool ExpressionPath::accepts_pattern(const ExpressionPath& pattern) const noexcept {
  if (slots_.empty() || !pattern.is_complete()) return false;
  if (slots_.back() == SlotKind::Any) return true;
  return pattern.size() == 1 && pattern.tokens_[0] == Symbol::Const;
}

void ExpressionPath::push(Symbol s) {
  if (slots_.empty()) {
    throw Error(ErrorKind::Grammar, "cannot push '" + std::string(name(s)) +
                                        "' onto a complete expression path");
  }
  if (s == Symbol::Augmented) {
    throw Error(ErrorKind::Grammar,
                "the augmented token must be expanded into a pattern before it is pushed");
  }
  if (!accepts(s)) {
    throw Error(ErrorKind::Grammar,
                "slot only accepts a constant, got '" + std::string(name(s)) + "'");
  }
  slots_.pop_back();
  tokens_.push_back(s);
  switch (arity(s)) {
    case 2:
      // Children are filled left to right, so the right slot goes on first.
      slots_.push_back(s == Symbol::Pow ? SlotKind::ConstOnly : SlotKind::Any);
      slots_.push_back(SlotKind::Any);
      break;
    case 1:
      slots_.push_back(SlotKind::Any);
      break;
    default:
      break;
  }
}

void ExpressionPath::append_pattern(const ExpressionPath& pattern) {
  if (!pattern.is_complete()) {
    throw Error(ErrorKind::Grammar, "cannot inline an incomplete pattern");
  }
  if (!accepts_pattern(pattern)) {
    throw Error(ErrorKind::Grammar, "pattern '" + pattern.to_prefix() +
                                        "' does not fit the next open slot");
  }
  for (Symbol s : pattern.tokens_) push(s);
}

ExpressionPath ExpressionPath::autocompleted() const {
  ExpressionPath out = *this;
  while (!out.slots_.empty()) {
    out.push(out.slots_.back() == SlotKind::ConstOnly ? Symbol::Const : Symbol::Var);
  }
  return out;
}

std::string ExpressionPath::to_prefix() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (i) out += ' ';
    out += name(tokens_[i]);
  }
  return out;
}

ExpressionPath push_token(const ExpressionPath& path, Symbol s) {
  ExpressionPath out = path;
  out.push(s);
  return out;
}

bool is_complete(const ExpressionPath& path) noexcept { return path.is_complete(); }

ExpressionPath parse_prefix(std::string_view text) {
  ExpressionPath path;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos >= text.size()) break;
    std::size_t end = text.find(' ', pos);
    if (end == std::string_view::npos) end = text.size();
    auto token = text.substr(pos, end - pos);
    auto sym = symbol_from_name(token);
    if (!sym) throw Error(ErrorKind::Parse, "unknown symbol '" + std::string(token) + "'");
    path.push(*sym);
    pos = end;
  }
  return path;
}

// --- ExpressionTree ---------------------------------------------------------

ExpressionTree ExpressionTree::from_path(const ExpressionPath& path) {
  if (!path.is_complete()) {
    throw Error(ErrorKind::IncompleteExpression,
                "expression path '" + path.to_prefix() + "' has " +
                    std::to_string(path.open_slots()) + " open slot(s)");
  }
  ExpressionTree tree;
  auto tokens = path.tokens();
  tree.nodes_.assign(tokens.begin(), tokens.end());
  const std::size_t n = tree.nodes_.size();
  tree.subtree_end_.assign(n, 0);
  tree.coeff_index_.assign(n, -1);

  // Walk right to left: a node's subtree ends where its last child's does.
  std::vector<std::size_t> stack;
  for (std::size_t i = n; i-- > 0;) {
    const int a = arity(tree.nodes_[i]);
    std::size_t end = i + 1;
    for (int k = 0; k < a; ++k) {
      end = tree.subtree_end_[stack.back()];
      stack.pop_back();
    }
    tree.subtree_end_[i] = static_cast<std::uint32_t>(end);
    stack.push_back(i);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (tree.nodes_[i] == Symbol::Const) {
      tree.coeff_index_[i] = static_cast<std::int32_t>(tree.slots_.size());
      tree.slots_.push_back(i);
    }
  }
  return tree;
}

void ExpressionTree::check_coefficients(std::span<const double> coeffs) const {
  if (coeffs.size() != slots_.size()) {
    throw Error(ErrorKind::Arity, "expression has " + std::to_string(slots_.size()) +
                                      " coefficient slot(s), got " +
                                      std::to_string(coeffs.size()) + " value(s)");
  }
}

double ExpressionTree::eval_at(std::size_t node, std::span<const double> coeffs,
                               double t) const noexcept {
  const Symbol s = nodes_[node];
  switch (s) {
    case Symbol::Var: return t;
    case Symbol::Const: return coeffs[static_cast<std::size_t>(coeff_index_[node])];
    case Symbol::Augmented: return kNaN;
    default: break;
  }
  const double a = eval_at(node + 1, coeffs, t);
  if (std::isnan(a)) return kNaN;
  if (arity(s) == 1) {
    switch (s) {
      case Symbol::Sin: return std::sin(a);
      case Symbol::Cos: return std::cos(a);
      case Symbol::Log: return a > 0.0 ? std::log(a) : kNaN;
      case Symbol::Exp: return finite_or_nan(std::exp(a));
      case Symbol::Sqrt: return a >= 0.0 ? std::sqrt(a) : kNaN;
      default: return kNaN;
    }
  }
  const double b = eval_at(subtree_end_[node + 1], coeffs, t);
  if (std::isnan(b)) return kNaN;
  switch (s) {
    case Symbol::Add: return finite_or_nan(a + b);
    case Symbol::Sub: return finite_or_nan(a - b);
    case Symbol::Mul: return finite_or_nan(a * b);
    case Symbol::Div: return b != 0.0 ? finite_or_nan(a / b) : kNaN;
    case Symbol::Pow: return finite_or_nan(std::pow(a, b));
    default: return kNaN;
  }
}

double ExpressionTree::evaluate(std::span<const double> coeffs, double t) const {
  check_coefficients(coeffs);
  return eval_at(0, coeffs, t);
}

void ExpressionTree::evaluate(std::span<const double> coeffs, std::span<const double> ts,
                              std::span<double> out) const {
  check_coefficients(coeffs);
  if (out.size() != ts.size()) {
    throw Error(ErrorKind::Shape, "output span does not match the timestamp count");
  }
  for (std::size_t i = 0; i < ts.size(); ++i) out[i] = eval_at(0, coeffs, ts[i]);
}

void ExpressionTree::infix_at(std::size_t node, std::span<const double> coeffs,
                              std::string& out) const {
  const Symbol s = nodes_[node];
  switch (arity(s)) {
    case 0:
      if (s == Symbol::Const) {
        out += format_number(coeffs[static_cast<std::size_t>(coeff_index_[node])]);
      } else {
        out += name(s);
      }
      return;
    case 1:
      out += name(s);
      out += '(';
      infix_at(node + 1, coeffs, out);
      out += ')';
      return;
    default: break;
  }
  const char* op = " ? ";
  switch (s) {
    case Symbol::Add: op = " + "; break;
    case Symbol::Sub: op = " - "; break;
    case Symbol::Mul: op = " * "; break;
    case Symbol::Div: op = " / "; break;
    case Symbol::Pow: op = " ^ "; break;
    default: break;
  }
  out += '(';
  infix_at(node + 1, coeffs, out);
  out += op;
  infix_at(subtree_end_[node + 1], coeffs, out);
  out += ')';
}

std::string ExpressionTree::to_infix(std::span<const double> coeffs) const {
  check_coefficients(coeffs);
  std::string out;
  infix_at(0, coeffs, out);
  return out;
}

ExpressionPath ExpressionTree::path() const { return ExpressionPath::from_tokens(nodes_); }

ExpressionTree to_tree(const ExpressionPath& path) { return ExpressionTree::from_path(path); }

double evaluate(const ExpressionTree& tree, std::span<const double> coeffs, double t) {
  return tree.evaluate(coeffs, t);
}

std::string to_infix(const ExpressionTree& tree, std::span<const double> coeffs) {
  return tree.to_infix(coeffs);
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) return std::to_string(value);
  return std::string(buf.data(), ptr);
}

}  // namespace symts
