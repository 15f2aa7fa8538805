#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mfldp {

/// A transition-rate expression over the empirical measure mu.
///
/// Grammar (whitespace between tokens is ignored):
///
///     expr    := term  (('+' | '-') term)*
///     term    := power (('*' | '/') power)*
///     power   := unary ('^' power)?          exponent must not reference mu
///     unary   := ('-' | '+') unary | primary
///     primary := number | 'mu' '[' integer ']' | func '(' args ')' | '(' expr ')'
///     func    := exp | log | min | max       (min and max take two arguments)
///
/// Unary minus binds tighter than '^', so "-2^2" is 4. Expressions are immutable
/// and cheap to copy; evaluation runs a compiled postfix program.
class RateExpr {
 public:
  RateExpr();

  /// Throws ParseError carrying the byte offset of the offending token.
  static RateExpr parse(std::string_view text);
  static RateExpr constant(double value);

  /// Throws DomainError on log of a nonpositive argument or any non-finite intermediate.
  [[nodiscard]] double evaluate(std::span<const double> mu) const;

  /// Fully parenthesized text; parse(print()) evaluates bit-identically.
  [[nodiscard]] std::string print() const;

  /// Largest k referenced as mu[k], or -1 for an expression without variables.
  [[nodiscard]] int max_variable_index() const noexcept { return max_index_; }
  [[nodiscard]] bool is_constant() const noexcept { return max_index_ < 0; }

  struct Node;

 private:
  enum class Op : std::uint8_t { Push, Load, Neg, Add, Sub, Mul, Div, Pow, Exp, Log, Min, Max };
  struct Instr {
    Op op;
    int index;
    double value;
  };

  explicit RateExpr(std::shared_ptr<const Node> root);
  void compile();

  std::shared_ptr<const Node> root_;
  std::vector<Instr> program_;
  int max_index_ = -1;
  int stack_depth_ = 0;
};

inline RateExpr parse_rate_expr(std::string_view text) { return RateExpr::parse(text); }

}  // namespace mfldp
