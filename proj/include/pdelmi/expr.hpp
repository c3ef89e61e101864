#pragma once

#include "pdelmi/linalg.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pdelmi::expr {

/// Syntax error or unknown function, with the byte offset into the source text.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Unbound variable or non-finite result during evaluation.
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ParamMap = std::map<std::string, double, std::less<>>;

struct EvalContext {
  std::span<const double> x;        // spatial coordinates x1..xm
  const ParamMap* params = nullptr;  // named parameters, may be null
};

enum class Func { Sin, Cos, Tan, Exp, Sqrt, Abs };

struct Node {
  enum class Kind { Number, Pi, Coord, Param, Neg, Add, Sub, Mul, Div, Pow, Call };
  Kind kind = Kind::Number;
  double value = 0.0;      // Number
  std::size_t coord = 0;   // Coord: zero-based
  std::string name;        // Param
  Func func = Func::Sin;   // Call
  std::shared_ptr<const Node> lhs, rhs;  // unary ops and calls use lhs only
};

/// Immutable scalar expression over coordinates x1..xm and named parameters.
class Expr {
 public:
  Expr() = default;
  explicit Expr(std::shared_ptr<const Node> root) : root_(std::move(root)) {}

  /// Evaluates in IEEE double; throws EvalError on unbound references or a
  /// non-finite result (the message carries the offending x).
  double eval(const EvalContext& ctx) const;

  /// Fully parenthesized rendering that reparses to a structurally equal tree.
  std::string to_string() const;

  bool structurally_equal(const Expr& other) const;

  /// Highest coordinate index referenced (1-based), 0 if none.
  std::size_t max_coord() const;
  std::vector<std::string> param_names() const;

  const Node* root() const { return root_.get(); }

 private:
  std::shared_ptr<const Node> root_;
};

/// Parses with precedence ^ > unary minus > * / > + -; ^ is right associative.
/// Coordinates are written x1, x2, ... (bare `x` means x1); `pi` is the
/// constant; any other identifier not followed by `(` is a parameter.
Expr parse_expr(std::string_view text);

/// Square matrix of expressions, stored row-major.
class MatrixExpr {
 public:
  MatrixExpr() = default;
  MatrixExpr(std::size_t n, std::vector<Expr> entries);

  static MatrixExpr parse(const std::vector<std::vector<std::string>>& rows);
  static MatrixExpr zero(std::size_t n);

  std::size_t size() const { return n_; }
  const Expr& operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }

  /// Entrywise evaluation; errors are annotated with (row, col).
  DenseMatrix eval(const EvalContext& ctx) const;

  std::size_t max_coord() const;
  std::vector<std::vector<std::string>> to_strings() const;

 private:
  std::size_t n_ = 0;
  std::vector<Expr> entries_;
};

inline DenseMatrix eval_matrix(const MatrixExpr& b, const EvalContext& ctx) { return b.eval(ctx); }

}  // namespace pdelmi::expr
