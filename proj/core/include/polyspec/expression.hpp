#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace polyspec::probdef {

struct ParseError : std::runtime_error {
  size_t position;  // 0-based character offset into the source
  ParseError(size_t pos, const std::string& what)
      : std::runtime_error(what + " (at position " + std::to_string(pos) + ")"), position(pos) {}
};

struct DomainError : std::runtime_error {
  size_t point_index;  // index of the offending evaluation point
  DomainError(size_t idx, const std::string& what)
      : std::runtime_error(what + " (point index " + std::to_string(idx) + ")"), point_index(idx) {}
};

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  enum class Kind { Constant, Pi, VarX, VarY, Neg, Add, Sub, Mul, Div, Pow, Call };
  Kind kind;
  double value = 0.0;       // Constant
  std::string func;         // Call
  std::vector<ExprPtr> args;
};

class Expression {
 public:
  Expression() = default;
  explicit Expression(ExprPtr root) : root_(std::move(root)) {}

  bool valid() const { return root_ != nullptr; }
  const ExprPtr& root() const { return root_; }

  // Evaluates at (x, y); throws DomainError with the given point index on
  // log/sqrt/division/power domain violations or non-finite results.
  double eval(double x, double y, size_t point_index = 0) const;

  std::vector<double> eval(const std::vector<std::pair<double, double>>& pts) const;

  // Canonical fully parenthesized form; parsing it back yields the same tree.
  std::string print() const;

 private:
  ExprPtr root_;
};

Expression parse_expression(const std::string& src);

bool same_tree(const Expression& a, const Expression& b);

}  // namespace polyspec::probdef
