#include "polyspec/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

namespace polyspec::probdef {

namespace {

const std::map<std::string, int>& function_arity() {
  static const std::map<std::string, int> t = {
      {"sin", 1}, {"cos", 1}, {"tan", 1}, {"exp", 1},  {"log", 1},
      {"sqrt", 1}, {"abs", 1}, {"atan2", 2}, {"pow", 2},
  };
  return t;
}

ExprPtr make(ExprNode::Kind k, std::vector<ExprPtr> args = {}) {
  auto n = std::make_shared<ExprNode>();
  n->kind = k;
  n->args = std::move(args);
  return n;
}

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  ExprPtr parse() {
    ExprPtr e = expr();
    skip_ws();
    if (pos_ != s_.size()) throw ParseError(pos_, "unexpected trailing input");
    return e;
  }

 private:
  const std::string& s_;
  size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }

  bool accept(char c) {
    if (peek(c)) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c, const char* what) {
    if (!accept(c)) throw ParseError(pos_, std::string("expected ") + what);
  }

  ExprPtr expr() {
    ExprPtr left = term();
    for (;;) {
      if (accept('+'))
        left = make(ExprNode::Kind::Add, {left, term()});
      else if (accept('-'))
        left = make(ExprNode::Kind::Sub, {left, term()});
      else
        return left;
    }
  }

  ExprPtr term() {
    ExprPtr left = unary();
    for (;;) {
      if (accept('*'))
        left = make(ExprNode::Kind::Mul, {left, unary()});
      else if (accept('/'))
        left = make(ExprNode::Kind::Div, {left, unary()});
      else
        return left;
    }
  }

  ExprPtr unary() {
    if (accept('-')) return make(ExprNode::Kind::Neg, {unary()});
    return power();
  }

  // '^' binds tighter than unary minus and is right-associative; the exponent
  // itself may start with a unary minus (x^-2).
  ExprPtr power() {
    ExprPtr base = atom();
    if (accept('^')) return make(ExprNode::Kind::Pow, {base, unary()});
    return base;
  }

  ExprPtr atom() {
    skip_ws();
    if (pos_ >= s_.size()) throw ParseError(pos_, "unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      ExprPtr e = expr();
      expect(')', "')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    throw ParseError(pos_, "unexpected character");
  }

  ExprPtr number() {
    const size_t start = pos_;
    char* end = nullptr;
    const double v = std::strtod(s_.c_str() + start, &end);
    if (end == s_.c_str() + start) throw ParseError(start, "malformed number");
    pos_ = end - s_.c_str();
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Constant;
    n->value = v;
    return n;
  }

  ExprPtr identifier() {
    const size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    const std::string name = s_.substr(start, pos_ - start);
    if (name == "x") return make(ExprNode::Kind::VarX);
    if (name == "y") return make(ExprNode::Kind::VarY);
    if (name == "pi") return make(ExprNode::Kind::Pi);
    auto it = function_arity().find(name);
    if (it == function_arity().end()) throw ParseError(start, "unknown identifier '" + name + "'");
    expect('(', "'(' after function name");
    std::vector<ExprPtr> args;
    args.push_back(expr());
    while (accept(',')) args.push_back(expr());
    expect(')', "')'");
    if (static_cast<int>(args.size()) != it->second)
      throw ParseError(start, "function '" + name + "' takes " + std::to_string(it->second) +
                                  " argument(s), got " + std::to_string(args.size()));
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Call;
    n->func = name;
    n->args = std::move(args);
    return n;
  }
};

double eval_node(const ExprNode& n, double x, double y, size_t idx) {
  using K = ExprNode::Kind;
  auto arg = [&](size_t i) { return eval_node(*n.args[i], x, y, idx); };
  double v = 0.0;
  switch (n.kind) {
    case K::Constant: v = n.value; break;
    case K::Pi: v = std::acos(-1.0); break;
    case K::VarX: v = x; break;
    case K::VarY: v = y; break;
    case K::Neg: v = -arg(0); break;
    case K::Add: v = arg(0) + arg(1); break;
    case K::Sub: v = arg(0) - arg(1); break;
    case K::Mul: v = arg(0) * arg(1); break;
    case K::Div: {
      const double den = arg(1);
      if (den == 0.0) throw DomainError(idx, "division by zero");
      v = arg(0) / den;
      break;
    }
    case K::Pow: {
      const double b = arg(0), e = arg(1);
      if (b < 0.0 && e != std::floor(e)) throw DomainError(idx, "negative base with non-integer exponent");
      if (b == 0.0 && e < 0.0) throw DomainError(idx, "zero base with negative exponent");
      v = std::pow(b, e);
      break;
    }
    case K::Call: {
      if (n.func == "sin") v = std::sin(arg(0));
      else if (n.func == "cos") v = std::cos(arg(0));
      else if (n.func == "tan") v = std::tan(arg(0));
      else if (n.func == "exp") v = std::exp(arg(0));
      else if (n.func == "abs") v = std::abs(arg(0));
      else if (n.func == "log") {
        const double a = arg(0);
        if (a <= 0.0) throw DomainError(idx, "log of non-positive value");
        v = std::log(a);
      } else if (n.func == "sqrt") {
        const double a = arg(0);
        if (a < 0.0) throw DomainError(idx, "sqrt of negative value");
        v = std::sqrt(a);
      } else if (n.func == "atan2") {
        v = std::atan2(arg(0), arg(1));
      } else {  // pow
        const double b = arg(0), e = arg(1);
        if (b < 0.0 && e != std::floor(e)) throw DomainError(idx, "negative base with non-integer exponent");
        if (b == 0.0 && e < 0.0) throw DomainError(idx, "zero base with negative exponent");
        v = std::pow(b, e);
      }
      break;
    }
  }
  if (!std::isfinite(v)) throw DomainError(idx, "non-finite result");
  return v;
}

void print_node(const ExprNode& n, std::string& out) {
  using K = ExprNode::Kind;
  switch (n.kind) {
    case K::Constant: {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      out += buf;
      break;
    }
    case K::Pi: out += "pi"; break;
    case K::VarX: out += "x"; break;
    case K::VarY: out += "y"; break;
    case K::Neg:
      out += "(-";
      print_node(*n.args[0], out);
      out += ')';
      break;
    case K::Add:
    case K::Sub:
    case K::Mul:
    case K::Div:
    case K::Pow: {
      const char op = n.kind == K::Add ? '+' : n.kind == K::Sub ? '-' : n.kind == K::Mul ? '*'
                       : n.kind == K::Div ? '/' : '^';
      out += '(';
      print_node(*n.args[0], out);
      out += op;
      print_node(*n.args[1], out);
      out += ')';
      break;
    }
    case K::Call:
      out += n.func;
      out += '(';
      for (size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += ',';
        print_node(*n.args[i], out);
      }
      out += ')';
      break;
  }
}

bool same_node(const ExprNode& a, const ExprNode& b) {
  if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
  if (a.kind == ExprNode::Kind::Constant &&
      !(a.value == b.value || (std::isnan(a.value) && std::isnan(b.value))))
    return false;
  if (a.kind == ExprNode::Kind::Call && a.func != b.func) return false;
  for (size_t i = 0; i < a.args.size(); ++i)
    if (!same_node(*a.args[i], *b.args[i])) return false;
  return true;
}

}  // namespace

double Expression::eval(double x, double y, size_t point_index) const {
  return eval_node(*root_, x, y, point_index);
}

std::vector<double> Expression::eval(const std::vector<std::pair<double, double>>& pts) const {
  std::vector<double> out(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) out[i] = eval_node(*root_, pts[i].first, pts[i].second, i);
  return out;
}

std::string Expression::print() const {
  std::string out;
  print_node(*root_, out);
  return out;
}

Expression parse_expression(const std::string& src) {
  if (src.empty()) throw ParseError(0, "empty expression");
  return Expression(Parser(src).parse());
}

bool same_tree(const Expression& a, const Expression& b) {
  if (!a.valid() || !b.valid()) return a.valid() == b.valid();
  return same_node(*a.root(), *b.root());
}

}  // namespace polyspec::probdef
