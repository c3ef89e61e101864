#include "pdelmi/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

namespace pdelmi::expr {

ParseError::ParseError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

namespace {

using NodePtr = std::shared_ptr<const Node>;

NodePtr make_number(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Number;
  n->value = v;
  return n;
}

NodePtr make_unary(Node::Kind kind, NodePtr operand) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->lhs = std::move(operand);
  return n;
}

NodePtr make_binary(Node::Kind kind, NodePtr lhs, NodePtr rhs) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

struct FuncName {
  std::string_view name;
  Func func;
};
constexpr FuncName kFunctions[] = {
    {"sin", Func::Sin}, {"cos", Func::Cos}, {"tan", Func::Tan},
    {"exp", Func::Exp}, {"sqrt", Func::Sqrt}, {"abs", Func::Abs},
};

std::string_view func_name(Func f) {
  for (const auto& entry : kFunctions)
    if (entry.func == f) return entry.name;
  return "?";
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
    NodePtr root = parse_sum();
    skip_space();
    if (pos_ < text_.size()) throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    return root;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_sum() {
    NodePtr lhs = parse_product();
    for (;;) {
      if (accept('+'))
        lhs = make_binary(Node::Kind::Add, lhs, parse_product());
      else if (accept('-'))
        lhs = make_binary(Node::Kind::Sub, lhs, parse_product());
      else
        return lhs;
    }
  }

  NodePtr parse_product() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*'))
        lhs = make_binary(Node::Kind::Mul, lhs, parse_unary());
      else if (accept('/'))
        lhs = make_binary(Node::Kind::Div, lhs, parse_unary());
      else
        return lhs;
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make_unary(Node::Kind::Neg, parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (accept('^')) return make_binary(Node::Kind::Pow, base, parse_unary());
    return base;
  }

  NodePtr parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr inner = parse_sum();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_, ++n;
      return n;
    };
    std::size_t count = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      count += digits();
    }
    if (count == 0) throw ParseError("malformed number", start);
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      const std::size_t mark = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (digits() == 0) throw ParseError("malformed exponent", mark);
    }
    const std::string literal(text_.substr(start, pos_ - start));
    const double v = std::strtod(literal.c_str(), nullptr);
    if (!std::isfinite(v)) throw ParseError("literal out of range", start);
    return make_number(v);
  }

  NodePtr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string_view id = text_.substr(start, pos_ - start);

    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      const auto it = std::find_if(std::begin(kFunctions), std::end(kFunctions),
                                   [&](const FuncName& f) { return f.name == id; });
      if (it == std::end(kFunctions)) throw ParseError("unknown function '" + std::string(id) + "'", start);
      ++pos_;
      NodePtr arg = parse_sum();
      if (!accept(')')) throw ParseError("expected ')' after function argument", pos_);
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::Call;
      n->func = it->func;
      n->lhs = std::move(arg);
      return n;
    }

    auto n = std::make_shared<Node>();
    if (id == "pi") {
      n->kind = Node::Kind::Pi;
    } else if (id == "x") {
      n->kind = Node::Kind::Coord;
      n->coord = 0;
    } else if (id.size() >= 2 && id[0] == 'x' &&
               std::all_of(id.begin() + 1, id.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      const unsigned long index = std::strtoul(std::string(id.substr(1)).c_str(), nullptr, 10);
      if (index == 0) throw ParseError("coordinates are numbered from x1", start);
      n->kind = Node::Kind::Coord;
      n->coord = index - 1;
    } else {
      n->kind = Node::Kind::Param;
      n->name = std::string(id);
    }
    return n;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

double eval_node(const Node& n, const EvalContext& ctx) {
  switch (n.kind) {
    case Node::Kind::Number:
      return n.value;
    case Node::Kind::Pi:
      return M_PI;
    case Node::Kind::Coord:
      if (n.coord >= ctx.x.size())
        throw EvalError("unbound variable x" + std::to_string(n.coord + 1) + " (point has " +
                        std::to_string(ctx.x.size()) + " coordinates)");
      return ctx.x[n.coord];
    case Node::Kind::Param: {
      if (ctx.params) {
        const auto it = ctx.params->find(n.name);
        if (it != ctx.params->end()) return it->second;
      }
      throw EvalError("unbound parameter '" + n.name + "'");
    }
    case Node::Kind::Neg:
      return -eval_node(*n.lhs, ctx);
    case Node::Kind::Add:
      return eval_node(*n.lhs, ctx) + eval_node(*n.rhs, ctx);
    case Node::Kind::Sub:
      return eval_node(*n.lhs, ctx) - eval_node(*n.rhs, ctx);
    case Node::Kind::Mul:
      return eval_node(*n.lhs, ctx) * eval_node(*n.rhs, ctx);
    case Node::Kind::Div:
      return eval_node(*n.lhs, ctx) / eval_node(*n.rhs, ctx);
    case Node::Kind::Pow:
      return std::pow(eval_node(*n.lhs, ctx), eval_node(*n.rhs, ctx));
    case Node::Kind::Call: {
      const double a = eval_node(*n.lhs, ctx);
      switch (n.func) {
        case Func::Sin: return std::sin(a);
        case Func::Cos: return std::cos(a);
        case Func::Tan: return std::tan(a);
        case Func::Exp: return std::exp(a);
        case Func::Sqrt: return std::sqrt(a);
        case Func::Abs: return std::abs(a);
      }
    }
  }
  return 0.0;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void render(const Node& n, std::ostringstream& out) {
  switch (n.kind) {
    case Node::Kind::Number: out << format_number(n.value); return;
    case Node::Kind::Pi: out << "pi"; return;
    case Node::Kind::Coord: out << 'x' << (n.coord + 1); return;
    case Node::Kind::Param: out << n.name; return;
    case Node::Kind::Neg:
      out << "(-";
      render(*n.lhs, out);
      out << ')';
      return;
    case Node::Kind::Call:
      out << func_name(n.func) << '(';
      render(*n.lhs, out);
      out << ')';
      return;
    default: break;
  }
  char op = '+';
  switch (n.kind) {
    case Node::Kind::Sub: op = '-'; break;
    case Node::Kind::Mul: op = '*'; break;
    case Node::Kind::Div: op = '/'; break;
    case Node::Kind::Pow: op = '^'; break;
    default: break;
  }
  out << '(';
  render(*n.lhs, out);
  out << ' ' << op << ' ';
  render(*n.rhs, out);
  out << ')';
}

bool equal_nodes(const Node* a, const Node* b) {
  if (a == b) return true;
  if (!a || !b || a->kind != b->kind) return false;
  switch (a->kind) {
    case Node::Kind::Number: return a->value == b->value;
    case Node::Kind::Pi: return true;
    case Node::Kind::Coord: return a->coord == b->coord;
    case Node::Kind::Param: return a->name == b->name;
    case Node::Kind::Call:
      if (a->func != b->func) return false;
      break;
    default: break;
  }
  return equal_nodes(a->lhs.get(), b->lhs.get()) && equal_nodes(a->rhs.get(), b->rhs.get());
}

void walk(const Node* n, std::size_t& max_coord, std::set<std::string>& params) {
  if (!n) return;
  if (n->kind == Node::Kind::Coord) max_coord = std::max(max_coord, n->coord + 1);
  if (n->kind == Node::Kind::Param) params.insert(n->name);
  walk(n->lhs.get(), max_coord, params);
  walk(n->rhs.get(), max_coord, params);
}

std::string describe_point(std::span<const double> x) {
  std::ostringstream out;
  out << "x = (";
  for (std::size_t i = 0; i < x.size(); ++i) out << (i ? ", " : "") << format_number(x[i]);
  out << ')';
  return out.str();
}

}  // namespace

Expr parse_expr(std::string_view text) { return Expr(Parser(text).parse()); }

double Expr::eval(const EvalContext& ctx) const {
  if (!root_) throw EvalError("empty expression");
  const double v = eval_node(*root_, ctx);
  if (!std::isfinite(v)) throw EvalError("non-finite value of " + to_string() + " at " + describe_point(ctx.x));
  return v;
}

std::string Expr::to_string() const {
  if (!root_) return {};
  std::ostringstream out;
  render(*root_, out);
  return out.str();
}

bool Expr::structurally_equal(const Expr& other) const { return equal_nodes(root_.get(), other.root_.get()); }

std::size_t Expr::max_coord() const {
  std::size_t m = 0;
  std::set<std::string> unused;
  walk(root_.get(), m, unused);
  return m;
}

std::vector<std::string> Expr::param_names() const {
  std::size_t unused = 0;
  std::set<std::string> names;
  walk(root_.get(), unused, names);
  return {names.begin(), names.end()};
}

MatrixExpr::MatrixExpr(std::size_t n, std::vector<Expr> entries) : n_(n), entries_(std::move(entries)) {
  if (entries_.size() != n * n) throw std::invalid_argument("MatrixExpr: expected n*n entries");
}

MatrixExpr MatrixExpr::parse(const std::vector<std::vector<std::string>>& rows) {
  const std::size_t n = rows.size();
  if (n == 0) throw std::invalid_argument("MatrixExpr: empty matrix");
  std::vector<Expr> entries;
  entries.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) throw std::invalid_argument("MatrixExpr: matrix is not square");
    for (std::size_t j = 0; j < n; ++j) {
      try {
        entries.push_back(parse_expr(rows[i][j]));
      } catch (const ParseError& e) {
        throw ParseError("entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "): " +
                             std::string(e.what()).substr(0, std::string(e.what()).rfind(" at offset")),
                         e.offset());
      }
    }
  }
  return MatrixExpr(n, std::move(entries));
}

MatrixExpr MatrixExpr::zero(std::size_t n) {
  std::vector<Expr> entries(n * n, Expr(make_number(0.0)));
  return MatrixExpr(n, std::move(entries));
}

DenseMatrix MatrixExpr::eval(const EvalContext& ctx) const {
  DenseMatrix out(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      try {
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = entries_[i * n_ + j].eval(ctx);
      } catch (const EvalError& e) {
        throw EvalError("B(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "): " + e.what());
      }
    }
  }
  return out;
}

std::size_t MatrixExpr::max_coord() const {
  std::size_t m = 0;
  for (const auto& e : entries_) m = std::max(m, e.max_coord());
  return m;
}

std::vector<std::vector<std::string>> MatrixExpr::to_strings() const {
  std::vector<std::vector<std::string>> rows(n_, std::vector<std::string>(n_));
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) rows[i][j] = entries_[i * n_ + j].to_string();
  return rows;
}

}  // namespace pdelmi::expr
