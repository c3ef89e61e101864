#include "pdelmi/expr.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

using namespace pdelmi;
using namespace pdelmi::expr;

namespace {

double ev(const std::string& text, std::vector<double> x = {}, const ParamMap* params = nullptr) {
  return parse_expr(text).eval({x, params});
}

MatrixExpr example_b() {
  return MatrixExpr::parse({{"2*sin(2*pi*x1) + b", "2*tan(x1)"}, {"2*cos(pi*x1)", "2*(2*x1) + b"}});
}

}  // namespace

TEST_CASE("parse_expr: precedence and associativity") {
  CHECK(ev("1+2*3") == 7.0);
  CHECK(ev("2^3^2") == 512.0);
  CHECK(ev("-2^2") == -4.0);
  CHECK(ev("8/4/2") == 1.0);
  CHECK(ev("10-4-3") == 3.0);
  CHECK(ev("(1+2)*3") == 9.0);
}

TEST_CASE("eval: elementary values") {
  CHECK(ev("2*sin(2*pi*x1)", {0.25}) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(ev("tan(x1)", {0.0}) == 0.0);
  CHECK(ev("3.5") == 3.5);
  CHECK(ev("x1^2", {3.0}) == 9.0);
  CHECK(std::abs(ev("2*cos(pi*x1)", {0.5})) < 1e-15);
  CHECK(ev("x", {4.0}) == 4.0);
  CHECK(ev("sqrt(x2) + abs(-x1) + exp(0)", {1.5, 4.0}) == 4.5);
  CHECK(ev("1e-3*2") == doctest::Approx(2e-3));
}

TEST_CASE("eval: errors are reported") {
  CHECK_THROWS_AS(parse_expr("1+"), ParseError);
  CHECK_THROWS_AS(parse_expr("foo(1)"), ParseError);
  CHECK_THROWS_AS(parse_expr("(1"), ParseError);
  CHECK_THROWS_AS(parse_expr(""), ParseError);
  CHECK_THROWS_AS(ev("b + 1"), EvalError);
  CHECK_THROWS_AS(ev("x3", {1.0}), EvalError);
  CHECK_THROWS_AS(ev("1/x1", {0.0}), EvalError);
  CHECK_THROWS_AS(ev("sqrt(-1)"), EvalError);
  CHECK_THROWS_AS(ev("exp(1000)"), EvalError);
  try {
    parse_expr("1 + * 2");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
  }
}

TEST_CASE("eval_matrix: coefficient matrix examples") {
  const auto b = example_b();
  ParamMap p{{"b", 1.0}};
  const double x0[1] = {0.0};
  DenseMatrix m = eval_matrix(b, {x0, &p});
  CHECK(m(0, 0) == 1.0);
  CHECK(m(0, 1) == 0.0);
  CHECK(m(1, 0) == 2.0);
  CHECK(m(1, 1) == 1.0);

  p["b"] = 0.0;
  const double xh[1] = {0.5};
  m = eval_matrix(b, {xh, &p});
  CHECK(std::abs(m(0, 0)) < 1e-15);
  CHECK(m(0, 1) == doctest::Approx(2.0 * std::tan(0.5)));
  CHECK(std::abs(m(1, 0)) < 1e-15);
  CHECK(m(1, 1) == 2.0);

  const auto z = MatrixExpr::zero(3);
  CHECK(eval_matrix(z, {xh, nullptr}).isZero(0.0));
}

TEST_CASE("eval_matrix: errors carry the entry position") {
  const auto b = MatrixExpr::parse({{"1", "q"}, {"0", "1"}});
  const double x[1] = {0.0};
  try {
    b.eval({x, nullptr});
    FAIL("expected an evaluation error");
  } catch (const EvalError& e) {
    CHECK(std::string(e.what()).find("B(1,2)") != std::string::npos);
  }
}

TEST_CASE("to_string round-trips to a structurally equal tree") {
  const std::vector<std::string> texts = {"2*sin(2*pi*(x1 + x2)) + b", "-x1^-2", "a/b/c", "2^3^4", "-(1-2)-3",
                                          "exp(-abs(x3))*sqrt(2)", "2*(2*x1) + b", "1.25e-7"};
  for (const auto& t : texts) {
    const auto e = parse_expr(t);
    const auto again = parse_expr(e.to_string());
    CHECK_MESSAGE(e.structurally_equal(again), t);
    CHECK(again.to_string() == e.to_string());
  }
}

TEST_CASE("parse is total over random token sequences") {
  const std::vector<std::string> tokens = {"x1", "x2", "b", "pi", "1", "2.5", "+", "-", "*", "/", "^", "(", ")",
                                           "sin(", "cos(", "tan(", "exp(", "sqrt(", "abs(", ",", "@"};
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> pick(0, tokens.size() - 1), len(1, 12);
  const ParamMap p{{"b", 0.3}};
  const double x[2] = {0.2, 0.7};
  int parsed = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    std::string text;
    const auto n = len(rng);
    for (std::size_t k = 0; k < n; ++k) text += tokens[pick(rng)];
    try {
      const auto e = parse_expr(text);
      ++parsed;
      try {
        const double v = e.eval({x, &p});
        CHECK(std::isfinite(v));
        CHECK(parse_expr(e.to_string()).structurally_equal(e));
      } catch (const EvalError&) {
      }
    } catch (const ParseError&) {
    }
  }
  CHECK(parsed > 0);
}

TEST_CASE("eval is deterministic") {
  const auto e = parse_expr("2*sin(2*pi*x1) + tan(x1)*b");
  const ParamMap p{{"b", 3.3}};
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const double x[1] = {u(rng)};
    CHECK(e.eval({x, &p}) == e.eval({x, &p}));
  }
}

TEST_CASE("metadata: coordinates and parameters") {
  const auto b = example_b();
  CHECK(b.max_coord() == 1);
  CHECK(parse_expr("x3 + x1").max_coord() == 3);
  CHECK(parse_expr("b*c + b").param_names() == std::vector<std::string>{"b", "c"});
}
