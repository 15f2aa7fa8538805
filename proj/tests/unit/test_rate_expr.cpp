#include "mfldp/errors.hpp"
#include "mfldp/rate_expr.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

using namespace mfldp;
using Catch::Approx;

namespace {

double eval(std::string_view text, std::vector<double> mu = {}) { return RateExpr::parse(text).evaluate(mu); }

// Random well-defined expressions: every log argument is forced positive.
std::string random_expr(std::mt19937& gen, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 9);
  std::uniform_real_distribution<double> lit(-3.0, 3.0);
  std::uniform_int_distribution<int> var(0, 2);
  switch (pick(gen)) {
    case 0: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", lit(gen));
      return buf;
    }
    case 1:
      return "mu[" + std::to_string(var(gen)) + "]";
    case 2:
      return random_expr(gen, depth - 1) + " + " + random_expr(gen, depth - 1);
    case 3:
      return random_expr(gen, depth - 1) + " - " + random_expr(gen, depth - 1);
    case 4:
      return random_expr(gen, depth - 1) + " * " + random_expr(gen, depth - 1);
    case 5:
      return "(" + random_expr(gen, depth - 1) + ") / (2 + mu[0])";
    case 6:
      return "(" + random_expr(gen, depth - 1) + ")^2";
    case 7:
      return "-" + random_expr(gen, depth - 1);
    case 8:
      return "log(1 + exp(" + random_expr(gen, depth - 1) + "))";
    default:
      return "max(" + random_expr(gen, depth - 1) + ", min(1, " + random_expr(gen, depth - 1) + "))";
  }
}

}  // namespace

TEST_CASE("literal examples", "[expr]") {
  CHECK(eval("1.0 + 0.5*mu[0]", {0.2, 0.8}) == Approx(1.1));
  CHECK(eval("2.0", {0.3, 0.7}) == 2.0);
  CHECK(eval("0.1 + 2.0*mu[1]*mu[1]", {0.5, 0.5}) == Approx(0.6));
}

TEST_CASE("precedence and associativity", "[expr]") {
  CHECK(eval("1 + 2 * 3") == 7.0);
  CHECK(eval("(1 + 2) * 3") == 9.0);
  CHECK(eval("8 / 4 / 2") == 1.0);
  CHECK(eval("10 - 4 - 3") == 3.0);
  CHECK(eval("2 ^ 3 ^ 2") == 512.0);
  CHECK(eval("-2 ^ 2") == 4.0);
  CHECK(eval("2 * 3 ^ 2") == 18.0);
  CHECK(eval("2 ^ -1") == 0.5);
  CHECK(eval("--3") == 3.0);
  CHECK(eval("exp(0) + log(1)") == 1.0);
  CHECK(eval("min(mu[0], mu[1]) + max(mu[0], mu[1])", {0.25, 0.75}) == 1.0);
  CHECK(eval("1e-3 * 2.5E2") == Approx(0.25));
}

TEST_CASE("syntax errors carry byte offsets", "[expr]") {
  auto offset_of = [](std::string_view text) -> std::size_t {
    try {
      (void)RateExpr::parse(text);
    } catch (const ParseError& err) {
      return err.offset();
    }
    return std::string_view::npos;
  };
  CHECK(offset_of("") == 0);
  CHECK(offset_of("1 +") == 3);
  CHECK(offset_of("1 + * 2") == 4);
  CHECK(offset_of("mu[x]") == 3);
  CHECK(offset_of("foo(1)") == 0);
  CHECK(offset_of("(1 + 2") == 6);
  CHECK(offset_of("2 ^ mu[0]") == 2);
  CHECK(offset_of("min(1)") == 5);
  CHECK(offset_of("1 2") == 2);
}

TEST_CASE("domain errors are raised, not clamped", "[expr]") {
  CHECK_THROWS_AS(eval("log(0)"), DomainError);
  CHECK_THROWS_AS(eval("log(mu[0] - 1)", {0.5, 0.5}), DomainError);
  CHECK_THROWS_AS(eval("1 / mu[0]", {0.0, 1.0}), DomainError);
  CHECK_THROWS_AS(eval("exp(1000)"), DomainError);
  CHECK_THROWS_AS(eval("mu[3]", {0.5, 0.5}), DomainError);
  CHECK_THROWS_AS(RateExpr::parse("2 ^ log(-1)"), ParseError);
}

TEST_CASE("variable bookkeeping", "[expr]") {
  CHECK(RateExpr::parse("3").max_variable_index() == -1);
  CHECK(RateExpr::parse("3").is_constant());
  CHECK(RateExpr::parse("mu[0] + mu[4]*2").max_variable_index() == 4);
}

TEST_CASE("print then parse evaluates identically", "[expr][property]") {
  std::mt19937 gen(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const RateExpr e = RateExpr::parse(random_expr(gen, 4));
    const RateExpr back = RateExpr::parse(e.print());
    CHECK(back.print() == e.print());
    for (int k = 0; k < 5; ++k) {
      double a = unit(gen), b = unit(gen);
      std::vector<double> mu{a, b * (1 - a), (1 - b) * (1 - a)};
      double lhs = 0, rhs = 0;
      bool lhs_ok = true, rhs_ok = true;
      try { lhs = e.evaluate(mu); } catch (const DomainError&) { lhs_ok = false; }
      try { rhs = back.evaluate(mu); } catch (const DomainError&) { rhs_ok = false; }
      REQUIRE(lhs_ok == rhs_ok);
      if (lhs_ok) {
        CHECK(lhs == rhs);
      }
    }
  }
}

TEST_CASE("deep expressions use the heap stack", "[expr]") {
  std::string text = "1";
  for (int k = 0; k < 60; ++k) {
    text = "(1 + " + text + ")";
  }
  std::string right = "mu[0]";
  for (int k = 0; k < 60; ++k) {
    right = "mu[0] + (" + right + ")";
  }
  CHECK(eval(text) == 61.0);
  CHECK(eval(right, {0.5}) == Approx(30.5));
}
