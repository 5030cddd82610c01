#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cklab/abstraction.hpp"

using namespace cklab;

namespace {

TermPtr random_term(std::mt19937_64& rng, int budget, bool with_x) {
  if (budget <= 1) {
    switch (rng() % 6) {
      case 0: return atom_S();
      case 1: return atom_K();
      case 2: return atom_I();
      case 3: return with_x ? mk_var("x") : mk_var("a");
      default: {
        const char* pool[] = {"a", "y"};
        return mk_var(pool[rng() % 2]);
      }
    }
  }
  int left = 1 + static_cast<int>(rng() % static_cast<unsigned>(budget - 1));
  return app(random_term(rng, left, with_x), random_term(rng, budget - 1 - left, with_x));
}

bool contains(const std::vector<TermPtr>& v, const TermPtr& t) {
  for (const auto& m : v)
    if (term_eq(m, t)) return true;
  return false;
}

}  // namespace

TEST_CASE("bracket abstraction clauses") {
  CHECK(print_term(bracket_abstract("x", parse_term("x"))) == "I");
  CHECK(print_term(bracket_abstract("x", parse_term("(y x)"))) == "y");
  CHECK(print_term(bracket_abstract("x", parse_term("(K x x)"))) == "(S K I)");
  CHECK(print_term(bracket_abstract("x", parse_term("y"))) == "(K y)");
}

TEST_CASE("eta-free abstraction clauses") {
  CHECK(print_term(lam_abstract("x", parse_term("y"))) == "(K y)");
  CHECK(print_term(lam_abstract("x", parse_term("(y x)"))) == "(S (K y) I)");
  CHECK(print_term(lam_abstract("x", parse_term("x"))) == "I");
}

TEST_CASE("bracket matching on the spec'd shapes") {
  auto ms = bracket_matches(atom_I(), "x");
  CHECK(ms.size() == 2);
  CHECK(contains(ms, parse_term("x", true)));
  CHECK(contains(ms, parse_term("(I x)")));

  ms = bracket_matches(parse_term("(K y)"), "x");
  CHECK(ms.size() == 2);
  CHECK(contains(ms, parse_term("y")));
  CHECK(contains(ms, parse_term("(K y x)")));

  ms = bracket_matches(parse_term("(S (K a) I)"), "x");
  CHECK(ms.size() == 4);
  CHECK(contains(ms, parse_term("(a (I x))")));
  CHECK(contains(ms, parse_term("((K a x) x)")));
  CHECK(contains(ms, parse_term("((K a x) (I x))")));
  CHECK(contains(ms, parse_term("((S (K a) I) x)")));
}

TEST_CASE("lambda matching") {
  auto ms = lam_matches(atom_I(), "x");
  REQUIRE(ms.size() == 1);
  CHECK(print_term(ms[0]) == "x");

  ms = lam_matches(parse_term("(K y)"), "x");
  REQUIRE(ms.size() == 1);
  CHECK(print_term(ms[0]) == "y");

  ms = lam_matches(parse_term("(S (S (K (S y)) I) I)"), "x");
  REQUIRE(ms.size() == 1);
  CHECK(print_term(ms[0]) == "(S y x x)");
  CHECK(term_eq(lam_abstract("x", ms[0]), parse_term("(S (S (K (S y)) I) I)")));
}

TEST_CASE("x never occurs in an abstraction; matches are sound and complete") {
  std::mt19937_64 rng(99173);
  for (int i = 0; i < 400; ++i) {
    TermPtr u = random_term(rng, 1 + static_cast<int>(rng() % 9), true);
    CAPTURE(print_term(u));

    TermPtr b = bracket_abstract("x", u);
    TermPtr l = lam_abstract("x", u);
    CHECK_FALSE(occurs("x", b));
    CHECK_FALSE(occurs("x", l));

    // completeness: u itself shows up among the matches of its abstraction
    CHECK(contains(bracket_matches(b, "x"), u));
    CHECK(contains(lam_matches(l, "x"), u));

    // soundness: every candidate re-abstracts to the input
    for (const auto& m : bracket_matches(b, "x")) CHECK(term_eq(bracket_abstract("x", m), b));
    for (const auto& m : lam_matches(l, "x")) CHECK(term_eq(lam_abstract("x", m), l));

    // the lambda decomposition is unique when it exists
    CHECK(lam_matches(l, "x").size() == 1);
  }
}

TEST_CASE("matching a term containing x is empty") {
  CHECK(bracket_matches(parse_term("(K x)"), "x").empty());
  CHECK(lam_matches(parse_term("(K x)"), "x").empty());
}
