#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cklab/labelled.hpp"

using namespace cklab;

namespace {

bool lcontains(const std::vector<LTermPtr>& v, const std::string& spelled) {
  LTermPtr want = parse_lterm(spelled);
  for (const auto& m : v)
    if (lterm_eq(m, want)) return true;
  return false;
}

bool has_lreduct(const LStepVec& steps, const std::string& spelled) {
  LTermPtr want = parse_lterm(spelled);
  for (const auto& s : steps)
    if (lterm_eq(s.to, want)) return true;
  return false;
}

// args applied directly to the atom at address a (trailing left steps)
int applied_args(const Address& a) {
  int n = 0;
  for (auto it = a.rbegin(); it != a.rend() && *it == Dir::L; ++it) ++n;
  return n;
}

void check_arity_facts(const LTermPtr& t) {
  std::function<void(const LTermPtr&, Address&)> walk = [&](const LTermPtr& s, Address& cur) {
    if (s->kind == LKind::App) {
      cur.push_back(Dir::L);
      walk(s->left, cur);
      cur.back() = Dir::R;
      walk(s->right, cur);
      cur.pop_back();
      return;
    }
    int args = applied_args(cur);
    CAPTURE(print_lterm(t), address_str(cur));
    if (s->kind == LKind::S && s->index == 2) CHECK(args >= 2);
    if (s->kind == LKind::S && (s->index == 1 || s->index == 3)) CHECK(args >= 3);
    if (s->kind == LKind::K && s->index == 1) CHECK(args >= 2);
    if (s->kind == LKind::I && s->index == 1) CHECK(args >= 1);
  };
  Address cur;
  walk(t, cur);
}

bool reaches(const LTermPtr& from, const LTermPtr& to, std::size_t max_nodes = 5000) {
  LStepper st;
  LGraphBuilder b(from, detail::LStepFnRef{&st}, detail::LTermSizeFn{},
                  SearchBudget{max_nodes, 400});
  if (lterm_eq(from, to)) return true;
  while (!b.done()) {
    for (std::size_t i : b.expand_one())
      if (lterm_eq(b.graph().nodes[i], to)) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("lterm parse and print") {
  CHECK(print_lterm(parse_lterm("(S3 (K1 y) I1)")) == "(S3 (K1 y) I1)");
  CHECK(print_term(theta(parse_lterm("(S3 (K1 y) I1)"))) == "(S (K y) I)");
  CHECK_THROWS_AS(parse_lterm("(S x)"), ParseError);   // unindexed atom
  CHECK_THROWS_AS(parse_lterm("(K2 x)"), ParseError);  // index out of range
}

TEST_CASE("lambda_i sets") {
  auto s = lam_indexed(0, "x", parse_lterm("x"));
  REQUIRE(s.members.size() == 1);
  CHECK(print_lterm(s.members[0]) == "I0");

  s = lam_indexed(1, "x", parse_lterm("(y x)"));
  REQUIRE(s.members.size() == 1);
  CHECK(print_lterm(s.members[0]) == "(S3 (K1 y) I1)");

  s = lam_indexed(0, "x", parse_lterm("(y z)"));
  REQUIRE(s.members.size() == 2);
  CHECK(lcontains(s.members, "(K0 (y z))"));
  CHECK(lcontains(s.members, "(S2 (K0 y) (K0 z))"));

  // every member is x-free and passes the membership check
  for (const auto& m : s.members) {
    CHECK_FALSE(loccurs("x", m));
    CHECK(lam_indexed_contains(m, 0, "x", parse_lterm("(y z)")));
  }
}

TEST_CASE("lambda_i matches invert the sets") {
  auto ms = lam_indexed_matches(parse_lterm("I0"), 0, "x");
  REQUIRE(ms.size() == 1);
  CHECK(print_lterm(ms[0]) == "x");

  ms = lam_indexed_matches(parse_lterm("(K0 (y z))"), 0, "x");
  REQUIRE(ms.size() == 1);
  CHECK(print_lterm(ms[0]) == "(y z)");

  ms = lam_indexed_matches(parse_lterm("(S2 (K0 y) (K0 z))"), 0, "x");
  REQUIRE(ms.size() == 1);
  CHECK(print_lterm(ms[0]) == "(y z)");
}

TEST_CASE("lambda_i matching soundness and completeness on random terms") {
  std::mt19937_64 rng(8842);
  GenFairParams p;
  p.max_nb = 5;
  p.max_size = 14;
  for (int it = 0; it < 150; ++it) {
    auto g = gen_fair(p, rng);
    for (int i = 0; i <= 1; ++i) {
      LTermPtr m = lam_indexed_sample(i, "w", g.term, rng);
      CHECK(lam_indexed_contains(m, i, "w", g.term));
      bool found = false;
      for (const auto& u : lam_indexed_matches(m, i, "w"))
        found |= lterm_eq(u, g.term);
      CHECK(found);
    }
  }
}

TEST_CASE("phi") {
  // u = (y x x), f([l]) = v, f([r]) = v'
  AdequateMap uf{parse_lterm("(y x x)"),
                 {{Address{Dir::L}, parse_lterm("v")}, {Address{Dir::R}, parse_lterm("v'")}}};
  std::map<Address, LTermPtr> choices{
      {Address{Dir::L}, parse_lterm("(S3 (K1 y) I1)")},
      {Address{Dir::R}, parse_lterm("I1")},
  };
  CHECK(print_lterm(phi("x", uf, choices)) == "(S3 (K1 y) I1 v (I1 v'))");

  // empty assignment leaves the (x-free) term unchanged
  AdequateMap empty{parse_lterm("(y z)"), {}};
  CHECK(lterm_eq(phi("x", empty, {}), parse_lterm("(y z)")));

  // u = x, f(eps) = v
  AdequateMap root{parse_lterm("x"), {{Address{}, parse_lterm("v")}}};
  CHECK(print_lterm(phi("x", root, {{Address{}, parse_lterm("I1")}})) == "(I1 v)");

  // invalid member choice
  CHECK_THROWS_AS(phi("x", root, {{Address{}, parse_lterm("I0")}}), std::invalid_argument);

  // non-antichain domain
  AdequateMap bad{parse_lterm("(x x)"),
                  {{Address{}, parse_lterm("v")}, {Address{Dir::L}, parse_lterm("v")}}};
  CHECK_THROWS_AS(phi("x", bad, {}), std::invalid_argument);

  // uncovered x survives
  AdequateMap uncovered{parse_lterm("(x x)"), {{Address{Dir::L}, parse_lterm("v")}}};
  CHECK_THROWS_AS(phi("x", uncovered, {{Address{Dir::L}, parse_lterm("I1")}}),
                  std::invalid_argument);
}

TEST_CASE("tri steps") {
  auto s = tri_step(parse_lterm("(K1 a b)"));
  REQUIRE(s.size() == 1);
  CHECK(print_lterm(s[0].to) == "a");

  s = tri_step(parse_lterm("(S2 (K0 a) (K0 b))"));
  bool collapse = false;
  for (const auto& st : s) collapse |= lterm_eq(st.to, parse_lterm("(K0 (a b))"));
  CHECK(collapse);

  CHECK(has_lreduct(tri_step(parse_lterm("(K0 ((I1 y) z))")), "(S2 (K0 y) (K0 z))"));
  CHECK(has_lreduct(tri_step(parse_lterm("(K0 ((I1 y) z))")), "(K0 (y z))"));

  CHECK(has_lreduct(tri_step(parse_lterm("(S1 a b c)")), "(a c (b c))"));
  CHECK(has_lreduct(tri_step(parse_lterm("(S3 (K1 y) I1 v)")), "(K1 y v (I1 v))"));
  CHECK(tri_step(parse_lterm("(S0 a b c)")).empty());
  CHECK(tri_step(parse_lterm("(K0 a b)")).empty());
}

TEST_CASE("theta and labellings") {
  CHECK(print_term(theta(parse_lterm("S3"))) == "S");
  CHECK(print_term(theta(parse_lterm("(K1 x y)"))) == "(K x y)");

  TermPtr ski = parse_term("(S K I)");
  CHECK(print_lterm(apply_labelling(zero_labelling(ski), ski)) == "(S0 K0 I0)");
  CHECK(print_lterm(apply_labelling(zero_labelling(mk_var("x")), mk_var("x"))) == "x");

  TermPtr sabc = parse_term("(S a b c)");
  Labelling l = zero_labelling(sabc);
  l.at[Address{Dir::L, Dir::L, Dir::L}] = 1;
  CHECK(print_lterm(apply_labelling(l, sabc)) == "(S1 a b c)");

  // theta(apply_labelling(L, t)) == t on random labellings
  std::mt19937_64 rng(4242);
  for (int i = 0; i < 50; ++i) {
    GenFairParams p;
    p.max_nb = 4;
    auto g = gen_fair(p, rng);
    TermPtr t = theta(g.term);
    Labelling rnd = zero_labelling(t);
    for (auto& [a, idx] : rnd.at) {
      int max = subterm_at(t, a)->kind == TermKind::S ? 3 : 1;
      idx = static_cast<int>(rng() % (max + 1));
    }
    CHECK(term_eq(theta(apply_labelling(rnd, t)), t));
  }
}

TEST_CASE("extension order") {
  TermPtr t = parse_term("(S K I)");
  Labelling zero = zero_labelling(t);
  CHECK(is_extension(t, zero, zero));

  Labelling l3 = zero;
  l3.at[Address{Dir::L, Dir::L}] = 3;  // the S
  CHECK(is_extension(t, zero, l3));
  CHECK_FALSE(is_extension(t, l3, zero));

  Labelling l1 = zero, l2 = zero;
  l1.at[Address{Dir::L, Dir::L}] = 1;
  l2.at[Address{Dir::L, Dir::L}] = 2;
  CHECK_FALSE(is_extension(t, l1, l2));  // S: 1 -> 2 is not allowed
  CHECK(is_extension(t, l1, l3));        // S: 1 -> 3 is
  CHECK(is_extension(t, l2, l3));        // S: 2 -> 3 is

  Labelling other = zero_labelling(parse_term("(S K)"));
  CHECK_THROWS_AS(is_extension(t, zero, other), std::invalid_argument);
}

TEST_CASE("fair_check on the grammar shapes") {
  auto w = fair_check(parse_lterm("x"));
  REQUIRE(w);
  CHECK((*w)->rule == FairRule::Atom);

  w = fair_check(parse_lterm("(S1 a b c)"));
  REQUIRE(w);
  CHECK((*w)->rule == FairRule::Marked);
  CHECK(fair_verify(*w));

  // the phi example: (S3 (K1 y) I1 v (I1 v')) with v, v' fair; some node of
  // the derivation must be a phi step (the marked S3 spine cannot come from
  // anywhere else)
  w = fair_check(parse_lterm("(S3 (K1 y) I1 v (I1 v'))"));
  REQUIRE(w);
  CHECK(fair_verify(*w));
  CHECK(fair_nb(*w) >= 4);
  std::function<bool(const FairWitnessPtr&)> has_phi = [&](const FairWitnessPtr& n) {
    if (n->rule == FairRule::Phi) return true;
    for (const auto& k : n->kids)
      if (has_phi(k)) return true;
    for (const auto& s : n->sites)
      if (has_phi(s.arg_witness)) return true;
    return false;
  };
  CHECK(has_phi(*w));

  // a member of lambda_0 x.(y z) applied nowhere: rule 3
  w = fair_check(parse_lterm("(S2 (K0 y) (K0 z))"));
  REQUIRE(w);
  CHECK(fair_verify(*w));

  // unmarked S_1 with too few arguments is not fair
  CHECK_FALSE(fair_check(parse_lterm("(S1 a b)"), 2000).has_value());
  CHECK_FALSE(fair_check(parse_lterm("(K1 a)"), 2000).has_value());
}

TEST_CASE("gen_fair produces verifiable witnesses with arity facts") {
  std::mt19937_64 rng(60309);
  GenFairParams p;
  for (int i = 0; i < 200; ++i) {
    auto g = gen_fair(p, rng);
    CAPTURE(print_lterm(g.term));
    REQUIRE(fair_verify(g.witness));
    CHECK(lterm_eq(g.witness->subject, g.term));
    CHECK(fair_nb(g.witness) <= p.max_nb);
    CHECK(g.term->size <= p.max_size);
    check_arity_facts(g.term);
  }
}

TEST_CASE("fair terms are closed under reduction and substitution") {
  std::mt19937_64 rng(1123);
  GenFairParams p;
  p.max_nb = 5;
  p.max_size = 14;
  int reducts_checked = 0;
  for (int i = 0; i < 60; ++i) {
    auto g = gen_fair(p, rng);
    int taken = 0;
    for (const auto& st : tri_step(g.term)) {
      if (st.self_loop || taken >= 3) continue;
      ++taken;
      ++reducts_checked;
      CAPTURE(print_lterm(g.term), print_lterm(st.to));
      auto w = fair_check(st.to, 200000);
      CHECK(w.has_value());
      if (w) CHECK(fair_verify(*w));
    }
  }
  CHECK(reducts_checked > 20);

  // substitution closure
  for (int i = 0; i < 40; ++i) {
    auto g = gen_fair(p, rng);
    GenFairParams q = p;
    q.max_nb = 3;
    auto h = gen_fair(q, rng);
    LSubst sigma{{"a", h.term}};
    auto w = fair_check(substitute_lterm(sigma, g.term), 200000);
    CAPTURE(print_lterm(g.term), print_lterm(h.term));
    CHECK(w.has_value());
  }
}

TEST_CASE("beta development: (w v) reaches u[x:=v]") {
  std::mt19937_64 rng(5150);
  GenFairParams p;
  p.max_nb = 4;
  p.max_size = 10;
  for (int i = 0; i < 60; ++i) {
    auto g = gen_fair(p, rng);
    auto h = gen_fair(p, rng);
    if (loccurs("x", h.term)) continue;
    LTermPtr w = lam_indexed_sample(1, "x", g.term, rng);
    LTermPtr lhs = lterm_app(w, h.term);
    LTermPtr rhs = substitute_lterm({{"x", h.term}}, g.term);
    CAPTURE(print_lterm(lhs), print_lterm(rhs));
    CHECK(reaches(lhs, rhs, 20000));
  }
}

TEST_CASE("critical pairs of the development relation close") {
  // first pair: head S_3 contraction vs an inner step in the decomposition
  LTermPtr t1 = parse_lterm("(K1 (I1 y) c (K1 z c))");
  LTermPtr t2 = parse_lterm("(K1 (y z) c)");
  auto j = lterm_join(t1, t2, SearchBudget{5000, 300});
  REQUIRE(j);
  CHECK(print_lterm(j->witness) == "(y z)");
  CHECK(j->steps_from_first <= 4);
  CHECK(j->steps_from_second <= 4);

  // second pair: K-branch vs componentwise S-branch of the same lambda step
  LTermPtr s1 = parse_lterm("(K0 (a b))");
  LTermPtr s2 = parse_lterm("(S2 (K0 a) (K0 b))");
  j = lterm_join(s1, s2, SearchBudget{5000, 300});
  REQUIRE(j);
  CHECK(print_lterm(j->witness) == "(K0 (a b))");
  CHECK(j->steps_from_first == 0);
  CHECK(j->steps_from_second == 1);
}

TEST_CASE("erasure simulation") {
  std::mt19937_64 rng(777);
  Stepper comb;
  for (int i = 0; i < 60; ++i) {
    GenFairParams p;
    p.max_nb = 5;
    p.max_size = 12;
    auto g = gen_fair(p, rng);
    TermPtr t = theta(g.term);
    const auto& comb_steps = comb.steps(t, Relation::Tri);
    for (const auto& st : tri_step(g.term)) {
      if (st.self_loop) continue;
      TermPtr erased = theta(st.to);
      if (term_eq(erased, t)) continue;  // erasure may collapse to a loop
      bool found = false;
      for (const auto& cs : comb_steps) found |= term_eq(cs.to, erased);
      CAPTURE(print_lterm(g.term), print_lterm(st.to), print_term(t));
      CHECK(found);
    }
  }
}

TEST_CASE("lift_step on the three canonical cases") {
  Stepper st;

  // head S step from the zero labelling
  TermPtr t = parse_term("(S a b c)");
  const Step* head = nullptr;
  for (const auto& s : st.steps(t, Relation::Tri))
    if (s.info.rule == RuleTag::SRed && s.info.position.empty()) head = &s;
  REQUIRE(head);
  auto lift = lift_step(t, zero_labelling(t), *head);
  CHECK(print_lterm(lift.step_to) == "(a c (b c))");
  CHECK(is_extension(t, zero_labelling(t), lift.labelling));
  CHECK(lift.labelling.at.at(Address{Dir::L, Dir::L, Dir::L}) == 1);
  CHECK(fair_verify(lift.witness));
  CHECK(term_eq(theta(lift.step_to), head->to));

  // head K step
  t = parse_term("(K a b)");
  head = nullptr;
  for (const auto& s : st.steps(t, Relation::Tri))
    if (s.info.rule == RuleTag::KRed && s.info.position.empty()) head = &s;
  REQUIRE(head);
  lift = lift_step(t, zero_labelling(t), *head);
  CHECK(print_lterm(lift.step_to) == "a");
  CHECK(lift.labelling.at.at(Address{Dir::L, Dir::L}) == 1);

  // collapse step: S goes to 2, both K stay 0
  t = parse_term("(S (K a) (K b))");
  head = nullptr;
  for (const auto& s : st.steps(t, Relation::Tri))
    if (s.info.rule == RuleTag::SKKCollapse && s.info.position.empty()) head = &s;
  REQUIRE(head);
  lift = lift_step(t, zero_labelling(t), *head);
  CHECK(print_lterm(lift.step_to) == "(K0 (a b))");
  CHECK(lift.labelling.at.at(Address{Dir::L, Dir::L}) == 2);
  CHECK(lift.labelling.at.at(Address{Dir::L, Dir::R, Dir::L}) == 0);
  CHECK(lift.labelling.at.at(Address{Dir::R, Dir::L}) == 0);
}

TEST_CASE("lift_step lifts arbitrary development steps from zero labellings") {
  std::mt19937_64 rng(90210);
  Stepper st;
  int lifted = 0;
  for (int i = 0; i < 300 && lifted < 60; ++i) {
    TermPtr t;
    {
      // random combinator of modest size
      std::function<TermPtr(int)> gen = [&](int budget) -> TermPtr {
        if (budget <= 1) {
          switch (rng() % 6) {
            case 0: return atom_S();
            case 1: return atom_K();
            case 2: return atom_I();
            default: {
              const char* pool[] = {"a", "b", "x"};
              return mk_var(pool[rng() % 3]);
            }
          }
        }
        int l = 1 + static_cast<int>(rng() % static_cast<unsigned>(budget - 1));
        return app(gen(l), gen(budget - 1 - l));
      };
      t = gen(1 + static_cast<int>(rng() % 9));
    }
    Labelling zero = zero_labelling(t);
    for (const auto& s : st.steps(t, Relation::Tri)) {
      if (s.self_loop || lifted >= 60) continue;
      CAPTURE(print_term(t), print_term(s.to), rule_name(s.info.rule), s.info.level);
      LiftResult r = lift_step(t, zero, s);
      ++lifted;
      CHECK(is_extension(t, zero, r.labelling));
      CHECK(fair_verify(r.witness));
      CHECK(term_eq(theta(r.step_to), s.to));
    }
  }
  CHECK(lifted >= 40);
}

TEST_CASE("iterated lifting along a short reduction") {
  Stepper st;
  TermPtr t = parse_term("(S (K a) (K (I b)))");
  Labelling l = zero_labelling(t);
  // step 1: collapse to (K (a (I b)))
  const Step* s1 = nullptr;
  for (const auto& s : st.steps(t, Relation::Tri))
    if (s.info.rule == RuleTag::SKKCollapse) s1 = &s;
  REQUIRE(s1);
  auto r1 = lift_step(t, l, *s1);
  CHECK(term_eq(theta(r1.step_to), s1->to));

  // step 2: from the same source with the extended labelling, lift the inner
  // I step
  const Step* s2 = nullptr;
  for (const auto& s : st.steps(t, Relation::Tri))
    if (s.info.rule == RuleTag::IRed) s2 = &s;
  REQUIRE(s2);
  auto r2 = lift_step(t, r1.labelling, *s2);
  CHECK(is_extension(t, r1.labelling, r2.labelling));
  CHECK(term_eq(theta(r2.step_to), s2->to));
}
