#pragma once

// One-step enumerators for the four combinator reduction systems and the
// searches built on top of them.
//
//   succ      strong reduction: S/K/I contractions plus closure under
//             bracket abstraction, enumerated through bracket_matches with
//             a nesting budget (eta_depth) on the decomposition recursion.
//   arrow     the auxiliary system: contractions, the two collapse rules
//             (S (K u) (K v)) -> (K (u v)) and (S (K u) I) -> u, and
//             closure under eta-free abstraction.
//   tri       arrow without the (S (K u) I) -> u rule (the development
//             fragment on combinators).
//   turnstile / supset   the size-decreasing eta systems used to relate
//             succ and arrow.

#include <algorithm>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cklab/abstraction.hpp"
#include "cklab/graph.hpp"
#include "cklab/term.hpp"

namespace cklab {

enum class Relation : std::uint8_t { Succ, Arrow, Turnstile, Supset, Tri };

inline const char* relation_name(Relation r) {
  switch (r) {
    case Relation::Succ: return "succ";
    case Relation::Arrow: return "arrow";
    case Relation::Turnstile: return "turnstile";
    case Relation::Supset: return "supset";
    case Relation::Tri: return "tri";
  }
  return "?";
}

inline std::optional<Relation> relation_from_name(const std::string& s) {
  if (s == "succ") return Relation::Succ;
  if (s == "arrow") return Relation::Arrow;
  if (s == "turnstile") return Relation::Turnstile;
  if (s == "supset") return Relation::Supset;
  if (s == "tri") return Relation::Tri;
  return std::nullopt;
}

enum class RuleTag : std::uint8_t { KRed, SRed, IRed, SKKCollapse, SKICollapse, UnderAbs };

inline const char* rule_name(RuleTag r) {
  switch (r) {
    case RuleTag::KRed: return "K-red";
    case RuleTag::SRed: return "S-red";
    case RuleTag::IRed: return "I-red";
    case RuleTag::SKKCollapse: return "SKK-collapse";
    case RuleTag::SKICollapse: return "SKI-collapse";
    case RuleTag::UnderAbs: return "under-abstraction";
  }
  return "?";
}

inline std::optional<RuleTag> rule_from_name(const std::string& s) {
  for (RuleTag r : {RuleTag::KRed, RuleTag::SRed, RuleTag::IRed, RuleTag::SKKCollapse,
                    RuleTag::SKICollapse, RuleTag::UnderAbs})
    if (s == rule_name(r)) return r;
  return std::nullopt;
}

// One level of closure under abstraction: the chosen decomposition body u
// with [x]u (or lambda x.u) equal to the rewritten subterm, plus where the
// nested rewrite happens inside that body (needed to replay the derivation
// shape, e.g. when lifting a step to the labelled calculus).
struct ChainEntry {
  std::string var;
  TermPtr body;
  Address inner_pos;                    // position of the nested rewrite in body
  RuleTag inner_rule = RuleTag::KRed;   // UnderAbs unless this is the last entry
};

struct StepInfo {
  RuleTag rule = RuleTag::KRed;
  Address position;               // address of the rewritten subterm
  int level = 0;                  // closure-under-abstraction nesting
  std::vector<ChainEntry> chain;  // length == level
};

using Step = StepTo<TermPtr, StepInfo>;
using StepVec = std::vector<Step>;

struct TraceStep {
  StepInfo info;
  TermPtr term;
};

struct Trace {
  Relation rel = Relation::Arrow;
  TermPtr start;
  std::vector<TraceStep> steps;

  TermPtr final_term() const { return steps.empty() ? start : steps.back().term; }
  std::size_t length() const { return steps.size(); }
};

// --- step enumeration ----------------------------------------------------

struct StepperConfig {
  int eta_depth = 3;
};

class Stepper {
 public:
  explicit Stepper(StepperConfig cfg = {}) : cfg_(cfg) {}

  const StepperConfig& config() const { return cfg_; }

  const StepVec& steps(const TermPtr& t, Relation rel) {
    switch (rel) {
      case Relation::Succ: return succ(t, cfg_.eta_depth);
      case Relation::Arrow: return arrow_family(t, true);
      case Relation::Tri: return arrow_family(t, false);
      case Relation::Turnstile: return eta_family(t, true);
      case Relation::Supset: return eta_family(t, false);
    }
    throw std::logic_error("bad relation");
  }

 private:
  using Cache = TermMap<StepVec>;

  StepperConfig cfg_;
  std::unordered_map<int, Cache> succ_cache_;
  Cache arrow_cache_, tri_cache_, turn_cache_, sup_cache_;

  // Smallest reserved name "#<stem><n>" not occurring in t.
  static std::string fresh_for(const TermPtr& t, const char* stem) {
    for (int n = 0;; ++n) {
      std::string x = std::string(1, kFreshPrefix) + stem + std::to_string(n);
      if (!occurs(x, t)) return x;
    }
  }

  static void push(StepVec& out, const TermPtr& src, TermPtr result, StepInfo info) {
    bool loop = term_eq(result, src);
    out.push_back({std::move(result), std::move(info), loop});
  }

  static void lift(StepVec& out, const TermPtr& t, Dir d, const Step& st) {
    TermPtr whole = (d == Dir::L) ? app(st.to, t->right) : app(t->left, st.to);
    StepInfo info = st.info;
    info.position.insert(info.position.begin(), d);
    push(out, t, std::move(whole), std::move(info));
  }

  static void dedup(StepVec& out) {
    StepVec keep;
    keep.reserve(out.size());
    for (auto& s : out) {
      bool dup = false;
      for (const auto& k : keep) {
        if (k.info.rule == s.info.rule && k.info.level == s.info.level &&
            k.info.position == s.info.position && term_eq(k.to, s.to)) {
          dup = true;
          break;
        }
      }
      if (!dup) keep.push_back(std::move(s));
    }
    out = std::move(keep);
  }

  // root contraction patterns
  static bool match_Kred(const TermPtr& t, TermPtr& u) {
    // (K u v)
    if (!is_app(t) || !is_app(t->left) || t->left->left->kind != TermKind::K) return false;
    u = t->left->right;
    return true;
  }
  static bool match_Ired(const TermPtr& t, TermPtr& u) {
    if (!is_app(t) || t->left->kind != TermKind::I) return false;
    u = t->right;
    return true;
  }
  static bool match_Sred(const TermPtr& t, TermPtr& u, TermPtr& v, TermPtr& w) {
    // (S u v w)
    if (!is_app(t) || !is_app(t->left) || !is_app(t->left->left) ||
        t->left->left->left->kind != TermKind::S)
      return false;
    u = t->left->left->right;
    v = t->left->right;
    w = t->right;
    return true;
  }
  static bool match_SKK(const TermPtr& t, TermPtr& u, TermPtr& v) {
    // (S (K u) (K v))
    TermPtr a, b;
    if (!detail::match_S2(t, a, b)) return false;
    return detail::match_K1(a, u) && detail::match_K1(b, v);
  }
  static bool match_SKI(const TermPtr& t, TermPtr& u) {
    // (S (K u) I)
    TermPtr a, b;
    if (!detail::match_S2(t, a, b)) return false;
    return b->kind == TermKind::I && detail::match_K1(a, u);
  }

  const StepVec& succ(const TermPtr& t, int depth) {
    auto& cache = succ_cache_[depth];
    if (auto it = cache.find(t); it != cache.end()) return it->second;
    StepVec out;
    TermPtr u, v, w;
    if (match_Kred(t, u)) push(out, t, u, {RuleTag::KRed, {}, 0, {}});
    if (match_Sred(t, u, v, w)) push(out, t, app(app(u, w), app(v, w)), {RuleTag::SRed, {}, 0, {}});
    if (match_Ired(t, u)) push(out, t, u, {RuleTag::IRed, {}, 0, {}});
    if (depth > 0) {
      std::string x = fresh_for(t, "u");
      for (const auto& body : bracket_matches(t, x)) {
        for (const auto& inner : succ(body, depth - 1)) {
          StepInfo info{RuleTag::UnderAbs, {}, inner.info.level + 1, {}};
          info.chain.push_back({x, body, inner.info.position, inner.info.rule});
          info.chain.insert(info.chain.end(), inner.info.chain.begin(), inner.info.chain.end());
          push(out, t, bracket_abstract(x, inner.to), std::move(info));
        }
      }
    }
    if (is_app(t)) {
      for (const auto& st : succ(t->left, depth)) lift(out, t, Dir::L, st);
      for (const auto& st : succ(t->right, depth)) lift(out, t, Dir::R, st);
    }
    dedup(out);
    return cache.emplace(t, std::move(out)).first->second;
  }

  const StepVec& arrow_family(const TermPtr& t, bool with_ski) {
    auto& cache = with_ski ? arrow_cache_ : tri_cache_;
    if (auto it = cache.find(t); it != cache.end()) return it->second;
    StepVec out;
    TermPtr u, v, w;
    if (match_Kred(t, u)) push(out, t, u, {RuleTag::KRed, {}, 0, {}});
    if (match_Sred(t, u, v, w)) push(out, t, app(app(u, w), app(v, w)), {RuleTag::SRed, {}, 0, {}});
    if (match_Ired(t, u)) push(out, t, u, {RuleTag::IRed, {}, 0, {}});
    if (match_SKK(t, u, v)) push(out, t, app(atom_K(), app(u, v)), {RuleTag::SKKCollapse, {}, 0, {}});
    if (with_ski && match_SKI(t, u)) push(out, t, u, {RuleTag::SKICollapse, {}, 0, {}});
    {
      std::string x = fresh_for(t, "l");
      for (const auto& body : lam_matches(t, x)) {  // at most one member
        for (const auto& inner : arrow_family(body, with_ski)) {
          StepInfo info{RuleTag::UnderAbs, {}, inner.info.level + 1, {}};
          info.chain.push_back({x, body, inner.info.position, inner.info.rule});
          info.chain.insert(info.chain.end(), inner.info.chain.begin(), inner.info.chain.end());
          push(out, t, lam_abstract(x, inner.to), std::move(info));
        }
      }
    }
    if (is_app(t)) {
      for (const auto& st : arrow_family(t->left, with_ski)) lift(out, t, Dir::L, st);
      for (const auto& st : arrow_family(t->right, with_ski)) lift(out, t, Dir::R, st);
    }
    dedup(out);
    return cache.emplace(t, std::move(out)).first->second;
  }

  // turnstile (closure through bracket abstraction) and supset (through
  // lambda).  Both must shrink the term on every step, so the closure is
  // restricted to decompositions that are strictly smaller than the subterm
  // and to results that shrink as well; the pure-eta decomposition (t x)
  // can only reproduce size-equal terms and is dropped by the first filter.
  const StepVec& eta_family(const TermPtr& t, bool bracket) {
    auto& cache = bracket ? turn_cache_ : sup_cache_;
    if (auto it = cache.find(t); it != cache.end()) return it->second;
    StepVec out;
    TermPtr u, v;
    if (match_SKI(t, u)) push(out, t, u, {RuleTag::SKICollapse, {}, 0, {}});
    if (match_Kred(t, u)) push(out, t, u, {RuleTag::KRed, {}, 0, {}});
    if (match_Ired(t, u)) push(out, t, u, {RuleTag::IRed, {}, 0, {}});
    {
      std::string x = fresh_for(t, bracket ? "t" : "s");
      auto members = bracket ? bracket_matches(t, x) : lam_matches(t, x);
      for (const auto& body : members) {
        if (body->size >= t->size) continue;
        for (const auto& inner : eta_family(body, bracket)) {
          TermPtr res = bracket ? bracket_abstract(x, inner.to) : lam_abstract(x, inner.to);
          if (res->size >= t->size) continue;
          StepInfo info{RuleTag::UnderAbs, {}, inner.info.level + 1, {}};
          info.chain.push_back({x, body, inner.info.position, inner.info.rule});
          info.chain.insert(info.chain.end(), inner.info.chain.begin(), inner.info.chain.end());
          push(out, t, std::move(res), std::move(info));
        }
      }
    }
    if (is_app(t)) {
      for (const auto& st : eta_family(t->left, bracket)) lift(out, t, Dir::L, st);
      for (const auto& st : eta_family(t->right, bracket)) lift(out, t, Dir::R, st);
    }
    dedup(out);
#ifndef NDEBUG
    for (const auto& s : out) assert(s.to->size < t->size);
#endif
    return cache.emplace(t, std::move(out)).first->second;
  }
};

// Convenience one-shot wrappers.
inline StepVec succ_step(const TermPtr& t, int eta_depth = 3) {
  Stepper s{StepperConfig{eta_depth}};
  return s.steps(t, Relation::Succ);
}
inline StepVec arrow_step(const TermPtr& t) {
  Stepper s;
  return s.steps(t, Relation::Arrow);
}
inline StepVec turnstile_step(const TermPtr& t) {
  Stepper s;
  return s.steps(t, Relation::Turnstile);
}
inline StepVec supset_step(const TermPtr& t) {
  Stepper s;
  return s.steps(t, Relation::Supset);
}
// Rules (1, 2, 4) of the auxiliary system: the development reduction on
// combinators.
inline StepVec comb_tri_step(const TermPtr& t) {
  Stepper s;
  return s.steps(t, Relation::Tri);
}

// --- graphs ---------------------------------------------------------------

using ReductionGraph = Graph<TermPtr, StepInfo, TermHash, TermEq>;

namespace detail {
struct StepFnRef {
  Stepper* stepper;
  Relation rel;
  const StepVec& operator()(const TermPtr& t) const { return stepper->steps(t, rel); }
};
struct TermSizeFn {
  int operator()(const TermPtr& t) const { return t->size; }
};
}  // namespace detail

using RGraphBuilder =
    GraphBuilder<TermPtr, StepInfo, TermHash, TermEq, detail::StepFnRef, detail::TermSizeFn>;

inline RGraphBuilder make_builder(const TermPtr& t, Relation rel, Stepper& st,
                                  SearchBudget budget = {}) {
  return RGraphBuilder(t, detail::StepFnRef{&st, rel}, detail::TermSizeFn{}, budget);
}

inline ReductionGraph build_graph(const TermPtr& t, Relation rel, SearchBudget budget = {},
                                  Stepper* stepper = nullptr) {
  Stepper local;
  Stepper& st = stepper ? *stepper : local;
  auto b = make_builder(t, rel, st, budget);
  b.run();
  return std::move(b.graph());
}

inline Trace trace_to_node(const ReductionGraph& g, Relation rel, std::size_t node) {
  Trace tr;
  tr.rel = rel;
  tr.start = g.root;
  for (std::size_t e : g.path_edges(node))
    tr.steps.push_back({g.edges[e].info, g.nodes[g.edges[e].dst]});
  return tr;
}

// Nodes with no outgoing edge whose reduct set is known.
inline std::vector<TermPtr> normal_forms(const ReductionGraph& g) {
  std::vector<TermPtr> out;
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (g.expanded[i] && g.out[i].empty()) out.push_back(g.nodes[i]);
  return out;
}

// --- join / convertibility / SN -------------------------------------------

struct JoinResult {
  TermPtr witness;
  Trace from_first, from_second;
};

inline std::optional<JoinResult> join(const TermPtr& t1, const TermPtr& t2, Relation rel,
                                      SearchBudget budget = {}, Stepper* stepper = nullptr) {
  Stepper local;
  Stepper& st = stepper ? *stepper : local;
  auto a = make_builder(t1, rel, st, budget);
  auto b = make_builder(t2, rel, st, budget);

  auto result_at = [&](std::size_t ia, std::size_t ib) {
    return JoinResult{a.graph().nodes[ia], trace_to_node(a.graph(), rel, ia),
                      trace_to_node(b.graph(), rel, ib)};
  };
  if (term_eq(t1, t2)) return result_at(0, 0);

  while (!a.done() || !b.done()) {
    // expand the smaller side first to keep the meeting point shallow
    bool take_a = !a.done() && (b.done() || a.graph().nodes.size() <= b.graph().nodes.size());
    if (take_a) {
      for (std::size_t i : a.expand_one()) {
        auto it = b.graph().index.find(a.graph().nodes[i]);
        if (it != b.graph().index.end()) return result_at(i, it->second);
      }
    } else {
      for (std::size_t i : b.expand_one()) {
        auto it = a.graph().index.find(b.graph().nodes[i]);
        if (it != a.graph().index.end()) return result_at(it->second, i);
      }
    }
  }
  return std::nullopt;
}

// Convertibility decided through a common-reduct search: the relations at
// hand are confluent, so equivalent terms always admit a valley.  A miss
// within budget stays inconclusive.
struct Convertible {
  TermPtr meeting;
  Trace from_first, from_second;  // the zigzag: first forward, second reversed
};

inline std::optional<Convertible> convertible(const TermPtr& t1, const TermPtr& t2, Relation rel,
                                              SearchBudget budget = {},
                                              Stepper* stepper = nullptr) {
  auto j = join(t1, t2, rel, budget, stepper);
  if (!j) return std::nullopt;
  return Convertible{j->witness, std::move(j->from_first), std::move(j->from_second)};
}

struct SnProof {
  ReductionGraph graph;
};
struct SnLoop {
  Trace to_cycle;
  Trace cycle;
};
struct SnBudget {};

using SnResult = std::variant<SnProof, SnLoop, SnBudget>;

inline bool sn_is_proof(const SnResult& r) { return std::holds_alternative<SnProof>(r); }
inline bool sn_is_loop(const SnResult& r) { return std::holds_alternative<SnLoop>(r); }

inline SnResult is_sn(const TermPtr& t, Relation rel, SearchBudget budget = {},
                      Stepper* stepper = nullptr) {
  Stepper local;
  Stepper& st = stepper ? *stepper : local;
  auto b = make_builder(t, rel, st, budget);
  b.run();
  const ReductionGraph& g = b.graph();
  if (auto cyc = find_cycle(g)) {
    const auto& nodes = *cyc;
    SnLoop loop;
    loop.to_cycle = trace_to_node(g, rel, nodes.front());
    loop.cycle.rel = rel;
    loop.cycle.start = g.nodes[nodes.front()];
    for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
      for (std::size_t e : g.out[nodes[k]]) {
        if (g.edges[e].dst == nodes[k + 1]) {
          loop.cycle.steps.push_back({g.edges[e].info, g.nodes[nodes[k + 1]]});
          break;
        }
      }
    }
    return loop;
  }
  if (!g.complete) return SnBudget{};
  return SnProof{std::move(b.graph())};
}

// --- H translation ----------------------------------------------------------

inline TermPtr h_translate(const LambdaPtr& t) {
  switch (t->kind) {
    case LambdaKind::Var: return mk_var(t->name);
    case LambdaKind::App: return app(h_translate(t->left), h_translate(t->right));
    case LambdaKind::Abs: return bracket_abstract(t->name, h_translate(t->left));
  }
  throw std::logic_error("bad lambda term");
}

// --- constructive bridges (lambda x.u ->* [x]u under both systems) ----------

namespace detail {

inline void bridge_rec(const std::string& x, const TermPtr& u, Relation rel, Stepper& st,
                       TermPtr& whole, const Address& at, Trace& tr) {
  if (!occurs(x, u)) return;                      // lambda x.u = (K u) = [x]u
  if (is_var(u) && u->name == x) return;          // both are I
  // u = (u1 u2) with x in u: the lambda side is (S lambda.u1 lambda.u2)
  Address left_addr = at;
  left_addr.push_back(Dir::L);
  left_addr.push_back(Dir::R);
  bridge_rec(x, u->left, rel, st, whole, left_addr, tr);
  Address right_addr = at;
  right_addr.push_back(Dir::R);
  bridge_rec(x, u->right, rel, st, whole, right_addr, tr);
  // eta case: [x](u1 x) = u1 when x not in u1; collapse (S (K u1) I) -> u1
  if (is_var(u->right) && u->right->name == x && !occurs(x, u->left)) {
    TermPtr site = subterm_at(whole, at);
    TermPtr target = bracket_abstract(x, u);
    for (const auto& s : st.steps(site, rel)) {
      if (term_eq(s.to, target)) {
        whole = replace_at(whole, at, s.to);
        StepInfo info = s.info;
        info.position.insert(info.position.begin(), at.begin(), at.end());
        tr.steps.push_back({std::move(info), whole});
        return;
      }
    }
    throw std::logic_error("bridge step not found for " + print_term(site));
  }
}

}  // namespace detail

// Verified traces from lam_abstract(x,u) to bracket_abstract(x,u).
inline std::pair<Trace, Trace> bridge_traces(const std::string& x, const TermPtr& u,
                                             Stepper* stepper = nullptr) {
  Stepper local;
  Stepper& st = stepper ? *stepper : local;
  std::pair<Trace, Trace> out;
  for (Relation rel : {Relation::Arrow, Relation::Succ}) {
    Trace tr;
    tr.rel = rel;
    tr.start = lam_abstract(x, u);
    TermPtr whole = tr.start;
    detail::bridge_rec(x, u, rel, st, whole, {}, tr);
    if (!term_eq(whole, bracket_abstract(x, u)))
      throw std::logic_error("bridge did not reach the bracket abstraction");
    (rel == Relation::Arrow ? out.first : out.second) = std::move(tr);
  }
  return out;
}

// --- projection search (for u ->* v find w with u succ* w and v turnstile* w)

struct Projection {
  TermPtr witness;
  Trace succ_trace;       // from u
  Trace turnstile_trace;  // from v
};

inline std::optional<Projection> project_join(const TermPtr& u, const TermPtr& v,
                                              SearchBudget budget = {},
                                              Stepper* stepper = nullptr) {
  Stepper local;
  Stepper& st = stepper ? *stepper : local;
  auto tb = make_builder(v, Relation::Turnstile, st, budget);
  tb.run();  // turnstile is size-decreasing, this closure is finite
  const auto& tg = tb.graph();

  auto sb = make_builder(u, Relation::Succ, st, budget);
  auto check = [&](std::size_t i) -> std::optional<Projection> {
    auto it = tg.index.find(sb.graph().nodes[i]);
    if (it == tg.index.end()) return std::nullopt;
    return Projection{sb.graph().nodes[i], trace_to_node(sb.graph(), Relation::Succ, i),
                      trace_to_node(tg, Relation::Turnstile, it->second)};
  };
  if (auto r = check(0)) return r;
  while (!sb.done()) {
    for (std::size_t i : sb.expand_one())
      if (auto r = check(i)) return r;
  }
  return std::nullopt;
}

// --- trace replay -----------------------------------------------------------

// A trace is sound if every recorded step is justified by the enumerator:
// same rule, position and level, producing exactly the recorded term.
inline bool replay_trace(const Trace& tr, Stepper* stepper = nullptr,
                         std::string* why = nullptr) {
  Stepper local;
  Stepper& st = stepper ? *stepper : local;
  TermPtr cur = tr.start;
  for (std::size_t k = 0; k < tr.steps.size(); ++k) {
    const auto& want = tr.steps[k];
    bool found = false;
    for (const auto& s : st.steps(cur, tr.rel)) {
      if (s.info.rule == want.info.rule && s.info.level == want.info.level &&
          s.info.position == want.info.position && term_eq(s.to, want.term)) {
        found = true;
        break;
      }
    }
    if (!found) {
      if (why)
        *why = "step " + std::to_string(k) + " from " + print_term(cur) + " to " +
               print_term(want.term) + " is not a " + relation_name(tr.rel) + " step";
      return false;
    }
    cur = want.term;
  }
  return true;
}

}  // namespace cklab
