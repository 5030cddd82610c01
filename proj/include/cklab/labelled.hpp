#pragma once

// The development calculus: indexed atoms S_0..S_3, K_0, K_1, I_0, I_1,
// the set-valued indexed abstraction lambda_i x.t, the explicit partial
// substitution phi, fair terms with derivation witnesses, the reduction
// tri with levels, labellings of combinators with their extension order,
// and the constructive lifting of combinator development steps to fair
// labelled steps.

#include <map>
#include <optional>
#include <random>
#include <variant>

#include "cklab/reduction.hpp"

namespace cklab {

// --- indexed terms --------------------------------------------------------

struct LTerm;
using LTermPtr = std::shared_ptr<const LTerm>;

enum class LKind : std::uint8_t { Var, S, K, I, App };

struct LTerm {
  LKind kind;
  int index = 0;          // S: 0..3, K/I: 0..1
  std::string name;       // Var
  LTermPtr left, right;   // App
  int size = 1;
  std::size_t hash = 0;
};

inline LTermPtr latom_var(std::string n) {
  auto t = std::make_shared<LTerm>();
  t->kind = LKind::Var;
  t->name = std::move(n);
  t->hash = detail::mix(0x31, std::hash<std::string>{}(t->name));
  return t;
}

inline LTermPtr latom(LKind k, int index) {
  assert(k == LKind::S || k == LKind::K || k == LKind::I);
  assert(index >= 0 && index <= (k == LKind::S ? 3 : 1));
  auto t = std::make_shared<LTerm>();
  t->kind = k;
  t->index = index;
  t->hash = detail::mix(0x47 + static_cast<int>(k) * 7, static_cast<std::size_t>(index));
  return t;
}

inline LTermPtr latom_S(int i) { return latom(LKind::S, i); }
inline LTermPtr latom_K(int i) { return latom(LKind::K, i); }
inline LTermPtr latom_I(int i) { return latom(LKind::I, i); }

inline LTermPtr lterm_app(LTermPtr l, LTermPtr r) {
  auto t = std::make_shared<LTerm>();
  t->kind = LKind::App;
  t->size = l->size + r->size + 1;
  t->hash = detail::mix(detail::mix(0x77, l->hash), r->hash);
  t->left = std::move(l);
  t->right = std::move(r);
  return t;
}

template <typename... Ts>
inline LTermPtr lterm_app(LTermPtr f, LTermPtr a, LTermPtr b, Ts... rest) {
  return lterm_app(lterm_app(std::move(f), std::move(a)), std::move(b), std::move(rest)...);
}

inline bool lterm_eq(const LTermPtr& a, const LTermPtr& b) {
  if (a.get() == b.get()) return true;
  if (a->kind != b->kind || a->index != b->index || a->hash != b->hash || a->size != b->size)
    return false;
  switch (a->kind) {
    case LKind::Var: return a->name == b->name;
    case LKind::App: return lterm_eq(a->left, b->left) && lterm_eq(a->right, b->right);
    default: return true;
  }
}

struct LTermHash {
  std::size_t operator()(const LTermPtr& t) const { return t->hash; }
};
struct LTermEq {
  bool operator()(const LTermPtr& a, const LTermPtr& b) const { return lterm_eq(a, b); }
};
using LTermSet = std::unordered_set<LTermPtr, LTermHash, LTermEq>;
template <typename V>
using LTermMap = std::unordered_map<LTermPtr, V, LTermHash, LTermEq>;

inline bool lterm_is_app(const LTermPtr& t) { return t->kind == LKind::App; }

inline bool loccurs(const std::string& x, const LTermPtr& t) {
  if (t->kind == LKind::Var) return t->name == x;
  if (t->kind == LKind::App) return loccurs(x, t->left) || loccurs(x, t->right);
  return false;
}

inline LTermPtr lsubterm_at(const LTermPtr& t, const Address& a) {
  const LTermPtr* cur = &t;
  for (Dir d : a) {
    if ((*cur)->kind != LKind::App)
      throw std::invalid_argument("invalid address " + address_str(a));
    cur = (d == Dir::L) ? &(*cur)->left : &(*cur)->right;
  }
  return *cur;
}

inline LTermPtr lreplace_at(const LTermPtr& t, const Address& a, const LTermPtr& s,
                            std::size_t from = 0) {
  if (from == a.size()) return s;
  if (t->kind != LKind::App) throw std::invalid_argument("invalid address " + address_str(a));
  if (a[from] == Dir::L) return lterm_app(lreplace_at(t->left, a, s, from + 1), t->right);
  return lterm_app(t->left, lreplace_at(t->right, a, s, from + 1));
}

using LSubst = std::map<std::string, LTermPtr>;

inline LTermPtr substitute_lterm(const LSubst& sigma, const LTermPtr& t) {
  if (sigma.empty()) return t;
  switch (t->kind) {
    case LKind::Var: {
      auto it = sigma.find(t->name);
      return it == sigma.end() ? t : it->second;
    }
    case LKind::App: {
      LTermPtr l = substitute_lterm(sigma, t->left);
      LTermPtr r = substitute_lterm(sigma, t->right);
      if (l.get() == t->left.get() && r.get() == t->right.get()) return t;
      return lterm_app(std::move(l), std::move(r));
    }
    default: return t;
  }
}

// --- index erasure and printing --------------------------------------------

inline TermPtr theta(const LTermPtr& t) {
  switch (t->kind) {
    case LKind::Var: return mk_var(t->name);
    case LKind::S: return atom_S();
    case LKind::K: return atom_K();
    case LKind::I: return atom_I();
    case LKind::App: return app(theta(t->left), theta(t->right));
  }
  throw std::logic_error("bad lterm");
}

inline void print_lterm_rec(const LTermPtr& t, std::string& out) {
  switch (t->kind) {
    case LKind::Var: out += t->name; return;
    case LKind::S: out += 'S'; out += char('0' + t->index); return;
    case LKind::K: out += 'K'; out += char('0' + t->index); return;
    case LKind::I: out += 'I'; out += char('0' + t->index); return;
    case LKind::App: {
      std::vector<const LTermPtr*> args;
      const LTermPtr* cur = &t;
      while ((*cur)->kind == LKind::App) {
        args.push_back(&(*cur)->right);
        cur = &(*cur)->left;
      }
      out += '(';
      print_lterm_rec(*cur, out);
      for (auto it = args.rbegin(); it != args.rend(); ++it) {
        out += ' ';
        print_lterm_rec(**it, out);
      }
      out += ')';
      return;
    }
  }
}

inline std::string print_lterm(const LTermPtr& t) {
  std::string out;
  print_lterm_rec(t, out);
  return out;
}

namespace detail {

inline LTermPtr parse_lterm_rec(Cursor& c) {
  c.skip_ws();
  if (c.i >= c.s.size()) throw ParseError("unexpected end of input", c.i);
  if (c.s[c.i] == '(') {
    std::size_t open = c.i;
    ++c.i;
    LTermPtr head = parse_lterm_rec(c);
    if (c.peek() == ')') throw ParseError("application needs at least two terms", open);
    while (c.peek() != ')') {
      if (c.eof()) throw ParseError("unclosed '('", open);
      head = lterm_app(std::move(head), parse_lterm_rec(c));
    }
    c.expect(')');
    return head;
  }
  std::size_t at = c.i;
  std::string id = read_ident(c);
  if (id.size() == 2 && (id[0] == 'S' || id[0] == 'K' || id[0] == 'I') && id[1] >= '0' &&
      id[1] <= '9') {
    int idx = id[1] - '0';
    int max = id[0] == 'S' ? 3 : 1;
    if (idx > max) throw ParseError("index out of range for " + id, at);
    return latom(id[0] == 'S' ? LKind::S : id[0] == 'K' ? LKind::K : LKind::I, idx);
  }
  if (id == "S" || id == "K" || id == "I")
    throw ParseError("labelled terms need indexed atoms (S0..S3, K0, K1, I0, I1)", at);
  return latom_var(id);
}

}  // namespace detail

inline LTermPtr parse_lterm(const std::string& text) {
  detail::Cursor c{text};
  LTermPtr t = detail::parse_lterm_rec(c);
  if (!c.eof()) throw ParseError("trailing input", c.i);
  return t;
}

// --- the indexed abstraction lambda_i x.t -----------------------------------

// Enumerates lambda_i x.t into `out` up to `cap` members, K-branch first and
// S-branches left-major.  Returns false if the cap truncated the set.
inline bool lam_indexed_into(int i, const std::string& x, const LTermPtr& t,
                             std::vector<LTermPtr>& out, std::size_t cap) {
  if (t->kind == LKind::Var && t->name == x) {
    if (out.size() >= cap) return false;
    out.push_back(latom_I(i));
    return true;
  }
  if (t->kind != LKind::App) {
    if (out.size() >= cap) return false;
    out.push_back(lterm_app(latom_K(i), t));
    return true;
  }
  bool ok = true;
  if (!loccurs(x, t)) {
    if (out.size() >= cap) return false;
    out.push_back(lterm_app(latom_K(i), t));
  }
  std::vector<LTermPtr> ls, rs;
  ok &= lam_indexed_into(i, x, t->left, ls, cap);
  ok &= lam_indexed_into(i, x, t->right, rs, cap);
  for (const auto& u : ls)
    for (const auto& v : rs) {
      if (out.size() >= cap) return false;
      out.push_back(lterm_app(latom_S(i + 2), u, v));
    }
  return ok;
}

struct LamSet {
  std::vector<LTermPtr> members;
  bool truncated = false;
};

inline LamSet lam_indexed(int i, const std::string& x, const LTermPtr& t,
                          std::size_t cap = 1024) {
  LamSet s;
  s.truncated = !lam_indexed_into(i, x, t, s.members, cap);
  return s;
}

// Deterministic representative: K-branch preferred, else leftmost S-branch.
inline LTermPtr lam_indexed_first(int i, const std::string& x, const LTermPtr& t) {
  if (t->kind == LKind::Var && t->name == x) return latom_I(i);
  if (t->kind != LKind::App || !loccurs(x, t)) return lterm_app(latom_K(i), t);
  return lterm_app(latom_S(i + 2), lam_indexed_first(i, x, t->left),
                   lam_indexed_first(i, x, t->right));
}

// Membership w in lambda_i x.u, checked structurally without enumeration.
inline bool lam_indexed_contains(const LTermPtr& w, int i, const std::string& x,
                                 const LTermPtr& u) {
  if (u->kind == LKind::Var && u->name == x)
    return w->kind == LKind::I && w->index == i;
  auto is_k_of = [&](const LTermPtr& m) {
    return m->kind == LKind::App && m->left->kind == LKind::K && m->left->index == i &&
           lterm_eq(m->right, u);
  };
  if (u->kind != LKind::App) return is_k_of(w);
  if (!loccurs(x, u) && is_k_of(w)) return true;
  if (w->kind != LKind::App || w->left->kind != LKind::App) return false;
  const LTermPtr& head = w->left->left;
  if (head->kind != LKind::S || head->index != i + 2) return false;
  return lam_indexed_contains(w->left->right, i, x, u->left) &&
         lam_indexed_contains(w->right, i, x, u->right);
}

// All u with t in lambda_i x.u.  Requires x not in t.
inline std::vector<LTermPtr> lam_indexed_matches(const LTermPtr& t, int i,
                                                 const std::string& x) {
  std::vector<LTermPtr> out;
  if (loccurs(x, t)) return out;
  if (t->kind == LKind::I && t->index == i) out.push_back(latom_var(x));
  if (t->kind == LKind::App && t->left->kind == LKind::K && t->left->index == i)
    out.push_back(t->right);  // rules 2 and 3, K branch
  if (t->kind == LKind::App && t->left->kind == LKind::App &&
      t->left->left->kind == LKind::S && t->left->left->index == i + 2) {
    auto ls = lam_indexed_matches(t->left->right, i, x);
    auto rs = lam_indexed_matches(t->right, i, x);
    for (const auto& u1 : ls)
      for (const auto& u2 : rs) out.push_back(lterm_app(u1, u2));
  }
#ifndef NDEBUG
  for (const auto& m : out) assert(lam_indexed_contains(t, i, x, m));
#endif
  return out;
}

// Random member of lambda_i x.u.
template <class Rng>
inline LTermPtr lam_indexed_sample(int i, const std::string& x, const LTermPtr& u, Rng& rng) {
  if (u->kind == LKind::Var && u->name == x) return latom_I(i);
  if (u->kind != LKind::App) return lterm_app(latom_K(i), u);
  if (!loccurs(x, u) && rng() % 2 == 0) return lterm_app(latom_K(i), u);
  return lterm_app(latom_S(i + 2), lam_indexed_sample(i, x, u->left, rng),
                   lam_indexed_sample(i, x, u->right, rng));
}

// --- adequate maps and phi ---------------------------------------------------

// Assignment on an antichain of addresses of `base`.
struct AdequateMap {
  LTermPtr base;
  std::map<Address, LTermPtr> assignment;
};

inline bool is_antichain(const std::map<Address, LTermPtr>& m) {
  for (auto it = m.begin(); it != m.end(); ++it) {
    for (auto jt = std::next(it); jt != m.end(); ++jt) {
      const Address& a = it->first;
      const Address& b = jt->first;
      if (a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin())) return false;
      if (b.size() <= a.size() && std::equal(b.begin(), b.end(), a.begin())) return false;
    }
  }
  return true;
}

// phi_x(u, f): replace, for each a in dom(f), the subterm u_a by (w_a f(a))
// where w_a is the chosen member of lambda_1 x.u_a.  The choices map must
// assign every address of f; x must be gone from the result.
inline LTermPtr phi(const std::string& x, const AdequateMap& uf,
                    const std::map<Address, LTermPtr>& choices) {
  if (!is_antichain(uf.assignment))
    throw std::invalid_argument("phi: addresses are not an antichain");
  LTermPtr out = uf.base;
  for (const auto& [addr, arg] : uf.assignment) {
    LTermPtr sub = lsubterm_at(uf.base, addr);
    auto cit = choices.find(addr);
    if (cit == choices.end()) throw std::invalid_argument("phi: missing member choice");
    if (!lam_indexed_contains(cit->second, 1, x, sub))
      throw std::invalid_argument("phi: chosen member is not in lambda_1 x.u_a at " +
                                  address_str(addr));
    out = lreplace_at(out, addr, lterm_app(cit->second, arg));
  }
  if (loccurs(x, out))
    throw std::invalid_argument("phi: variable " + x + " survives (addresses do not cover it)");
  return out;
}

// --- the reduction tri -------------------------------------------------------

struct LChainEntry {
  std::string var;
  int index = 0;  // the i of the lambda_i closure
  LTermPtr body;
  Address inner_pos;
  RuleTag inner_rule = RuleTag::KRed;
};

struct LStepInfo {
  RuleTag rule = RuleTag::KRed;
  Address position;
  int level = 0;
  std::vector<LChainEntry> chain;
};

using LStep = StepTo<LTermPtr, LStepInfo>;
using LStepVec = std::vector<LStep>;

struct LStepperConfig {
  std::size_t lambda_cap = 1024;  // cap on enumerated lambda_i sets
};

class LStepper {
 public:
  explicit LStepper(LStepperConfig cfg = {}) : cfg_(cfg) {}

  // Sticky: set if any lambda_i enumeration was truncated by the cap.
  bool cap_hit() const { return cap_hit_; }
  void reset_cap_hit() { cap_hit_ = false; }

  const LStepVec& steps(const LTermPtr& t) {
    if (auto it = cache_.find(t); it != cache_.end()) return it->second;
    LStepVec out;
    LTermPtr u, v, w;
    int i;
    if (match_Sred(t, u, v, w, i))
      push(out, t, lterm_app(lterm_app(u, w), lterm_app(v, w)), {RuleTag::SRed, {}, 0, {}});
    if (match_K1red(t, u)) push(out, t, u, {RuleTag::KRed, {}, 0, {}});
    if (match_I1red(t, u)) push(out, t, u, {RuleTag::IRed, {}, 0, {}});
    if (match_collapse(t, u, v, i))
      push(out, t, lterm_app(latom_K(i), lterm_app(u, v)), {RuleTag::SKKCollapse, {}, 0, {}});
    for (int j = 0; j <= 1; ++j) {
      std::string x = fresh_for(t, "d");
      for (const auto& body : lam_indexed_matches(t, j, x)) {
        for (const auto& inner : steps(body)) {
          LamSet res = lam_indexed(j, x, inner.to, cfg_.lambda_cap);
          if (res.truncated) cap_hit_ = true;
          for (const auto& to : res.members) {
            LStepInfo info{RuleTag::UnderAbs, {}, inner.info.level + 1, {}};
            info.chain.push_back({x, j, body, inner.info.position, inner.info.rule});
            info.chain.insert(info.chain.end(), inner.info.chain.begin(),
                              inner.info.chain.end());
            push(out, t, to, std::move(info));
          }
        }
      }
    }
    if (lterm_is_app(t)) {
      for (const auto& st : steps(t->left)) lift(out, t, Dir::L, st);
      for (const auto& st : steps(t->right)) lift(out, t, Dir::R, st);
    }
    dedup(out);
    return cache_.emplace(t, std::move(out)).first->second;
  }

 private:
  LStepperConfig cfg_;
  LTermMap<LStepVec> cache_;
  bool cap_hit_ = false;

  static std::string fresh_for(const LTermPtr& t, const char* stem) {
    for (int n = 0;; ++n) {
      std::string x = std::string(1, kFreshPrefix) + stem + std::to_string(n);
      if (!loccurs(x, t)) return x;
    }
  }

  static void push(LStepVec& out, const LTermPtr& src, LTermPtr result, LStepInfo info) {
    bool loop = lterm_eq(result, src);
    out.push_back({std::move(result), std::move(info), loop});
  }

  static void lift(LStepVec& out, const LTermPtr& t, Dir d, const LStep& st) {
    LTermPtr whole = (d == Dir::L) ? lterm_app(st.to, t->right) : lterm_app(t->left, st.to);
    LStepInfo info = st.info;
    info.position.insert(info.position.begin(), d);
    push(out, t, std::move(whole), std::move(info));
  }

  static void dedup(LStepVec& out) {
    LStepVec keep;
    keep.reserve(out.size());
    for (auto& s : out) {
      bool dup = false;
      for (const auto& k : keep) {
        if (k.info.rule == s.info.rule && k.info.level == s.info.level &&
            k.info.position == s.info.position && lterm_eq(k.to, s.to)) {
          dup = true;
          break;
        }
      }
      if (!dup) keep.push_back(std::move(s));
    }
    out = std::move(keep);
  }

  // (S_i u v w) for i in {1,3}
  static bool match_Sred(const LTermPtr& t, LTermPtr& u, LTermPtr& v, LTermPtr& w, int& i) {
    if (!lterm_is_app(t) || !lterm_is_app(t->left) || !lterm_is_app(t->left->left)) return false;
    const LTermPtr& h = t->left->left->left;
    if (h->kind != LKind::S || (h->index != 1 && h->index != 3)) return false;
    i = h->index;
    u = t->left->left->right;
    v = t->left->right;
    w = t->right;
    return true;
  }
  // (K_1 u v)
  static bool match_K1red(const LTermPtr& t, LTermPtr& u) {
    if (!lterm_is_app(t) || !lterm_is_app(t->left)) return false;
    const LTermPtr& h = t->left->left;
    if (h->kind != LKind::K || h->index != 1) return false;
    u = t->left->right;
    return true;
  }
  // (I_1 u)
  static bool match_I1red(const LTermPtr& t, LTermPtr& u) {
    if (!lterm_is_app(t) || t->left->kind != LKind::I || t->left->index != 1) return false;
    u = t->right;
    return true;
  }
  // (S_{i+2} (K_i u) (K_i v)) for i in {0,1}
  static bool match_collapse(const LTermPtr& t, LTermPtr& u, LTermPtr& v, int& i) {
    if (!lterm_is_app(t) || !lterm_is_app(t->left)) return false;
    const LTermPtr& h = t->left->left;
    if (h->kind != LKind::S || h->index < 2) return false;
    i = h->index - 2;
    const LTermPtr& a = t->left->right;
    const LTermPtr& b = t->right;
    if (!lterm_is_app(a) || a->left->kind != LKind::K || a->left->index != i) return false;
    if (!lterm_is_app(b) || b->left->kind != LKind::K || b->left->index != i) return false;
    u = a->right;
    v = b->right;
    return true;
  }
};

inline LStepVec tri_step(const LTermPtr& t, LStepperConfig cfg = {}) {
  LStepper s{cfg};
  return s.steps(t);
}

// --- graphs and SN for labelled terms ---------------------------------------

using LGraph = Graph<LTermPtr, LStepInfo, LTermHash, LTermEq>;

namespace detail {
struct LStepFnRef {
  LStepper* stepper;
  const LStepVec& operator()(const LTermPtr& t) const { return stepper->steps(t); }
};
struct LTermSizeFn {
  int operator()(const LTermPtr& t) const { return t->size; }
};
}  // namespace detail

using LGraphBuilder =
    GraphBuilder<LTermPtr, LStepInfo, LTermHash, LTermEq, detail::LStepFnRef, detail::LTermSizeFn>;

struct LSnLoop {
  std::vector<LTermPtr> cycle;
};
struct LSnProof {
  std::size_t node_count = 0;
};
using LSnResult = std::variant<LSnProof, LSnLoop, SnBudget>;

inline LSnResult lterm_is_sn(const LTermPtr& t, SearchBudget budget = {},
                             LStepper* stepper = nullptr) {
  LStepper local;
  LStepper& st = stepper ? *stepper : local;
  bool had_cap = st.cap_hit();
  LGraphBuilder b(t, detail::LStepFnRef{&st}, detail::LTermSizeFn{}, budget);
  b.run();
  const LGraph& g = b.graph();
  if (auto cyc = find_cycle(g)) {
    LSnLoop loop;
    for (std::size_t i : *cyc) loop.cycle.push_back(g.nodes[i]);
    return loop;
  }
  if (!g.complete || (st.cap_hit() && !had_cap)) return SnBudget{};
  return LSnProof{g.nodes.size()};
}

struct LJoin {
  LTermPtr witness;
  std::size_t steps_from_first = 0, steps_from_second = 0;
};

inline std::optional<LJoin> lterm_join(const LTermPtr& t1, const LTermPtr& t2,
                                       SearchBudget budget = {}, LStepper* stepper = nullptr) {
  LStepper local;
  LStepper& st = stepper ? *stepper : local;
  LGraphBuilder a(t1, detail::LStepFnRef{&st}, detail::LTermSizeFn{}, budget);
  LGraphBuilder b(t2, detail::LStepFnRef{&st}, detail::LTermSizeFn{}, budget);
  auto result = [&](std::size_t ia, std::size_t ib) {
    return LJoin{a.graph().nodes[ia], a.graph().path_edges(ia).size(),
                 b.graph().path_edges(ib).size()};
  };
  if (lterm_eq(t1, t2)) return result(0, 0);
  while (!a.done() || !b.done()) {
    bool take_a = !a.done() && (b.done() || a.graph().nodes.size() <= b.graph().nodes.size());
    if (take_a) {
      for (std::size_t i : a.expand_one()) {
        auto it = b.graph().index.find(a.graph().nodes[i]);
        if (it != b.graph().index.end()) return result(i, it->second);
      }
    } else {
      for (std::size_t i : b.expand_one()) {
        auto it = a.graph().index.find(b.graph().nodes[i]);
        if (it != a.graph().index.end()) return result(it->second, i);
      }
    }
  }
  return std::nullopt;
}

// --- fair terms ---------------------------------------------------------------

enum class FairRule : std::uint8_t { Atom, App, Lambda0, Marked, Phi };

inline const char* fair_rule_name(FairRule r) {
  switch (r) {
    case FairRule::Atom: return "atom";
    case FairRule::App: return "app";
    case FairRule::Lambda0: return "lambda0";
    case FairRule::Marked: return "marked";
    case FairRule::Phi: return "phi";
  }
  return "?";
}

struct FairWitness;
using FairWitnessPtr = std::shared_ptr<const FairWitness>;

struct PhiSite {
  Address addr;
  LTermPtr arg;     // f(addr)
  LTermPtr member;  // w_addr in lambda_1 x.(base at addr)
  FairWitnessPtr arg_witness;
};

// One node per grammar rule used; nb(u) is the node count.
struct FairWitness {
  FairRule rule;
  LTermPtr subject;
  std::vector<FairWitnessPtr> kids;  // App: left,right; Marked: the arguments; Lambda0/Phi: base
  std::string var;                   // Lambda0, Phi
  LTermPtr inner;                    // Lambda0: u with subject in lambda_0 var.u; Phi: base
  std::vector<PhiSite> sites;        // Phi
};

inline int fair_nb(const FairWitnessPtr& w) {
  int n = 1;
  for (const auto& k : w->kids) n += fair_nb(k);
  for (const auto& s : w->sites) n += fair_nb(s.arg_witness);
  return n;
}

namespace detail {
// Marked shapes: (S_1 v1 v2 v3), (K_1 v1 v2), (I_1 v1), exact arities.
inline bool marked_args(const LTermPtr& t, std::vector<LTermPtr>& args) {
  std::vector<LTermPtr> rev;
  const LTerm* cur = t.get();
  while (cur->kind == LKind::App) {
    rev.push_back(cur->right);
    cur = cur->left.get();
  }
  std::size_t want;
  if (cur->kind == LKind::S && cur->index == 1)
    want = 3;
  else if (cur->kind == LKind::K && cur->index == 1)
    want = 2;
  else if (cur->kind == LKind::I && cur->index == 1)
    want = 1;
  else
    return false;
  if (rev.size() != want) return false;
  args.assign(rev.rbegin(), rev.rend());
  return true;
}
}  // namespace detail

inline bool fair_verify(const FairWitnessPtr& w) {
  switch (w->rule) {
    case FairRule::Atom:
      return w->subject->kind == LKind::Var ||
             (w->subject->kind != LKind::App && w->subject->index == 0);
    case FairRule::App:
      return lterm_is_app(w->subject) && w->kids.size() == 2 &&
             lterm_eq(w->kids[0]->subject, w->subject->left) &&
             lterm_eq(w->kids[1]->subject, w->subject->right) && fair_verify(w->kids[0]) &&
             fair_verify(w->kids[1]);
    case FairRule::Lambda0:
      return w->kids.size() == 1 && lterm_eq(w->kids[0]->subject, w->inner) &&
             lam_indexed_contains(w->subject, 0, w->var, w->inner) && fair_verify(w->kids[0]);
    case FairRule::Marked: {
      std::vector<LTermPtr> args;
      if (!detail::marked_args(w->subject, args)) return false;
      if (args.size() != w->kids.size()) return false;
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (!lterm_eq(args[i], w->kids[i]->subject) || !fair_verify(w->kids[i])) return false;
      }
      return true;
    }
    case FairRule::Phi: {
      if (w->kids.size() != 1 || !lterm_eq(w->kids[0]->subject, w->inner)) return false;
      if (w->sites.empty()) return false;
      AdequateMap uf{w->inner, {}};
      std::map<Address, LTermPtr> choices;
      for (const auto& s : w->sites) {
        uf.assignment[s.addr] = s.arg;
        choices[s.addr] = s.member;
        if (!lterm_eq(s.arg_witness->subject, s.arg) || !fair_verify(s.arg_witness)) return false;
      }
      if (!fair_verify(w->kids[0])) return false;
      try {
        return lterm_eq(phi(w->var, uf, choices), w->subject);
      } catch (const std::invalid_argument&) {
        return false;
      }
    }
  }
  return false;
}

// Bounded derivation search.  Absence within budget is inconclusive.
class FairChecker {
 public:
  explicit FairChecker(std::size_t budget = 20000) : budget_(budget) {}

  std::optional<FairWitnessPtr> check(const LTermPtr& t) {
    FairWitnessPtr w = search(t);
    if (w) return w;
    return std::nullopt;
  }

  bool exhausted() const { return exhausted_; }

 private:
  std::size_t budget_;
  bool exhausted_ = false;
  LTermMap<FairWitnessPtr> memo_;

  static std::string fresh_for(const LTermPtr& t) {
    for (int n = 0;; ++n) {
      std::string x = std::string(1, kFreshPrefix) + "f" + std::to_string(n);
      if (!loccurs(x, t)) return x;
    }
  }

  bool spend() {
    if (budget_ == 0) {
      exhausted_ = true;
      return false;
    }
    --budget_;
    return true;
  }

  FairWitnessPtr search(const LTermPtr& t) {
    if (auto it = memo_.find(t); it != memo_.end()) return it->second;
    if (!spend()) return nullptr;

    FairWitnessPtr found = try_atom(t);
    if (!found) found = try_marked(t);
    if (!found) found = try_app(t);
    if (!found) found = try_lambda0(t);
    if (!found) found = try_phi(t);
    if (found) memo_.emplace(t, found);
    return found;
  }

  static FairWitnessPtr node(FairRule r, LTermPtr subject) {
    auto w = std::make_shared<FairWitness>();
    w->rule = r;
    w->subject = std::move(subject);
    return w;
  }

  FairWitnessPtr try_atom(const LTermPtr& t) {
    if (t->kind == LKind::Var || (t->kind != LKind::App && t->index == 0))
      return node(FairRule::Atom, t);
    return nullptr;
  }

  FairWitnessPtr try_marked(const LTermPtr& t) {
    std::vector<LTermPtr> args;
    if (!detail::marked_args(t, args)) return nullptr;
    auto w = std::make_shared<FairWitness>();
    w->rule = FairRule::Marked;
    w->subject = t;
    for (const auto& a : args) {
      FairWitnessPtr k = search(a);
      if (!k) return nullptr;
      w->kids.push_back(k);
    }
    return w;
  }

  FairWitnessPtr try_app(const LTermPtr& t) {
    if (!lterm_is_app(t)) return nullptr;
    FairWitnessPtr l = search(t->left);
    if (!l) return nullptr;
    FairWitnessPtr r = search(t->right);
    if (!r) return nullptr;
    auto w = std::make_shared<FairWitness>();
    w->rule = FairRule::App;
    w->subject = t;
    w->kids = {l, r};
    return w;
  }

  FairWitnessPtr try_lambda0(const LTermPtr& t) {
    std::string x = fresh_for(t);
    for (const auto& u : lam_indexed_matches(t, 0, x)) {
      if (!spend()) return nullptr;
      if (FairWitnessPtr k = search(u)) {
        auto w = std::make_shared<FairWitness>();
        w->rule = FairRule::Lambda0;
        w->subject = t;
        w->var = x;
        w->inner = u;
        w->kids = {k};
        return w;
      }
    }
    return nullptr;
  }

  struct PhiCand {
    Address addr;
    LTermPtr member, arg;
  };

  static bool member_shaped(const LTermPtr& w) {
    if (w->kind == LKind::I && w->index == 1) return true;
    if (w->kind == LKind::App && w->left->kind == LKind::K && w->left->index == 1) return true;
    return w->kind == LKind::App && w->left->kind == LKind::App &&
           w->left->left->kind == LKind::S && w->left->left->index == 3;
  }

  static void collect_phi_sites(const LTermPtr& t, Address& cur, std::vector<PhiCand>& out) {
    if (t->kind != LKind::App) return;
    if (member_shaped(t->left)) out.push_back({cur, t->left, t->right});
    cur.push_back(Dir::L);
    collect_phi_sites(t->left, cur, out);
    cur.back() = Dir::R;
    collect_phi_sites(t->right, cur, out);
    cur.pop_back();
  }

  // Invert phi: pick an antichain of subterms (w_a f(a)) with lambda_1-member
  // heads, undo each replacement, and check base and arguments.
  FairWitnessPtr try_phi(const LTermPtr& t) {
    if (!lterm_is_app(t)) return nullptr;
    std::string x = fresh_for(t);
    std::vector<PhiCand> cands;
    Address cur;
    collect_phi_sites(t, cur, cands);
    if (cands.empty()) return nullptr;
    if (cands.size() > 12) cands.resize(12);
    std::size_t n = cands.size();
    for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
      std::vector<const PhiCand*> pick;
      for (std::size_t b = 0; b < n; ++b)
        if (mask & (std::size_t{1} << b)) pick.push_back(&cands[b]);
      bool anti = true;
      for (std::size_t p = 0; p < pick.size() && anti; ++p)
        for (std::size_t q = p + 1; q < pick.size() && anti; ++q) {
          const Address& a = pick[p]->addr;
          const Address& b = pick[q]->addr;
          if ((a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin())) ||
              (b.size() <= a.size() && std::equal(b.begin(), b.end(), a.begin())))
            anti = false;
        }
      if (!anti) continue;
      if (FairWitnessPtr w = try_phi_subset(t, x, pick)) return w;
      if (exhausted_) return nullptr;
    }
    return nullptr;
  }

  FairWitnessPtr try_phi_subset(const LTermPtr& t, const std::string& x,
                                const std::vector<const PhiCand*>& pick) {
    if (!spend()) return nullptr;
    // each site may have several preimages under lambda_1; try the products
    std::vector<std::vector<LTermPtr>> options;
    for (const auto* c : pick) {
      auto ms = lam_indexed_matches(c->member, 1, x);
      if (ms.empty()) return nullptr;
      options.push_back(std::move(ms));
    }
    std::vector<std::size_t> sel(pick.size(), 0);
    while (true) {
      if (!spend()) return nullptr;
      LTermPtr base = t;
      for (std::size_t k = 0; k < pick.size(); ++k)
        base = lreplace_at(base, pick[k]->addr, options[k][sel[k]]);
      if (FairWitnessPtr bw = search(base)) {
        auto w = std::make_shared<FairWitness>();
        w->rule = FairRule::Phi;
        w->subject = t;
        w->var = x;
        w->inner = base;
        w->kids = {bw};
        bool ok = true;
        for (std::size_t k = 0; k < pick.size() && ok; ++k) {
          FairWitnessPtr aw = search(pick[k]->arg);
          if (!aw)
            ok = false;
          else
            w->sites.push_back({pick[k]->addr, pick[k]->arg, pick[k]->member, aw});
        }
        if (ok && fair_verify(w)) return w;
      }
      // next selection
      std::size_t k = 0;
      while (k < sel.size() && ++sel[k] == options[k].size()) {
        sel[k] = 0;
        ++k;
      }
      if (k == sel.size()) return nullptr;
    }
  }
};

inline std::optional<FairWitnessPtr> fair_check(const LTermPtr& t, std::size_t budget = 20000) {
  FairChecker fc(budget);
  return fc.check(t);
}

// Every marked atom applied to at least as many arguments as its redex
// needs (S_1/S_3: 3, S_2: 2, K_1: 2, I_1: 1).  Fair terms in general may
// violate this for buried atoms (an S-branch of lambda_i may split a marked
// spine); the generator below rejects such samples.
inline bool arity_facts_hold(const LTermPtr& t) {
  std::function<bool(const LTermPtr&, int)> walk = [&](const LTermPtr& s, int args) -> bool {
    if (s->kind == LKind::App) return walk(s->left, args + 1) && walk(s->right, 0);
    if (s->kind == LKind::S && s->index == 2) return args >= 2;
    if (s->kind == LKind::S && (s->index == 1 || s->index == 3)) return args >= 3;
    if (s->kind == LKind::K && s->index == 1) return args >= 2;
    if (s->kind == LKind::I && s->index == 1) return args >= 1;
    return true;
  };
  return walk(t, 0);
}

// --- fair term generation -------------------------------------------------

struct GenFairParams {
  int max_nb = 8;
  int max_size = 25;
  std::vector<std::string> vars = {"a", "b", "c", "x", "y", "z"};
};

struct GenFair {
  LTermPtr term;
  FairWitnessPtr witness;
};

namespace detail {

template <class Rng>
std::pair<LTermPtr, FairWitnessPtr> gen_fair_rec(int nb_budget, const GenFairParams& p,
                                                 Rng& rng, std::uint32_t forbid_mask) {
  auto pick_var = [&]() -> std::string {
    std::size_t k = rng() % p.vars.size();
    for (std::size_t step = 0; step < p.vars.size(); ++step) {
      std::size_t j = (k + step) % p.vars.size();
      if (!(forbid_mask & (std::uint32_t{1} << j))) return p.vars[j];
    }
    return p.vars[k];  // everything forbidden: give up on the constraint
  };
  auto atom = [&]() -> std::pair<LTermPtr, FairWitnessPtr> {
    LTermPtr t;
    switch (rng() % 4) {
      case 0: t = latom_S(0); break;
      case 1: t = latom_K(0); break;
      case 2: t = latom_I(0); break;
      default: t = latom_var(pick_var()); break;
    }
    auto w = std::make_shared<FairWitness>();
    w->rule = FairRule::Atom;
    w->subject = t;
    return {t, w};
  };
  if (nb_budget <= 1) return atom();

  // choose a rule that fits the remaining budget
  for (int attempt = 0; attempt < 4; ++attempt) {
    switch (rng() % 5) {
      case 0: {  // application
        if (nb_budget < 3) break;
        int ln = 1 + static_cast<int>(rng() % static_cast<unsigned>(nb_budget - 2));
        auto [lt, lw] = gen_fair_rec(ln, p, rng, forbid_mask);
        auto [rt, rw] = gen_fair_rec(nb_budget - 1 - ln, p, rng, forbid_mask);
        auto w = std::make_shared<FairWitness>();
        w->rule = FairRule::App;
        w->subject = lterm_app(lt, rt);
        w->kids = {lw, rw};
        return {w->subject, w};
      }
      case 1: {  // marked redex
        int kind = static_cast<int>(rng() % 3);  // 0: I_1, 1: K_1, 2: S_1
        int need = kind + 2;
        if (nb_budget < need) break;
        int nargs = kind + 1;
        std::vector<LTermPtr> args;
        std::vector<FairWitnessPtr> ws;
        int rest = nb_budget - 1;
        for (int k = 0; k < nargs; ++k) {
          int share = (k + 1 == nargs) ? rest : 1 + static_cast<int>(rng() % (rest - (nargs - k - 1)));
          rest -= share;
          auto [a, aw] = gen_fair_rec(share, p, rng, forbid_mask);
          args.push_back(a);
          ws.push_back(aw);
        }
        LTermPtr t = kind == 0 ? latom_I(1) : kind == 1 ? latom_K(1) : latom_S(1);
        for (const auto& a : args) t = lterm_app(t, a);
        auto w = std::make_shared<FairWitness>();
        w->rule = FairRule::Marked;
        w->subject = t;
        w->kids = ws;
        return {t, w};
      }
      case 2: {  // lambda_0 member
        if (nb_budget < 2) break;
        std::size_t xi = rng() % p.vars.size();
        std::string x = p.vars[xi];
        auto [u, uw] = gen_fair_rec(nb_budget - 1, p, rng, forbid_mask);
        LTermPtr t = lam_indexed_sample(0, x, u, rng);
        if (!arity_facts_hold(t)) break;  // the sample split a marked spine
        auto w = std::make_shared<FairWitness>();
        w->rule = FairRule::Lambda0;
        w->subject = t;
        w->var = x;
        w->inner = u;
        w->kids = {uw};
        return {t, w};
      }
      case 3: {  // phi
        if (nb_budget < 3) break;
        std::size_t xi = rng() % p.vars.size();
        std::string x = p.vars[xi];
        int base_share = 1 + static_cast<int>(rng() % static_cast<unsigned>(nb_budget - 2));
        auto [u, uw] = gen_fair_rec(base_share, p, rng, forbid_mask);
        // the antichain: all x-occurrences (leaf addresses), or one random
        // x-free subterm when there are none
        std::vector<Address> sites;
        {
          Address cur;
          std::function<void(const LTermPtr&)> walk = [&](const LTermPtr& s) {
            if (s->kind == LKind::Var && s->name == x) sites.push_back(cur);
            if (s->kind == LKind::App) {
              cur.push_back(Dir::L);
              walk(s->left);
              cur.back() = Dir::R;
              walk(s->right);
              cur.pop_back();
            }
          };
          walk(u);
        }
        if (sites.empty()) {
          Address a;
          LTermPtr s = u;
          while (s->kind == LKind::App && rng() % 2) {
            Dir d = rng() % 2 ? Dir::L : Dir::R;
            a.push_back(d);
            s = d == Dir::L ? s->left : s->right;
          }
          sites.push_back(a);
        }
        if (sites.size() > 3) break;  // keep the budget split sane
        int rest = nb_budget - 1 - base_share;
        if (rest < static_cast<int>(sites.size())) break;
        auto w = std::make_shared<FairWitness>();
        w->rule = FairRule::Phi;
        w->var = x;
        w->inner = u;
        w->kids = {uw};
        AdequateMap uf{u, {}};
        std::map<Address, LTermPtr> choices;
        for (std::size_t k = 0; k < sites.size(); ++k) {
          int share = (k + 1 == sites.size())
                          ? rest
                          : 1 + static_cast<int>(rng() % (rest - (sites.size() - k - 1)));
          rest -= share;
          auto [arg, aw] = gen_fair_rec(share, p, rng,
                                        forbid_mask | (std::uint32_t{1} << xi));
          LTermPtr member = lam_indexed_sample(1, x, lsubterm_at(u, sites[k]), rng);
          uf.assignment[sites[k]] = arg;
          choices[sites[k]] = member;
          w->sites.push_back({sites[k], arg, member, aw});
        }
        w->subject = phi(x, uf, choices);
        if (!arity_facts_hold(w->subject)) break;
        return {w->subject, w};
      }
      default: return atom();
    }
  }
  return atom();
}

}  // namespace detail

template <class Rng>
inline GenFair gen_fair(const GenFairParams& p, Rng& rng) {
  for (int tries = 0; tries < 200; ++tries) {
    int nb = 2 + static_cast<int>(rng() % static_cast<unsigned>(std::max(1, p.max_nb - 1)));
    auto [t, w] = detail::gen_fair_rec(nb, p, rng, 0);
    if (t->size <= p.max_size && fair_nb(w) <= p.max_nb) {
      assert(fair_verify(w));
      return {t, w};
    }
  }
  // tiny fallback, always fits
  auto [t, w] = detail::gen_fair_rec(1, p, rng, 0);
  return {t, w};
}

// --- labellings of combinators ---------------------------------------------

// Index assignment for every S/K/I occurrence of a combinator, by address.
struct Labelling {
  std::map<Address, int> at;
};

namespace detail {
inline void ski_addresses(const TermPtr& t, Address& cur, std::vector<Address>& out) {
  switch (t->kind) {
    case TermKind::S:
    case TermKind::K:
    case TermKind::I: out.push_back(cur); break;
    case TermKind::App:
      cur.push_back(Dir::L);
      ski_addresses(t->left, cur, out);
      cur.back() = Dir::R;
      ski_addresses(t->right, cur, out);
      cur.pop_back();
      break;
    default: break;
  }
}
}  // namespace detail

inline std::vector<Address> ski_occurrences(const TermPtr& t) {
  std::vector<Address> out;
  Address cur;
  detail::ski_addresses(t, cur, out);
  return out;
}

inline Labelling zero_labelling(const TermPtr& t) {
  Labelling l;
  for (auto& a : ski_occurrences(t)) l.at.emplace(std::move(a), 0);
  return l;
}

inline LTermPtr apply_labelling(const Labelling& l, const TermPtr& t) {
  std::function<LTermPtr(const TermPtr&, Address&)> go = [&](const TermPtr& s,
                                                             Address& cur) -> LTermPtr {
    switch (s->kind) {
      case TermKind::Var: return latom_var(s->name);
      case TermKind::App: {
        cur.push_back(Dir::L);
        LTermPtr l1 = go(s->left, cur);
        cur.back() = Dir::R;
        LTermPtr r1 = go(s->right, cur);
        cur.pop_back();
        return lterm_app(std::move(l1), std::move(r1));
      }
      default: {
        auto it = l.at.find(cur);
        if (it == l.at.end())
          throw std::invalid_argument("partial labelling: no index at " + address_str(cur));
        int max = s->kind == TermKind::S ? 3 : 1;
        if (it->second < 0 || it->second > max)
          throw std::invalid_argument("labelling index out of range at " + address_str(cur));
        return latom(s->kind == TermKind::S   ? LKind::S
                     : s->kind == TermKind::K ? LKind::K
                                              : LKind::I,
                     it->second);
      }
    }
  };
  Address cur;
  return go(t, cur);
}

// L2 extends L: marks may only move forward (S: 0->1|2|3, 1->3, 2->3;
// K, I: 0->1).
inline bool is_extension(const TermPtr& t, const Labelling& l, const Labelling& l2) {
  auto occs = ski_occurrences(t);
  if (l.at.size() != occs.size() || l2.at.size() != occs.size())
    throw std::invalid_argument("labelling domain mismatch");
  for (const auto& a : occs) {
    auto i1 = l.at.find(a);
    auto i2 = l2.at.find(a);
    if (i1 == l.at.end() || i2 == l2.at.end())
      throw std::invalid_argument("labelling domain mismatch at " + address_str(a));
    int i = i1->second, j = i2->second;
    if (subterm_at(t, a)->kind == TermKind::S) {
      if (!(j == i || (i == 0 && j >= 1 && j <= 3) || (i == 2 && j == 3) || (i == 1 && j == 3)))
        return false;
    } else {
      if (!(j == i || (i == 0 && j == 1))) return false;
    }
  }
  return true;
}

// --- lifting combinator development steps to fair labelled steps -------------

struct LiftResult {
  Labelling labelling;
  LTermPtr step_to;  // v with theta(v) = t'
  FairWitnessPtr witness;
};

struct LiftError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Flip {
  Address at;
  int to;
};

// The lambda-member skeleton at `addr` promoted from index parity 0 to 1:
// I_0 -> I_1, (K_0 w) -> (K_1 w), (S_2 a b) -> (S_3 a' b').
inline bool promote_member_flips(const TermPtr& sub, const Address& addr,
                                 std::vector<Flip>& out) {
  if (sub->kind == TermKind::I) {
    out.push_back({addr, 1});
    return true;
  }
  TermPtr w;
  if (cklab::detail::match_K1(sub, w)) {
    Address a = addr;
    a.push_back(Dir::L);
    out.push_back({a, 1});
    return true;
  }
  TermPtr a, b;
  if (cklab::detail::match_S2(sub, a, b)) {
    Address s = addr;
    s.push_back(Dir::L);
    s.push_back(Dir::L);
    out.push_back({s, 3});
    Address la = addr;
    la.push_back(Dir::L);
    la.push_back(Dir::R);
    Address ra = addr;
    ra.push_back(Dir::R);
    return promote_member_flips(a, la, out) && promote_member_flips(b, ra, out);
  }
  return false;
}

// Marks the lambda-spine of site = lam_abstract(x, body) with index i and
// records the map from body subterm prefixes to site prefixes (the x-free
// pockets), so nested flips can be translated.
inline bool spine_flips(const TermPtr& site, const TermPtr& body, const std::string& x, int i,
                        const Address& addr, std::vector<Flip>& out,
                        std::vector<std::pair<Address, Address>>& pockets,
                        std::vector<Address>& body_prefix) {
  if (is_var(body) && body->name == x) {
    if (site->kind != TermKind::I) return false;
    out.push_back({addr, i});
    return true;
  }
  if (!occurs(x, body)) {
    TermPtr w;
    if (!cklab::detail::match_K1(site, w) || !term_eq(w, body)) return false;
    Address k = addr;
    k.push_back(Dir::L);
    out.push_back({k, i});
    Address pocket = addr;
    pocket.push_back(Dir::R);
    Address bp;
    for (const auto& seg : body_prefix)
      bp.insert(bp.end(), seg.begin(), seg.end());
    pockets.push_back({bp, pocket});
    return true;
  }
  TermPtr a, b;
  if (!cklab::detail::match_S2(site, a, b) || !is_app(body)) return false;
  Address s = addr;
  s.push_back(Dir::L);
  s.push_back(Dir::L);
  out.push_back({s, i + 2});
  Address la = addr;
  la.push_back(Dir::L);
  la.push_back(Dir::R);
  Address ra = addr;
  ra.push_back(Dir::R);
  body_prefix.push_back({Dir::L});
  bool ok = spine_flips(a, body->left, x, i, la, out, pockets, body_prefix);
  body_prefix.back() = {Dir::R};
  ok = ok && spine_flips(b, body->right, x, i, ra, out, pockets, body_prefix);
  body_prefix.pop_back();
  return ok;
}

// Flip sets suggested by the shape of a combinator tri step.
inline void guided_flips(const TermPtr& whole, const Address& pos, RuleTag rule,
                         const std::vector<ChainEntry>& chain,
                         std::vector<std::vector<Flip>>& cands) {
  auto at = [&](std::initializer_list<Dir> rel) {
    Address a = pos;
    a.insert(a.end(), rel.begin(), rel.end());
    return a;
  };
  if (chain.empty()) {
    switch (rule) {
      case RuleTag::KRed: cands.push_back({{at({Dir::L, Dir::L}), 1}}); break;
      case RuleTag::IRed: cands.push_back({{at({Dir::L}), 1}}); break;
      case RuleTag::SRed: {
        cands.push_back({{at({Dir::L, Dir::L, Dir::L}), 1}});
        // an S introduced by a lambda needs the whole member promoted
        std::vector<Flip> promo;
        Address part = at({Dir::L});
        if (promote_member_flips(subterm_at(whole, part), part, promo))
          cands.push_back(std::move(promo));
        break;
      }
      case RuleTag::SKKCollapse: {
        cands.push_back({{at({Dir::L, Dir::L}), 2}});
        cands.push_back({{at({Dir::L, Dir::L}), 3},
                         {at({Dir::L, Dir::R, Dir::L}), 1},
                         {at({Dir::R, Dir::L}), 1}});
        break;
      }
      default: break;
    }
    return;
  }
  // closure under abstraction: mark the lambda spine, then translate the
  // nested step's flips through the x-free pockets
  const ChainEntry& e = chain.front();
  TermPtr site = subterm_at(whole, pos);
  std::vector<ChainEntry> rest(chain.begin() + 1, chain.end());
  std::vector<std::vector<Flip>> inner_cands;
  guided_flips(e.body, e.inner_pos, rest.empty() ? e.inner_rule : RuleTag::UnderAbs,
               rest.empty() ? std::vector<ChainEntry>{} : rest, inner_cands);
  for (int i = 0; i <= 1; ++i) {
    std::vector<Flip> spine;
    std::vector<std::pair<Address, Address>> pockets;
    std::vector<Address> prefix;
    if (!spine_flips(site, e.body, e.var, i, pos, spine, pockets, prefix)) continue;
    for (const auto& inner : inner_cands) {
      std::vector<Flip> full = spine;
      bool ok = true;
      for (const auto& f : inner) {
        // translate f.at (an address in e.body) into whole-term coordinates
        bool placed = false;
        for (const auto& [bp, lp] : pockets) {
          if (bp.size() <= f.at.size() && std::equal(bp.begin(), bp.end(), f.at.begin())) {
            Address target = lp;
            target.insert(target.end(), f.at.begin() + bp.size(), f.at.end());
            full.push_back({target, f.to});
            placed = true;
            break;
          }
        }
        if (!placed) {
          ok = false;
          break;
        }
      }
      if (ok) cands.push_back(std::move(full));
    }
  }
}

}  // namespace detail

// Lifts a combinator development step t -> t' to the labelled calculus:
// finds an extension L2 of L with L2(t) fair and a tri step from L2(t)
// whose erasure is exactly t'.  Candidate extensions are derived from the
// step's shape first, then searched exhaustively over few-atom flips; the
// postcondition is machine-checked either way.
inline LiftResult lift_step(const TermPtr& t, const Labelling& l, const Step& step,
                            std::size_t fair_budget = 50000,
                            LStepperConfig cfg = {}) {
  {
    Stepper st;
    bool valid = false;
    for (const auto& s : st.steps(t, Relation::Tri))
      if (s.info.rule == step.info.rule && s.info.position == step.info.position &&
          s.info.level == step.info.level && term_eq(s.to, step.to))
        valid = true;
    if (!valid) throw LiftError("lift_step: not a valid development step on combinators");
  }

  std::vector<std::vector<detail::Flip>> cands;
  cands.push_back({});  // the step may already be enabled
  detail::guided_flips(t, step.info.position, step.info.rule, step.info.chain, cands);

  // fallback: single- and double-atom flips in a fixed order
  auto occs = ski_occurrences(t);
  auto targets_for = [&](const Address& a) {
    std::vector<int> out;
    int cur = l.at.at(a);
    if (subterm_at(t, a)->kind == TermKind::S) {
      if (cur == 0) out = {1, 2, 3};
      else if (cur == 1 || cur == 2) out = {3};
    } else if (cur == 0) {
      out = {1};
    }
    return out;
  };
  for (std::size_t i = 0; i < occs.size(); ++i)
    for (int v : targets_for(occs[i])) cands.push_back({{occs[i], v}});
  for (std::size_t i = 0; i < occs.size() && occs.size() <= 10; ++i)
    for (std::size_t j = i + 1; j < occs.size(); ++j)
      for (int vi : targets_for(occs[i]))
        for (int vj : targets_for(occs[j])) cands.push_back({{occs[i], vi}, {occs[j], vj}});

  LStepper lst{cfg};
  for (const auto& flips : cands) {
    Labelling l2 = l;
    bool bad = false;
    for (const auto& f : flips) {
      auto it = l2.at.find(f.at);
      if (it == l2.at.end()) {
        bad = true;
        break;
      }
      it->second = f.to;
    }
    if (bad || !is_extension(t, l, l2)) continue;
    LTermPtr lt = apply_labelling(l2, t);
    auto fw = fair_check(lt, fair_budget);
    if (!fw) continue;
    for (const auto& s : lst.steps(lt)) {
      if (term_eq(theta(s.to), step.to)) return {std::move(l2), s.to, *fw};
    }
  }
  throw LiftError("lift_step: no extension found for " + print_term(t) + " -> " +
                  print_term(step.to));
}

}  // namespace cklab

