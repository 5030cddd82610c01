#pragma once

// Abstraction operators and their inverses.
//
// bracket_abstract computes [x]u with the eta clause ([x](u x) = u when x
// does not occur in u); lam_abstract computes the eta-free variant.  The
// *_matches functions enumerate every u that abstracts to a given term,
// which is what realizes the closure-under-abstraction rules of the
// reduction systems.

#include <vector>

#include "cklab/term.hpp"

namespace cklab {

// [x]u, clauses in priority order:
//   1. K u          if x not in u
//   2. I            if u = x
//   3. u'           if u = (u' x), x not in u'
//   4. S [x]u1 [x]u2
inline TermPtr bracket_abstract(const std::string& x, const TermPtr& u) {
  if (!occurs(x, u)) return app(atom_K(), u);
  if (is_var(u) && u->name == x) return atom_I();
  // u is an application containing x from here on
  if (is_var(u->right) && u->right->name == x && !occurs(x, u->left)) return u->left;
  return app(atom_S(), bracket_abstract(x, u->left), bracket_abstract(x, u->right));
}

// lambda x.u, same clauses without the eta case.
inline TermPtr lam_abstract(const std::string& x, const TermPtr& u) {
  if (!occurs(x, u)) return app(atom_K(), u);
  if (is_var(u) && u->name == x) return atom_I();
  return app(atom_S(), lam_abstract(x, u->left), lam_abstract(x, u->right));
}

namespace detail {

// t = (S a b)?  (exactly two arguments)
inline bool match_S2(const TermPtr& t, TermPtr& a, TermPtr& b) {
  if (!is_app(t) || !is_app(t->left) || t->left->left->kind != TermKind::S) return false;
  a = t->left->right;
  b = t->right;
  return true;
}

// t = (K w)?
inline bool match_K1(const TermPtr& t, TermPtr& w) {
  if (!is_app(t) || t->left->kind != TermKind::K) return false;
  w = t->right;
  return true;
}

}  // namespace detail

// All u with [x]u = t.  Requires x not in t; returns {} otherwise.
// The eta clause contributes (t x) at every level, so each recursive call
// adds exactly one non-structural candidate.
inline std::vector<TermPtr> bracket_matches(const TermPtr& t, const std::string& x) {
  std::vector<TermPtr> out;
  if (occurs(x, t)) return out;
  TermPtr xv = mk_var(x);
  out.push_back(app(t, xv));  // clause 3: [x](t x) = t
  if (t->kind == TermKind::I) out.push_back(xv);
  TermPtr w;
  if (detail::match_K1(t, w)) out.push_back(w);
  TermPtr a, b;
  if (detail::match_S2(t, a, b)) {
    auto us = bracket_matches(a, x);
    auto vs = bracket_matches(b, x);
    for (const auto& u1 : us)
      for (const auto& u2 : vs) {
        // clause 4 fires only if clauses 1-3 do not: x must occur in (u1 u2)
        // and (u1 u2) must not be (w x) with x not in w.
        bool has_x = occurs(x, u1) || occurs(x, u2);
        bool eta_form = is_var(u2) && u2->name == x && !occurs(x, u1);
        if (has_x && !eta_form) out.push_back(app(u1, u2));
      }
  }
#ifndef NDEBUG
  for (const auto& m : out) assert(term_eq(bracket_abstract(x, m), t));
#endif
  return out;
}

// All u with lambda x.u = t.  Requires x not in t.  At most one member:
// the K/S head forms are mutually exclusive and recurse structurally.
inline std::vector<TermPtr> lam_matches(const TermPtr& t, const std::string& x) {
  std::vector<TermPtr> out;
  if (occurs(x, t)) return out;
  if (t->kind == TermKind::I) out.push_back(mk_var(x));
  TermPtr w;
  if (detail::match_K1(t, w)) out.push_back(w);
  TermPtr a, b;
  if (detail::match_S2(t, a, b)) {
    auto us = lam_matches(a, x);
    auto vs = lam_matches(b, x);
    for (const auto& u1 : us)
      for (const auto& u2 : vs)
        if (occurs(x, u1) || occurs(x, u2)) out.push_back(app(u1, u2));
  }
#ifndef NDEBUG
  for (const auto& m : out) assert(term_eq(lam_abstract(x, m), t));
#endif
  return out;
}

}  // namespace cklab
