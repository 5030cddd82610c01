#pragma once

// Core syntax for combinators: variables, S, K, I and binary application.
// Terms are immutable shared trees with structural equality; size and a
// structural hash are cached per node so sets of terms stay cheap.

#include <cassert>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace cklab {

struct Term;
using TermPtr = std::shared_ptr<const Term>;

enum class TermKind : std::uint8_t { Var, S, K, I, App };

struct Term {
  TermKind kind;
  std::string name;       // Var only
  TermPtr left, right;    // App only
  int size = 1;
  std::size_t hash = 0;
};

namespace detail {
inline std::size_t mix(std::size_t a, std::size_t b) {
  return a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
}
}  // namespace detail

inline TermPtr mk_var(std::string name) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Var;
  t->name = std::move(name);
  t->hash = detail::mix(0x11, std::hash<std::string>{}(t->name));
  return t;
}

inline const TermPtr& atom_S() {
  static const TermPtr t = [] {
    auto p = std::make_shared<Term>();
    p->kind = TermKind::S;
    p->hash = 0x5115;
    return p;
  }();
  return t;
}

inline const TermPtr& atom_K() {
  static const TermPtr t = [] {
    auto p = std::make_shared<Term>();
    p->kind = TermKind::K;
    p->hash = 0x1235;
    return p;
  }();
  return t;
}

inline const TermPtr& atom_I() {
  static const TermPtr t = [] {
    auto p = std::make_shared<Term>();
    p->kind = TermKind::I;
    p->hash = 0x9371;
    return p;
  }();
  return t;
}

inline TermPtr app(TermPtr l, TermPtr r) {
  assert(l && r);
  auto t = std::make_shared<Term>();
  t->kind = TermKind::App;
  t->size = l->size + r->size + 1;
  t->hash = detail::mix(detail::mix(0x4242, l->hash), r->hash);
  t->left = std::move(l);
  t->right = std::move(r);
  return t;
}

// (f a1 ... an), left-associated.
template <typename... Ts>
inline TermPtr app(TermPtr f, TermPtr a, TermPtr b, Ts... rest) {
  return app(app(std::move(f), std::move(a)), std::move(b), std::move(rest)...);
}

inline bool term_eq(const TermPtr& a, const TermPtr& b) {
  if (a.get() == b.get()) return true;
  if (a->kind != b->kind || a->hash != b->hash || a->size != b->size) return false;
  switch (a->kind) {
    case TermKind::Var: return a->name == b->name;
    case TermKind::App: return term_eq(a->left, b->left) && term_eq(a->right, b->right);
    default: return true;
  }
}

struct TermHash {
  std::size_t operator()(const TermPtr& t) const { return t->hash; }
};
struct TermEq {
  bool operator()(const TermPtr& a, const TermPtr& b) const { return term_eq(a, b); }
};

using TermSet = std::unordered_set<TermPtr, TermHash, TermEq>;
template <typename V>
using TermMap = std::unordered_map<TermPtr, V, TermHash, TermEq>;

inline int term_size(const TermPtr& t) { return t->size; }

inline bool is_var(const TermPtr& t) { return t->kind == TermKind::Var; }
inline bool is_app(const TermPtr& t) { return t->kind == TermKind::App; }
inline bool is_atom(const TermPtr& t) { return t->kind != TermKind::App; }

inline bool occurs(const std::string& x, const TermPtr& t) {
  if (t->kind == TermKind::Var) return t->name == x;
  if (t->kind == TermKind::App) return occurs(x, t->left) || occurs(x, t->right);
  return false;
}

inline void collect_vars(const TermPtr& t, std::vector<std::string>& out) {
  if (t->kind == TermKind::Var) {
    for (const auto& v : out)
      if (v == t->name) return;
    out.push_back(t->name);
  } else if (t->kind == TermKind::App) {
    collect_vars(t->left, out);
    collect_vars(t->right, out);
  }
}

inline std::vector<std::string> free_vars(const TermPtr& t) {
  std::vector<std::string> out;
  collect_vars(t, out);
  return out;
}

// --- addresses ---------------------------------------------------------

enum class Dir : std::uint8_t { L, R };
using Address = std::vector<Dir>;

inline std::string address_str(const Address& a) {
  std::string s = "[";
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += (a[i] == Dir::L ? 'l' : 'r');
    if (i + 1 < a.size()) s += ',';
  }
  return s + "]";
}

inline const TermPtr* subterm_at_ptr(const TermPtr& t, const Address& a) {
  const TermPtr* cur = &t;
  for (Dir d : a) {
    if ((*cur)->kind != TermKind::App) return nullptr;
    cur = (d == Dir::L) ? &(*cur)->left : &(*cur)->right;
  }
  return cur;
}

inline TermPtr subterm_at(const TermPtr& t, const Address& a) {
  const TermPtr* p = subterm_at_ptr(t, a);
  if (!p) throw std::invalid_argument("invalid address " + address_str(a));
  return *p;
}

inline TermPtr replace_at(const TermPtr& t, const Address& a, const TermPtr& s,
                          std::size_t from = 0) {
  if (from == a.size()) return s;
  if (t->kind != TermKind::App) throw std::invalid_argument("invalid address " + address_str(a));
  if (a[from] == Dir::L) return app(replace_at(t->left, a, s, from + 1), t->right);
  return app(t->left, replace_at(t->right, a, s, from + 1));
}

// --- substitution ------------------------------------------------------

// Simultaneous substitution: domain variables are replaced in one pass,
// images are not re-substituted.
using Subst = std::map<std::string, TermPtr>;

inline TermPtr substitute(const Subst& sigma, const TermPtr& t) {
  if (sigma.empty()) return t;
  switch (t->kind) {
    case TermKind::Var: {
      auto it = sigma.find(t->name);
      return it == sigma.end() ? t : it->second;
    }
    case TermKind::App: {
      TermPtr l = substitute(sigma, t->left);
      TermPtr r = substitute(sigma, t->right);
      if (l.get() == t->left.get() && r.get() == t->right.get()) return t;
      return app(std::move(l), std::move(r));
    }
    default: return t;
  }
}

// --- fresh variables ----------------------------------------------------

// Names starting with '#' are reserved for generated variables; the parser
// rejects them in user input so generated names can never collide.
constexpr char kFreshPrefix = '#';

class FreshVars {
 public:
  explicit FreshVars(std::string stem = "x") : stem_(std::move(stem)) {}
  std::string next() { return std::string(1, kFreshPrefix) + stem_ + std::to_string(n_++); }

 private:
  std::string stem_;
  int n_ = 0;
};

// --- lambda terms (input syntax for the H translation) ------------------

struct LambdaTerm;
using LambdaPtr = std::shared_ptr<const LambdaTerm>;

enum class LambdaKind : std::uint8_t { Var, App, Abs };

struct LambdaTerm {
  LambdaKind kind;
  std::string name;        // Var, Abs binder
  LambdaPtr left, right;   // App; Abs body in left
};

inline LambdaPtr lvar(std::string n) {
  auto t = std::make_shared<LambdaTerm>();
  t->kind = LambdaKind::Var;
  t->name = std::move(n);
  return t;
}
inline LambdaPtr lapp(LambdaPtr l, LambdaPtr r) {
  auto t = std::make_shared<LambdaTerm>();
  t->kind = LambdaKind::App;
  t->left = std::move(l);
  t->right = std::move(r);
  return t;
}
inline LambdaPtr labs(std::string x, LambdaPtr body) {
  auto t = std::make_shared<LambdaTerm>();
  t->kind = LambdaKind::Abs;
  t->name = std::move(x);
  t->left = std::move(body);
  return t;
}

// --- printing -----------------------------------------------------------

inline void print_term_rec(const TermPtr& t, std::string& out) {
  switch (t->kind) {
    case TermKind::Var: out += t->name; return;
    case TermKind::S: out += 'S'; return;
    case TermKind::K: out += 'K'; return;
    case TermKind::I: out += 'I'; return;
    case TermKind::App: {
      // flatten the left spine: (f a1 ... an)
      std::vector<const TermPtr*> args;
      const TermPtr* cur = &t;
      while ((*cur)->kind == TermKind::App) {
        args.push_back(&(*cur)->right);
        cur = &(*cur)->left;
      }
      out += '(';
      print_term_rec(*cur, out);
      for (auto it = args.rbegin(); it != args.rend(); ++it) {
        out += ' ';
        print_term_rec(**it, out);
      }
      out += ')';
      return;
    }
  }
}

inline std::string print_term(const TermPtr& t) {
  std::string out;
  print_term_rec(t, out);
  return out;
}

// --- parsing ------------------------------------------------------------

struct ParseError : std::runtime_error {
  std::size_t pos;
  ParseError(const std::string& msg, std::size_t p)
      : std::runtime_error(msg + " at position " + std::to_string(p)), pos(p) {}
};

namespace detail {

struct Cursor {
  const std::string& s;
  std::size_t i = 0;

  void skip_ws() {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r')) ++i;
  }
  bool eof() {
    skip_ws();
    return i >= s.size();
  }
  char peek() {
    skip_ws();
    return i < s.size() ? s[i] : '\0';
  }
  void expect(char c) {
    skip_ws();
    if (i >= s.size() || s[i] != c)
      throw ParseError(std::string("expected '") + c + "'", i);
    ++i;
  }
};

inline bool ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == kFreshPrefix;
}
inline bool ident_char(char c) {
  return ident_start(c) || (c >= '0' && c <= '9') || c == '\'';
}

inline std::string read_ident(Cursor& c) {
  c.skip_ws();
  if (c.i >= c.s.size() || !ident_start(c.s[c.i]))
    throw ParseError("expected identifier", c.i);
  std::size_t b = c.i;
  ++c.i;
  while (c.i < c.s.size() && ident_char(c.s[c.i])) ++c.i;
  return c.s.substr(b, c.i - b);
}

inline TermPtr parse_term_rec(Cursor& c, bool allow_reserved) {
  c.skip_ws();
  if (c.i >= c.s.size()) throw ParseError("unexpected end of input", c.i);
  if (c.s[c.i] == '(') {
    std::size_t open = c.i;
    ++c.i;
    TermPtr head = parse_term_rec(c, allow_reserved);
    if (c.peek() == ')') throw ParseError("application needs at least two terms", open);
    while (c.peek() != ')') {
      if (c.eof()) throw ParseError("unclosed '('", open);
      head = app(std::move(head), parse_term_rec(c, allow_reserved));
    }
    c.expect(')');
    return head;
  }
  std::size_t at = c.i;
  std::string id = read_ident(c);
  if (id == "S") return atom_S();
  if (id == "K") return atom_K();
  if (id == "I") return atom_I();
  if (!allow_reserved && id[0] == kFreshPrefix)
    throw ParseError("variable '" + id + "' uses the reserved '#' prefix", at);
  return mk_var(id);
}

}  // namespace detail

inline TermPtr parse_term(const std::string& text, bool allow_reserved = false) {
  detail::Cursor c{text};
  TermPtr t = detail::parse_term_rec(c, allow_reserved);
  if (!c.eof()) throw ParseError("trailing input", c.i);
  return t;
}

inline LambdaPtr parse_lambda_rec(detail::Cursor& c) {
  c.skip_ws();
  if (c.i >= c.s.size()) throw ParseError("unexpected end of input", c.i);
  if (c.s[c.i] == '\\') {
    ++c.i;
    std::size_t at = c.i;
    std::string x = detail::read_ident(c);
    if (x == "S" || x == "K" || x == "I")
      throw ParseError("'" + x + "' is reserved and cannot be a lambda variable", at);
    if (x[0] == kFreshPrefix)
      throw ParseError("variable '" + x + "' uses the reserved '#' prefix", at);
    c.expect('.');
    return labs(std::move(x), parse_lambda_rec(c));
  }
  if (c.s[c.i] == '(') {
    std::size_t open = c.i;
    ++c.i;
    LambdaPtr head = parse_lambda_rec(c);
    if (c.peek() == ')') throw ParseError("application needs at least two terms", open);
    while (c.peek() != ')') {
      if (c.eof()) throw ParseError("unclosed '('", open);
      head = lapp(std::move(head), parse_lambda_rec(c));
    }
    c.expect(')');
    return head;
  }
  std::size_t at = c.i;
  std::string id = detail::read_ident(c);
  if (id == "S" || id == "K" || id == "I")
    throw ParseError("'" + id + "' is reserved inside lambda terms", at);
  if (id[0] == kFreshPrefix)
    throw ParseError("variable '" + id + "' uses the reserved '#' prefix", at);
  return lvar(std::move(id));
}

inline LambdaPtr parse_lambda(const std::string& text) {
  detail::Cursor c{text};
  LambdaPtr t = parse_lambda_rec(c);
  if (!c.eof()) throw ParseError("trailing input", c.i);
  return t;
}

}  // namespace cklab
