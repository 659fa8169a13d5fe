#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "parse.hpp"
#include "term.hpp"

namespace crm {

// A definite, non-recursive rule: head :- body. Literal order is significant
// (the dependency graph and derivation machinery are order-aware), but exact
// duplicate body literals are dropped at construction: the projection to a
// literal set is what every semantic notion here (subsumption, equivalence,
// evaluation) consumes, and keeping duplicates would let two distinct sinks
// carry identical induced subclauses.
struct OrderedClause {
    Literal head;
    std::vector<Literal> body;

    OrderedClause() = default;
    OrderedClause(Literal h, std::vector<Literal> b) : head(std::move(h)) {
        body.reserve(b.size());
        for (Literal& l : b) {
            bool dup = false;
            for (const Literal& k : body)
                if (k == l) { dup = true; break; }
            if (!dup) body.push_back(std::move(l));
        }
    }

    bool operator==(const OrderedClause& o) const {
        return head == o.head && body == o.body;
    }
    bool operator!=(const OrderedClause& o) const { return !(*this == o); }
    bool operator<(const OrderedClause& o) const {
        if (!(head == o.head)) return head < o.head;
        return body < o.body;
    }

    // First-occurrence variable order: head first, then body left to right.
    std::vector<std::string> vars() const {
        std::vector<std::string> out;
        collect_vars(head, out);
        for (const Literal& l : body) collect_vars(l, out);
        return out;
    }

    std::string str() const {
        std::string s = head.str();
        if (!body.empty()) {
            s += " :- ";
            for (std::size_t i = 0; i < body.size(); ++i) {
                if (i) s += ", ";
                s += body[i].str();
            }
        }
        s += '.';
        return s;
    }
};

inline OrderedClause parse_clause(const std::string& text) {
    auto [head, body] = Parser(text).parse_clause();
    return OrderedClause(std::move(head), std::move(body));
}

inline OrderedClause apply_substitution(const OrderedClause& c, const Substitution& s) {
    std::vector<Literal> body;
    body.reserve(c.body.size());
    for (const Literal& l : c.body) body.push_back(s.apply(l));
    return OrderedClause(s.apply(c.head), std::move(body));
}

// ---- fresh variables -------------------------------------------------------

// Lowest V<number> spelling not in `avoid`. A pure function of the avoid set,
// so every renaming operation built on it (standardize-apart, composition
// collision handling) is a function of its operands alone: the same operands
// give byte-identical clauses no matter what ran before in the process.
inline std::string fresh_var(const std::set<std::string>& avoid) {
    for (std::uint64_t n = 0;; ++n) {
        std::string name = "V" + std::to_string(n);
        if (!avoid.count(name)) return name;
    }
}

// Renames every variable not listed in `keep` to a fresh one. `avoid` lists
// extra names the fresh variables must not collide with (e.g. the other
// operand of a composition).
inline OrderedClause standardize_apart(const OrderedClause& c,
                                       const std::vector<std::string>& keep,
                                       const std::set<std::string>& avoid = {}) {
    std::set<std::string> blocked(avoid);
    for (const std::string& v : c.vars()) blocked.insert(v);
    for (const std::string& v : keep) blocked.insert(v);

    Substitution ren;
    for (const std::string& v : c.vars()) {
        if (std::find(keep.begin(), keep.end(), v) != keep.end()) continue;
        std::string nv = fresh_var(blocked);
        blocked.insert(nv);
        ren.bind(v, Term::var(nv));
    }
    return apply_substitution(c, ren);
}

// ---- theta-subsumption ------------------------------------------------------

namespace detail {

// One-way matching: variables of `pattern` may bind; `target` is frozen
// (its variables behave as constants).
inline bool match_term(const Term& pattern, const Term& target, Substitution& s) {
    if (pattern.is_var()) {
        if (const Term* b = s.lookup(pattern.name)) return *b == target;
        return s.bind(pattern.name, target);
    }
    if (pattern.kind != target.kind || pattern.name != target.name ||
        pattern.args.size() != target.args.size())
        return false;
    for (std::size_t i = 0; i < pattern.args.size(); ++i)
        if (!match_term(pattern.args[i], target.args[i], s)) return false;
    return true;
}

inline bool match_literal(const Literal& pattern, const Literal& target, Substitution& s) {
    if (pattern.predicate != target.predicate || pattern.positive != target.positive ||
        pattern.args.size() != target.args.size())
        return false;
    for (std::size_t i = 0; i < pattern.args.size(); ++i)
        if (!match_term(pattern.args[i], target.args[i], s)) return false;
    return true;
}

inline bool subsume_body(const std::vector<Literal>& pattern, std::size_t i,
                         const std::vector<Literal>& target, const Substitution& s) {
    if (i == pattern.size()) return true;
    for (const Literal& t : target) {
        Substitution trial = s;
        if (match_literal(pattern[i], t, trial) &&
            subsume_body(pattern, i + 1, target, trial))
            return true;
    }
    return false;
}

} // namespace detail

// True iff some substitution θ maps c's head onto d's head and every body
// literal of c onto a body literal of d (set inclusion Cθ ⊆ D).
inline bool theta_subsumes(const OrderedClause& c, const OrderedClause& d) {
    Substitution s;
    if (!detail::match_literal(c.head, d.head, s)) return false;
    return detail::subsume_body(c.body, 0, d.body, s);
}

// ---- equality normalization and equivalence ---------------------------------

// Unifies the terms linked by body equalities, drops the (now satisfied)
// equality literals, and rewrites the rest. Returns nothing when the
// equalities are unsatisfiable (distinct constants forced equal): such a
// clause denotes the always-false feature.
inline std::optional<OrderedClause> equality_normalize(const OrderedClause& c) {
    Substitution s;
    bool any = false;
    for (const Literal& l : c.body) {
        if (!l.is_equality()) continue;
        any = true;
        if (!unify(l.args[0], l.args[1], s)) return std::nullopt;
    }
    if (!any) return c;

    auto rewrite = [&s](const Literal& l) {
        std::vector<Term> args;
        args.reserve(l.args.size());
        for (const Term& a : l.args) args.push_back(resolve(a, s));
        return Literal(l.predicate, std::move(args), l.positive);
    };
    std::vector<Literal> body;
    for (const Literal& l : c.body)
        if (!l.is_equality()) body.push_back(rewrite(l));
    return OrderedClause(rewrite(c.head), std::move(body));
}

// Logical equivalence under the equality theory: normalize both sides, then
// require mutual theta-subsumption. Two unsatisfiable clauses are equivalent.
inline bool equivalent(const OrderedClause& c, const OrderedClause& d) {
    std::optional<OrderedClause> nc = equality_normalize(c);
    std::optional<OrderedClause> nd = equality_normalize(d);
    if (!nc || !nd) return !nc && !nd;
    return theta_subsumes(*nc, *nd) && theta_subsumes(*nd, *nc);
}

// ---- canonical form ---------------------------------------------------------

inline std::string canonical_var_name(std::size_t idx) {
    if (idx < 26) return std::string(1, char('A' + idx));
    return "Z" + std::to_string(idx - 25);
}

// Renames variables to A, B, C, ... in first-occurrence order. Deterministic,
// used for emission and duplicate detection of identically shaped clauses.
inline OrderedClause canonical_rename(const OrderedClause& c) {
    Substitution ren;
    std::size_t idx = 0;
    for (const std::string& v : c.vars()) ren.bind(v, Term::var(canonical_var_name(idx++)));
    return apply_substitution(c, ren);
}

// Equivalence-class prefilter: clauses with different keys are never checked
// pairwise. Collapsible duplicates (renamed copies of one component) can change
// the multiset, so a key match is necessary only for identically sized
// representatives — callers treat this purely as a bucketing hint.
inline std::uint64_t clause_shape_key(const OrderedClause& c) {
    std::vector<std::pair<std::string, std::size_t>> preds;
    preds.reserve(c.body.size());
    for (const Literal& l : c.body) preds.emplace_back(l.predicate, l.arity());
    std::sort(preds.begin(), preds.end());
    std::uint64_t h = hash_str(c.head.predicate);
    h = hash_combine(h, c.head.arity());
    for (auto& [p, a] : preds) h = hash_combine(hash_combine(h, hash_str(p)), a);
    return h;
}

// Plotkin reduction: drops body literals whose removal leaves an equivalent
// clause (the full clause must theta-subsume the shrunk one; the converse
// holds by set inclusion). Scans left to right and restarts after each
// removal, so the result is deterministic; reductions of equivalent clauses
// are variants of each other.
inline OrderedClause reduce_clause(const OrderedClause& c) {
    OrderedClause cur = c;
    bool changed = true;
    while (changed && !cur.body.empty()) {
        changed = false;
        for (std::size_t i = 0; i < cur.body.size(); ++i) {
            std::vector<Literal> rest;
            rest.reserve(cur.body.size() - 1);
            for (std::size_t j = 0; j < cur.body.size(); ++j)
                if (j != i) rest.push_back(cur.body[j]);
            OrderedClause shrunk(cur.head, rest);
            if (theta_subsumes(cur, shrunk)) {
                cur = std::move(shrunk);
                changed = true;
                break;
            }
        }
    }
    return cur;
}

// Bucketing key with the guarantee that equivalent clauses collide: the
// predicate multiset of the reduced, equality-normalized clause. (Distinct
// keys prove inequivalence; equal keys still need an equivalence check.)
inline std::uint64_t equivalence_key(const OrderedClause& c) {
    std::optional<OrderedClause> n = equality_normalize(c);
    if (!n) return hash_str("#unsat");
    return clause_shape_key(reduce_clause(*n));
}

// Order-preserving variant check: a bijective variable renaming fixing
// `fixed` maps c onto d literal by literal.
inline bool is_variant(const OrderedClause& c, const OrderedClause& d,
                       const std::vector<std::string>& fixed = {}) {
    if (c.body.size() != d.body.size()) return false;
    std::vector<std::string> cv = c.vars(), dv = d.vars();
    if (cv.size() != dv.size()) return false;
    Substitution fwd;
    std::set<std::string> used;
    auto map_var = [&](const std::string& a, const std::string& b) {
        bool a_fixed = std::find(fixed.begin(), fixed.end(), a) != fixed.end();
        bool b_fixed = std::find(fixed.begin(), fixed.end(), b) != fixed.end();
        if (a_fixed || b_fixed) {
            if (a != b) return false;
        }
        if (const Term* prev = fwd.lookup(a)) return prev->name == b;
        if (used.count(b)) return false;
        used.insert(b);
        return fwd.bind(a, Term::var(b));
    };
    // Walk both clauses in lockstep, pairing variables positionally.
    struct Walker {
        static bool terms(const Term& a, const Term& b,
                          const decltype(map_var)& mv) {
            if (a.kind != b.kind) return false;
            if (a.is_var()) return mv(a.name, b.name);
            if (a.name != b.name || a.args.size() != b.args.size()) return false;
            for (std::size_t i = 0; i < a.args.size(); ++i)
                if (!terms(a.args[i], b.args[i], mv)) return false;
            return true;
        }
        static bool lits(const Literal& a, const Literal& b,
                         const decltype(map_var)& mv) {
            if (a.predicate != b.predicate || a.positive != b.positive ||
                a.args.size() != b.args.size())
                return false;
            for (std::size_t i = 0; i < a.args.size(); ++i)
                if (!terms(a.args[i], b.args[i], mv)) return false;
            return true;
        }
    };
    if (!Walker::lits(c.head, d.head, map_var)) return false;
    for (std::size_t i = 0; i < c.body.size(); ++i)
        if (!Walker::lits(c.body[i], d.body[i], map_var)) return false;
    return true;
}

} // namespace crm
