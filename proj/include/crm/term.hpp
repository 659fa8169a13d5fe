#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace crm {

// First-order terms. Variables start with an upper-case letter or '_'; constants
// start with a lower-case letter or a digit. A compound is functor(args...); the
// empty functor spells the anonymous tuple "(a,b,...)" used for composite
// instance identifiers.
struct Term {
    enum class Kind { variable, constant, compound };

    Kind kind = Kind::constant;
    std::string name;        // variable or constant spelling; functor for compounds
    std::vector<Term> args;  // compound children, empty otherwise

    static Term var(std::string n) { return {Kind::variable, std::move(n), {}}; }
    static Term cst(std::string n) { return {Kind::constant, std::move(n), {}}; }
    static Term cmp(std::string functor, std::vector<Term> a) {
        return {Kind::compound, std::move(functor), std::move(a)};
    }
    static Term tuple(std::vector<Term> a) { return cmp("", std::move(a)); }

    bool is_var() const { return kind == Kind::variable; }
    bool is_const() const { return kind == Kind::constant; }
    bool is_compound() const { return kind == Kind::compound; }

    bool is_ground() const {
        if (kind == Kind::variable) return false;
        for (const Term& t : args)
            if (!t.is_ground()) return false;
        return true;
    }

    bool operator==(const Term& o) const {
        return kind == o.kind && name == o.name && args == o.args;
    }
    bool operator!=(const Term& o) const { return !(*this == o); }
    bool operator<(const Term& o) const {
        if (kind != o.kind) return kind < o.kind;
        if (name != o.name) return name < o.name;
        return args < o.args;
    }

    std::string str() const {
        if (!is_compound()) return name;
        std::string s = name;
        s += '(';
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (i) s += ',';
            s += args[i].str();
        }
        s += ')';
        return s;
    }
};

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    return h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
}

inline std::uint64_t hash_str(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull; // FNV-1a
    for (unsigned char c : s) { h ^= c; h *= 1099511628211ull; }
    return h;
}

inline std::uint64_t hash_term(const Term& t) {
    std::uint64_t h = hash_combine(std::uint64_t(t.kind), hash_str(t.name));
    for (const Term& a : t.args) h = hash_combine(h, hash_term(a));
    return h;
}

// An atom: predicate applied to terms. Bodies of feature-clauses are positive
// conditions; the flag exists so literals can represent either polarity where a
// caller needs it, and participates in identity.
struct Literal {
    std::string predicate;
    std::vector<Term> args;
    bool positive = true;

    Literal() = default;
    Literal(std::string p, std::vector<Term> a, bool pos = true)
        : predicate(std::move(p)), args(std::move(a)), positive(pos) {}

    std::size_t arity() const { return args.size(); }
    bool is_equality() const { return predicate == "=" && args.size() == 2; }

    bool operator==(const Literal& o) const {
        return positive == o.positive && predicate == o.predicate && args == o.args;
    }
    bool operator!=(const Literal& o) const { return !(*this == o); }
    bool operator<(const Literal& o) const {
        if (predicate != o.predicate) return predicate < o.predicate;
        if (positive != o.positive) return positive > o.positive;
        return args < o.args;
    }

    std::string str() const {
        std::string s;
        if (!positive) s += "not ";
        if (is_equality()) {
            s += args[0].str();
            s += '=';
            s += args[1].str();
            return s;
        }
        s += predicate;
        if (!args.empty()) {
            s += '(';
            for (std::size_t i = 0; i < args.size(); ++i) {
                if (i) s += ',';
                s += args[i].str();
            }
            s += ')';
        }
        return s;
    }
};

inline std::uint64_t hash_literal(const Literal& l) {
    std::uint64_t h = hash_str(l.predicate);
    h = hash_combine(h, l.positive ? 1 : 0);
    for (const Term& a : l.args) h = hash_combine(h, hash_term(a));
    return h;
}

// Variable-to-term mapping. Application replaces free variables simultaneously
// (no chasing), matching the usual definition of substitution application.
class Substitution {
public:
    Substitution() = default;

    bool bind(const std::string& v, Term t) {
        auto [it, inserted] = map_.emplace(v, std::move(t));
        return inserted || it->second == t;
    }
    const Term* lookup(const std::string& v) const {
        auto it = map_.find(v);
        return it == map_.end() ? nullptr : &it->second;
    }
    bool contains(const std::string& v) const { return map_.count(v) != 0; }
    std::size_t size() const { return map_.size(); }
    bool empty() const { return map_.empty(); }
    const std::map<std::string, Term>& entries() const { return map_; }

    Term apply(const Term& t) const {
        switch (t.kind) {
        case Term::Kind::variable:
            if (const Term* b = lookup(t.name)) return *b;
            return t;
        case Term::Kind::constant:
            return t;
        case Term::Kind::compound: {
            std::vector<Term> as;
            as.reserve(t.args.size());
            for (const Term& a : t.args) as.push_back(apply(a));
            return Term::cmp(t.name, std::move(as));
        }
        }
        return t;
    }

    Literal apply(const Literal& l) const {
        std::vector<Term> as;
        as.reserve(l.args.size());
        for (const Term& a : l.args) as.push_back(apply(a));
        return Literal(l.predicate, std::move(as), l.positive);
    }

    // Composition: applying compose(a,b) equals applying a then b.
    static Substitution compose(const Substitution& a, const Substitution& b) {
        Substitution r;
        for (const auto& [v, t] : a.map_) r.map_[v] = b.apply(t);
        for (const auto& [v, t] : b.map_)
            if (!r.map_.count(v)) r.map_[v] = t;
        return r;
    }

private:
    std::map<std::string, Term> map_;
};

// Collects variable names in first-occurrence order (depth-first, left to right).
inline void collect_vars(const Term& t, std::vector<std::string>& out) {
    if (t.is_var()) {
        for (const std::string& v : out)
            if (v == t.name) return;
        out.push_back(t.name);
        return;
    }
    for (const Term& a : t.args) collect_vars(a, out);
}

inline void collect_vars(const Literal& l, std::vector<std::string>& out) {
    for (const Term& a : l.args) collect_vars(a, out);
}

// Fully resolves a term against incrementally built bindings (chases
// variable chains, unlike Substitution::apply which is simultaneous).
inline Term resolve(const Term& t, const Substitution& s) {
    switch (t.kind) {
    case Term::Kind::variable:
        if (const Term* b = s.lookup(t.name)) return resolve(*b, s);
        return t;
    case Term::Kind::constant:
        return t;
    case Term::Kind::compound: {
        std::vector<Term> as;
        as.reserve(t.args.size());
        for (const Term& a : t.args) as.push_back(resolve(a, s));
        return Term::cmp(t.name, std::move(as));
    }
    }
    return t;
}

inline bool occurs(const std::string& v, const Term& t) {
    if (t.is_var()) return t.name == v;
    for (const Term& a : t.args)
        if (occurs(v, a)) return true;
    return false;
}

// Syntactic unification of two terms under an accumulating binding map.
// Returns false and leaves `s` in a partially extended state on failure; callers
// that need rollback should copy first (terms here are small).
inline bool unify(const Term& a, const Term& b, Substitution& s) {
    Term x = resolve(a, s);
    Term y = resolve(b, s);
    if (x.is_var()) {
        if (y.is_var() && y.name == x.name) return true;
        if (occurs(x.name, y)) return false;
        return s.bind(x.name, y);
    }
    if (y.is_var()) {
        if (occurs(y.name, x)) return false;
        return s.bind(y.name, x);
    }
    if (x.kind != y.kind || x.name != y.name || x.args.size() != y.args.size()) return false;
    for (std::size_t i = 0; i < x.args.size(); ++i)
        if (!unify(x.args[i], y.args[i], s)) return false;
    return true;
}

} // namespace crm
