#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "clause.hpp"
#include "depgraph.hpp"
#include "errors.hpp"
#include "modes.hpp"

namespace crm {

struct Omega {
    bool use_rho1 = true;
    bool use_rho2 = true;
};

namespace detail {

// Body output variables in first-occurrence order, with their types.
inline std::vector<std::pair<std::string, std::string>>
body_outputs(const LanguageWitness& w) {
    std::vector<std::pair<std::string, std::string>> out;
    std::set<std::string> seen;
    for (std::size_t i = 1; i < w.roles.size(); ++i)
        for (const auto& [v, t] : w.roles[i].outputs)
            if (seen.insert(v).second) out.emplace_back(v, t);
    return out;
}

// Union-find over variables, used to treat chains of equality literals as one
// class (the lexicographically least member represents).
class VarUnion {
public:
    std::string find(std::string v) const {
        for (;;) {
            auto it = parent_.find(v);
            if (it == parent_.end() || it->second == v) return v;
            v = it->second;
        }
    }
    void unite(const std::string& a, const std::string& b) {
        std::string ra = find(a), rb = find(b);
        if (ra == rb) return;
        if (rb < ra) std::swap(ra, rb);
        parent_[rb] = ra;
    }
    bool linked(const std::string& a, const std::string& b) const {
        return find(a) == find(b);
    }
    void absorb(const OrderedClause& c) {
        for (const Literal& l : c.body)
            if (l.is_equality() && l.args[0].is_var() && l.args[1].is_var())
                unite(l.args[0].name, l.args[1].name);
    }

private:
    std::map<std::string, std::string> parent_;
};

} // namespace detail

// One clause per unordered pair of distinct same-type output variables of the
// body, each appending the equality of the pair. Pairs already linked by the
// clause's own equality literals (directly or through a chain) are skipped:
// the appended literal would be entailed, leaving a clause equivalent to its
// parent's other children.
inline std::vector<OrderedClause> rho1(const OrderedClause& c, const ModeSet& m,
                                       const TypeDefs& t) {
    ModeSet ext = extend_with_equality(m);
    std::optional<LanguageWitness> w = in_mode_language(c, ext, t);
    if (!w) throw DataError("rho1: clause not in mode language: " + c.str());

    std::vector<std::pair<std::string, std::string>> outs = detail::body_outputs(*w);
    detail::VarUnion eq;
    eq.absorb(c);

    std::vector<OrderedClause> result;
    for (std::size_t i = 0; i < outs.size(); ++i)
        for (std::size_t j = i + 1; j < outs.size(); ++j) {
            if (outs[i].second != outs[j].second) continue;
            if (eq.linked(outs[i].first, outs[j].first)) continue;
            std::vector<Literal> body = c.body;
            body.emplace_back("=", std::vector<Term>{Term::var(outs[i].first),
                                                     Term::var(outs[j].first)});
            result.emplace_back(c.head, std::move(body));
        }
    return result;
}

// Head-aligned body concatenation. The second operand's head variables are
// renamed onto the first's; any of its remaining variables that collide with
// the first operand's are renamed fresh ("standardized apart"), so only
// genuinely shared structure is shared through the head.
inline OrderedClause rho2(const OrderedClause& a, const OrderedClause& b) {
    if (a.head.predicate != b.head.predicate || a.head.arity() != b.head.arity())
        throw DataError("rho2: head predicates differ: " + a.head.str() + " vs " +
                        b.head.str());

    Substitution ren;
    std::set<std::string> used;
    struct Align {
        static bool go(const Term& bt, const Term& at, Substitution& ren,
                       std::set<std::string>& used) {
            if (bt.is_var()) {
                if (!at.is_var()) return false;
                if (const Term* prev = ren.lookup(bt.name)) return prev->name == at.name;
                if (used.count(at.name)) return false;
                used.insert(at.name);
                return ren.bind(bt.name, at);
            }
            if (bt.kind != at.kind || bt.name != at.name || bt.args.size() != at.args.size())
                return false;
            for (std::size_t i = 0; i < bt.args.size(); ++i)
                if (!go(bt.args[i], at.args[i], ren, used)) return false;
            return true;
        }
    };
    for (std::size_t i = 0; i < b.head.args.size(); ++i)
        if (!Align::go(b.head.args[i], a.head.args[i], ren, used))
            throw DataError("rho2: heads do not align: " + a.head.str() + " vs " +
                            b.head.str());
    OrderedClause b2 = apply_substitution(b, ren);

    std::set<std::string> head_vars;
    {
        std::vector<std::string> hv;
        collect_vars(a.head, hv);
        head_vars.insert(hv.begin(), hv.end());
    }
    std::set<std::string> a_vars;
    for (const std::string& v : a.vars()) a_vars.insert(v);
    std::set<std::string> blocked = a_vars;
    for (const std::string& v : b2.vars()) blocked.insert(v);

    Substitution apart;
    bool any = false;
    for (const std::string& v : b2.vars()) {
        if (head_vars.count(v) || !a_vars.count(v)) continue;
        std::string nv = fresh_var(blocked);
        blocked.insert(nv);
        apart.bind(v, Term::var(nv));
        any = true;
    }
    if (any) b2 = apply_substitution(b2, apart);

    std::vector<Literal> body = a.body;
    for (const Literal& l : b2.body) body.push_back(l);
    return OrderedClause(a.head, std::move(body));
}

// ---- derivations -----------------------------------------------------------

struct DerivationStep {
    enum class Kind { given, rho1, rho2 };

    Kind kind = Kind::given;
    OrderedClause clause;
    std::size_t parent = 0;  // rho1 and rho2 (left); 0-based sequence index
    std::size_t parent2 = 0; // rho2 (right)
    std::string eq_left, eq_right; // rho1's unified pair

    static DerivationStep given(OrderedClause c) {
        DerivationStep s;
        s.kind = Kind::given;
        s.clause = std::move(c);
        return s;
    }
    static DerivationStep by_rho1(OrderedClause c, std::size_t p, std::string a,
                                  std::string b) {
        DerivationStep s;
        s.kind = Kind::rho1;
        s.clause = std::move(c);
        s.parent = p;
        s.eq_left = std::move(a);
        s.eq_right = std::move(b);
        return s;
    }
    static DerivationStep by_rho2(OrderedClause c, std::size_t left, std::size_t right) {
        DerivationStep s;
        s.kind = Kind::rho2;
        s.clause = std::move(c);
        s.parent = left;
        s.parent2 = right;
        return s;
    }
};

// Numbered transcript, one step per line: index, clause, justification.
inline std::string transcript_str(const std::vector<DerivationStep>& steps) {
    std::string s;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const DerivationStep& st = steps[i];
        s += std::to_string(i + 1);
        s += '\t';
        s += st.clause.str();
        s += '\t';
        switch (st.kind) {
        case DerivationStep::Kind::given:
            s += "Given";
            break;
        case DerivationStep::Kind::rho1:
            s += std::to_string(st.parent + 1) + ", rho1, " + st.eq_left + ", " +
                 st.eq_right;
            break;
        case DerivationStep::Kind::rho2:
            s += std::to_string(st.parent + 1) + ", " + std::to_string(st.parent2 + 1) +
                 ", rho2";
            break;
        }
        s += '\n';
    }
    return s;
}

// Checks a derivation sequence step by step: a Given must be a renaming of a
// member of phi whose non-head variables are fresh to the sequence; a rho1
// step must be one of its parent's rho1 children; a rho2 step must be the
// literal body concatenation of two earlier steps with identical heads.
inline bool verify_derivation(const std::vector<DerivationStep>& steps,
                              const std::vector<OrderedClause>& phi, const Omega& omega,
                              const ModeSet& m, const TypeDefs& t) {
    std::set<std::string> seen_vars;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const DerivationStep& st = steps[i];
        switch (st.kind) {
        case DerivationStep::Kind::given: {
            bool matches = false;
            for (const OrderedClause& f : phi)
                if (is_variant(f, st.clause)) { matches = true; break; }
            if (!matches) return false;
            std::set<std::string> head_vars;
            {
                std::vector<std::string> hv;
                collect_vars(st.clause.head, hv);
                head_vars.insert(hv.begin(), hv.end());
            }
            for (const std::string& v : st.clause.vars())
                if (!head_vars.count(v) && seen_vars.count(v)) return false;
            break;
        }
        case DerivationStep::Kind::rho1: {
            if (!omega.use_rho1 || st.parent >= i) return false;
            std::vector<OrderedClause> children;
            try {
                children = rho1(steps[st.parent].clause, m, t);
            } catch (const DataError&) {
                return false;
            }
            bool member = false;
            for (const OrderedClause& c : children)
                if (c == st.clause) { member = true; break; }
            if (!member) return false;
            Literal want("=", {Term::var(st.eq_left), Term::var(st.eq_right)});
            if (st.clause.body.empty() || !(st.clause.body.back() == want)) return false;
            break;
        }
        case DerivationStep::Kind::rho2: {
            if (!omega.use_rho2 || st.parent >= i || st.parent2 >= i) return false;
            const OrderedClause& p1 = steps[st.parent].clause;
            const OrderedClause& p2 = steps[st.parent2].clause;
            if (!(p1.head == p2.head)) return false;
            std::vector<Literal> body = p1.body;
            for (const Literal& l : p2.body) body.push_back(l);
            if (!(OrderedClause(p1.head, std::move(body)) == st.clause)) return false;
            break;
        }
        }
        for (const std::string& v : st.clause.vars()) seen_vars.insert(v);
    }
    return true;
}

// Linear shape: a rho2 chain growing by one earlier Given at a time (either
// operand order), followed by a run of rho1 steps each extending the previous
// step. Givens may appear anywhere before the rho1 run.
inline bool is_linear(const std::vector<DerivationStep>& steps) {
    if (steps.empty()) return false;
    std::size_t j = steps.size();
    while (j > 0 && steps[j - 1].kind == DerivationStep::Kind::rho1) --j;
    // steps[j..] is the rho1 run; each must extend its immediate predecessor.
    for (std::size_t i = j; i < steps.size(); ++i)
        if (i == 0 || steps[i].parent != i - 1) return false;

    bool chain_started = false;
    std::size_t chain = 0;
    for (std::size_t i = 0; i < j; ++i) {
        const DerivationStep& st = steps[i];
        if (st.kind == DerivationStep::Kind::given) continue;
        if (st.kind != DerivationStep::Kind::rho2) return false;
        std::size_t a = st.parent, b = st.parent2;
        if (a >= i || b >= i) return false;
        auto is_given = [&](std::size_t k) {
            return steps[k].kind == DerivationStep::Kind::given;
        };
        bool ok;
        if (!chain_started) {
            ok = is_given(a) && is_given(b);
        } else {
            ok = (a == chain && is_given(b)) || (b == chain && is_given(a));
        }
        if (!ok) return false;
        chain = i;
        chain_started = true;
    }
    return true;
}

// Executes the Derivation Lemma: given Basis(c) ⊆ sθ, chains the covering
// members of s with rho2, then equates (via rho1) the variables θ maps to a
// common term, class by class against the first member. The final clause is
// equivalent to c under equality normalization.
inline std::vector<DerivationStep> reconstruct_from_basis(
    const OrderedClause& c, const std::vector<OrderedClause>& s,
    const Substitution& theta, const ModeSet& m, const TypeDefs& t) {
    ModeSet ext = extend_with_equality(m);
    std::vector<OrderedClause> bas = basis(c, ext, t);

    auto set_equal = [](const OrderedClause& x, const OrderedClause& y) {
        if (!(x.head == y.head)) return false;
        std::set<Literal> sx(x.body.begin(), x.body.end());
        std::set<Literal> sy(y.body.begin(), y.body.end());
        return sx == sy;
    };

    std::vector<std::size_t> cover;
    for (const OrderedClause& b : bas) {
        bool found = false;
        for (std::size_t i = 0; i < s.size() && !found; ++i) {
            if (!set_equal(apply_substitution(s[i], theta), b)) continue;
            found = true;
            bool have = false;
            for (std::size_t k : cover)
                if (k == i) { have = true; break; }
            if (!have) cover.push_back(i);
        }
        if (!found)
            throw DataError("reconstruct_from_basis: basis member not covered: " + b.str());
    }

    std::vector<DerivationStep> steps;
    std::size_t chain = 0;
    for (std::size_t k = 0; k < cover.size(); ++k) {
        const OrderedClause& g = s[cover[k]];
        if (k > 0 && !(g.head == steps[chain].clause.head))
            throw DataError("reconstruct_from_basis: member heads differ");
        steps.push_back(DerivationStep::given(g));
        std::size_t gi = steps.size() - 1;
        if (k == 0) {
            chain = gi;
            continue;
        }
        std::vector<Literal> body = steps[chain].clause.body;
        for (const Literal& l : g.body) body.push_back(l);
        steps.push_back(DerivationStep::by_rho2(
            OrderedClause(steps[chain].clause.head, std::move(body)), chain, gi));
        chain = steps.size() - 1;
    }

    // Equate, per θ-class, the later output variables with the first.
    OrderedClause cur = steps[chain].clause;
    std::optional<LanguageWitness> w = in_mode_language(cur, ext, t);
    if (!w)
        throw DataError("reconstruct_from_basis: chained clause left the language");
    std::set<std::string> outputs;
    for (const auto& [v, ty] : detail::body_outputs(*w)) outputs.insert(v);

    std::map<Term, std::vector<std::string>> classes;
    for (const std::string& v : cur.vars()) {
        if (!outputs.count(v)) continue;
        const Term* img = theta.lookup(v);
        classes[img ? *img : Term::var(v)].push_back(v);
    }
    for (const auto& [img, members] : classes) {
        for (std::size_t i = 1; i < members.size(); ++i) {
            std::vector<Literal> body = cur.body;
            body.emplace_back("=", std::vector<Term>{Term::var(members[0]),
                                                     Term::var(members[i])});
            cur = OrderedClause(cur.head, std::move(body));
            steps.push_back(DerivationStep::by_rho1(cur, chain, members[0], members[i]));
            chain = steps.size() - 1;
        }
    }
    return steps;
}

// Rewrites a verified derivation into linear shape: the Given leaves of the
// final step's ancestry are chained left to right with rho2, then the
// collected equalities are replayed as a rho1 run (skipping any already
// implied by earlier ones). The final clauses are equivalent.
inline std::vector<DerivationStep> linearize(const std::vector<DerivationStep>& steps,
                                             const std::vector<OrderedClause>& phi,
                                             const ModeSet& m, const TypeDefs& t) {
    if (!verify_derivation(steps, phi, Omega{true, true}, m, t))
        throw DataError("linearize: input derivation does not verify");

    std::vector<std::size_t> leaves; // Given step indices, left-to-right, with repeats
    std::vector<std::pair<std::string, std::string>> eqs;
    std::size_t expansions = 0;
    std::function<void(std::size_t)> walk = [&](std::size_t i) {
        if (++expansions > 100000)
            throw DataError("linearize: derivation expands beyond the supported size");
        const DerivationStep& st = steps[i];
        switch (st.kind) {
        case DerivationStep::Kind::given:
            leaves.push_back(i);
            break;
        case DerivationStep::Kind::rho1:
            walk(st.parent);
            eqs.emplace_back(st.eq_left, st.eq_right);
            break;
        case DerivationStep::Kind::rho2:
            walk(st.parent);
            walk(st.parent2);
            break;
        }
    };
    walk(steps.size() - 1);

    std::vector<DerivationStep> out;
    std::map<std::size_t, std::size_t> given_at; // original index -> out index
    std::size_t chain = 0;
    bool chain_started = false;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        std::size_t orig = leaves[li];
        auto it = given_at.find(orig);
        std::size_t gi;
        if (it == given_at.end()) {
            out.push_back(DerivationStep::given(steps[orig].clause));
            gi = out.size() - 1;
            given_at[orig] = gi;
        } else {
            gi = it->second;
        }
        if (!chain_started) {
            chain = gi;
            chain_started = true;
            continue;
        }
        std::vector<Literal> body = out[chain].clause.body;
        for (const Literal& l : out[gi].clause.body) body.push_back(l);
        out.push_back(DerivationStep::by_rho2(
            OrderedClause(out[chain].clause.head, std::move(body)), chain, gi));
        chain = out.size() - 1;
    }

    detail::VarUnion linked;
    linked.absorb(out[chain].clause);
    for (const auto& [a, b] : eqs) {
        if (linked.linked(a, b)) continue;
        std::vector<Literal> body = out[chain].clause.body;
        body.emplace_back("=", std::vector<Term>{Term::var(a), Term::var(b)});
        out.push_back(DerivationStep::by_rho1(OrderedClause(out[chain].clause.head, body),
                                              chain, a, b));
        chain = out.size() - 1;
        linked.unite(a, b);
    }
    return out;
}

// Everything derivable from phi in at most `depth` rounds of operator
// application, pruned by `filter` (phi itself is exempt) and deduplicated by
// equivalence behind a predicate-multiset prefilter.
inline std::vector<OrderedClause> bounded_closure(
    const std::vector<OrderedClause>& phi, const Omega& omega, std::size_t depth,
    const std::function<bool(const OrderedClause&)>& filter, const ModeSet& m,
    const TypeDefs& t, std::size_t max_clauses = 100000) {
    std::vector<OrderedClause> pool;
    std::multimap<std::uint64_t, std::size_t> index;
    auto try_add = [&](const OrderedClause& c) {
        std::uint64_t key = equivalence_key(c);
        auto [lo, hi] = index.equal_range(key);
        for (auto it = lo; it != hi; ++it)
            if (equivalent(pool[it->second], c)) return false;
        if (pool.size() >= max_clauses)
            throw DataError("bounded_closure: clause budget exceeded");
        pool.push_back(c);
        index.emplace(key, pool.size() - 1);
        return true;
    };

    for (const OrderedClause& c : phi) try_add(c);

    std::size_t first_new = 0;
    for (std::size_t round = 0; round < depth; ++round) {
        std::size_t begin_new = first_new, end_pool = pool.size();
        std::vector<OrderedClause> found;
        if (omega.use_rho1)
            for (std::size_t i = begin_new; i < end_pool; ++i)
                for (const OrderedClause& r : rho1(pool[i], m, t))
                    if (filter(r)) found.push_back(r);
        if (omega.use_rho2)
            for (std::size_t i = 0; i < end_pool; ++i)
                for (std::size_t j = 0; j < end_pool; ++j) {
                    if (i < begin_new && j < begin_new) continue;
                    OrderedClause r = rho2(pool[i], pool[j]);
                    if (filter(r)) found.push_back(r);
                }
        first_new = end_pool;
        for (const OrderedClause& c : found) try_add(c);
        if (pool.size() == end_pool) break;
    }
    return pool;
}

} // namespace crm
