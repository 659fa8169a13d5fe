#pragma once

#include "crm/facts.hpp"
#include "crm/modes.hpp"
#include "crm/rho.hpp"
#include "crm/rng.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace crm::testutil {

// Small language used by the property tests: chained outputs, a two-input
// predicate, and a constant argument. Every type keeps at most 4 constants so
// feature values can be compared extensionally.
inline std::pair<ModeSet, TypeDefs> property_language() {
    return parse_modes(
        "modeh(p(+t)).\n"
        "modeb(q(+t, -t)).\n"
        "modeb(r(+t, -u)).\n"
        "modeb(s(+u)).\n"
        "modeb(link(+t, +u)).\n"
        "modeb(tag(+t, #col)).\n"
        "type(t, [t1, t2, t3, t4]).\n"
        "type(u, [u1, u2, u3]).\n"
        "type(col, [red, blue]).\n");
}

// Draws a clause from the mode language by growing the body left to right,
// binding each input place to a variable already available at that type.
inline OrderedClause random_clause(const ModeSet& m, const TypeDefs& t, Rng& rng,
                                   std::size_t max_body) {
    const ModeDecl* head = m.head_decl();
    if (!head) throw ConfigError("random_clause: no head declaration");
    std::size_t counter = 0;
    std::vector<std::pair<std::string, std::string>> avail; // (var, type)
    auto fresh = [&](const std::string& type) {
        std::string v = "V" + std::to_string(counter++);
        avail.emplace_back(v, type);
        return Term::var(v);
    };

    bool in_head = true;
    std::function<Term(const ModeTerm&, bool&)> build = [&](const ModeTerm& mt, bool& ok) -> Term {
        switch (mt.kind) {
        case ModeTerm::Kind::input: {
            if (in_head) return fresh(mt.type); // the head introduces its inputs
            std::vector<std::size_t> fits;
            for (std::size_t i = 0; i < avail.size(); ++i)
                if (avail[i].second == mt.type) fits.push_back(i);
            if (fits.empty()) { ok = false; return Term::cst("_none"); }
            return Term::var(avail[fits[rng.below(fits.size())]].first);
        }
        case ModeTerm::Kind::output:
            return fresh(mt.type);
        case ModeTerm::Kind::constant: {
            auto it = t.find(mt.type);
            if (it == t.end() || it->second.empty()) { ok = false; return Term::cst("_none"); }
            return it->second[rng.below(it->second.size())];
        }
        case ModeTerm::Kind::structured: {
            std::vector<Term> parts;
            for (const ModeTerm& p : mt.parts) parts.push_back(build(p, ok));
            if (mt.functor.empty()) return Term::tuple(std::move(parts));
            return Term::cmp(mt.functor, std::move(parts));
        }
        }
        ok = false;
        return Term::cst("_none");
    };

    bool ok = true;
    std::vector<Term> head_args;
    for (const ModeTerm& a : head->args) head_args.push_back(build(a, ok));
    in_head = false;
    if (!ok) throw ConfigError("random_clause: unusable head declaration");
    Literal head_lit(head->predicate, std::move(head_args));

    std::vector<const ModeDecl*> body_decls;
    for (const ModeDecl& d : m.decls)
        if (!d.is_head) body_decls.push_back(&d);

    std::vector<Literal> body;
    std::size_t want = rng.below(max_body + 1);
    std::size_t guard = 0;
    while (body.size() < want && guard++ < 8 * (want + 1)) {
        const ModeDecl& d = *body_decls[rng.below(body_decls.size())];
        bool fine = true;
        if (d.is_equality()) {
            std::vector<std::string> fits;
            for (const auto& [v, ty] : avail)
                if (ty == d.equality_type()) fits.push_back(v);
            if (fits.size() < 2) continue;
            std::size_t i = rng.below(fits.size());
            std::size_t j = rng.below(fits.size() - 1);
            if (j >= i) ++j;
            if (i > j) std::swap(i, j);
            body.emplace_back("=", std::vector<Term>{Term::var(fits[i]), Term::var(fits[j])});
            continue;
        }
        std::vector<Term> args;
        std::size_t avail_mark = avail.size();
        for (const ModeTerm& a : d.args) args.push_back(build(a, fine));
        if (!fine) {
            avail.resize(avail_mark); // discard outputs of the failed draw
            continue;
        }
        body.emplace_back(d.predicate, std::move(args));
    }
    return OrderedClause(std::move(head_lit), std::move(body));
}

// Standardizes the basis members of c apart, as the Given steps of a
// derivation would, and returns the inverse renaming: applying theta to the
// renamed members recovers the originals.
struct LemmaSetup {
    std::vector<OrderedClause> s;
    Substitution theta;
};

inline LemmaSetup lemma_setup(const OrderedClause& c, const std::vector<OrderedClause>& bas) {
    LemmaSetup out;
    std::vector<std::string> hv;
    collect_vars(c.head, hv);
    std::set<std::string> head_vars(hv.begin(), hv.end());
    std::size_t k = 0;
    for (const OrderedClause& b : bas) {
        Substitution ren;
        for (const std::string& v : b.vars()) {
            if (head_vars.count(v)) continue;
            std::string nv = "R" + std::to_string(k++);
            ren.bind(v, Term::var(nv));
            out.theta.bind(nv, Term::var(v));
        }
        out.s.push_back(apply_substitution(b, ren));
    }
    return out;
}

// Random derivation over phi: Given steps standardize a member apart, rho1
// steps pick a random child of a random earlier step, rho2 steps concatenate
// two earlier steps with equal heads.
inline std::vector<DerivationStep> random_derivation(const std::vector<OrderedClause>& phi,
                                                     const ModeSet& m, const TypeDefs& t,
                                                     Rng& rng, std::size_t len) {
    ModeSet ext = extend_with_equality(m);
    std::vector<DerivationStep> steps;
    std::set<std::string> used;
    auto push_given = [&] {
        const OrderedClause& f = phi[rng.below(phi.size())];
        std::vector<std::string> hv;
        collect_vars(f.head, hv);
        OrderedClause g = standardize_apart(f, {hv.begin(), hv.end()}, used);
        for (const std::string& v : g.vars()) used.insert(v);
        steps.push_back(DerivationStep::given(g));
    };
    push_given();
    while (steps.size() < len) {
        switch (rng.below(3)) {
        case 0:
            push_given();
            break;
        case 1: {
            std::size_t p = rng.below(steps.size());
            std::vector<OrderedClause> kids = rho1(steps[p].clause, ext, t);
            if (kids.empty()) break;
            const OrderedClause& kid = kids[rng.below(kids.size())];
            const Literal& eq = kid.body.back();
            steps.push_back(DerivationStep::by_rho1(kid, p, eq.args[0].name, eq.args[1].name));
            break;
        }
        case 2: {
            std::size_t p = rng.below(steps.size());
            std::size_t q = rng.below(steps.size());
            if (!(steps[p].clause.head == steps[q].clause.head)) break;
            std::vector<Literal> body = steps[p].clause.body;
            for (const Literal& l : steps[q].clause.body) body.push_back(l);
            steps.push_back(DerivationStep::by_rho2(
                OrderedClause(steps[p].clause.head, std::move(body)), p, q));
            break;
        }
        }
    }
    return steps;
}

// Random extensional database over the body predicates of m: each ground
// tuple is included independently with probability `density`.
inline FactStore random_store(const ModeSet& m, const TypeDefs& t, Rng& rng, double density) {
    FactStore store;
    for (const ModeDecl& d : m.decls) {
        if (d.is_head || d.is_equality()) continue;
        std::vector<std::vector<Term>> columns;
        std::function<void(const ModeTerm&, std::vector<Term>&)> leaves =
            [&](const ModeTerm& mt, std::vector<Term>& col) {
                if (mt.kind == ModeTerm::Kind::structured) {
                    for (const ModeTerm& p : mt.parts) leaves(p, col);
                    return;
                }
                auto it = t.find(mt.type);
                if (it == t.end()) throw ConfigError("random_store: type without extension");
                col = it->second;
            };
        // only flat declarations are used by the property tests
        for (const ModeTerm& a : d.args) {
            std::vector<Term> col;
            leaves(a, col);
            columns.push_back(std::move(col));
        }
        std::vector<std::size_t> idx(columns.size(), 0);
        bool done = columns.empty();
        while (!done) {
            std::vector<Term> args;
            for (std::size_t k = 0; k < columns.size(); ++k) args.push_back(columns[k][idx[k]]);
            if (rng.chance(density)) store.add_global(Literal(d.predicate, std::move(args)));
            std::size_t k = 0;
            while (k < idx.size() && ++idx[k] == columns[k].size()) idx[k++] = 0;
            done = k == idx.size();
        }
        store.declare_predicate(d.predicate, d.arity());
    }
    return store;
}

} // namespace crm::testutil
