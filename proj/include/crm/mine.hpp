#pragma once

#include "crm/clause.hpp"
#include "crm/depgraph.hpp"
#include "crm/errors.hpp"
#include "crm/facts.hpp"
#include "crm/modes.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace crm {

namespace detail {

struct HeadLeaf {
    enum class Kind { input, constant } kind;
    std::string type;
};

inline void collect_head_leaves(const ModeTerm& mt, std::vector<HeadLeaf>& out) {
    switch (mt.kind) {
    case ModeTerm::Kind::input:
        out.push_back({HeadLeaf::Kind::input, mt.type});
        break;
    case ModeTerm::Kind::constant:
        out.push_back({HeadLeaf::Kind::constant, mt.type});
        break;
    case ModeTerm::Kind::output:
        throw ConfigError("clause enumeration does not support output places in the head");
    case ModeTerm::Kind::structured:
        for (const ModeTerm& p : mt.parts) collect_head_leaves(p, out);
        break;
    }
}

inline Term rebuild_head_term(const ModeTerm& mt, const std::vector<Term>& leaves,
                              std::size_t& next) {
    switch (mt.kind) {
    case ModeTerm::Kind::input:
    case ModeTerm::Kind::constant:
        return leaves[next++];
    case ModeTerm::Kind::structured: {
        std::vector<Term> parts;
        for (const ModeTerm& p : mt.parts) parts.push_back(rebuild_head_term(p, leaves, next));
        if (mt.functor.empty()) return Term::tuple(std::move(parts));
        return Term::cmp(mt.functor, std::move(parts));
    }
    default:
        throw ConfigError("clause enumeration does not support output places in the head");
    }
}

// All variable patterns for the head: each input place either reuses an
// earlier same-type head variable or introduces the next canonical one, so
// every partition of same-type places appears exactly once. Constant places
// range over their type extension.
struct HeadPattern {
    Literal head;
    std::vector<std::pair<std::string, std::string>> vars; // (name, type), distinct
};

inline std::vector<HeadPattern> head_patterns(const ModeDecl& decl, const TypeDefs& t) {
    std::vector<HeadLeaf> leaves;
    for (const ModeTerm& a : decl.args) collect_head_leaves(a, leaves);

    std::vector<HeadPattern> out;
    std::vector<Term> chosen;
    std::vector<std::pair<std::string, std::string>> blocks;
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == leaves.size()) {
            std::size_t next = 0;
            std::vector<Term> args;
            for (const ModeTerm& a : decl.args) args.push_back(rebuild_head_term(a, chosen, next));
            out.push_back({Literal(decl.predicate, std::move(args)), blocks});
            return;
        }
        const HeadLeaf& leaf = leaves[i];
        if (leaf.kind == HeadLeaf::Kind::constant) {
            auto it = t.find(leaf.type);
            if (it == t.end())
                throw ConfigError("head constant type without extension: " + leaf.type);
            for (const Term& v : it->second) {
                chosen.push_back(v);
                rec(i + 1);
                chosen.pop_back();
            }
            return;
        }
        // a fresh variable first, then each earlier block of the same type
        chosen.push_back(Term::var(canonical_var_name(blocks.size())));
        blocks.emplace_back(canonical_var_name(blocks.size()), leaf.type);
        rec(i + 1);
        blocks.pop_back();
        chosen.pop_back();
        for (const auto& [name, type] : blocks) {
            if (type != leaf.type) continue;
            chosen.push_back(Term::var(name));
            rec(i + 1);
            chosen.pop_back();
        }
    };
    rec(0);
    return out;
}

inline bool decl_has_outputs(const ModeDecl& d) {
    std::size_t in = 0, out = 0;
    for (const ModeTerm& a : d.args) count_leaves(a, in, out);
    return out > 0;
}

} // namespace detail

// Every clause of the mode language with at most max_body body literals whose
// dependency-graph has at most one sink, one representative per equivalence
// class. Heads cover all repeated-variable patterns, so equalities between
// head places surface as bodiless pattern clauses; equality body literals are
// generated exactly when the mode set declares them.
inline std::vector<OrderedClause> enumerate_simple_clauses(const ModeSet& m, const TypeDefs& t,
                                                           std::size_t max_body) {
    const ModeDecl* head = m.head_decl();
    if (!head) throw ConfigError("enumerate_simple_clauses: no head declaration");

    struct Node {
        std::vector<Literal> body;
        std::vector<std::pair<std::string, std::string>> avail; // (var, type)
        std::size_t var_count = 0;
        std::size_t permanent_sinks = 0;
    };

    std::vector<OrderedClause> out;
    std::multimap<std::uint64_t, std::size_t> seen;
    auto emit = [&](const OrderedClause& c) {
        std::uint64_t key = equivalence_key(c);
        auto [lo, hi] = seen.equal_range(key);
        for (auto it = lo; it != hi; ++it)
            if (equivalent(out[it->second], c)) return;
        seen.emplace(key, out.size());
        out.push_back(c);
    };

    std::vector<const ModeDecl*> body_decls;
    for (const ModeDecl& d : m.decls)
        if (!d.is_head) body_decls.push_back(&d);

    std::vector<detail::HeadPattern> patterns = detail::head_patterns(*head, t);
    // bodiless pattern clauses first, so each equivalence class is represented
    // by its repeated-variable head form rather than an equality-body rewrite
    for (const detail::HeadPattern& hp : patterns) emit(OrderedClause(hp.head, {}));

    for (const detail::HeadPattern& hp : patterns) {
        std::vector<Node> frontier;
        Node root;
        root.avail = hp.vars;
        root.var_count = hp.vars.size();
        frontier.push_back(root);

        for (std::size_t depth = 0; depth < max_body && !frontier.empty(); ++depth) {
            std::vector<Node> next;
            for (const Node& node : frontier) {
                for (const ModeDecl* d : body_decls) {
                    std::vector<std::pair<Literal, std::vector<std::pair<std::string, std::string>>>> cands;
                    if (d->is_equality()) {
                        for (std::size_t i = 0; i < node.avail.size(); ++i) {
                            if (node.avail[i].second != d->equality_type()) continue;
                            for (std::size_t j = i + 1; j < node.avail.size(); ++j) {
                                if (node.avail[j].second != d->equality_type()) continue;
                                cands.push_back(
                                    {Literal("=", {Term::var(node.avail[i].first),
                                                   Term::var(node.avail[j].first)}),
                                     {}});
                            }
                        }
                    } else {
                        // depth-first product over the argument places
                        std::vector<Term> args;
                        std::vector<std::pair<std::string, std::string>> outs;
                        std::size_t counter = node.var_count;
                        std::function<void(const ModeTerm&, std::function<void()>)> place =
                            [&](const ModeTerm& mt, std::function<void()> k) {
                                switch (mt.kind) {
                                case ModeTerm::Kind::input:
                                    for (const auto& [v, ty] : node.avail) {
                                        if (ty != mt.type) continue;
                                        args.push_back(Term::var(v));
                                        k();
                                        args.pop_back();
                                    }
                                    break;
                                case ModeTerm::Kind::output: {
                                    std::string v = canonical_var_name(counter++);
                                    outs.emplace_back(v, mt.type);
                                    args.push_back(Term::var(v));
                                    k();
                                    args.pop_back();
                                    outs.pop_back();
                                    --counter;
                                    break;
                                }
                                case ModeTerm::Kind::constant: {
                                    auto it = t.find(mt.type);
                                    if (it == t.end())
                                        throw ConfigError("constant type without extension: " +
                                                          mt.type);
                                    for (const Term& c : it->second) {
                                        args.push_back(c);
                                        k();
                                        args.pop_back();
                                    }
                                    break;
                                }
                                case ModeTerm::Kind::structured: {
                                    std::size_t mark = args.size();
                                    std::function<void(std::size_t, std::function<void()>)> seq =
                                        [&](std::size_t pi, std::function<void()> kk) {
                                            if (pi == mt.parts.size()) {
                                                std::vector<Term> parts(args.begin() + mark,
                                                                        args.end());
                                                args.resize(mark);
                                                args.push_back(
                                                    mt.functor.empty()
                                                        ? Term::tuple(parts)
                                                        : Term::cmp(mt.functor, parts));
                                                kk();
                                                args.pop_back();
                                                for (const Term& p : parts) args.push_back(p);
                                                return;
                                            }
                                            place(mt.parts[pi],
                                                  [&] { seq(pi + 1, kk); });
                                        };
                                    seq(0, k);
                                    break;
                                }
                                }
                            };
                        std::function<void(std::size_t)> walk = [&](std::size_t ai) {
                            if (ai == d->args.size()) {
                                cands.push_back({Literal(d->predicate, args), outs});
                                return;
                            }
                            place(d->args[ai], [&] { walk(ai + 1); });
                        };
                        walk(0);
                    }

                    for (auto& [lit, outs] : cands) {
                        bool dup = false;
                        for (const Literal& b : node.body)
                            if (b == lit) { dup = true; break; }
                        if (dup) continue;

                        Node child;
                        child.body = node.body;
                        child.body.push_back(lit);
                        child.avail = node.avail;
                        for (auto& o : outs) child.avail.push_back(o);
                        child.var_count = node.var_count + outs.size();

                        OrderedClause c(hp.head, child.body);
                        ClauseDependencyGraph g = build_dependency_graph(c, m, t);
                        std::vector<std::size_t> sinks = g.sinks();
                        child.permanent_sinks = 0;
                        for (std::size_t v : sinks) {
                            if (v == 0) continue;
                            const Literal& l = c.body[v - 1];
                            // equality literals never produce outputs, so they
                            // can never gain an outgoing edge
                            const ModeDecl* ld =
                                l.is_equality() ? nullptr : m.body_decl(l.predicate, l.arity());
                            bool can_grow = ld && detail::decl_has_outputs(*ld);
                            if (!can_grow) ++child.permanent_sinks;
                        }
                        if (sinks.size() <= 1) emit(c);
                        if (child.permanent_sinks <= 1 && child.body.size() < max_body)
                            next.push_back(std::move(child));
                    }
                }
            }
            frontier = std::move(next);
        }
    }
    return out;
}

// Rewrites repeated variables in the head into fresh variables linked by
// equality literals placed ahead of the body: the result is equivalent and
// its head is a variant of every other rewritten head, which is what the
// composition operators need.
inline OrderedClause eq_body_form(const OrderedClause& c) {
    std::set<std::string> used;
    {
        std::vector<std::string> vs;
        collect_vars(c.head, vs);
        for (const Literal& l : c.body) collect_vars(l, vs);
        used.insert(vs.begin(), vs.end());
    }
    std::size_t counter = 0;
    auto fresh = [&] {
        std::string v;
        do {
            v = "E" + std::to_string(++counter);
        } while (used.count(v));
        used.insert(v);
        return v;
    };

    std::set<std::string> seen;
    std::vector<Literal> eqs;
    std::function<Term(const Term&)> rewrite = [&](const Term& t) -> Term {
        switch (t.kind) {
        case Term::Kind::variable: {
            if (!seen.count(t.name)) {
                seen.insert(t.name);
                return t;
            }
            std::string v = fresh();
            eqs.emplace_back("=", std::vector<Term>{Term::var(t.name), Term::var(v)});
            return Term::var(v);
        }
        case Term::Kind::constant:
            return t;
        case Term::Kind::compound: {
            std::vector<Term> args;
            for (const Term& a : t.args) args.push_back(rewrite(a));
            return Term::cmp(t.name, std::move(args));
        }
        }
        return t;
    };

    std::vector<Term> head_args;
    for (const Term& a : c.head.args) head_args.push_back(rewrite(a));
    if (eqs.empty()) return c;
    std::vector<Literal> body = std::move(eqs);
    for (const Literal& l : c.body) body.push_back(l);
    return OrderedClause(Literal(c.head.predicate, std::move(head_args)), std::move(body));
}

// ---- support / precision filtering ---------------------------------------------

struct MinedClause {
    OrderedClause clause;
    std::size_t support = 0;
    double precision = 0.0;
};

// Keeps the clauses whose feature fires on at least min_support instances and
// whose firing set is at least min_precision pure in its majority label.
// Clauses that never fire are dropped regardless of thresholds.
inline std::vector<MinedClause> filter_by_stats(const std::vector<OrderedClause>& clauses,
                                                const Dataset& data, const FactStore& store,
                                                std::size_t min_support, double min_precision) {
    std::vector<MinedClause> out;
    for (const OrderedClause& c : clauses) {
        std::map<std::string, std::size_t> by_label;
        std::size_t support = 0;
        for (const Instance& inst : data) {
            if (!evaluate_feature(c, store, inst.id)) continue;
            ++support;
            ++by_label[inst.target];
        }
        if (support == 0) continue;
        std::size_t best = 0;
        for (const auto& [label, n] : by_label) best = std::max(best, n);
        double precision = double(best) / double(support);
        if (support >= min_support && precision >= min_precision)
            out.push_back({c, support, precision});
    }
    return out;
}

// ---- clause file io -------------------------------------------------------------

inline std::string mined_str(const std::vector<MinedClause>& clauses) {
    std::ostringstream os;
    for (const MinedClause& mc : clauses) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", mc.precision);
        os << "% support=" << mc.support << " precision=" << buf << "\n"
           << mc.clause.str() << "\n";
    }
    return os.str();
}

inline std::vector<MinedClause> mined_from_string(const std::string& text) {
    std::vector<MinedClause> out;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    bool pending = false;
    std::size_t support = 0;
    double precision = 0.0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string s = line;
        while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
        std::size_t at = s.find_first_not_of(" \t");
        if (at == std::string::npos) continue;
        s = s.substr(at);
        if (s[0] == '%') {
            unsigned long long sup = 0;
            double prec = 0.0;
            if (std::sscanf(s.c_str(), "%% support=%llu precision=%lf", &sup, &prec) == 2) {
                pending = true;
                support = sup;
                precision = prec;
            }
            continue;
        }
        try {
            OrderedClause c = parse_clause(s);
            out.push_back({std::move(c), pending ? support : 0, pending ? precision : 0.0});
        } catch (const ParseError& e) {
            throw DataError("clauses line " + std::to_string(lineno) + ": " + e.what());
        }
        pending = false;
    }
    return out;
}

inline void mined_to_file(const std::string& path, const std::vector<MinedClause>& clauses) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write clauses file: " + path);
    f << mined_str(clauses);
}

inline std::vector<MinedClause> mined_from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open clauses file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return mined_from_string(ss.str());
}

} // namespace crm
