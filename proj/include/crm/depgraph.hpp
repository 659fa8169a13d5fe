#pragma once

#include <set>
#include <utility>
#include <vector>

#include "clause.hpp"
#include "errors.hpp"
#include "modes.hpp"

namespace crm {

// Clause dependency-graph. Vertex 0 is the head literal; vertex i (i >= 1) is
// body literal i-1. Edges run from lower to higher index only:
//   (0, j)  iff a head input variable occurs as an input variable of literal j
//           with the same type;
//   (i, j)  iff 0 < i < j and an output variable of literal i occurs as an
//           input variable of literal j with the same type.
struct ClauseDependencyGraph {
    std::vector<Literal> literal_of;            // index = vertex
    std::vector<std::set<std::size_t>> out;     // forward adjacency
    std::vector<std::set<std::size_t>> in;      // reverse adjacency

    std::size_t size() const { return literal_of.size(); }

    std::vector<std::size_t> sources() const {
        std::vector<std::size_t> v;
        for (std::size_t i = 0; i < size(); ++i)
            if (in[i].empty()) v.push_back(i);
        return v;
    }

    std::vector<std::size_t> sinks() const {
        std::vector<std::size_t> v;
        for (std::size_t i = 0; i < size(); ++i)
            if (out[i].empty()) v.push_back(i);
        return v;
    }
};

inline ClauseDependencyGraph build_dependency_graph(const OrderedClause& c,
                                                    const LanguageWitness& w) {
    ClauseDependencyGraph g;
    g.literal_of.push_back(c.head);
    for (const Literal& l : c.body) g.literal_of.push_back(l);
    g.out.assign(g.size(), {});
    g.in.assign(g.size(), {});

    auto connect = [&g](std::size_t i, std::size_t j) {
        g.out[i].insert(j);
        g.in[j].insert(i);
    };
    auto shares = [](const std::vector<std::pair<std::string, std::string>>& a,
                     const std::vector<std::pair<std::string, std::string>>& b) {
        for (const auto& x : a)
            for (const auto& y : b)
                if (x == y) return true;
        return false;
    };

    for (std::size_t j = 1; j < g.size(); ++j)
        if (shares(w.roles[0].inputs, w.roles[j].inputs)) connect(0, j);
    for (std::size_t i = 1; i < g.size(); ++i)
        for (std::size_t j = i + 1; j < g.size(); ++j)
            if (shares(w.roles[i].outputs, w.roles[j].inputs)) connect(i, j);
    return g;
}

inline ClauseDependencyGraph build_dependency_graph(const OrderedClause& c,
                                                    const ModeSet& m,
                                                    const TypeDefs& t) {
    std::optional<LanguageWitness> w = in_mode_language(c, m, t);
    if (!w) throw DataError("clause not in mode language: " + c.str());
    return build_dependency_graph(c, *w);
}

inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
sources_and_sinks(const ClauseDependencyGraph& g) {
    return {g.sources(), g.sinks()};
}

inline bool is_m_simple(const OrderedClause& c, const LanguageWitness& w) {
    return build_dependency_graph(c, w).sinks().size() <= 1;
}

inline bool is_m_simple(const OrderedClause& c, const ModeSet& m, const TypeDefs& t) {
    return build_dependency_graph(c, m, t).sinks().size() <= 1;
}

// The union of all paths from the source vertex to v: exactly the ancestors
// of v plus v itself, with the edges induced among them (index monotonicity
// makes every induced edge lie on some source-to-v path).
struct InducedDag {
    std::set<std::size_t> vertices;
    std::set<std::pair<std::size_t, std::size_t>> edges;
};

inline InducedDag dag_to(const ClauseDependencyGraph& g, std::size_t v) {
    InducedDag d;
    std::vector<std::size_t> stack{v};
    d.vertices.insert(v);
    while (!stack.empty()) {
        std::size_t x = stack.back();
        stack.pop_back();
        for (std::size_t p : g.in[x])
            if (d.vertices.insert(p).second) stack.push_back(p);
    }
    for (std::size_t a : d.vertices)
        for (std::size_t b : g.out[a])
            if (d.vertices.count(b)) d.edges.emplace(a, b);
    return d;
}

// One maximal M-simple subclause per sink, in sink order: the ordered
// subclause whose dependency graph is the union of the paths into that sink.
inline std::vector<OrderedClause> basis(const OrderedClause& c, const LanguageWitness& w) {
    ClauseDependencyGraph g = build_dependency_graph(c, w);
    std::vector<OrderedClause> out;
    for (std::size_t s : g.sinks()) {
        InducedDag d = dag_to(g, s);
        std::vector<Literal> body;
        for (std::size_t v = 1; v < g.size(); ++v)
            if (d.vertices.count(v)) body.push_back(c.body[v - 1]);
        out.emplace_back(c.head, std::move(body));
    }
    return out;
}

inline std::vector<OrderedClause> basis(const OrderedClause& c, const ModeSet& m,
                                        const TypeDefs& t) {
    std::optional<LanguageWitness> w = in_mode_language(c, m, t);
    if (!w) throw DataError("clause not in mode language: " + c.str());
    return basis(c, *w);
}

} // namespace crm
