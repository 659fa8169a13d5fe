#pragma once

#include "crm/crm.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace crm {

// Per-class sets of acceptable feature-clauses; a missing class is an empty set.
using AcceptableTheory = std::map<std::string, std::vector<OrderedClause>>;

// Sub-DAG of a CRM rooted at one output, with each vertex clause grounded by
// the instance substitution. Empty exactly when the output's feature is 0.
struct ExplanationGraph {
    std::size_t root = 0;
    std::vector<std::size_t> vertices; // ancestor set of root, ascending
    std::vector<std::pair<std::size_t, std::size_t>> edges; // parent -> child
    std::map<std::size_t, OrderedClause> clause_of; // vertex -> ground-headed clause

    bool empty() const { return vertices.empty(); }
};

// All vertices with a directed path to v, v included. Shared parents count once.
inline std::set<std::size_t> ancestors(const Crm& crm, std::size_t v) {
    if (v >= crm.size())
        throw DataError("ancestors: vertex " + std::to_string(v) + " out of range");
    std::set<std::size_t> anc;
    std::vector<std::size_t> stack{v};
    while (!stack.empty()) {
        std::size_t u = stack.back();
        stack.pop_back();
        if (!anc.insert(u).second) continue;
        for (std::size_t p : crm.vertices[u].parents) stack.push_back(p);
    }
    return anc;
}

namespace detail {

// Grounding substitution for one vertex clause: its head must cover a.id.
inline OrderedClause ground_clause(const OrderedClause& c, const Instance& a) {
    if (c.head.args.size() != 1)
        throw DataError("explanation: vertex head is not unary: " + c.head.str());
    Substitution theta;
    if (!unify(c.head.args[0], a.id, theta))
        throw DataError("explanation: head of " + c.str() + " does not cover instance " +
                        a.id.str());
    return apply_substitution(c, theta);
}

} // namespace detail

inline ExplanationGraph explanation_graph(const Crm& crm, std::size_t o,
                                          const Instance& a, const FactStore& store) {
    if (std::find(crm.outputs.begin(), crm.outputs.end(), o) == crm.outputs.end())
        throw DataError("explanation_graph: vertex " + std::to_string(o) +
                        " is not an output");
    ExplanationGraph eg;
    eg.root = o;
    const std::vector<std::uint8_t>& row = crm.ensure_features(a, store);
    if (!row[o]) return eg;

    std::set<std::size_t> anc = ancestors(crm, o);
    std::set<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t v : anc) {
        // anti-monotonicity: every ancestor of a firing vertex fires
        if (!row[v])
            throw DataError("explanation_graph: ancestor " + std::to_string(v) +
                            " of firing output " + std::to_string(o) +
                            " has feature value 0");
        eg.vertices.push_back(v);
        eg.clause_of.emplace(v, detail::ground_clause(crm.vertices[v].clause, a));
        for (std::size_t p : crm.vertices[v].parents) edges.emplace(p, v);
    }
    eg.edges.assign(edges.begin(), edges.end());
    return eg;
}

// True iff c, grounded onto the instance, is equivalent to some clause of the
// graph. Repeated head variables become explicit equalities before grounding,
// and equivalence itself normalizes equalities, so both syntactic styles of
// the same feature compare equal. Renaming either side changes nothing.
inline bool clause_contained(const OrderedClause& c, const ExplanationGraph& eg,
                             const Instance& a) {
    if (eg.empty()) return false;
    OrderedClause ground = detail::ground_clause(eq_body_form(c), a);
    for (const auto& [v, vc] : eg.clause_of)
        if (equivalent(ground, vc)) return true;
    return false;
}

// Prediction plus the explanation from the most relevant output. `output` is
// unset — and the graph empty — when the prediction disagrees with the target
// or every output is gated off.
struct MuxResult {
    std::string prediction;
    std::optional<std::size_t> output;
    ExplanationGraph explanation;
};

inline MuxResult mux_explain(const Crm& crm, const Instance& a,
                             const std::string& target_prediction,
                             const FactStore& store) {
    if (crm.labels.empty()) throw DataError("mux_explain: model has no class labels");
    Forward fw = forward(crm, a, store);
    std::size_t cls = 0;
    for (std::size_t k = 1; k < fw.scores.size(); ++k)
        if (fw.scores[k] > fw.scores[cls]) cls = k;

    MuxResult r;
    r.prediction = crm.labels[cls];
    if (r.prediction != target_prediction) return r;
    std::vector<std::size_t> rel = relevance(crm, fw);
    if (rel.empty() || !fw.f[rel.front()]) return r; // nothing gated on
    r.output = rel.front();
    r.explanation = explanation_graph(crm, *r.output, a, store);
    return r;
}

struct FidelityReport {
    std::size_t cp = 0, ip = 0; // correctly / incorrectly predicted
    std::size_t ce = 0, ie = 0; // consistently / inconsistently explained
    std::optional<double> predictive;
    std::optional<double> explanatory;
};

namespace detail {

// Conditions (ii) and (iii) on an explanation for predicted class c: some
// acceptable clause of c is contained — waived when the class's theory is
// empty — and no acceptable clause of any other class is.
inline bool consistent_with(const std::string& c, const ExplanationGraph& eg,
                            const Instance& a, const AcceptableTheory& acceptable) {
    auto own = acceptable.find(c);
    if (own != acceptable.end() && !own->second.empty()) {
        bool hit = false;
        for (const OrderedClause& t : own->second)
            if (clause_contained(t, eg, a)) { hit = true; break; }
        if (!hit) return false;
    }
    for (const auto& [cls, theory] : acceptable) {
        if (cls == c) continue;
        for (const OrderedClause& t : theory)
            if (clause_contained(t, eg, a)) return false;
    }
    return true;
}

} // namespace detail

// An instance is consistently explained iff the prediction matches its target,
// the multiplexer yields an explanation, and that explanation agrees with the
// acceptable theory of the predicted class.
inline bool consistently_explained(const Crm& crm, const Instance& a,
                                   const FactStore& store,
                                   const AcceptableTheory& acceptable) {
    MuxResult r = mux_explain(crm, a, a.target, store);
    if (!r.output) return false;
    return detail::consistent_with(r.prediction, r.explanation, a, acceptable);
}

inline FidelityReport fidelity_report(const Crm& crm, const Dataset& data,
                                      const FactStore& store,
                                      const AcceptableTheory& acceptable) {
    FidelityReport rep;
    for (const Instance& a : data) {
        MuxResult r = mux_explain(crm, a, a.target, store);
        bool correct = r.prediction == a.target;
        correct ? ++rep.cp : ++rep.ip;
        bool consistent =
            r.output && detail::consistent_with(r.prediction, r.explanation, a, acceptable);
        consistent ? ++rep.ce : ++rep.ie;
    }
    if (rep.cp + rep.ip > 0)
        rep.predictive = double(rep.cp) / double(rep.cp + rep.ip);
    if (rep.ce + rep.ie > 0)
        rep.explanatory = double(rep.ce) / double(rep.ce + rep.ie);
    return rep;
}

inline std::optional<double> predictive_fidelity(const Crm& crm, const Dataset& data,
                                                 const FactStore& store) {
    if (data.empty()) return std::nullopt;
    std::size_t cp = 0;
    for (const Instance& a : data)
        if (crm.labels.at(predict(crm, a, store).cls) == a.target) ++cp;
    return double(cp) / double(data.size());
}

inline std::optional<double> explanatory_fidelity(const Crm& crm, const Dataset& data,
                                                  const FactStore& store,
                                                  const AcceptableTheory& acceptable) {
    return fidelity_report(crm, data, store, acceptable).explanatory;
}

// Random-feature reference explainer: per instance, pick uniformly one clause
// whose feature fires, predict that clause's majority class over the data, and
// score the singleton explanation exactly as the CRM explanations are scored.
// Instances where no clause fires count as mispredicted and unexplained.
inline FidelityReport baseline_explainer(const Dataset& data, const FactStore& store,
                                         const std::vector<OrderedClause>& clauses,
                                         const AcceptableTheory& acceptable,
                                         std::uint64_t seed) {
    std::vector<std::vector<std::uint8_t>> fires(clauses.size());
    std::vector<std::string> majority(clauses.size());
    for (std::size_t k = 0; k < clauses.size(); ++k) {
        fires[k].resize(data.size());
        std::map<std::string, std::size_t> by;
        for (std::size_t i = 0; i < data.size(); ++i) {
            fires[k][i] = evaluate_feature(clauses[k], store, data[i].id) ? 1 : 0;
            if (fires[k][i]) ++by[data[i].target];
        }
        std::size_t best = 0;
        for (const auto& [cls, n] : by)
            if (n > best) { best = n; majority[k] = cls; } // ties keep the first class
    }

    FidelityReport rep;
    Rng pick = Rng(seed).fork(3);
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::vector<std::size_t> firing;
        for (std::size_t k = 0; k < clauses.size(); ++k)
            if (fires[k][i]) firing.push_back(k);
        if (firing.empty()) {
            ++rep.ip;
            ++rep.ie;
            continue;
        }
        std::size_t k = firing[pick.below(firing.size())];
        bool correct = majority[k] == data[i].target;
        correct ? ++rep.cp : ++rep.ip;

        bool consistent = false;
        if (correct) {
            ExplanationGraph eg;
            eg.vertices = {0};
            eg.clause_of.emplace(0, detail::ground_clause(eq_body_form(clauses[k]), data[i]));
            consistent = detail::consistent_with(majority[k], eg, data[i], acceptable);
        }
        consistent ? ++rep.ce : ++rep.ie;
    }
    if (rep.cp + rep.ip > 0)
        rep.predictive = double(rep.cp) / double(rep.cp + rep.ip);
    if (rep.ce + rep.ie > 0)
        rep.explanatory = double(rep.ce) / double(rep.ce + rep.ie);
    return rep;
}

// --- export ---

inline std::string explanation_dot(const Crm& crm, const ExplanationGraph& eg) {
    std::ostringstream os;
    os << "digraph explanation {\n  rankdir=BT;\n  node [shape=box];\n";
    for (std::size_t v : eg.vertices) {
        std::string label = eg.clause_of.at(v).str();
        std::string esc;
        for (char ch : label) {
            if (ch == '"' || ch == '\\') esc += '\\';
            esc += ch;
        }
        os << "  v" << v << " [label=\"" << esc << "\"";
        if (crm.vertices[v].kind == VertexKind::input) os << ", style=bold";
        if (v == eg.root) os << ", peripheries=2";
        os << "];\n";
    }
    for (const auto& [p, v] : eg.edges) os << "  v" << p << " -> v" << v << ";\n";
    os << "}\n";
    return os.str();
}

inline nlohmann::ordered_json explanation_json(const Crm& crm, const ExplanationGraph& eg,
                                               std::size_t relevance_rank = 0) {
    nlohmann::ordered_json j;
    j["root"] = eg.root;
    j["relevance_rank"] = relevance_rank;
    j["vertices"] = nlohmann::ordered_json::array();
    for (std::size_t v : eg.vertices) {
        nlohmann::ordered_json jv;
        jv["id"] = v;
        jv["kind"] = detail::kind_name(crm.vertices[v].kind);
        jv["clause"] = eg.clause_of.at(v).str();
        j["vertices"].push_back(std::move(jv));
    }
    j["edges"] = nlohmann::ordered_json::array();
    for (const auto& [p, v] : eg.edges) j["edges"].push_back({p, v});
    return j;
}

} // namespace crm
