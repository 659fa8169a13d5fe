#pragma once

#include "crm/clause.hpp"
#include "crm/errors.hpp"
#include "crm/facts.hpp"
#include "crm/mine.hpp"
#include "crm/modes.hpp"
#include "crm/rho.hpp"
#include "crm/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace crm {

enum class VertexKind { input, comp_rho1, comp_rho2 };

struct CrmVertex {
    OrderedClause clause;
    VertexKind kind = VertexKind::input;
    std::vector<std::size_t> parents; // empty | {rho1 parent} | {rho2 left, right}
};

// Support/precision gate applied to composed clauses during randomized
// construction. Counting is over `data` targets (the signal the network is
// fit to), mirroring the constraints applied to the mined input clauses.
struct CrmFilter {
    const Dataset* data = nullptr;
    const FactStore* facts = nullptr;
    std::size_t min_support = 10;
    double min_precision = 0.5;
    std::size_t retry_cap = 20;
};

struct TrainConfig {
    double learning_rate = 0.001;
    std::size_t epochs = 1;
    std::string optimizer = "adam"; // "adam" | "sgd"
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    std::optional<std::size_t> early_stop_patience;
};

// Gated composition network. Vertex order is topological by construction
// (parents precede children), inputs occupy a prefix, outputs are the sinks.
struct Crm {
    std::vector<CrmVertex> vertices;
    std::vector<std::size_t> inputs;
    std::vector<std::size_t> outputs;

    // weights[v] aligns with vertices[v].parents; inputs carry no weights
    std::vector<std::vector<double>> weights;
    // affine readout over output activations, row per class, then softmax
    std::vector<std::vector<double>> readout_w;
    std::vector<double> readout_b;
    std::vector<std::string> labels; // class index -> label; set by training

    std::string activation = "relu"; // hidden gate; inputs always pass through
    std::string modes_hash_hex;      // provenance tag for artifact consistency

    // optimizer state, persisted so training can resume where it stopped
    std::vector<double> adam_m, adam_v;
    std::uint64_t adam_t = 0;
    std::size_t epochs_trained = 0;

    // (instance id string) -> per-vertex 0/1 feature values
    mutable std::unordered_map<std::string, std::vector<std::uint8_t>> feature_cache;

    std::size_t size() const { return vertices.size(); }

    // Feature values are weight-independent, so each instance is evaluated
    // once. rho2 vertices conjoin bodies that share only head variables,
    // and the head is ground under the instance, so their value is the AND
    // of the parents'. rho1 children are evaluated only when the parent
    // fired: a 0 is inherited (anti-monotonicity), never recomputed.
    const std::vector<std::uint8_t>& ensure_features(const Instance& a,
                                                     const FactStore& store) const {
        std::string key = a.id.str();
        auto it = feature_cache.find(key);
        if (it != feature_cache.end() && it->second.size() == vertices.size())
            return it->second;
        std::vector<std::uint8_t> row(vertices.size(), 0);
        for (std::size_t v = 0; v < vertices.size(); ++v) {
            const CrmVertex& vx = vertices[v];
            switch (vx.kind) {
            case VertexKind::input:
                row[v] = evaluate_feature(vx.clause, store, a.id) ? 1 : 0;
                break;
            case VertexKind::comp_rho2:
                row[v] = row[vx.parents[0]] & row[vx.parents[1]];
                break;
            case VertexKind::comp_rho1:
                row[v] = row[vx.parents[0]] &&
                                 evaluate_feature(vx.clause, store, a.id)
                             ? 1
                             : 0;
                break;
            }
        }
        return feature_cache[key] = std::move(row);
    }
};

namespace detail {

inline double gate(const std::string& activation, double x) {
    if (activation == "relu") return x > 0.0 ? x : 0.0;
    if (activation == "identity") return x;
    throw ConfigError("unknown activation: " + activation);
}

inline double gate_grad(const std::string& activation, double x) {
    if (activation == "relu") return x > 0.0 ? 1.0 : 0.0;
    return 1.0; // identity
}

// Head-aligned, standardized-apart, equality-normalized copies of the input
// clauses. Repeated head variables are first rewritten to equality bodies so
// every head is the same literal and rho2 concatenation applies directly.
inline std::vector<OrderedClause> align_inputs(const std::vector<OrderedClause>& phi) {
    if (phi.empty()) throw DataError("crm: no input feature-clauses");
    std::vector<OrderedClause> norm;
    norm.reserve(phi.size());
    Literal head0;
    std::vector<std::string> head_vars;
    std::set<std::string> used;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        OrderedClause e = canonical_rename(eq_body_form(phi[i]));
        if (i == 0) {
            head0 = e.head;
            OrderedClause h(head0, {});
            head_vars = h.vars();
            used.insert(head_vars.begin(), head_vars.end());
        } else if (!(e.head == head0)) {
            throw DataError("crm: feature-clause heads are not aligned: " +
                            head0.str() + " vs " + e.head.str());
        }
        OrderedClause s = standardize_apart(e, head_vars, used);
        for (const std::string& v : s.vars()) used.insert(v);
        norm.push_back(std::move(s));
    }
    return norm;
}

inline void compute_outputs(Crm& crm) {
    std::vector<char> has_out(crm.vertices.size(), 0);
    for (const CrmVertex& v : crm.vertices)
        for (std::size_t p : v.parents) has_out[p] = 1;
    crm.outputs.clear();
    for (std::size_t v = 0; v < crm.vertices.size(); ++v)
        if (!has_out[v]) crm.outputs.push_back(v);
}

// Edge weights start positive in (0, (fan-in)^-1/2]: activations and features
// are non-negative, so a positive start keeps every live path's rectifier
// open and gradients flowing from the first step. The readout, which has no
// rectifier, starts symmetric.
inline void init_parameters(Crm& crm, std::uint64_t seed, std::size_t n_classes) {
    Rng er = Rng(seed).fork(11);
    crm.weights.assign(crm.vertices.size(), {});
    for (std::size_t v = 0; v < crm.vertices.size(); ++v) {
        const std::vector<std::size_t>& ps = crm.vertices[v].parents;
        if (ps.empty()) continue;
        double bound = 1.0 / std::sqrt(double(ps.size()));
        crm.weights[v].resize(ps.size());
        for (double& w : crm.weights[v]) w = bound * (1.0 - er.unit());
    }
    Rng rr = Rng(seed).fork(12);
    double rb = crm.outputs.empty() ? 1.0 : 1.0 / std::sqrt(double(crm.outputs.size()));
    crm.readout_w.assign(n_classes, std::vector<double>(crm.outputs.size()));
    crm.readout_b.assign(n_classes, 0.0);
    for (std::vector<double>& row : crm.readout_w)
        for (double& w : row) w = rr.uniform(-rb, rb);
    crm.adam_m.clear();
    crm.adam_v.clear();
    crm.adam_t = 0;
}

} // namespace detail

// Checks the derivation-graph property: every composed vertex's clause lies
// in the image of its operator applied to its parents, up to equivalence.
inline void validate_structure(const Crm& crm, const ModeSet& m, const TypeDefs& t) {
    for (std::size_t v = 0; v < crm.vertices.size(); ++v) {
        const CrmVertex& vx = crm.vertices[v];
        for (std::size_t p : vx.parents)
            if (p >= v)
                throw DataError("crm vertex " + std::to_string(v) +
                                ": parent does not precede it");
        switch (vx.kind) {
        case VertexKind::input:
            if (!vx.parents.empty())
                throw DataError("crm vertex " + std::to_string(v) +
                                ": input with parents");
            break;
        case VertexKind::comp_rho2: {
            if (vx.parents.size() != 2)
                throw DataError("crm vertex " + std::to_string(v) +
                                ": rho2 vertex needs two parents");
            OrderedClause img = rho2(crm.vertices[vx.parents[0]].clause,
                                     crm.vertices[vx.parents[1]].clause);
            if (!equivalent(vx.clause, img))
                throw DataError("crm vertex " + std::to_string(v) +
                                ": clause is not the rho2 image of its parents");
            break;
        }
        case VertexKind::comp_rho1: {
            if (vx.parents.size() != 1)
                throw DataError("crm vertex " + std::to_string(v) +
                                ": rho1 vertex needs one parent");
            bool found = false;
            for (const OrderedClause& kid :
                 rho1(crm.vertices[vx.parents[0]].clause, m, t))
                if (equivalent(kid, vx.clause)) { found = true; break; }
            if (!found)
                throw DataError("crm vertex " + std::to_string(v) +
                                ": clause is not a rho1 child of its parent");
            break;
        }
        }
    }
}

namespace detail {

// Candidate vertex shared by both construction procedures.
struct Candidate {
    OrderedClause clause;
    VertexKind kind;
    std::vector<std::size_t> parents;
};

class LayerDedup {
public:
    // true if an equivalent clause was already accepted in this layer
    bool seen(const OrderedClause& c) {
        std::uint64_t k = equivalence_key(c);
        for (const OrderedClause& p : buckets_[k])
            if (equivalent(p, c)) return true;
        return false;
    }
    // owns a copy: callers keep accepted clauses in vectors that reallocate
    void add(const OrderedClause& c) { buckets_[equivalence_key(c)].push_back(c); }

private:
    std::map<std::uint64_t, std::vector<OrderedClause>> buckets_;
};

} // namespace detail

// Exhaustive depth-bounded construction: layer j adds every rho1 child of an
// existing vertex and every rho2 child of an ordered pair of existing
// vertices, deduplicated by clause equivalence within the layer. Children may
// repeat an earlier layer's clause (composition is idempotent on many
// inputs); they are still distinct vertices of the derivation graph.
inline Crm construct_crm(const std::vector<OrderedClause>& phi, const ModeSet& m,
                         const TypeDefs& t, const std::string& g, std::size_t d,
                         std::size_t vertex_budget = 5000, std::uint64_t seed = 0) {
    Crm crm;
    crm.activation = g;
    for (const OrderedClause& c : detail::align_inputs(phi)) {
        crm.inputs.push_back(crm.vertices.size());
        crm.vertices.push_back({c, VertexKind::input, {}});
    }

    for (std::size_t j = 1; j <= d; ++j) {
        std::size_t n0 = crm.vertices.size();
        std::vector<detail::Candidate> layer;
        detail::LayerDedup dedup;
        auto offer = [&](detail::Candidate cand) {
            if (dedup.seen(cand.clause)) return;
            if (n0 + layer.size() + 1 > vertex_budget)
                throw DataError("construct_crm: vertex budget of " +
                                std::to_string(vertex_budget) + " exceeded at depth " +
                                std::to_string(j));
            layer.push_back(std::move(cand));
            dedup.add(layer.back().clause);
        };
        for (std::size_t v = 0; v < n0; ++v)
            for (OrderedClause& kid : rho1(crm.vertices[v].clause, m, t))
                offer({std::move(kid), VertexKind::comp_rho1, {v}});
        for (std::size_t v1 = 0; v1 < n0; ++v1)
            for (std::size_t v2 = 0; v2 < n0; ++v2)
                offer({rho2(crm.vertices[v1].clause, crm.vertices[v2].clause),
                       VertexKind::comp_rho2,
                       {v1, v2}});
        for (detail::Candidate& cand : layer)
            crm.vertices.push_back(
                {std::move(cand.clause), cand.kind, std::move(cand.parents)});
    }

    detail::compute_outputs(crm);
    detail::init_parameters(crm, seed, 2);
    validate_structure(crm, m, t);
    return crm;
}

namespace detail {

struct FilterState {
    std::vector<std::vector<std::uint8_t>> cols; // per vertex, over filter data
    std::map<std::string, std::size_t> class_count;

    bool passes(const std::vector<std::uint8_t>& col, const CrmFilter& f) const {
        std::size_t support = 0;
        std::map<std::string, std::size_t> by;
        for (std::size_t i = 0; i < col.size(); ++i) {
            if (!col[i]) continue;
            ++support;
            ++by[(*f.data)[i].target];
        }
        if (support < f.min_support) return false;
        std::size_t best = 0;
        for (const auto& [label, n] : by) best = std::max(best, n);
        return support > 0 && double(best) / double(support) >= f.min_precision;
    }
};

} // namespace detail

// Randomized linear-shape construction: d_rho2 layers of rho2 children with
// the left parent drawn from the inputs and the right from the previous
// layer, then d_rho1 layers of rho1 children of the previous layer. Each
// layer draws s samples; duplicates (by clause equivalence) consume their
// slot, children failing `filter` are redrawn up to the retry cap and the
// slot is skipped when the cap is reached.
inline Crm random_crm(const std::vector<OrderedClause>& phi, const ModeSet& m,
                      const TypeDefs& t, const std::string& g, std::size_t s,
                      std::size_t d_rho1, std::size_t d_rho2, std::uint64_t seed,
                      const CrmFilter* filter = nullptr) {
    if (s == 0) throw ConfigError("random_crm: sample size must be positive");
    if (filter && (!filter->data || !filter->facts))
        throw ConfigError("random_crm: filter needs data and facts");

    Crm crm;
    crm.activation = g;
    for (const OrderedClause& c : detail::align_inputs(phi)) {
        crm.inputs.push_back(crm.vertices.size());
        crm.vertices.push_back({c, VertexKind::input, {}});
    }

    detail::FilterState fs;
    if (filter) {
        fs.cols.resize(crm.vertices.size());
        for (std::size_t v = 0; v < crm.vertices.size(); ++v) {
            fs.cols[v].resize(filter->data->size());
            for (std::size_t i = 0; i < filter->data->size(); ++i)
                fs.cols[v][i] = evaluate_feature(crm.vertices[v].clause, *filter->facts,
                                                 (*filter->data)[i].id)
                                    ? 1
                                    : 0;
        }
    }

    Rng sampler = Rng(seed).fork(1);
    std::vector<std::size_t> prev = crm.inputs;
    for (std::size_t j = 1; j <= d_rho2 + d_rho1; ++j) {
        bool use_rho2 = j <= d_rho2;
        std::vector<std::size_t> cur;
        detail::LayerDedup dedup;
        for (std::size_t slot = 0; slot < s; ++slot) {
            for (std::size_t attempt = 0;; ++attempt) {
                if (filter && attempt >= filter->retry_cap) break; // skip slot
                detail::Candidate cand;
                std::vector<std::uint8_t> col;
                if (use_rho2) {
                    std::size_t v1 = crm.inputs[sampler.below(crm.inputs.size())];
                    std::size_t v2 = prev[sampler.below(prev.size())];
                    cand = {rho2(crm.vertices[v1].clause, crm.vertices[v2].clause),
                            VertexKind::comp_rho2,
                            {v1, v2}};
                    if (filter) {
                        col.resize(filter->data->size());
                        for (std::size_t i = 0; i < col.size(); ++i)
                            col[i] = fs.cols[v1][i] & fs.cols[v2][i];
                    }
                } else {
                    std::size_t v = prev[sampler.below(prev.size())];
                    std::vector<OrderedClause> kids = rho1(crm.vertices[v].clause, m, t);
                    if (kids.empty()) {
                        if (!filter) break; // nothing to draw for this slot
                        continue;           // counts as a failed attempt
                    }
                    cand = {kids[sampler.below(kids.size())],
                            VertexKind::comp_rho1,
                            {v}};
                    if (filter) {
                        col.resize(filter->data->size());
                        for (std::size_t i = 0; i < col.size(); ++i)
                            col[i] = cand.parents[0] < fs.cols.size() &&
                                             fs.cols[cand.parents[0]][i] &&
                                             evaluate_feature(cand.clause, *filter->facts,
                                                              (*filter->data)[i].id)
                                         ? 1
                                         : 0;
                    }
                }
                if (dedup.seen(cand.clause)) break; // duplicate consumes the slot
                if (filter && !fs.passes(col, *filter)) continue;
                cur.push_back(crm.vertices.size());
                crm.vertices.push_back(
                    {std::move(cand.clause), cand.kind, std::move(cand.parents)});
                dedup.add(crm.vertices.back().clause);
                if (filter) fs.cols.push_back(std::move(col));
                break;
            }
        }
        if (cur.empty())
            throw DataError("random_crm: layer " + std::to_string(j) +
                            " is empty (every sample was rejected)");
        prev = std::move(cur);
    }

    detail::compute_outputs(crm);
    detail::init_parameters(crm, seed, 2);
    validate_structure(crm, m, t);

    if (filter) {
        for (std::size_t i = 0; i < filter->data->size(); ++i) {
            std::vector<std::uint8_t> row(crm.vertices.size());
            for (std::size_t v = 0; v < crm.vertices.size(); ++v)
                row[v] = fs.cols[v][i];
            crm.feature_cache[(*filter->data)[i].id.str()] = std::move(row);
        }
    }
    return crm;
}

struct Forward {
    std::vector<double> h;       // per-vertex activation
    std::vector<double> pre;     // incoming weighted sum (0 for inputs)
    std::vector<std::uint8_t> f; // per-vertex feature value
    std::vector<double> z;       // raw class scores
    std::vector<double> scores;  // softmax probabilities
};

namespace detail {

inline void forward_into(const Crm& crm, const std::vector<std::uint8_t>& f,
                         Forward& out) {
    std::size_t n = crm.vertices.size();
    out.h.assign(n, 0.0);
    out.pre.assign(n, 0.0);
    out.f.assign(f.begin(), f.end());
    for (std::size_t v = 0; v < n; ++v) {
        if (!f[v]) continue; // the gate: feature 0 forces activation 0
        const CrmVertex& vx = crm.vertices[v];
        if (vx.kind == VertexKind::input) {
            out.h[v] = 1.0;
            continue;
        }
        double s = 0.0;
        for (std::size_t k = 0; k < vx.parents.size(); ++k)
            s += crm.weights[v][k] * out.h[vx.parents[k]];
        out.pre[v] = s;
        out.h[v] = gate(crm.activation, s);
    }
    std::size_t classes = crm.readout_b.size();
    out.z.assign(classes, 0.0);
    for (std::size_t c = 0; c < classes; ++c) {
        double z = crm.readout_b[c];
        for (std::size_t oi = 0; oi < crm.outputs.size(); ++oi)
            z += crm.readout_w[c][oi] * out.h[crm.outputs[oi]];
        out.z[c] = z;
    }
    out.scores.assign(classes, 0.0);
    double zmax = out.z.empty() ? 0.0 : out.z[0];
    for (double z : out.z) zmax = std::max(zmax, z);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += out.scores[c] = std::exp(out.z[c] - zmax);
    for (double& p : out.scores) p /= sum;
}

} // namespace detail

inline Forward forward(const Crm& crm, const Instance& a, const FactStore& store) {
    Forward out;
    detail::forward_into(crm, crm.ensure_features(a, store), out);
    return out;
}

struct Prediction {
    std::size_t cls = 0;
    std::vector<double> scores;
};

// Argmax of the class scores; ties go to the lowest class index.
inline Prediction predict(const Crm& crm, const Instance& a, const FactStore& store) {
    Forward fw = forward(crm, a, store);
    Prediction p;
    p.scores = fw.scores;
    for (std::size_t c = 1; c < p.scores.size(); ++c)
        if (p.scores[c] > p.scores[p.cls]) p.cls = c;
    return p;
}

// Output vertices ranked most-relevant first: vertices whose feature fired,
// by descending activation magnitude (ties to the lower index), then the
// gated-off outputs in index order.
inline std::vector<std::size_t> relevance(const Crm& crm, const Forward& fw) {
    std::vector<std::size_t> on, off;
    for (std::size_t o : crm.outputs)
        (fw.f[o] ? on : off).push_back(o);
    std::stable_sort(on.begin(), on.end(), [&](std::size_t a, std::size_t b) {
        double ma = std::fabs(fw.h[a]), mb = std::fabs(fw.h[b]);
        if (ma != mb) return ma > mb;
        return a < b;
    });
    on.insert(on.end(), off.begin(), off.end());
    return on;
}

// --- parameter vector: edge weights in vertex order, then readout rows, bias ---

inline std::size_t n_params(const Crm& crm) {
    std::size_t n = 0;
    for (const std::vector<double>& w : crm.weights) n += w.size();
    for (const std::vector<double>& row : crm.readout_w) n += row.size();
    return n + crm.readout_b.size();
}

namespace detail {

inline double* param_ref(Crm& crm, std::size_t i) {
    for (std::vector<double>& w : crm.weights) {
        if (i < w.size()) return &w[i];
        i -= w.size();
    }
    for (std::vector<double>& row : crm.readout_w) {
        if (i < row.size()) return &row[i];
        i -= row.size();
    }
    if (i < crm.readout_b.size()) return &crm.readout_b[i];
    throw DataError("parameter index out of range");
}

// Cross-entropy loss and its gradient in parameter-vector order. The gate
// shows up as: a vertex with feature 0 has h = 0 and contributes no gradient
// to its incoming weights.
inline double backprop(const Crm& crm, const Forward& fw, std::size_t y,
                       std::vector<double>& grad) {
    std::size_t n = crm.vertices.size();
    std::size_t classes = crm.readout_b.size();
    grad.assign(n_params(crm), 0.0);

    double loss = -std::log(fw.scores[y]);

    std::vector<double> dh(n, 0.0);
    std::vector<double> dz(classes);
    for (std::size_t c = 0; c < classes; ++c) dz[c] = fw.scores[c] - (c == y ? 1.0 : 0.0);

    std::size_t edge_params = 0;
    for (const std::vector<double>& w : crm.weights) edge_params += w.size();
    std::size_t pos = edge_params;
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t oi = 0; oi < crm.outputs.size(); ++oi) {
            grad[pos++] = dz[c] * fw.h[crm.outputs[oi]];
            dh[crm.outputs[oi]] += dz[c] * crm.readout_w[c][oi];
        }
    for (std::size_t c = 0; c < classes; ++c) grad[pos++] = dz[c];

    // per-vertex offset of its weight block in the parameter vector
    std::vector<std::size_t> at(n);
    std::size_t acc = 0;
    for (std::size_t v = 0; v < n; ++v) {
        at[v] = acc;
        acc += crm.weights[v].size();
    }
    for (std::size_t v = n; v-- > 0;) {
        const CrmVertex& vx = crm.vertices[v];
        if (vx.kind == VertexKind::input || !fw.f[v] || dh[v] == 0.0) continue;
        double ds = dh[v] * gate_grad(crm.activation, fw.pre[v]);
        if (ds == 0.0) continue;
        for (std::size_t k = 0; k < vx.parents.size(); ++k) {
            grad[at[v] + k] = ds * fw.h[vx.parents[k]];
            dh[vx.parents[k]] += ds * crm.weights[v][k];
        }
    }
    return loss;
}

inline std::size_t class_index(const Crm& crm, const std::string& label) {
    for (std::size_t c = 0; c < crm.labels.size(); ++c)
        if (crm.labels[c] == label) return c;
    throw DataError("train: label '" + label + "' is not in the model's class set");
}

} // namespace detail

inline double instance_loss(const Crm& crm, const Instance& a, std::size_t y,
                            const FactStore& store) {
    Forward fw = forward(crm, a, store);
    if (y >= fw.scores.size()) throw DataError("instance_loss: class index out of range");
    return -std::log(fw.scores[y]);
}

inline std::vector<double> loss_gradients(const Crm& crm, const Instance& a,
                                          std::size_t y, const FactStore& store) {
    Forward fw = forward(crm, a, store);
    if (y >= fw.scores.size()) throw DataError("loss_gradients: class index out of range");
    std::vector<double> grad;
    detail::backprop(crm, fw, y, grad);
    return grad;
}

// Stochastic gradient training: per-epoch shuffle (seeded by the config seed
// and the cumulative epoch count, so a reloaded model continues the exact
// trajectory), per-instance cross-entropy steps, per-epoch mean loss
// returned. With a patience the last tenth of the data is held out and
// training stops once its loss has not improved for that many epochs.
inline std::vector<double> train(Crm& crm, const Dataset& data, const FactStore& store,
                                 const TrainConfig& cfg) {
    if (cfg.learning_rate <= 0.0) throw ConfigError("train: learning rate must be positive");
    if (cfg.optimizer != "adam" && cfg.optimizer != "sgd")
        throw ConfigError("train: unknown optimizer '" + cfg.optimizer + "'");
    if (data.empty()) throw DataError("train: empty dataset");

    if (crm.labels.empty()) {
        std::set<std::string> uniq;
        for (const Instance& a : data) uniq.insert(a.target);
        crm.labels.assign(uniq.begin(), uniq.end());
    }
    if (crm.readout_b.size() != crm.labels.size()) {
        // structure was built before the class count was known; redo the readout
        Rng rr = Rng(cfg.seed).fork(12);
        double rb = crm.outputs.empty() ? 1.0 : 1.0 / std::sqrt(double(crm.outputs.size()));
        crm.readout_w.assign(crm.labels.size(), std::vector<double>(crm.outputs.size()));
        crm.readout_b.assign(crm.labels.size(), 0.0);
        for (std::vector<double>& row : crm.readout_w)
            for (double& w : row) w = rr.uniform(-rb, rb);
        crm.adam_m.clear();
        crm.adam_v.clear();
        crm.adam_t = 0;
    }

    std::vector<std::size_t> y(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        y[i] = detail::class_index(crm, data[i].target);
        crm.ensure_features(data[i], store);
    }

    std::size_t holdout = 0;
    if (cfg.early_stop_patience) holdout = std::max<std::size_t>(1, data.size() / 10);
    std::size_t n_train = data.size() - holdout;
    if (n_train == 0) throw DataError("train: nothing left to train on after the holdout");

    std::size_t P = n_params(crm);
    if (crm.adam_m.size() != P) {
        crm.adam_m.assign(P, 0.0);
        crm.adam_v.assign(P, 0.0);
        crm.adam_t = 0;
    }

    std::vector<double> history;
    std::vector<double> grad;
    Forward fw;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    std::vector<std::size_t> order(n_train);
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
        Rng shuffler = Rng(cfg.seed).fork(1000 + crm.epochs_trained);
        shuffler.shuffle(order);

        double total = 0.0;
        for (std::size_t idx : order) {
            detail::forward_into(crm, crm.ensure_features(data[idx], store), fw);
            double loss = detail::backprop(crm, fw, y[idx], grad);
            if (!std::isfinite(loss))
                throw TrainingError("train: non-finite loss at epoch " +
                                    std::to_string(crm.epochs_trained + 1) +
                                    " (divergent learning rate?)");
            total += loss;
            if (cfg.optimizer == "adam") {
                ++crm.adam_t;
                double b1t = 1.0 - std::pow(cfg.beta1, double(crm.adam_t));
                double b2t = 1.0 - std::pow(cfg.beta2, double(crm.adam_t));
                for (std::size_t i = 0; i < P; ++i) {
                    double& m = crm.adam_m[i];
                    double& v = crm.adam_v[i];
                    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad[i];
                    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad[i] * grad[i];
                    *detail::param_ref(crm, i) -=
                        cfg.learning_rate * (m / b1t) / (std::sqrt(v / b2t) + cfg.epsilon);
                }
            } else {
                for (std::size_t i = 0; i < P; ++i)
                    *detail::param_ref(crm, i) -= cfg.learning_rate * grad[i];
            }
        }
        history.push_back(total / double(n_train));
        ++crm.epochs_trained;

        if (holdout) {
            double val = 0.0;
            for (std::size_t i = n_train; i < data.size(); ++i)
                val += instance_loss(crm, data[i], y[i], store);
            val /= double(holdout);
            if (val + 1e-12 < best_val) {
                best_val = val;
                since_best = 0;
            } else if (++since_best >= *cfg.early_stop_patience) {
                break;
            }
        }
    }
    return history;
}

// --- model file ---

namespace detail {

inline std::string kind_name(VertexKind k) {
    switch (k) {
    case VertexKind::input: return "input";
    case VertexKind::comp_rho1: return "rho1";
    case VertexKind::comp_rho2: return "rho2";
    }
    return "?";
}

inline VertexKind kind_from(const std::string& s) {
    if (s == "input") return VertexKind::input;
    if (s == "rho1") return VertexKind::comp_rho1;
    if (s == "rho2") return VertexKind::comp_rho2;
    throw DataError("model: unknown vertex kind '" + s + "'");
}

} // namespace detail

inline std::string model_str(const Crm& crm) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["modes_hash"] = crm.modes_hash_hex;
    j["activation"] = crm.activation;
    j["labels"] = crm.labels;
    nlohmann::ordered_json clauses = nlohmann::ordered_json::array();
    nlohmann::ordered_json vertices = nlohmann::ordered_json::array();
    nlohmann::ordered_json edges = nlohmann::ordered_json::array();
    for (std::size_t v = 0; v < crm.vertices.size(); ++v) {
        const CrmVertex& vx = crm.vertices[v];
        clauses.push_back(vx.clause.str());
        vertices.push_back({{"kind", detail::kind_name(vx.kind)},
                            {"parents", vx.parents}});
        for (std::size_t k = 0; k < vx.parents.size(); ++k)
            edges.push_back({vx.parents[k], v, crm.weights[v][k]});
    }
    j["clauses"] = std::move(clauses);
    j["vertices"] = std::move(vertices);
    j["edges"] = std::move(edges);
    j["readout"] = {{"w", crm.readout_w}, {"b", crm.readout_b}};
    j["train_config"] = {{"epochs_trained", crm.epochs_trained},
                         {"adam_t", crm.adam_t},
                         {"adam_m", crm.adam_m},
                         {"adam_v", crm.adam_v}};
    return j.dump(1) + "\n";
}

inline void save_model(const Crm& crm, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write model file: " + path);
    os << model_str(crm);
}

inline Crm model_from_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model parse error: ") + e.what());
    }
    try {
        if (!j.contains("version") || !j["version"].is_number_integer())
            throw DataError("model: missing version");
        if (j["version"].get<int>() != 1)
            throw DataError("model: unsupported version " + j["version"].dump());

        Crm crm;
        crm.modes_hash_hex = j.value("modes_hash", std::string());
        crm.activation = j.value("activation", std::string("relu"));
        crm.labels = j.value("labels", std::vector<std::string>{});

        const auto& clauses = j.at("clauses");
        const auto& vertices = j.at("vertices");
        if (clauses.size() != vertices.size())
            throw DataError("model: clause and vertex counts differ");
        for (std::size_t v = 0; v < vertices.size(); ++v) {
            CrmVertex vx;
            try {
                vx.clause = parse_clause(clauses.at(v).get<std::string>());
            } catch (const ParseError& e) {
                throw DataError("model clause " + std::to_string(v) + ": " + e.what());
            }
            vx.kind = detail::kind_from(vertices.at(v).at("kind").get<std::string>());
            vx.parents = vertices.at(v).at("parents").get<std::vector<std::size_t>>();
            std::size_t want = vx.kind == VertexKind::input  ? 0
                               : vx.kind == VertexKind::comp_rho1 ? 1
                                                                  : 2;
            if (vx.parents.size() != want)
                throw DataError("model vertex " + std::to_string(v) +
                                ": wrong parent count for its kind");
            for (std::size_t p : vx.parents)
                if (p >= v)
                    throw DataError("model vertex " + std::to_string(v) +
                                    ": parent index " + std::to_string(p) +
                                    " does not precede it");
            if (vx.kind == VertexKind::input) crm.inputs.push_back(v);
            crm.vertices.push_back(std::move(vx));
        }

        crm.weights.assign(crm.vertices.size(), {});
        std::vector<std::size_t> got(crm.vertices.size(), 0);
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 3)
                throw DataError("model: malformed edge entry " + e.dump());
            std::size_t from = e.at(0).get<std::size_t>();
            std::size_t to = e.at(1).get<std::size_t>();
            double w = e.at(2).get<double>();
            std::string name = "model edge " + std::to_string(from) + " -> " +
                               std::to_string(to);
            if (from >= crm.vertices.size() || to >= crm.vertices.size())
                throw DataError(name + ": endpoint out of range");
            const CrmVertex& vx = crm.vertices[to];
            if (got[to] >= vx.parents.size() || vx.parents[got[to]] != from)
                throw DataError(name + ": not the next edge of vertex " +
                                std::to_string(to));
            if (!std::isfinite(w)) throw DataError(name + ": weight is not finite");
            crm.weights[to].push_back(w);
            ++got[to];
        }
        for (std::size_t v = 0; v < crm.vertices.size(); ++v)
            if (got[v] != crm.vertices[v].parents.size())
                throw DataError("model vertex " + std::to_string(v) +
                                ": missing edge weights");

        detail::compute_outputs(crm);

        crm.readout_w = j.at("readout").at("w").get<std::vector<std::vector<double>>>();
        crm.readout_b = j.at("readout").at("b").get<std::vector<double>>();
        if (crm.readout_w.size() != crm.readout_b.size())
            throw DataError("model: readout row count does not match bias count");
        for (const std::vector<double>& row : crm.readout_w)
            if (row.size() != crm.outputs.size())
                throw DataError("model: readout width does not match output count");

        const auto& tc = j.at("train_config");
        crm.epochs_trained = tc.value("epochs_trained", std::size_t(0));
        crm.adam_t = tc.value("adam_t", std::uint64_t(0));
        crm.adam_m = tc.value("adam_m", std::vector<double>{});
        crm.adam_v = tc.value("adam_v", std::vector<double>{});
        if (!crm.adam_m.empty() && crm.adam_m.size() != n_params(crm))
            throw DataError("model: optimizer state does not match parameter count");
        if (crm.adam_m.size() != crm.adam_v.size())
            throw DataError("model: optimizer moment vectors differ in length");
        return crm;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model: ") + e.what());
    }
}

inline Crm load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot read model file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return model_from_string(buf.str());
}

inline std::string to_dot(const Crm& crm) {
    std::string s = "digraph crm {\n  rankdir=BT;\n  node [shape=box, fontname=\"monospace\"];\n";
    for (std::size_t v = 0; v < crm.vertices.size(); ++v) {
        const CrmVertex& vx = crm.vertices[v];
        std::string label = vx.clause.str();
        std::string esc;
        for (char c : label) {
            if (c == '"' || c == '\\') esc += '\\';
            esc += c;
        }
        s += "  v" + std::to_string(v) + " [label=\"" + esc + "\"";
        if (vx.kind == VertexKind::input) s += ", style=bold";
        s += "];\n";
    }
    char buf[64];
    for (std::size_t v = 0; v < crm.vertices.size(); ++v)
        for (std::size_t k = 0; k < crm.vertices[v].parents.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.6g", crm.weights[v][k]);
            s += "  v" + std::to_string(crm.vertices[v].parents[k]) + " -> v" +
                 std::to_string(v) + " [label=\"" + buf + "\"];\n";
        }
    return s + "}\n";
}

} // namespace crm
