#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "clause.hpp"
#include "errors.hpp"

namespace crm {

// A labelled data point. `id` is a ground term naming the instance (an atom
// like t17, or a tuple like (3,4,5,6,7,8)). `target` is the prediction of the
// model being explained; for synthetic tasks it coincides with the label
// unless a noisy surrogate overrode it.
struct Instance {
    Term id;
    std::string label;
    std::string target;

    Instance() = default;
    Instance(Term i, std::string l) : id(std::move(i)), label(l), target(std::move(l)) {}
    Instance(Term i, std::string l, std::string t)
        : id(std::move(i)), label(std::move(l)), target(std::move(t)) {}
};

using Dataset = std::vector<Instance>;

// Ground-fact database: a global section visible to every instance plus
// per-instance sections. Lookup honours insertion order within each section,
// global facts first, which fixes the enumeration order the evaluator sees.
class FactStore {
public:
    void add_global(Literal fact) {
        check_ground(fact);
        known_.insert(key(fact));
        ground_global_.insert(fact);
        auto& bucket = global_[key(fact)];
        bucket.push_back(std::move(fact));
    }

    void add_instance(const Term& instance_id, Literal fact) {
        check_ground(fact);
        known_.insert(key(fact));
        auto& section = per_instance_[instance_id.str()];
        section.ground.insert(fact);
        section.order.push_back(fact);
        section.by_pred[key(fact)].push_back(std::move(fact));
    }

    // Membership test for a fully ground literal; avoids the candidate scan.
    bool has_fact(const Literal& fact, const std::string& instance_id) const {
        if (ground_global_.count(fact)) return true;
        auto s = per_instance_.find(instance_id);
        return s != per_instance_.end() && s->second.ground.count(fact) != 0;
    }

    bool knows_predicate(const std::string& pred, std::size_t arity) const {
        return known_.count({pred, arity}) != 0;
    }

    // Registers a predicate with no facts, so evaluation treats it as an
    // empty relation rather than an unknown symbol.
    void declare_predicate(const std::string& pred, std::size_t arity) {
        known_.insert({pred, arity});
    }

    // Facts matching (pred, arity) visible to `instance_id`: global section in
    // insertion order, then the instance's own section.
    std::vector<const Literal*> candidates(const std::string& pred, std::size_t arity,
                                           const std::string& instance_id) const {
        std::vector<const Literal*> out;
        auto g = global_.find({pred, arity});
        if (g != global_.end())
            for (const Literal& l : g->second) out.push_back(&l);
        auto s = per_instance_.find(instance_id);
        if (s != per_instance_.end()) {
            auto b = s->second.by_pred.find({pred, arity});
            if (b != s->second.by_pred.end())
                for (const Literal& l : b->second) out.push_back(&l);
        }
        return out;
    }

    std::string str(const Dataset& data) const {
        std::ostringstream os;
        for (const auto& [k, bucket] : global_)
            for (const Literal& l : bucket) os << l.str() << ".\n";
        for (const Instance& inst : data) {
            auto s = per_instance_.find(inst.id.str());
            if (s == per_instance_.end()) continue;
            os << "#instance " << inst.id.str() << "\n";
            for (const Literal& l : s->second.order) os << l.str() << ".\n";
        }
        return os.str();
    }

    // Reads the facts format: ground literals terminated by '.', one per line,
    // '#instance <term>' switching to that instance's section, '%' comments.
    static FactStore from_string(const std::string& text) {
        FactStore store;
        std::istringstream is(text);
        std::string line;
        bool in_instance = false;
        Term current;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            std::string trimmed = strip(line);
            if (trimmed.empty() || trimmed[0] == '%') continue;
            if (trimmed.rfind("#instance", 0) == 0) {
                std::string id_text = strip(trimmed.substr(9));
                try {
                    current = parse_term(id_text);
                } catch (const ParseError& e) {
                    throw DataError("facts line " + std::to_string(lineno) +
                                    ": bad instance id: " + e.what());
                }
                in_instance = true;
                continue;
            }
            Literal fact;
            try {
                fact = parse_literal(trimmed);
            } catch (const ParseError& e) {
                throw DataError("facts line " + std::to_string(lineno) + ": " + e.what());
            }
            try {
                if (in_instance)
                    store.add_instance(current, std::move(fact));
                else
                    store.add_global(std::move(fact));
            } catch (const DataError& e) {
                throw DataError("facts line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        return store;
    }

    static FactStore from_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw DataError("cannot open facts file: " + path);
        std::ostringstream ss;
        ss << f.rdbuf();
        return from_string(ss.str());
    }

private:
    using Key = std::pair<std::string, std::size_t>;
    struct Section {
        std::vector<Literal> order;
        std::map<Key, std::vector<Literal>> by_pred;
        std::set<Literal> ground;
    };

    static Key key(const Literal& l) { return {l.predicate, l.arity()}; }

    static std::string strip(const std::string& s) {
        std::size_t a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        std::size_t b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }

    void check_ground(const Literal& l) const {
        for (const Term& t : l.args)
            if (!t.is_ground())
                throw DataError("fact is not ground: " + l.str());
    }

    std::map<Key, std::vector<Literal>> global_;
    std::map<std::string, Section> per_instance_;
    std::set<Key> known_;
    std::set<Literal> ground_global_;
};

// ---- dataset file ------------------------------------------------------------

// One line per instance: id <TAB> label [<TAB> target-prediction].
inline std::string dataset_str(const Dataset& data) {
    std::ostringstream os;
    for (const Instance& inst : data) {
        os << inst.id.str() << '\t' << inst.label;
        if (inst.target != inst.label) os << '\t' << inst.target;
        os << '\n';
    }
    return os.str();
}

inline Dataset dataset_from_string(const std::string& text) {
    Dataset out;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '%') continue;
        std::istringstream ls(line);
        std::string id_text, label, target;
        if (!std::getline(ls, id_text, '\t') || !std::getline(ls, label, '\t'))
            throw DataError("dataset line " + std::to_string(lineno) +
                            ": expected id<TAB>label");
        if (!std::getline(ls, target, '\t')) target = label;
        Term id;
        try {
            id = parse_term(id_text);
        } catch (const ParseError& e) {
            throw DataError("dataset line " + std::to_string(lineno) + ": " + e.what());
        }
        out.emplace_back(std::move(id), std::move(label), std::move(target));
    }
    return out;
}

inline Dataset dataset_from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open dataset file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return dataset_from_string(ss.str());
}

// ---- feature evaluation -------------------------------------------------------

namespace detail {

inline bool solve_body(const OrderedClause& c, std::size_t i, const Substitution& s,
                       const FactStore& store, const std::string& instance_key) {
    if (i == c.body.size()) return true;
    const Literal& lit = c.body[i];
    if (lit.is_equality()) {
        Substitution trial = s;
        return unify(lit.args[0], lit.args[1], trial) &&
               solve_body(c, i + 1, trial, store, instance_key);
    }
    if (!store.knows_predicate(lit.predicate, lit.arity()))
        throw DataError("unknown predicate in clause body: " + lit.predicate + "/" +
                        std::to_string(lit.arity()));
    Literal bound = lit;
    bool ground = true;
    for (Term& a : bound.args) {
        a = resolve(a, s);
        ground = ground && a.is_ground();
    }
    if (ground)
        return store.has_fact(bound, instance_key) &&
               solve_body(c, i + 1, s, store, instance_key);
    for (const Literal* fact : store.candidates(lit.predicate, lit.arity(), instance_key)) {
        Substitution trial = s;
        bool ok = true;
        for (std::size_t k = 0; k < lit.args.size() && ok; ++k)
            ok = unify(lit.args[k], fact->args[k], trial);
        if (ok && solve_body(c, i + 1, trial, store, instance_key)) return true;
    }
    return false;
}

} // namespace detail

// The feature-function of clause c at instance a: true iff binding the head
// argument to a's identifier lets the whole body be satisfied by the facts
// visible to a (depth-first in literal order; equalities check structural
// equality, binding a still-free side). Heads must be unary.
inline bool evaluate_feature(const OrderedClause& c, const FactStore& store, const Term& id) {
    if (c.head.arity() != 1)
        throw DataError("feature-clause head must be unary: " + c.head.str());
    Substitution s;
    if (!unify(c.head.args[0], id, s)) return false; // head pattern rejects the instance
    return detail::solve_body(c, 0, s, store, id.str());
}

} // namespace crm
