#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "clause.hpp"
#include "errors.hpp"
#include "facts.hpp"

namespace crm {

// Mode-terms describe argument places: +type consumes a bound variable,
// -type introduces one, #type takes a ground constant of the type, and a
// structured mode-term mirrors a compound with mode-terms at its leaves.
struct ModeTerm {
    enum class Kind { input, output, constant, structured };

    Kind kind = Kind::input;
    std::string type;            // leaf kinds
    std::string functor;         // structured; "" spells the anonymous tuple
    std::vector<ModeTerm> parts; // structured children

    static ModeTerm in(std::string t) { return {Kind::input, std::move(t), "", {}}; }
    static ModeTerm out(std::string t) { return {Kind::output, std::move(t), "", {}}; }
    static ModeTerm cst(std::string t) { return {Kind::constant, std::move(t), "", {}}; }
    static ModeTerm structured(std::string f, std::vector<ModeTerm> p) {
        return {Kind::structured, "", std::move(f), std::move(p)};
    }

    std::string str() const {
        switch (kind) {
        case Kind::input: return "+" + type;
        case Kind::output: return "-" + type;
        case Kind::constant: return "#" + type;
        case Kind::structured: {
            std::string s = functor;
            s += '(';
            for (std::size_t i = 0; i < parts.size(); ++i) {
                if (i) s += ',';
                s += parts[i].str();
            }
            s += ')';
            return s;
        }
        }
        return "";
    }
};

struct ModeDecl {
    bool is_head = false;
    std::string predicate;
    std::vector<ModeTerm> args;

    std::size_t arity() const { return args.size(); }

    bool is_equality() const { return predicate == "=" && args.size() == 2; }

    // The declared type of an equality mode '+t = +t'.
    std::string equality_type() const { return args[0].type; }

    std::string str() const {
        std::string inner;
        if (is_equality()) {
            inner = args[0].str() + " = " + args[1].str();
        } else {
            inner = predicate;
            if (!args.empty()) {
                inner += '(';
                for (std::size_t i = 0; i < args.size(); ++i) {
                    if (i) inner += ',';
                    inner += args[i].str();
                }
                inner += ')';
            }
        }
        return (is_head ? "modeh(" : "modeb(") + inner + ").";
    }
};

// type name -> extension (ground terms), required wherever a #type place occurs.
using TypeDefs = std::map<std::string, std::vector<Term>>;

struct ModeSet {
    std::vector<ModeDecl> decls;

    const ModeDecl* head_decl() const {
        for (const ModeDecl& d : decls)
            if (d.is_head) return &d;
        return nullptr;
    }

    // The unique declaration for an ordinary body predicate (MC1).
    const ModeDecl* body_decl(const std::string& pred, std::size_t arity) const {
        for (const ModeDecl& d : decls)
            if (!d.is_head && d.predicate == pred && d.arity() == arity) return &d;
        return nullptr;
    }

    // Equality declarations are per-type; the one to use is fixed by the type
    // of the variables being equated.
    const ModeDecl* equality_decl(const std::string& type) const {
        for (const ModeDecl& d : decls)
            if (!d.is_head && d.is_equality() && d.equality_type() == type) return &d;
        return nullptr;
    }

    std::string str() const {
        std::string s;
        for (const ModeDecl& d : decls) { s += d.str(); s += '\n'; }
        return s;
    }
};

// ---- parsing -----------------------------------------------------------------

namespace detail {

class ModeParser {
public:
    explicit ModeParser(std::string text) : text_(std::move(text)) {}

    ModeTerm mode_term() {
        skip_ws();
        char c = peek();
        if (c == '+' || c == '-' || c == '#') {
            ++pos_;
            std::string t = name_token();
            if (c == '+') return ModeTerm::in(t);
            if (c == '-') return ModeTerm::out(t);
            return ModeTerm::cst(t);
        }
        if (c == '(') return ModeTerm::structured("", part_list());
        std::string f = name_token();
        skip_ws();
        if (peek() != '(') fail("expected '(' after mode functor");
        return ModeTerm::structured(f, part_list());
    }

    // Contents of modeh(...)/modeb(...): pred(mt,...), bare pred, or mt = mt.
    ModeDecl declaration(bool is_head) {
        ModeDecl d;
        d.is_head = is_head;
        skip_ws();
        char c = peek();
        if (c == '+' || c == '-' || c == '#' || c == '(') {
            d.predicate = "=";
            d.args.push_back(mode_term());
            skip_ws();
            if (peek() != '=') fail("expected '=' in equality mode");
            ++pos_;
            d.args.push_back(mode_term());
            return d;
        }
        d.predicate = name_token();
        skip_ws();
        if (peek() == '(') d.args = part_list();
        return d;
    }

    void finish() {
        skip_ws();
        if (pos_ < text_.size()) fail("trailing input in mode declaration");
    }

private:
    std::string text_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, pos_); }
    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
    void skip_ws() {
        while (pos_ < text_.size() &&
               std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }
    std::string name_token() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        if (pos_ == start) fail("expected a name");
        return text_.substr(start, pos_ - start);
    }
    std::vector<ModeTerm> part_list() {
        skip_ws();
        if (peek() != '(') fail("expected '('");
        ++pos_;
        std::vector<ModeTerm> parts;
        for (;;) {
            parts.push_back(mode_term());
            skip_ws();
            if (peek() == ',') { ++pos_; continue; }
            break;
        }
        skip_ws();
        if (peek() != ')') fail("expected ')'");
        ++pos_;
        return parts;
    }
};

inline std::string strip_line(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace detail

// Reads a modes file: modeh(...). modeb(...). type(name, [c1, c2, ...]).
// '%' comments. Throws ConfigError on malformed declarations.
inline std::pair<ModeSet, TypeDefs> parse_modes(const std::string& text) {
    ModeSet modes;
    TypeDefs types;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = detail::strip_line(line);
        if (t.empty() || t[0] == '%') continue;
        if (!t.empty() && t.back() == '.') t.pop_back();
        auto bad = [&](const std::string& why) -> ConfigError {
            return ConfigError("modes line " + std::to_string(lineno) + ": " + why);
        };
        try {
            if (t.rfind("modeh(", 0) == 0 || t.rfind("modeb(", 0) == 0) {
                bool is_head = t[4] == 'h';
                std::string inner = t.substr(6);
                if (inner.empty() || inner.back() != ')') throw bad("unterminated declaration");
                inner.pop_back();
                detail::ModeParser p(inner);
                modes.decls.push_back(p.declaration(is_head));
                p.finish();
            } else if (t.rfind("type(", 0) == 0) {
                std::string inner = t.substr(5);
                if (inner.empty() || inner.back() != ')') throw bad("unterminated type declaration");
                inner.pop_back();
                std::size_t comma = inner.find(',');
                std::size_t lb = inner.find('[');
                std::size_t rb = inner.rfind(']');
                if (comma == std::string::npos || lb == std::string::npos ||
                    rb == std::string::npos || rb < lb)
                    throw bad("expected type(name, [c1, ...])");
                std::string name = detail::strip_line(inner.substr(0, comma));
                std::string list = inner.substr(lb + 1, rb - lb - 1);
                std::vector<Term> ext;
                std::istringstream ls(list);
                std::string item;
                while (std::getline(ls, item, ',')) {
                    std::string it = detail::strip_line(item);
                    if (it.empty()) continue;
                    Term term = parse_term(it);
                    if (!term.is_ground()) throw bad("type extension must be ground");
                    ext.push_back(std::move(term));
                }
                types[name] = std::move(ext);
            } else {
                throw bad("unrecognized declaration: " + t);
            }
        } catch (const ParseError& e) {
            throw bad(e.what());
        }
    }
    return {std::move(modes), std::move(types)};
}

inline std::pair<ModeSet, TypeDefs> parse_modes_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open modes file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_modes(ss.str());
}

inline std::string modes_str(const ModeSet& m, const TypeDefs& t) {
    std::string s = m.str();
    for (const auto& [name, ext] : t) {
        s += "type(" + name + ", [";
        for (std::size_t i = 0; i < ext.size(); ++i) {
            if (i) s += ", ";
            s += ext[i].str();
        }
        s += "]).\n";
    }
    return s;
}

inline std::uint64_t modes_hash(const ModeSet& m, const TypeDefs& t) {
    return hash_str(modes_str(m, t));
}

// ---- structural constraints ----------------------------------------------------

namespace detail {

inline void count_leaves(const ModeTerm& mt, std::size_t& inputs, std::size_t& outputs) {
    switch (mt.kind) {
    case ModeTerm::Kind::input: ++inputs; break;
    case ModeTerm::Kind::output: ++outputs; break;
    case ModeTerm::Kind::constant: break;
    case ModeTerm::Kind::structured:
        for (const ModeTerm& p : mt.parts) count_leaves(p, inputs, outputs);
        break;
    }
}

inline void collect_leaf_types(const ModeTerm& mt, std::set<std::string>& out) {
    if (mt.kind == ModeTerm::Kind::structured) {
        for (const ModeTerm& p : mt.parts) collect_leaf_types(p, out);
    } else {
        out.insert(mt.type);
    }
}

} // namespace detail

// Checks the three structural conditions on a mode set: one declaration per
// ordinary predicate (equality is per-type, each of shape +t = +t); every body
// declaration has at least one input place; the (unique, unary) head predicate
// has no body declaration. Returns human-readable violations; empty means valid.
inline std::vector<std::string> validate_constraints(const ModeSet& m) {
    std::vector<std::string> out;

    std::map<std::pair<std::string, std::size_t>, std::size_t> seen;
    std::map<std::string, std::size_t> eq_by_type;
    std::size_t heads = 0;
    for (const ModeDecl& d : m.decls) {
        if (d.is_head) { ++heads; continue; }
        if (d.is_equality()) {
            if (d.args[0].kind != ModeTerm::Kind::input ||
                d.args[1].kind != ModeTerm::Kind::input ||
                d.args[0].type != d.args[1].type)
                out.push_back("equality mode must have shape +t = +t: " + d.str());
            else if (++eq_by_type[d.equality_type()] > 1)
                out.push_back("duplicate equality mode for type " + d.equality_type());
            continue;
        }
        if (++seen[{d.predicate, d.arity()}] > 1)
            out.push_back("more than one declaration for predicate " + d.predicate + "/" +
                          std::to_string(d.arity()));
    }

    for (const ModeDecl& d : m.decls) {
        if (d.is_head || d.is_equality()) continue;
        std::size_t inputs = 0, outputs = 0;
        for (const ModeTerm& a : d.args) detail::count_leaves(a, inputs, outputs);
        if (inputs == 0)
            out.push_back("body declaration has no input place: " + d.str());
    }

    if (heads != 1) {
        out.push_back("expected exactly one head declaration, found " + std::to_string(heads));
    } else {
        const ModeDecl* h = m.head_decl();
        if (h->arity() != 1)
            out.push_back("head predicate must be unary: " + h->str());
        for (const ModeDecl& d : m.decls)
            if (!d.is_head && d.predicate == h->predicate)
                out.push_back("head predicate also has a body declaration: " + d.str());
    }
    return out;
}

// Adds a '+t = +t' body declaration for every type mentioned in m that lacks
// one. Clauses produced by equality composition live in this extended set.
inline ModeSet extend_with_equality(const ModeSet& m) {
    ModeSet out = m;
    std::set<std::string> types;
    for (const ModeDecl& d : m.decls)
        for (const ModeTerm& a : d.args) detail::collect_leaf_types(a, types);
    for (const std::string& t : types) {
        if (out.equality_decl(t)) continue;
        ModeDecl eq;
        eq.is_head = false;
        eq.predicate = "=";
        eq.args = {ModeTerm::in(t), ModeTerm::in(t)};
        out.decls.push_back(std::move(eq));
    }
    return out;
}

// ---- place numbering ------------------------------------------------------------

// Terms of a literal addressed by place: <i> is the i-th argument (1-based),
// <i,j> the j-th argument of the term at <i>, and so on. Every term occurrence,
// including the interior compounds, gets a place.
inline std::vector<std::pair<std::vector<std::size_t>, Term>> term_places(const Literal& l) {
    std::vector<std::pair<std::vector<std::size_t>, Term>> out;
    struct Walk {
        static void go(const Term& t, std::vector<std::size_t>& path,
                       std::vector<std::pair<std::vector<std::size_t>, Term>>& out) {
            out.emplace_back(path, t);
            for (std::size_t i = 0; i < t.args.size(); ++i) {
                path.push_back(i + 1);
                go(t.args[i], path, out);
                path.pop_back();
            }
        }
    };
    std::vector<std::size_t> path;
    for (std::size_t i = 0; i < l.args.size(); ++i) {
        path.push_back(i + 1);
        Walk::go(l.args[i], path, out);
        path.pop_back();
    }
    return out;
}

// ---- membership --------------------------------------------------------------

// Typed input/output variable occurrences of one literal, as justified by its
// mode. Index 0 of a witness is the head.
struct LiteralRoles {
    std::vector<std::pair<std::string, std::string>> inputs;  // (variable, type)
    std::vector<std::pair<std::string, std::string>> outputs; // (variable, type)
};

struct LanguageWitness {
    std::vector<LiteralRoles> roles;          // per literal, head first
    std::map<std::string, std::string> var_types;
};

namespace detail {

inline void add_role(std::vector<std::pair<std::string, std::string>>& roles,
                     const std::string& var, const std::string& type) {
    for (auto& [v, t] : roles)
        if (v == var) return;
    roles.emplace_back(var, type);
}

// Matches term `t` against mode-term `mt`. `avail` holds variables usable at
// input places; newly typed variables land in `types`. Returns false when the
// clause is simply not in the language; throws ConfigError when a constant
// place has no extension to check against.
inline bool match_mode_term(const Term& t, const ModeTerm& mt, bool is_head_literal,
                            const std::map<std::string, std::string>* avail,
                            std::map<std::string, std::string>& types,
                            const TypeDefs& typedefs, LiteralRoles& roles) {
    switch (mt.kind) {
    case ModeTerm::Kind::input: {
        if (!t.is_var()) return false;
        auto it = types.find(t.name);
        if (is_head_literal) {
            // Head inputs introduce the instance-side variables.
            if (it != types.end() && it->second != mt.type) return false;
            types[t.name] = mt.type;
        } else {
            // Body inputs must already be available with the declared type.
            if (!avail || !avail->count(t.name)) return false;
            if (avail->at(t.name) != mt.type) return false;
        }
        add_role(roles.inputs, t.name, mt.type);
        return true;
    }
    case ModeTerm::Kind::output: {
        if (!t.is_var()) return false;
        auto it = types.find(t.name);
        if (it != types.end() && it->second != mt.type) return false;
        types[t.name] = mt.type;
        add_role(roles.outputs, t.name, mt.type);
        return true;
    }
    case ModeTerm::Kind::constant: {
        if (!t.is_ground()) return false;
        auto ext = typedefs.find(mt.type);
        if (ext == typedefs.end())
            throw ConfigError("no extension declared for constant type " + mt.type);
        for (const Term& c : ext->second)
            if (c == t) return true;
        return false;
    }
    case ModeTerm::Kind::structured: {
        if (!t.is_compound() || t.name != mt.functor || t.args.size() != mt.parts.size())
            return false;
        for (std::size_t i = 0; i < t.args.size(); ++i)
            if (!match_mode_term(t.args[i], mt.parts[i], is_head_literal, avail, types,
                                 typedefs, roles))
                return false;
        return true;
    }
    }
    return false;
}

} // namespace detail

// Decides membership of a feature-clause in the mode language: the head fits
// the (unique) head declaration, every body literal fits its predicate's
// declaration with inputs drawn from the head inputs and outputs of earlier
// literals, variable types are globally consistent, constants come from their
// type's extension, and head outputs (if any) are produced by some body
// literal. Equality literals use the per-type '+t = +t' declaration selected
// by their arguments' types. Returns the per-literal role assignment on
// success.
inline std::optional<LanguageWitness> in_mode_language(const OrderedClause& c,
                                                       const ModeSet& m,
                                                       const TypeDefs& typedefs) {
    const ModeDecl* head = m.head_decl();
    if (!head || head->predicate != c.head.predicate || head->arity() != c.head.arity())
        return std::nullopt;

    LanguageWitness w;
    w.roles.resize(c.body.size() + 1);

    if (c.head.args.size() != head->args.size()) return std::nullopt;
    for (std::size_t i = 0; i < c.head.args.size(); ++i)
        if (!detail::match_mode_term(c.head.args[i], head->args[i], true, nullptr,
                                     w.var_types, typedefs, w.roles[0]))
            return std::nullopt;

    // Variables usable at input places: head inputs, then outputs as they appear.
    std::map<std::string, std::string> avail;
    for (auto& [v, t] : w.roles[0].inputs) avail[v] = t;

    for (std::size_t j = 0; j < c.body.size(); ++j) {
        const Literal& lit = c.body[j];
        LiteralRoles& roles = w.roles[j + 1];
        if (lit.is_equality()) {
            // Both sides are input variables of one shared type.
            if (!lit.args[0].is_var() || !lit.args[1].is_var()) return std::nullopt;
            auto a = avail.find(lit.args[0].name);
            auto b = avail.find(lit.args[1].name);
            if (a == avail.end() || b == avail.end() || a->second != b->second)
                return std::nullopt;
            if (!m.equality_decl(a->second)) return std::nullopt;
            detail::add_role(roles.inputs, a->first, a->second);
            detail::add_role(roles.inputs, b->first, b->second);
            continue;
        }
        const ModeDecl* d = m.body_decl(lit.predicate, lit.arity());
        if (!d) return std::nullopt;
        for (std::size_t i = 0; i < lit.args.size(); ++i)
            if (!detail::match_mode_term(lit.args[i], d->args[i], false, &avail,
                                         w.var_types, typedefs, roles))
                return std::nullopt;
        for (auto& [v, t] : roles.outputs) avail[v] = t;
    }

    // Head outputs must be produced somewhere in the body.
    for (auto& [v, t] : w.roles[0].outputs) {
        bool produced = false;
        for (std::size_t j = 1; j <= c.body.size() && !produced; ++j)
            for (auto& [ov, ot] : w.roles[j].outputs)
                if (ov == v && ot == t) { produced = true; break; }
        if (!produced) return std::nullopt;
    }
    return w;
}

} // namespace crm
