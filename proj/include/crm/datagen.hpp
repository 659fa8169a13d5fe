#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <tuple>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "explain.hpp"
#include "facts.hpp"
#include "modes.hpp"
#include "rng.hpp"

namespace crm {

// A synthetic benchmark bundle: the mode language, its type extensions, the
// ground facts, the labelled instances, and the modes file text the mode set
// was parsed from. `types` additionally collects the constants the generator
// drew, so it can be a superset of the extensions the text declares.
struct GeneratedTask {
    ModeSet modes;
    TypeDefs types;
    FactStore store;
    Dataset data;
    std::string modes_text;
};

// ---- trains --------------------------------------------------------------

inline std::string trains_modes_text() {
    return "modeh(p(+train)).\n"
           "modeb(has_car(+train, -car)).\n"
           "modeb(short(+car)).\n"
           "modeb(closed(+car)).\n";
}

// Random trains: each train has 2-4 cars; every car is short or long, closed
// or open, and carries a shape, a wheel count, and a load. A train is labelled
// "+" iff it has a car that is both short and closed. Candidate trains are
// drawn from per-candidate forks of `seed` and rejected once their class is
// full, so the sample splits exactly (n+1)/2 positive / n/2 negative.
inline GeneratedTask gen_trains(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ConfigError("trains generator: sample size must be positive");

    static const char* kShapes[] = {"rectangle", "bucket", "ellipse", "hexagon",
                                    "u_shaped"};
    static const char* kLoads[] = {"square", "circle", "triangle", "diamond",
                                   "rectangle"};

    struct CarSpec {
        bool is_short, is_closed;
        std::string shape;
        int wheels;
        std::string load_shape;
        int load_count;
    };

    GeneratedTask task;
    task.modes_text = trains_modes_text();
    std::tie(task.modes, task.types) = parse_modes(task.modes_text);
    task.store.declare_predicate("has_car", 2);
    task.store.declare_predicate("short", 1);
    task.store.declare_predicate("long", 1);
    task.store.declare_predicate("closed", 1);
    task.store.declare_predicate("open", 1);
    task.store.declare_predicate("shape", 2);
    task.store.declare_predicate("wheels", 2);
    task.store.declare_predicate("has_load", 3);

    std::size_t want_pos = (n + 1) / 2;
    std::size_t want_neg = n - want_pos;
    Rng root(seed);

    // First pass: classify candidates until each class has its quota. Only the
    // label is needed here; the draws are replayed from the same fork below.
    std::vector<std::uint64_t> pool[2];
    for (std::uint64_t cand = 0;
         pool[0].size() < want_neg || pool[1].size() < want_pos; ++cand) {
        Rng r = root.fork(cand);
        std::size_t cars = 2 + r.below(3);
        bool positive = false;
        for (std::size_t k = 0; k < cars; ++k) {
            bool is_short = r.chance(0.5);
            bool is_closed = r.chance(0.5);
            r.below(5);
            r.below(2);
            r.below(5);
            r.below(4);
            positive = positive || (is_short && is_closed);
        }
        std::vector<std::uint64_t>& side = pool[positive];
        if (side.size() < (positive ? want_pos : want_neg)) side.push_back(cand);
    }

    // Emit against a shuffled label sequence so every prefix of the dataset is
    // close to balanced; emitting in acceptance order would bunch whichever
    // class fills its quota last at the tail.
    std::vector<char> emit_labels(want_pos, '+');
    emit_labels.insert(emit_labels.end(), want_neg, '-');
    Rng perm = root.fork(0x9e3779b97f4a7c15ull);
    perm.shuffle(emit_labels);

    std::size_t next[2] = {0, 0};
    for (std::size_t idx = 1; idx <= n; ++idx) {
        bool positive = emit_labels[idx - 1] == '+';
        Rng r = root.fork(pool[positive][next[positive]++]);
        std::size_t cars = 2 + r.below(3);
        std::vector<CarSpec> specs;
        for (std::size_t k = 0; k < cars; ++k) {
            CarSpec c;
            c.is_short = r.chance(0.5);
            c.is_closed = r.chance(0.5);
            c.shape = kShapes[r.below(5)];
            c.wheels = 2 + static_cast<int>(r.below(2));
            c.load_shape = kLoads[r.below(5)];
            c.load_count = static_cast<int>(r.below(4));
            specs.push_back(std::move(c));
        }

        Term train = Term::cst("t" + std::to_string(idx));
        task.types["train"].push_back(train);
        for (std::size_t k = 0; k < specs.size(); ++k) {
            const CarSpec& c = specs[k];
            Term car = Term::cst("c" + std::to_string(idx) + "_" + std::to_string(k + 1));
            task.types["car"].push_back(car);
            task.store.add_instance(train, Literal{"has_car", {train, car}});
            task.store.add_instance(train, Literal{c.is_short ? "short" : "long", {car}});
            task.store.add_instance(train, Literal{c.is_closed ? "closed" : "open", {car}});
            task.store.add_instance(train, Literal{"shape", {car, Term::cst(c.shape)}});
            task.store.add_instance(
                train, Literal{"wheels", {car, Term::cst(std::to_string(c.wheels))}});
            task.store.add_instance(
                train, Literal{"has_load", {car, Term::cst(c.load_shape),
                                            Term::cst(std::to_string(c.load_count))}});
        }
        task.data.emplace_back(train, positive ? "+" : "-");
    }
    return task;
}

// ---- chess (white king + white rook vs black king) -------------------------

inline std::string krk_modes_text() {
    return "modeh(p(board(+coord, +coord, +coord, +coord, +coord, +coord))).\n"
           "modeb(adj(+coord, +coord)).\n"
           "modeb(+coord = +coord).\n"
           "type(coord, [1, 2, 3, 4, 5, 6, 7, 8]).\n";
}

// True iff the position (white king, white rook, black king; file/rank pairs
// in 1..8) is illegal: two pieces share a square, the kings touch, or the rook
// attacks the black king along a file or rank with no white king strictly
// between them on that line.
inline bool krk_illegal(int wkf, int wkr, int wrf, int wrr, int bkf, int bkr) {
    if (wkf == wrf && wkr == wrr) return true;
    if (wkf == bkf && wkr == bkr) return true;
    if (wrf == bkf && wrr == bkr) return true;
    if (std::abs(wkf - bkf) <= 1 && std::abs(wkr - bkr) <= 1) return true;
    if (wrf == bkf) {
        bool blocked = wkf == wrf && ((wrr < wkr && wkr < bkr) || (bkr < wkr && wkr < wrr));
        if (!blocked) return true;
    }
    if (wrr == bkr) {
        bool blocked = wkr == wrr && ((wrf < wkf && wkf < bkf) || (bkf < wkf && wkf < wrf));
        if (!blocked) return true;
    }
    return false;
}

// Uniform random boards, labelled "+" when illegal. The instance id is the
// ground term board(WKf, WKr, WRf, WRr, BKf, BKr); the only stored facts are
// the global adjacency table adj(a, b) for |a - b| <= 1, which is reflexive so
// a single clause over adj covers touching and coincident kings.
inline GeneratedTask gen_krk(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ConfigError("chess generator: sample size must be positive");

    GeneratedTask task;
    task.modes_text = krk_modes_text();
    std::tie(task.modes, task.types) = parse_modes(task.modes_text);
    for (int a = 1; a <= 8; ++a)
        for (int b = 1; b <= 8; ++b)
            if (std::abs(a - b) <= 1)
                task.store.add_global(Literal{
                    "adj", {Term::cst(std::to_string(a)), Term::cst(std::to_string(b))}});

    Rng root(seed);
    for (std::size_t i = 0; i < n; ++i) {
        Rng r = root.fork(i);
        int sq[6];
        for (int& c : sq) c = 1 + static_cast<int>(r.below(8));
        std::vector<Term> coords;
        for (int c : sq) coords.push_back(Term::cst(std::to_string(c)));
        Term id = Term::cmp("board", std::move(coords));
        bool illegal = krk_illegal(sq[0], sq[1], sq[2], sq[3], sq[4], sq[5]);
        task.data.emplace_back(std::move(id), illegal ? "+" : "-");
    }
    return task;
}

// ---- acceptable theories ---------------------------------------------------

// Hand-written acceptable theories per task, keyed by task name. Every class
// label appears in the map even when its clause list is empty, so an empty
// list reads as "no evidence demanded" rather than "unknown class".
inline std::map<std::string, AcceptableTheory> acceptable_theories() {
    std::map<std::string, AcceptableTheory> out;

    AcceptableTheory trains;
    trains["+"] = {parse_clause("p(X) :- has_car(X, Y), short(Y), closed(Y)")};
    trains["-"] = {};
    out["trains"] = std::move(trains);

    AcceptableTheory krk;
    krk["+"] = {
        parse_clause("p(board(A, B, C, D, C, F))"),
        parse_clause("p(board(A, B, C, D, E, D))"),
        parse_clause("p(board(A, B, A, B, E, F))"),
        parse_clause("p(board(A, B, C, D, E, F)) :- adj(A, E), adj(B, F)"),
    };
    krk["-"] = {};
    out["krk"] = std::move(krk);
    return out;
}

// ---- noisy surrogate targets ------------------------------------------------

// Simulates an imperfect black-box model: flips each instance's target (never
// its label) with probability flip_rate, cycling to the next class in sorted
// label order. Deterministic per instance index.
inline Dataset gen_noisy_target(Dataset data, double flip_rate, std::uint64_t seed) {
    if (!(flip_rate >= 0.0 && flip_rate < 0.5))
        throw ConfigError("noise rate must lie in [0, 0.5): " + std::to_string(flip_rate));
    std::vector<std::string> labels;
    for (const Instance& inst : data) labels.push_back(inst.label);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    if (labels.size() < 2 || flip_rate == 0.0) return data;
    Rng root(seed);
    for (std::size_t i = 0; i < data.size(); ++i) {
        Rng r = root.fork(i);
        if (!r.chance(flip_rate)) continue;
        std::size_t at = std::lower_bound(labels.begin(), labels.end(), data[i].target) -
                         labels.begin();
        data[i].target = labels[(at + 1) % labels.size()];
    }
    return data;
}

} // namespace crm
