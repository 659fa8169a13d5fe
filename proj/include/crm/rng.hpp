#pragma once

#include <cstdint>
#include <vector>

namespace crm {

// Deterministic pseudo-random source. All sampling in the library goes through
// this class so that a seed fixes every downstream artifact byte-for-byte,
// independent of platform or standard-library internals (std::uniform_int_distribution
// is implementation-defined; we avoid it on purpose).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    // splitmix64 step: full-period, passes statistical tests we care about here.
    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform integer in [0, n). Pre: n > 0. Debiased by rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
        std::uint64_t v;
        do { v = next_u64(); } while (v >= limit);
        return v % n;
    }

    // Uniform double in [0, 1).
    double unit() { return double(next_u64() >> 11) * (1.0 / 9007199254740992.0); }

    // Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    bool chance(double p) { return unit() < p; }

    // In-place Fisher-Yates. Deterministic given the seed and element order.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent stream for a named sub-purpose. Mixing the tag through
    // splitmix keeps sibling streams uncorrelated while staying reproducible.
    Rng fork(std::uint64_t tag) const {
        Rng r(state_ ^ (0xd1342543de82ef95ull * (tag + 1)));
        r.next_u64();
        return r;
    }

private:
    std::uint64_t state_;
};

} // namespace crm
