#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace difflab {

/// Identifies a reproducible random stream. Equal (seed, stream) pairs
/// always produce identical draw sequences, independent of thread count.
struct Seed {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    [[nodiscard]] Seed with_stream(std::uint64_t s) const { return {seed, s}; }
};

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based generator: draw i is a hash of (key(seed, stream), i).
/// Splitting a stream is just constructing with a different Seed, so
/// parallel chains never share mutable state.
class Rng {
public:
    explicit Rng(Seed s) : key_(derive_key(s)) {}
    Rng(std::uint64_t seed, std::uint64_t stream) : Rng(Seed{seed, stream}) {}

    std::uint64_t next_u64() { return detail::mix64(key_ + (++counter_) * detail::kGolden); }

    /// Uniform draw strictly inside (0, 1).
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; the paired draw is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    void fill_normal(std::span<double> out) {
        for (double& v : out) v = normal();
    }

    [[nodiscard]] std::vector<double> normal_vec(std::size_t d) {
        std::vector<double> v(d);
        fill_normal(v);
        return v;
    }

private:
    static std::uint64_t derive_key(Seed s) {
        return detail::mix64(detail::mix64(s.seed) ^
                             (detail::mix64(s.stream ^ 0x6A09E667F3BCC909ull) >> 1));
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace difflab
