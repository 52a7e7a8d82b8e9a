#pragma once

// Self-contained deterministic random streams. std::<distribution> output is
// implementation-defined, so every distribution used anywhere in the library
// is implemented here to keep artifacts bitwise reproducible across builds.

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "shapaudit/common.hpp"

namespace shapaudit {

namespace detail {

inline std::uint64_t splitmix64_finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// Derives a child seed from (base, tag). Used for every fork in the tree of
// randomness; collisions across distinct tags are not a practical concern.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    std::uint64_t x = base ^ (tag + 0x9E3779B97F4A7C15ULL + (base << 6) + (base >> 2));
    return detail::splitmix64_finalize(x + 0x9E3779B97F4A7C15ULL);
}

// Counter-keyed random stream (xoshiro256** core, splitmix64 expansion).
// fork(tag) depends only on the stream's key and the tag, never on how many
// variates were consumed, so derived streams are stable under reordering of
// unrelated work.
class RngStream {
  public:
    static RngStream from_seed(std::uint64_t seed) {
        RngStream r;
        r.key_ = seed;
        std::uint64_t sm = seed;
        for (auto& word : r.state_) {
            sm += 0x9E3779B97F4A7C15ULL;
            word = detail::splitmix64_finalize(sm);
        }
        if ((r.state_[0] | r.state_[1] | r.state_[2] | r.state_[3]) == 0) {
            r.state_[0] = 1;  // xoshiro must not start at the all-zero state
        }
        return r;
    }

    RngStream fork(std::uint64_t tag) const {
        return from_seed(derive_seed(key_, tag));
    }

    std::uint64_t key() const { return key_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl64(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl64(state_[3], 45);
        return result;
    }

    // Uniform on [0, 1), 53 random bits.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1); safe as a log/pow argument.
    double next_unit_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Unbiased integer in [0, n). Lemire's multiply-shift rejection.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw ValidationError("next_below: n must be positive");
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Standard normal via Box-Muller; the second variate of each pair is cached.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_unit_open();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Gamma(alpha, 1) via Marsaglia-Tsang squeeze; alpha < 1 uses the boost
    // Gamma(alpha) = Gamma(alpha + 1) * U^(1/alpha).
    double next_gamma(double alpha);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // First k slots of a seeded permutation of {0, ..., n-1}; the draw order
    // is part of the contract (callers expose it as "seeded order").
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        if (k > n) throw ValidationError("sample_without_replacement: k exceeds n");
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(next_below(n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

    std::vector<std::size_t> permutation(std::size_t n) {
        return sample_without_replacement(n, n);
    }

  private:
    std::uint64_t key_ = 0;
    std::array<std::uint64_t, 4> state_{};
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Gamma(alpha, 1) sampler with per-alpha constants hoisted out of the loop.
// Worth it when millions of draws share one alpha (Dirichlet Monte Carlo).
class GammaSampler {
  public:
    explicit GammaSampler(double alpha) : alpha_(alpha) {
        if (!(alpha > 0.0) || !std::isfinite(alpha)) {
            throw ValidationError("GammaSampler: alpha must be positive and finite");
        }
        const double shape = alpha < 1.0 ? alpha + 1.0 : alpha;
        d_ = shape - 1.0 / 3.0;
        c_ = 1.0 / std::sqrt(9.0 * d_);
        inv_alpha_ = alpha < 1.0 ? 1.0 / alpha : 0.0;
    }

    double draw(RngStream& rng) const {
        for (;;) {
            double x;
            double v;
            do {
                x = rng.next_normal();
                v = 1.0 + c_ * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = rng.next_unit_open();
            const double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) {
                return finish(rng, d_ * v);
            }
            if (std::log(u) < 0.5 * x2 + d_ * (1.0 - v + std::log(v))) {
                return finish(rng, d_ * v);
            }
        }
    }

  private:
    double finish(RngStream& rng, double g) const {
        if (inv_alpha_ > 0.0) {
            g *= std::pow(rng.next_unit_open(), inv_alpha_);
        }
        return g;
    }

    double alpha_;
    double d_;
    double c_;
    double inv_alpha_;
};

inline double RngStream::next_gamma(double alpha) {
    return GammaSampler(alpha).draw(*this);
}

}  // namespace shapaudit
