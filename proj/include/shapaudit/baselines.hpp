#pragma once

// Randomized null models that calibrate the disagreement metrics: a Dirichlet
// null for attribution vectors (closed-form expected squared L2 plus a Monte
// Carlo check) and a Mallows null for rankings (Monte Carlo only).
//
// Monte Carlo estimators split their sample budget over a fixed number of
// chunks, each with its own forked stream, and merge partial sums in chunk
// order; results are therefore independent of the worker count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shapaudit/common.hpp"
#include "shapaudit/core.hpp"
#include "shapaudit/metrics.hpp"
#include "shapaudit/parallel.hpp"
#include "shapaudit/rng.hpp"

namespace shapaudit {

inline constexpr std::size_t kMonteCarloChunks = 128;

// Sparse-mean Dirichlet null: k features share mass rho, the rest share
// 1 - rho, concentration kappa, and attributions are scaled to total mass T.
struct DirichletSpec {
    std::size_t d = 0;
    std::size_t k = 0;
    double total_mass = 0.0;  // T
    double rho = 0.0;
    double kappa = 0.0;

    void validate() const {
        if (d < 2) throw ValidationError("dirichlet null: need d >= 2");
        if (k < 1) throw ValidationError("dirichlet null: need k >= 1");
        if (k >= d) {
            throw ValidationError(
                "dirichlet null: k must be smaller than d, the complement set may not be "
                "empty");
        }
        if (!(rho > 0.0 && rho < 1.0)) {
            throw ValidationError("dirichlet null: rho must lie in (0, 1)");
        }
        if (!(kappa > 0.0)) throw ValidationError("dirichlet null: kappa must be positive");
        if (!(total_mass > 0.0)) throw ValidationError("dirichlet null: T must be positive");
    }

    // Mean vector m: rho/k on the leading k coordinates, (1-rho)/(d-k) on the
    // rest. Coordinates are exchangeable within each block, so putting the
    // emphasized block first loses no generality.
    std::vector<double> mean_vector() const {
        std::vector<double> m(d);
        for (std::size_t i = 0; i < d; ++i) {
            m[i] = i < k ? rho / static_cast<double>(k)
                         : (1.0 - rho) / static_cast<double>(d - k);
        }
        return m;
    }
};

// E || X - Y ||^2 for X, Y iid scaled Dirichlet(kappa * m):
//   (2 T^2 / (kappa + 1)) * (1 - rho^2 / k - (1 - rho)^2 / (d - k))
// Derivation: the squared distance of iid vectors is twice the trace of the
// covariance, and Dirichlet marginals have Var(M_i) = m_i (1 - m_i) / (a0 + 1)
// with a0 = kappa here; summing 1 - sum m_i^2 gives the bracket.
inline double dirichlet_l2_expectation(const DirichletSpec& spec) {
    spec.validate();
    const double bracket = 1.0 -
                           spec.rho * spec.rho / static_cast<double>(spec.k) -
                           (1.0 - spec.rho) * (1.0 - spec.rho) /
                               static_cast<double>(spec.d - spec.k);
    return 2.0 * spec.total_mass * spec.total_mass / (spec.kappa + 1.0) * bracket;
}

inline std::vector<double> sample_dirichlet(std::span<const double> alpha, RngStream& rng) {
    std::vector<double> g(alpha.size());
    double total = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        g[i] = GammaSampler(alpha[i]).draw(rng);
        total += g[i];
    }
    if (total <= 0.0) throw NumericError("dirichlet sample degenerated to zero mass");
    for (auto& x : g) x /= total;
    return g;
}

// Monte Carlo estimate of E || X - Y ||^2 over n_pairs independent pairs.
inline double dirichlet_l2_monte_carlo(const DirichletSpec& spec, std::size_t n_pairs,
                                       std::uint64_t seed, int jobs = 1) {
    spec.validate();
    if (n_pairs == 0) throw ValidationError("dirichlet monte carlo: n_pairs must be positive");

    const double alpha_in = spec.kappa * spec.rho / static_cast<double>(spec.k);
    const double alpha_out =
        spec.kappa * (1.0 - spec.rho) / static_cast<double>(spec.d - spec.k);
    const GammaSampler gamma_in(alpha_in);
    const GammaSampler gamma_out(alpha_out);

    const std::size_t chunks = std::min(kMonteCarloChunks, n_pairs);
    std::vector<double> partial(chunks, 0.0);
    const RngStream root = RngStream::from_seed(seed);

    parallel_for(chunks, jobs, [&](std::size_t c) {
        RngStream rng = root.fork(c);
        const std::size_t lo = n_pairs * c / chunks;
        const std::size_t hi = n_pairs * (c + 1) / chunks;
        std::vector<double> x(spec.d);
        std::vector<double> y(spec.d);
        double acc = 0.0;
        for (std::size_t pair = lo; pair < hi; ++pair) {
            for (auto* out : {&x, &y}) {
                double total = 0.0;
                for (std::size_t i = 0; i < spec.d; ++i) {
                    const double gi =
                        (i < spec.k ? gamma_in : gamma_out).draw(rng);
                    (*out)[i] = gi;
                    total += gi;
                }
                for (auto& v : *out) v /= total;
            }
            double ss = 0.0;
            for (std::size_t i = 0; i < spec.d; ++i) {
                const double dlt = x[i] - y[i];
                ss += dlt * dlt;
            }
            acc += ss;
        }
        partial[c] = acc;
    });

    double total = 0.0;
    for (double p : partial) total += p;  // fixed chunk order
    return spec.total_mass * spec.total_mass * total / static_cast<double>(n_pairs);
}

// One draw from the Mallows model with Kendall distance around the identity,
// dispersion q in (0, 1): repeated insertion, where item j lands r places
// from the right of the current prefix with probability proportional to q^r,
// adding exactly r inversions.
inline std::vector<int> mallows_sample(std::size_t d, double q, RngStream& rng) {
    if (d == 0) throw ValidationError("mallows_sample: d must be positive");
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("mallows_sample: q must lie in (0, 1)");
    std::vector<int> order;
    order.reserve(d);
    order.push_back(0);
    for (std::size_t j = 1; j < d; ++j) {
        // truncated geometric over r = 0..j with mass q^r
        const double z = (1.0 - std::pow(q, static_cast<double>(j + 1))) / (1.0 - q);
        double u = rng.next_unit() * z;
        std::size_t r = 0;
        double mass = 1.0;
        while (r < j && u >= mass) {
            u -= mass;
            mass *= q;
            ++r;
        }
        order.insert(order.begin() + static_cast<std::ptrdiff_t>(j - r),
                     static_cast<int>(j));
    }
    return order;
}

// Exact pmf by enumeration; only sensible for small d (testing oracle).
inline std::map<std::vector<int>, double> mallows_exact_pmf(std::size_t d, double q) {
    if (d == 0 || d > 8) throw ValidationError("mallows_exact_pmf: d must lie in [1, 8]");
    std::vector<int> perm(d);
    for (std::size_t i = 0; i < d; ++i) perm[i] = static_cast<int>(i);
    std::map<std::vector<int>, double> pmf;
    double z = 0.0;
    do {
        std::size_t inversions = 0;
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = i + 1; j < d; ++j) {
                if (perm[i] > perm[j]) ++inversions;
            }
        }
        const double weight = std::pow(q, static_cast<double>(inversions));
        pmf[perm] = weight;
        z += weight;
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (auto& [key, value] : pmf) value /= z;
    return pmf;
}

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

// Expected rank-metric disagreement between two independent Mallows draws
// around a common center. The metrics are invariant under relabeling by the
// center, so sampling around the identity is fully general.
inline McEstimate mallows_baseline(std::size_t d, double q, MetricKind kind,
                                   MetricParams params, std::size_t n_samples,
                                   std::uint64_t seed, int jobs = 1) {
    if (d < 2) throw ValidationError("mallows_baseline: need d >= 2");
    if (n_samples == 0) throw ValidationError("mallows_baseline: n_samples must be positive");
    if (kind == MetricKind::l2) {
        throw ValidationError("mallows_baseline: l2 is not a rank metric; use the dirichlet null");
    }
    const double p = params.p <= 0.0 ? 1.0 - 1.0 / static_cast<double>(d) : params.p;
    if (kind == MetricKind::topk_jaccard &&
        (params.k < 1 || static_cast<std::size_t>(params.k) > d)) {
        throw ValidationError("mallows_baseline: k out of range");
    }

    const std::size_t chunks = std::min(kMonteCarloChunks, n_samples);
    std::vector<double> partial_sum(chunks, 0.0);
    std::vector<double> partial_sq(chunks, 0.0);
    const RngStream root = RngStream::from_seed(seed);

    parallel_for(chunks, jobs, [&](std::size_t c) {
        RngStream rng = root.fork(c);
        const std::size_t lo = n_samples * c / chunks;
        const std::size_t hi = n_samples * (c + 1) / chunks;
        double acc = 0.0;
        double acc_sq = 0.0;
        for (std::size_t s = lo; s < hi; ++s) {
            Ranking a;
            Ranking b;
            a.order = mallows_sample(d, q, rng);
            b.order = mallows_sample(d, q, rng);
            double v = 0.0;
            switch (kind) {
                case MetricKind::topk_jaccard: v = topk_jaccard(a, b, params.k); break;
                case MetricKind::rbo: v = rbo_sensitivity(a, b, p); break;
                case MetricKind::kendall_tau: v = kendall_tau(a, b); break;
                case MetricKind::l2: break;  // rejected above
            }
            acc += v;
            acc_sq += v * v;
        }
        partial_sum[c] = acc;
        partial_sq[c] = acc_sq;
    });

    double total = 0.0;
    double total_sq = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) {
        total += partial_sum[c];
        total_sq += partial_sq[c];
    }
    McEstimate est;
    est.n = n_samples;
    est.mean = total / static_cast<double>(n_samples);
    const double var = total_sq / static_cast<double>(n_samples) - est.mean * est.mean;
    est.std_error = std::sqrt(std::max(0.0, var) / static_cast<double>(n_samples));
    return est;
}

struct BandEntry {
    nlohmann::json params;
    double value = 0.0;
};

struct BaselineBand {
    MetricKind kind = MetricKind::l2;
    double lower = 0.0;
    double upper = 0.0;
    std::vector<BandEntry> entries;

    void finalize() {
        if (entries.empty()) throw ValidationError("baseline band: empty sweep");
        lower = entries[0].value;
        upper = entries[0].value;
        for (const auto& e : entries) {
            lower = std::min(lower, e.value);
            upper = std::max(upper, e.value);
        }
    }
};

// Closed-form expected squared L2 of the Dirichlet null over a (rho, kappa)
// sweep. Values decrease in kappa, so the band's upper edge always comes from
// the smallest kappa in the sweep.
inline BaselineBand dirichlet_l2_band(std::size_t d, std::size_t k, double total_mass,
                                      std::span<const double> rho_sweep,
                                      std::span<const double> kappa_sweep) {
    BaselineBand band;
    band.kind = MetricKind::l2;
    for (double rho : rho_sweep) {
        for (double kappa : kappa_sweep) {
            DirichletSpec spec{d, k, total_mass, rho, kappa};
            band.entries.push_back(BandEntry{
                nlohmann::json{{"rho", rho}, {"kappa", kappa}},
                dirichlet_l2_expectation(spec)});
        }
    }
    band.finalize();
    return band;
}

// Monte Carlo rank-metric band over a dispersion sweep.
inline BaselineBand mallows_rank_band(std::size_t d, MetricKind kind, MetricParams params,
                                      std::span<const double> q_sweep, std::size_t n_samples,
                                      std::uint64_t seed, int jobs = 1) {
    BaselineBand band;
    band.kind = kind;
    for (std::size_t i = 0; i < q_sweep.size(); ++i) {
        const auto est = mallows_baseline(d, q_sweep[i], kind, params, n_samples,
                                          derive_seed(seed, i), jobs);
        band.entries.push_back(BandEntry{
            nlohmann::json{{"q", q_sweep[i]}, {"n_samples", n_samples},
                           {"std_error", est.std_error}},
            est.mean});
    }
    band.finalize();
    return band;
}

}  // namespace shapaudit
