#pragma once

// Shapley-value explainers over the marginal (interventional) value function.
// Coalitions act on semantic features: toggling a categorical feature swaps
// the whole raw cell, so its one-hot group always moves together.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <bit>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "shapaudit/common.hpp"
#include "shapaudit/core.hpp"
#include "shapaudit/data.hpp"
#include "shapaudit/models/pipeline.hpp"
#include "shapaudit/rng.hpp"

namespace shapaudit {

inline constexpr double kExactEfficiencyTol = 1e-9;
inline constexpr double kKernelEfficiencyTol = 1e-7;
inline constexpr std::size_t kExactMaxFeatures = 14;

// Sub-stream tags under one explainer seed. Background and coalition draws
// must not share a stream, or changing the background size would silently
// reshuffle the coalitions.
inline constexpr std::uint64_t kBackgroundStreamTag = 0;
inline constexpr std::uint64_t kCoalitionStreamTag = 1;

struct BackgroundSet {
    std::vector<RawRow> rows;
    std::uint64_t explainer_seed = 0;

    std::size_t k() const { return rows.size(); }
};

// Draws k rows without replacement from the given pool, in seeded order.
// k equal to the pool size returns the whole pool, seeded-order permuted.
inline BackgroundSet sample_background(const Dataset& ds, std::span<const std::size_t> pool,
                                       std::size_t k, std::uint64_t explainer_seed) {
    if (k == 0) throw ValidationError("sample_background: k must be positive");
    if (k > pool.size()) {
        throw ValidationError("sample_background: k = " + std::to_string(k) +
                              " exceeds pool size " + std::to_string(pool.size()));
    }
    RngStream rng = RngStream::from_seed(explainer_seed).fork(kBackgroundStreamTag);
    const auto picks = rng.sample_without_replacement(pool.size(), k);
    BackgroundSet bg;
    bg.explainer_seed = explainer_seed;
    bg.rows.reserve(k);
    for (std::size_t p : picks) {
        const std::size_t r = pool[p];
        if (r >= ds.n()) throw ValidationError("sample_background: row index out of range");
        bg.rows.push_back(ds.rows[r]);
    }
    return bg;
}

using PredictFn = std::function<double(const RawRow&)>;

// v(S): mean prediction over background rows with the coalition's features
// replaced by the explained instance's values.
inline double value_function(const PredictFn& f, const RawRow& x,
                             const std::vector<std::uint8_t>& mask, const BackgroundSet& bg) {
    if (mask.size() != x.size()) {
        throw ValidationError("value_function: mask length does not match feature count");
    }
    if (bg.rows.empty()) throw ValidationError("value_function: empty background set");
    RawRow hybrid;
    double sum = 0.0;
    for (const RawRow& z : bg.rows) {
        if (z.size() != x.size()) {
            throw ValidationError("value_function: background row width mismatch");
        }
        hybrid = z;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (mask[i]) hybrid[i] = x[i];
        }
        sum += f(hybrid);
    }
    return sum / static_cast<double>(bg.rows.size());
}

namespace detail {

// Same contract as value_function but over a bitmask, reusing one buffer.
inline double value_of_mask(const PredictFn& f, const RawRow& x, std::uint64_t bits,
                            const BackgroundSet& bg, RawRow& hybrid) {
    double sum = 0.0;
    for (const RawRow& z : bg.rows) {
        hybrid = z;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (bits >> i & 1u) hybrid[i] = x[i];
        }
        sum += f(hybrid);
    }
    return sum / static_cast<double>(bg.rows.size());
}

inline void check_efficiency(std::span<const double> phi, double delta, double tol,
                             const char* what) {
    double total = 0.0;
    for (double p : phi) total += p;
    if (std::fabs(total - delta) > tol) {
        throw NumericError(std::string(what) + ": efficiency residual " +
                           std::to_string(std::fabs(total - delta)) + " exceeds tolerance");
    }
}

}  // namespace detail

// Exact Shapley values by full subset enumeration; O(2^d * K) model calls.
inline std::vector<double> exact_shapley_values(const PredictFn& f, const RawRow& x,
                                                const BackgroundSet& bg) {
    const std::size_t d = x.size();
    if (d == 0) throw ValidationError("exact_shapley: empty instance");
    if (d > kExactMaxFeatures) {
        throw ValidationError("exact_shapley: " + std::to_string(d) +
                              " features exceeds the enumeration limit of " +
                              std::to_string(kExactMaxFeatures) +
                              "; use the kernel estimator instead");
    }
    if (bg.rows.empty()) throw ValidationError("exact_shapley: empty background set");

    const std::uint64_t full = (std::uint64_t{1} << d) - 1;
    std::vector<double> v(full + 1);
    RawRow hybrid;
    for (std::uint64_t m = 0; m <= full; ++m) {
        v[m] = detail::value_of_mask(f, x, m, bg, hybrid);
    }

    // w[s] = s! (d-1-s)! / d!
    std::vector<double> w(d);
    for (std::size_t s = 0; s < d; ++s) {
        double num = 1.0;
        for (std::size_t i = 2; i <= s; ++i) num *= static_cast<double>(i);
        for (std::size_t i = 2; i <= d - 1 - s; ++i) num *= static_cast<double>(i);
        double den = 1.0;
        for (std::size_t i = 2; i <= d; ++i) den *= static_cast<double>(i);
        w[s] = num / den;
    }

    std::vector<double> phi(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        for (std::uint64_t m = 0; m <= full; ++m) {
            if (m & bit) continue;
            phi[i] += w[static_cast<std::size_t>(std::popcount(m))] * (v[m | bit] - v[m]);
        }
    }
    detail::check_efficiency(phi, v[full] - v[0], kExactEfficiencyTol, "exact_shapley");
    return phi;
}

namespace detail {

struct WeightedMask {
    std::uint64_t bits;
    double weight;
};

// Builds the weighted coalition design: proper coalition sizes are taken in
// the order 1, d-1, 2, d-2, ... and fully enumerated with their exact kernel
// mass while the budget allows; the remaining budget samples masks from the
// leftover size classes proportionally to kernel mass.
inline std::vector<WeightedMask> build_coalition_design(std::size_t d,
                                                        std::size_t n_coalitions,
                                                        RngStream& rng) {
    // kernel mass of one size class: (d-1) / (s (d-s)), normalized below
    std::vector<double> class_mass(d, 0.0);
    double mass_total = 0.0;
    for (std::size_t s = 1; s <= d - 1; ++s) {
        class_mass[s] = static_cast<double>(d - 1) /
                        (static_cast<double>(s) * static_cast<double>(d - s));
        mass_total += class_mass[s];
    }
    for (std::size_t s = 1; s <= d - 1; ++s) class_mass[s] /= mass_total;

    std::vector<std::size_t> size_order;
    for (std::size_t lo = 1, hi = d - 1; lo <= hi; ++lo, --hi) {
        size_order.push_back(lo);
        if (hi != lo) size_order.push_back(hi);
    }

    auto size_count = [&](std::size_t s) {
        double c = 1.0;
        for (std::size_t i = 0; i < s; ++i) {
            c *= static_cast<double>(d - i) / static_cast<double>(i + 1);
        }
        return c;
    };

    std::vector<WeightedMask> design;
    std::vector<bool> enumerated(d, false);
    std::size_t budget = n_coalitions;
    for (std::size_t s : size_order) {
        const double count = size_count(s);
        if (count > static_cast<double>(budget)) break;
        const double per_mask = class_mass[s] / count;
        // Gosper's hack: next bit permutation with the same popcount
        std::uint64_t m = (std::uint64_t{1} << s) - 1;
        const std::uint64_t limit = std::uint64_t{1} << d;
        while (m < limit) {
            design.push_back({m, per_mask});
            const std::uint64_t c = m & (~m + 1);
            const std::uint64_t r = m + c;
            m = (((r ^ m) >> 2) / c) | r;
        }
        enumerated[s] = true;
        budget -= static_cast<std::size_t>(count);
    }

    std::vector<std::size_t> open_sizes;
    double open_mass = 0.0;
    for (std::size_t s = 1; s <= d - 1; ++s) {
        if (!enumerated[s]) {
            open_sizes.push_back(s);
            open_mass += class_mass[s];
        }
    }
    if (open_sizes.empty() || budget == 0) return design;

    std::map<std::uint64_t, std::size_t> draw_counts;
    for (std::size_t n = 0; n < budget; ++n) {
        const double u = rng.next_unit() * open_mass;
        double acc = 0.0;
        std::size_t size = open_sizes.back();
        for (std::size_t s : open_sizes) {
            acc += class_mass[s];
            if (u < acc) {
                size = s;
                break;
            }
        }
        std::uint64_t bits = 0;
        for (std::size_t i : rng.sample_without_replacement(d, size)) {
            bits |= std::uint64_t{1} << i;
        }
        ++draw_counts[bits];
    }
    const double per_draw = open_mass / static_cast<double>(budget);
    for (const auto& [bits, count] : draw_counts) {
        design.push_back({bits, static_cast<double>(count) * per_draw});
    }
    return design;
}

// Weighted least squares under the efficiency constraint, by eliminating the
// last coordinate. Gaussian elimination with partial pivoting; a vanishing
// pivot means the sampled coalitions do not span feature space.
inline std::vector<double> solve_constrained_wls(std::size_t d,
                                                 const std::vector<WeightedMask>& design,
                                                 const std::vector<double>& values,
                                                 double delta) {
    const std::size_t k = d - 1;
    std::vector<double> a(k * k, 0.0);
    std::vector<double> b(k, 0.0);
    std::vector<double> z(k);
    for (std::size_t row = 0; row < design.size(); ++row) {
        const auto [bits, weight] = design[row];
        const double last = bits >> (d - 1) & 1u ? 1.0 : 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            z[i] = (bits >> i & 1u ? 1.0 : 0.0) - last;
        }
        const double t = values[row] - last * delta;
        for (std::size_t i = 0; i < k; ++i) {
            if (z[i] == 0.0) continue;
            const double wz = weight * z[i];
            for (std::size_t j = 0; j < k; ++j) a[i * k + j] += wz * z[j];
            b[i] += wz * t;
        }
    }

    double scale = 0.0;
    for (std::size_t i = 0; i < k; ++i) scale = std::max(scale, std::fabs(a[i * k + i]));
    const double tiny = 1e-12 * std::max(scale, 1.0);

    std::vector<std::size_t> perm(k);
    for (std::size_t i = 0; i < k; ++i) perm[i] = i;
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < k; ++r) {
            if (std::fabs(a[perm[r] * k + col]) > std::fabs(a[perm[pivot] * k + col])) {
                pivot = r;
            }
        }
        std::swap(perm[col], perm[pivot]);
        const double p = a[perm[col] * k + col];
        if (std::fabs(p) < tiny) {
            throw NumericError(
                "kernel_shap: coalition rank deficiency, sampled coalitions do not "
                "determine the attribution; increase n_coalitions");
        }
        for (std::size_t r = col + 1; r < k; ++r) {
            const double factor = a[perm[r] * k + col] / p;
            if (factor == 0.0) continue;
            for (std::size_t j = col; j < k; ++j) {
                a[perm[r] * k + j] -= factor * a[perm[col] * k + j];
            }
            b[perm[r]] -= factor * b[perm[col]];
        }
    }

    std::vector<double> phi(d, 0.0);
    for (std::size_t col = k; col-- > 0;) {
        double acc = b[perm[col]];
        for (std::size_t j = col + 1; j < k; ++j) acc -= a[perm[col] * k + j] * phi[j];
        phi[col] = acc / a[perm[col] * k + col];
    }
    double head = 0.0;
    for (std::size_t i = 0; i < k; ++i) head += phi[i];
    phi[d - 1] = delta - head;
    return phi;
}

}  // namespace detail

inline std::size_t default_coalition_budget(std::size_t d) {
    const std::size_t want = 2 * d + 2048;
    if (d >= 63) return want;
    const std::uint64_t all_proper = (std::uint64_t{1} << d) - 2;
    return static_cast<std::size_t>(std::min<std::uint64_t>(want, all_proper));
}

// KernelSHAP: weighted least squares over coalition indicators with the
// Shapley kernel weights, solved under the exact efficiency constraint.
// When the budget covers every proper coalition the design is enumerated
// rather than sampled and the estimate coincides with exact Shapley values.
inline std::vector<double> kernel_shap_values(const PredictFn& f, const RawRow& x,
                                              const BackgroundSet& bg,
                                              std::size_t n_coalitions, RngStream rng) {
    const std::size_t d = x.size();
    if (d < 2) throw ValidationError("kernel_shap: need at least 2 features");
    if (d > 62) throw ValidationError("kernel_shap: more than 62 features is unsupported");
    if (bg.rows.empty()) throw ValidationError("kernel_shap: empty background set");
    if (n_coalitions < d + 2) {
        throw ValidationError("kernel_shap: n_coalitions = " + std::to_string(n_coalitions) +
                              " is below the minimum d + 2 = " + std::to_string(d + 2));
    }

    const auto design = detail::build_coalition_design(d, n_coalitions, rng);

    RawRow hybrid;
    const double v0 = detail::value_of_mask(f, x, 0, bg, hybrid);
    const double v1 = detail::value_of_mask(f, x, (std::uint64_t{1} << d) - 1, bg, hybrid);
    const double delta = v1 - v0;

    std::vector<double> values(design.size());
    for (std::size_t i = 0; i < design.size(); ++i) {
        values[i] = detail::value_of_mask(f, x, design[i].bits, bg, hybrid) - v0;
    }

    auto phi = detail::solve_constrained_wls(d, design, values, delta);
    detail::check_efficiency(phi, delta, kKernelEfficiencyTol, "kernel_shap");
    return phi;
}

namespace detail {

inline PredictFn predictor_of(const PipelineModel& model) {
    return [&model](const RawRow& row) { return model.predict_proba(row); };
}

inline ExplanationVector wrap_explanation(const PipelineModel& model, std::vector<double> phi,
                                          const std::string& instance_id,
                                          std::uint64_t explainer_seed) {
    ExplanationVector e;
    e.values = std::move(phi);
    e.feature_names = model.transform.feature_names();
    e.instance_id = instance_id;
    e.seed_pair = SeedPair{model.model_seed, explainer_seed};
    e.validate();
    return e;
}

}  // namespace detail

inline ExplanationVector exact_shapley(const PipelineModel& model, const RawRow& x,
                                       const BackgroundSet& bg,
                                       const std::string& instance_id) {
    auto phi = exact_shapley_values(detail::predictor_of(model), x, bg);
    return detail::wrap_explanation(model, std::move(phi), instance_id, bg.explainer_seed);
}

// n_coalitions = 0 selects the default budget min(2d + 2048, 2^d - 2).
inline ExplanationVector kernel_shap(const PipelineModel& model, const RawRow& x,
                                     const BackgroundSet& bg, std::size_t n_coalitions,
                                     std::uint64_t explainer_seed,
                                     const std::string& instance_id) {
    const std::size_t budget =
        n_coalitions == 0 ? default_coalition_budget(x.size()) : n_coalitions;
    RngStream rng = RngStream::from_seed(explainer_seed).fork(kCoalitionStreamTag);
    auto phi = kernel_shap_values(detail::predictor_of(model), x, bg, budget, rng);
    return detail::wrap_explanation(model, std::move(phi), instance_id, explainer_seed);
}

}  // namespace shapaudit
