#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "shapaudit/common.hpp"
#include "shapaudit/core.hpp"

namespace shapaudit {

enum class MetricKind { l2, topk_jaccard, rbo, kendall_tau };

inline std::string to_string(MetricKind k) {
    switch (k) {
        case MetricKind::l2: return "l2";
        case MetricKind::topk_jaccard: return "topk_jaccard";
        case MetricKind::rbo: return "rbo";
        case MetricKind::kendall_tau: return "kendall_tau";
    }
    throw ValidationError("unknown metric kind");
}

inline MetricKind metric_kind_from_string(const std::string& s) {
    if (s == "l2") return MetricKind::l2;
    if (s == "topk_jaccard") return MetricKind::topk_jaccard;
    if (s == "rbo") return MetricKind::rbo;
    if (s == "kendall_tau") return MetricKind::kendall_tau;
    throw ValidationError("unknown metric '" + s +
                          "' (expected l2|topk_jaccard|rbo|kendall_tau)");
}

inline double l2_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw ValidationError("l2_distance: vectors must be equal-length and non-empty");
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a[i]) || !std::isfinite(b[i])) {
            throw ValidationError("l2_distance: non-finite value");
        }
        const double dlt = a[i] - b[i];
        ss += dlt * dlt;
    }
    return std::sqrt(ss);
}

namespace detail {

inline void check_ranking_pair(const Ranking& a, const Ranking& b) {
    if (a.dim() != b.dim() || a.dim() == 0) {
        throw ValidationError("rank metric: rankings must be equal-length and non-empty");
    }
}

}  // namespace detail

// Jaccard distance between the top-k index sets: 1 - |A n B| / |A u B|.
inline double topk_jaccard(const Ranking& a, const Ranking& b, int k) {
    detail::check_ranking_pair(a, b);
    const std::size_t d = a.dim();
    if (k < 1 || static_cast<std::size_t>(k) > d) {
        throw ValidationError("topk_jaccard: k = " + std::to_string(k) +
                              " must lie in [1, " + std::to_string(d) + "]");
    }
    std::vector<char> in_a(d, 0);
    std::vector<char> in_b(d, 0);
    for (int i = 0; i < k; ++i) {
        in_a[static_cast<std::size_t>(a.order[static_cast<std::size_t>(i)])] = 1;
        in_b[static_cast<std::size_t>(b.order[static_cast<std::size_t>(i)])] = 1;
    }
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t f = 0; f < d; ++f) {
        inter += static_cast<std::size_t>(in_a[f] & in_b[f]);
        uni += static_cast<std::size_t>(in_a[f] | in_b[f]);
    }
    return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

// Rank-biased overlap sensitivity on full rankings of depth d:
//   1 - [ (1-p) * sum_{l=1..d} p^(l-1) A_l  +  p^d A_d ]
// where A_l is the fractional overlap of the length-l prefixes. p <= 0 asks
// for the depth-adapted default 1 - 1/d.
inline double rbo_sensitivity(const Ranking& a, const Ranking& b, double p) {
    detail::check_ranking_pair(a, b);
    const std::size_t d = a.dim();
    if (p <= 0.0) p = 1.0 - 1.0 / static_cast<double>(d);
    if (p >= 1.0) throw ValidationError("rbo_sensitivity: p must lie in (0, 1)");

    std::vector<char> seen_a(d, 0);
    std::vector<char> seen_b(d, 0);
    std::size_t overlap = 0;
    double rbo = 0.0;
    double p_pow = 1.0;  // p^(l-1)
    double a_last = 0.0;
    for (std::size_t l = 1; l <= d; ++l) {
        const auto fa = static_cast<std::size_t>(a.order[l - 1]);
        const auto fb = static_cast<std::size_t>(b.order[l - 1]);
        if (fa == fb) {
            ++overlap;
        } else {
            if (seen_b[fa]) ++overlap;
            if (seen_a[fb]) ++overlap;
        }
        seen_a[fa] = 1;
        seen_b[fb] = 1;
        a_last = static_cast<double>(overlap) / static_cast<double>(l);
        rbo += (1.0 - p) * p_pow * a_last;
        p_pow *= p;
    }
    rbo += p_pow * a_last;  // residual mass at depth d
    return 1.0 - rbo;
}

// Number of feature pairs ordered differently by the two rankings.
inline double kendall_tau(const Ranking& a, const Ranking& b) {
    detail::check_ranking_pair(a, b);
    const std::size_t d = a.dim();
    std::vector<std::size_t> pos_a(d);
    std::vector<std::size_t> pos_b(d);
    for (std::size_t r = 0; r < d; ++r) {
        pos_a[static_cast<std::size_t>(a.order[r])] = r;
        pos_b[static_cast<std::size_t>(b.order[r])] = r;
    }
    std::size_t discordant = 0;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            const bool ab = pos_a[i] < pos_a[j];
            const bool bb = pos_b[i] < pos_b[j];
            if (ab != bb) ++discordant;
        }
    }
    return static_cast<double>(discordant);
}

struct MetricParams {
    int k = 3;
    double p = 0.0;  // <= 0 resolves to 1 - 1/d at evaluation time
};

struct PairwiseSummary {
    MetricKind kind = MetricKind::l2;
    double param = 0.0;  // k for topk_jaccard, resolved p for rbo, 0 otherwise
    std::vector<double> values;  // one per unordered pair, (0,1),(0,2),...,(n-2,n-1)
    double mean = 0.0;
    double median = 0.0;
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw ValidationError("median: empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Evaluates one disagreement metric over every unordered pair of runs.
inline PairwiseSummary pairwise_aggregate(std::span<const ExplanationVector> runs,
                                          MetricKind kind, MetricParams params = {}) {
    if (runs.size() < 2) {
        throw ValidationError("pairwise_aggregate: need at least 2 explanations");
    }
    const std::size_t d = runs[0].dim();
    for (const auto& e : runs) {
        e.validate();
        if (e.dim() != d || e.feature_names != runs[0].feature_names) {
            throw ValidationError("pairwise_aggregate: explanations disagree on features");
        }
    }

    PairwiseSummary s;
    s.kind = kind;
    std::vector<Ranking> ranks;
    if (kind != MetricKind::l2) {
        ranks.reserve(runs.size());
        for (const auto& e : runs) ranks.push_back(ranking_of(e));
    }
    double resolved_p = params.p <= 0.0 ? 1.0 - 1.0 / static_cast<double>(d) : params.p;
    switch (kind) {
        case MetricKind::topk_jaccard: s.param = static_cast<double>(params.k); break;
        case MetricKind::rbo: s.param = resolved_p; break;
        default: s.param = 0.0; break;
    }

    for (std::size_t i = 0; i < runs.size(); ++i) {
        for (std::size_t j = i + 1; j < runs.size(); ++j) {
            double v = 0.0;
            switch (kind) {
                case MetricKind::l2: v = l2_distance(runs[i].values, runs[j].values); break;
                case MetricKind::topk_jaccard:
                    v = topk_jaccard(ranks[i], ranks[j], params.k);
                    break;
                case MetricKind::rbo: v = rbo_sensitivity(ranks[i], ranks[j], resolved_p); break;
                case MetricKind::kendall_tau: v = kendall_tau(ranks[i], ranks[j]); break;
            }
            s.values.push_back(v);
        }
    }
    double total = 0.0;
    for (double v : s.values) total += v;
    s.mean = total / static_cast<double>(s.values.size());
    s.median = median_of(s.values);
    return s;
}

struct FeatureSensitivityProfile {
    std::vector<std::string> feature_names;
    std::vector<double> mean_pairwise_abs_diff;  // per feature
    std::vector<double> mean_abs_value;          // per feature, scale context
    std::size_t n_runs = 0;
};

// Per-feature instability: mean |phi_i[m] - phi_j[m]| over ordered run pairs,
// next to the mean |phi[m]| that gives it scale.
inline FeatureSensitivityProfile feature_sensitivity(std::span<const ExplanationVector> runs) {
    if (runs.size() < 2) {
        throw ValidationError("feature_sensitivity: need at least 2 explanations");
    }
    const std::size_t d = runs[0].dim();
    for (const auto& e : runs) {
        e.validate();
        if (e.dim() != d || e.feature_names != runs[0].feature_names) {
            throw ValidationError("feature_sensitivity: explanations disagree on features");
        }
    }
    FeatureSensitivityProfile prof;
    prof.feature_names = runs[0].feature_names;
    prof.n_runs = runs.size();
    prof.mean_pairwise_abs_diff.assign(d, 0.0);
    prof.mean_abs_value.assign(d, 0.0);
    const double n = static_cast<double>(runs.size());
    for (std::size_t m = 0; m < d; ++m) {
        double diff = 0.0;
        double mag = 0.0;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            mag += std::fabs(runs[i].values[m]);
            for (std::size_t j = i + 1; j < runs.size(); ++j) {
                diff += std::fabs(runs[i].values[m] - runs[j].values[m]);
            }
        }
        // ordered pairs double the unordered sum and the normalizer n(n-1)
        prof.mean_pairwise_abs_diff[m] = 2.0 * diff / (n * (n - 1.0));
        prof.mean_abs_value[m] = mag / n;
    }
    return prof;
}

}  // namespace shapaudit
