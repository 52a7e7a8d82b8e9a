#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "shapaudit/common.hpp"
#include "shapaudit/rng.hpp"

namespace shapaudit {

// Area under the ROC curve via the rank-sum identity; tied scores receive
// their average rank, which credits ties as one half.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw ValidationError("roc_auc: scores and labels must be equal-length and non-empty");
    }
    std::size_t npos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw ValidationError("roc_auc: labels must be 0/1");
        npos += static_cast<std::size_t>(y);
    }
    const std::size_t nneg = labels.size() - npos;
    if (npos == 0 || nneg == 0) {
        throw ValidationError("roc_auc: validation labels contain a single class");
    }

    std::vector<std::size_t> idx(scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // ranks are 1-based
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[idx[k]] == 1) rank_sum_pos += avg_rank;
        }
        i = j + 1;
    }
    const double np = static_cast<double>(npos);
    const double nn = static_cast<double>(nneg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

struct ShuffleSplitResult {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

// Single seeded shuffle split; the validation part takes ceil(fraction * n).
inline ShuffleSplitResult shuffle_split(std::span<const std::size_t> rows, double val_fraction,
                                        std::uint64_t seed) {
    if (!(val_fraction > 0.0) || !(val_fraction < 1.0)) {
        throw ValidationError("shuffle_split: fraction must lie in (0, 1)");
    }
    const std::size_t n = rows.size();
    const std::size_t n_val =
        static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(n)));
    if (n_val == 0 || n_val >= n) {
        throw ValidationError("shuffle_split: split leaves an empty part");
    }
    RngStream rng = RngStream::from_seed(seed);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = rows[i];
    rng.shuffle(perm);

    ShuffleSplitResult out;
    out.val.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
    out.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
    return out;
}

}  // namespace shapaudit
