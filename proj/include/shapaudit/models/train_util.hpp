#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "shapaudit/common.hpp"

namespace shapaudit {

inline double sigmoid(double z) {
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace detail {

inline double bce_term(double p, int y) {
    constexpr double eps = 1e-12;
    const double q = p < eps ? eps : (p > 1.0 - eps ? 1.0 - eps : p);
    return y ? -std::log(q) : -std::log(1.0 - q);
}

inline void check_epoch_loss(double loss, int epoch, const std::string& model_name) {
    if (!std::isfinite(loss)) {
        throw NumericError(model_name + ": training loss became non-finite at epoch " +
                           std::to_string(epoch));
    }
}

// True when the loss curve is non-increasing (up to rounding slack) over the
// last tenth of the recorded epochs.
inline bool tail_loss_nonincreasing(const std::vector<double>& losses) {
    if (losses.size() < 2) return true;
    const std::size_t tail = (losses.size() + 9) / 10;
    const std::size_t start = losses.size() - tail;
    for (std::size_t i = start == 0 ? 1 : start; i < losses.size(); ++i) {
        const double slack = 1e-9 * std::max(1.0, std::fabs(losses[i - 1]));
        if (losses[i] > losses[i - 1] + slack) return false;
    }
    return true;
}

}  // namespace detail

}  // namespace shapaudit
