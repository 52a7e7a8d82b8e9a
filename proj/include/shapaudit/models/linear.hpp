#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "shapaudit/common.hpp"
#include "shapaudit/data.hpp"
#include "shapaudit/models/train_util.hpp"
#include "shapaudit/rng.hpp"

namespace shapaudit {

struct LogregParams {
    double learning_rate = 0.1;
    int epochs = 200;
    double l2 = 1e-4;
    int batch_size = 64;
};

// L2-regularized logistic regression trained with mini-batch SGD from a zero
// initialization. When batch_size covers the whole split the row order is
// never shuffled, so training consumes no randomness at all and the fitted
// model is identical for every seed.
class LogisticRegressionHead {
  public:
    std::vector<double> weights;
    double bias = 0.0;
    double final_train_loss = 0.0;
    bool tail_loss_nonincreasing = true;

    double predict(const double* x) const {
        double z = bias;
        for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * x[j];
        return sigmoid(z);
    }

    static LogisticRegressionHead fit(const Matrix& x, std::span<const int> y,
                                      const LogregParams& p, RngStream rng) {
        if (p.epochs <= 0 || p.learning_rate <= 0.0 || p.batch_size <= 0 || p.l2 < 0.0) {
            throw ValidationError("logreg: invalid hyperparameters");
        }
        const std::size_t n = x.n;
        const std::size_t m = x.m;
        LogisticRegressionHead h;
        h.weights.assign(m, 0.0);

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        const std::size_t batch = static_cast<std::size_t>(p.batch_size);
        const bool full_batch = batch >= n;

        std::vector<double> gw(m);
        std::vector<double> losses;
        losses.reserve(static_cast<std::size_t>(p.epochs));
        for (int epoch = 0; epoch < p.epochs; ++epoch) {
            if (!full_batch) rng.shuffle(order);
            double epoch_loss = 0.0;
            for (std::size_t start = 0; start < n; start += batch) {
                const std::size_t stop = std::min(n, start + batch);
                const double bsz = static_cast<double>(stop - start);
                std::fill(gw.begin(), gw.end(), 0.0);
                double gb = 0.0;
                for (std::size_t k = start; k < stop; ++k) {
                    const std::size_t i = order[k];
                    const double* xi = x.row(i);
                    const double pr = h.predict(xi);
                    const double g = pr - static_cast<double>(y[i]);
                    for (std::size_t j = 0; j < m; ++j) gw[j] += g * xi[j];
                    gb += g;
                    epoch_loss += detail::bce_term(pr, y[i]);
                }
                for (std::size_t j = 0; j < m; ++j) {
                    h.weights[j] -= p.learning_rate * (gw[j] / bsz + p.l2 * h.weights[j]);
                }
                h.bias -= p.learning_rate * gb / bsz;
            }
            epoch_loss /= static_cast<double>(n);
            detail::check_epoch_loss(epoch_loss, epoch, "logreg");
            losses.push_back(epoch_loss);
        }
        h.final_train_loss = losses.back();
        h.tail_loss_nonincreasing = detail::tail_loss_nonincreasing(losses);
        return h;
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"weights", weights},
                              {"bias", bias},
                              {"final_train_loss", final_train_loss},
                              {"tail_loss_nonincreasing", tail_loss_nonincreasing}};
    }

    static LogisticRegressionHead from_json(const nlohmann::json& j) {
        LogisticRegressionHead h;
        h.weights = j.at("weights").get<std::vector<double>>();
        h.bias = j.at("bias").get<double>();
        h.final_train_loss = j.at("final_train_loss").get<double>();
        h.tail_loss_nonincreasing = j.at("tail_loss_nonincreasing").get<bool>();
        return h;
    }
};

}  // namespace shapaudit
