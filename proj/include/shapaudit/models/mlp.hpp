#pragma once

#include <algorithm>
#include <cmath>
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

struct MlpParams {
    int hidden = 64;
    double learning_rate = 0.1;  // plain SGD; needs larger steps than adaptive optimizers
    int epochs = 100;
    double l2 = 1e-4;
    int batch_size = 256;
};

// One-hidden-layer ReLU network with a sigmoid output, trained by mini-batch
// SGD on binary cross-entropy. Weight init and the per-epoch shuffle are the
// only randomness and both come from the stream passed to fit. Runs the full
// epoch budget; there is no early stopping.
class MlpHead {
  public:
    std::size_t in = 0;
    std::size_t hidden = 0;
    std::vector<double> w1;  // hidden x in, row-major
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // hidden
    double b2 = 0.0;
    double final_train_loss = 0.0;
    bool tail_loss_nonincreasing = true;

    double predict(const double* x) const {
        double z2 = b2;
        for (std::size_t h = 0; h < hidden; ++h) {
            double z = b1[h];
            const double* row = w1.data() + h * in;
            for (std::size_t j = 0; j < in; ++j) z += row[j] * x[j];
            if (z > 0.0) z2 += w2[h] * z;
        }
        return sigmoid(z2);
    }

    static MlpHead fit(const Matrix& x, std::span<const int> y, const MlpParams& p,
                       RngStream rng) {
        if (p.hidden <= 0 || p.epochs <= 0 || p.learning_rate <= 0.0 || p.batch_size <= 0 ||
            p.l2 < 0.0) {
            throw ValidationError("mlp: invalid hyperparameters");
        }
        const std::size_t n = x.n;
        const std::size_t m = x.m;
        MlpHead net;
        net.in = m;
        net.hidden = static_cast<std::size_t>(p.hidden);
        net.w1.resize(net.hidden * m);
        net.b1.assign(net.hidden, 0.0);
        net.w2.resize(net.hidden);

        const double lim1 = std::sqrt(6.0 / static_cast<double>(m + net.hidden));
        for (auto& w : net.w1) w = (2.0 * rng.next_unit() - 1.0) * lim1;
        const double lim2 = std::sqrt(6.0 / static_cast<double>(net.hidden + 1));
        for (auto& w : net.w2) w = (2.0 * rng.next_unit() - 1.0) * lim2;

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        const std::size_t batch = static_cast<std::size_t>(p.batch_size);

        std::vector<double> z1(net.hidden);
        std::vector<double> gw1(net.hidden * m);
        std::vector<double> gb1(net.hidden);
        std::vector<double> gw2(net.hidden);
        std::vector<double> losses;
        losses.reserve(static_cast<std::size_t>(p.epochs));
        for (int epoch = 0; epoch < p.epochs; ++epoch) {
            rng.shuffle(order);
            double epoch_loss = 0.0;
            for (std::size_t start = 0; start < n; start += batch) {
                const std::size_t stop = std::min(n, start + batch);
                const double bsz = static_cast<double>(stop - start);
                std::fill(gw1.begin(), gw1.end(), 0.0);
                std::fill(gb1.begin(), gb1.end(), 0.0);
                std::fill(gw2.begin(), gw2.end(), 0.0);
                double gb2 = 0.0;
                for (std::size_t k = start; k < stop; ++k) {
                    const std::size_t i = order[k];
                    const double* xi = x.row(i);
                    double z2 = net.b2;
                    for (std::size_t h = 0; h < net.hidden; ++h) {
                        double z = net.b1[h];
                        const double* row = net.w1.data() + h * m;
                        for (std::size_t j = 0; j < m; ++j) z += row[j] * xi[j];
                        z1[h] = z;
                        if (z > 0.0) z2 += net.w2[h] * z;
                    }
                    const double pr = sigmoid(z2);
                    epoch_loss += detail::bce_term(pr, y[i]);
                    const double dz2 = pr - static_cast<double>(y[i]);
                    gb2 += dz2;
                    for (std::size_t h = 0; h < net.hidden; ++h) {
                        if (z1[h] <= 0.0) continue;
                        gw2[h] += dz2 * z1[h];
                        const double dz1 = dz2 * net.w2[h];
                        gb1[h] += dz1;
                        double* grow = gw1.data() + h * m;
                        for (std::size_t j = 0; j < m; ++j) grow[j] += dz1 * xi[j];
                    }
                }
                const double scale = p.learning_rate / bsz;
                for (std::size_t idx = 0; idx < net.w1.size(); ++idx) {
                    net.w1[idx] -= scale * gw1[idx] + p.learning_rate * p.l2 * net.w1[idx];
                }
                for (std::size_t h = 0; h < net.hidden; ++h) {
                    net.b1[h] -= scale * gb1[h];
                    net.w2[h] -= scale * gw2[h] + p.learning_rate * p.l2 * net.w2[h];
                }
                net.b2 -= scale * gb2;
            }
            epoch_loss /= static_cast<double>(n);
            detail::check_epoch_loss(epoch_loss, epoch, "mlp");
            losses.push_back(epoch_loss);
        }
        net.final_train_loss = losses.back();
        net.tail_loss_nonincreasing = detail::tail_loss_nonincreasing(losses);
        return net;
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"in", in},
                              {"hidden", hidden},
                              {"w1", w1},
                              {"b1", b1},
                              {"w2", w2},
                              {"b2", b2},
                              {"final_train_loss", final_train_loss},
                              {"tail_loss_nonincreasing", tail_loss_nonincreasing}};
    }

    static MlpHead from_json(const nlohmann::json& j) {
        MlpHead h;
        h.in = j.at("in").get<std::size_t>();
        h.hidden = j.at("hidden").get<std::size_t>();
        h.w1 = j.at("w1").get<std::vector<double>>();
        h.b1 = j.at("b1").get<std::vector<double>>();
        h.w2 = j.at("w2").get<std::vector<double>>();
        h.b2 = j.at("b2").get<double>();
        h.final_train_loss = j.at("final_train_loss").get<double>();
        h.tail_loss_nonincreasing = j.at("tail_loss_nonincreasing").get<bool>();
        if (h.w1.size() != h.in * h.hidden || h.b1.size() != h.hidden ||
            h.w2.size() != h.hidden) {
            throw ConfigError("mlp: inconsistent weight shapes");
        }
        return h;
    }
};

}  // namespace shapaudit
