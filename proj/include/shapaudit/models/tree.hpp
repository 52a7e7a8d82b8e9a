#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "shapaudit/common.hpp"
#include "shapaudit/data.hpp"
#include "shapaudit/rng.hpp"

namespace shapaudit {

struct TreeParams {
    int max_depth = 0;  // 0 = unbounded
    int min_samples_leaf = 1;
};

struct ForestParams {
    int n_trees = 200;
    int max_depth = 0;
    int min_samples_leaf = 1;
};

// Binary CART classifier minimizing Gini impurity. Candidate columns are
// scanned in ascending index order and thresholds in ascending value order;
// only a strictly better split replaces the incumbent, so ties resolve to the
// first candidate encountered and the fit is deterministic.
class DecisionTreeHead {
  public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double prob = 0.0;
    };

    std::vector<Node> nodes;

    double predict(const double* x) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const Node& nd = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(i)].prob;
    }

    static DecisionTreeHead fit(const Matrix& x, std::span<const int> y, const TreeParams& p) {
        std::vector<std::size_t> rows(x.n);
        for (std::size_t i = 0; i < x.n; ++i) rows[i] = i;
        DecisionTreeHead t;
        t.build(x, y, std::move(rows), p.max_depth, p.min_samples_leaf, 0, nullptr);
        return t;
    }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& nd : nodes) {
            arr.push_back(nlohmann::json{{"f", nd.feature},
                                         {"t", nd.threshold},
                                         {"l", nd.left},
                                         {"r", nd.right},
                                         {"p", nd.prob}});
        }
        return nlohmann::json{{"nodes", arr}};
    }

    static DecisionTreeHead from_json(const nlohmann::json& j) {
        DecisionTreeHead t;
        for (const auto& nj : j.at("nodes")) {
            Node nd;
            nd.feature = nj.at("f").get<int>();
            nd.threshold = nj.at("t").get<double>();
            nd.left = nj.at("l").get<int>();
            nd.right = nj.at("r").get<int>();
            nd.prob = nj.at("p").get<double>();
            t.nodes.push_back(nd);
        }
        if (t.nodes.empty()) throw ConfigError("tree: empty node list");
        return t;
    }

  private:
    friend class RandomForestHead;

    struct Pending {
        std::vector<std::size_t> rows;
        int depth;
        std::size_t slot;
    };

    // mtry = 0 scans every column; otherwise mtry distinct columns are drawn
    // per split from rng (required in that case). Node processing is preorder
    // with the left child first, which pins the rng consumption order.
    void build(const Matrix& x, std::span<const int> y, std::vector<std::size_t> root_rows,
               int max_depth, int min_samples_leaf, std::size_t mtry, RngStream* rng) {
        if (root_rows.empty()) throw ValidationError("tree: empty training set");
        if (min_samples_leaf < 1) throw ValidationError("tree: min_samples_leaf must be >= 1");
        const std::size_t msl = static_cast<std::size_t>(min_samples_leaf);

        nodes.clear();
        nodes.emplace_back();
        std::vector<Pending> stack;
        stack.push_back({std::move(root_rows), 0, 0});

        std::vector<std::pair<double, int>> cells;
        std::vector<std::size_t> cols;
        while (!stack.empty()) {
            Pending task = std::move(stack.back());
            stack.pop_back();
            const std::size_t n = task.rows.size();
            std::size_t n1 = 0;
            for (std::size_t r : task.rows) n1 += static_cast<std::size_t>(y[r]);
            const double prob =
                static_cast<double>(n1) / static_cast<double>(n);

            const bool depth_stop = max_depth > 0 && task.depth >= max_depth;
            const bool pure = n1 == 0 || n1 == n;
            if (depth_stop || pure || n < 2 * msl) {
                nodes[task.slot].prob = prob;
                continue;
            }

            if (mtry == 0) {
                cols.resize(x.m);
                for (std::size_t j = 0; j < x.m; ++j) cols[j] = j;
            } else {
                cols = rng->sample_without_replacement(x.m, std::min(mtry, x.m));
                std::sort(cols.begin(), cols.end());
            }

            double best_impurity = std::numeric_limits<double>::infinity();
            std::size_t best_col = 0;
            double best_threshold = 0.0;
            for (std::size_t col : cols) {
                cells.clear();
                for (std::size_t r : task.rows) {
                    cells.emplace_back(x.at(r, col), y[r]);
                }
                std::sort(cells.begin(), cells.end(),
                          [](const auto& a, const auto& b) { return a.first < b.first; });
                std::size_t nl = 0;
                std::size_t nl1 = 0;
                for (std::size_t i = 0; i + 1 < n; ++i) {
                    ++nl;
                    nl1 += static_cast<std::size_t>(cells[i].second);
                    if (cells[i].first == cells[i + 1].first) continue;
                    const std::size_t nr = n - nl;
                    if (nl < msl || nr < msl) continue;
                    const double pl = static_cast<double>(nl1) / static_cast<double>(nl);
                    const double pr =
                        static_cast<double>(n1 - nl1) / static_cast<double>(nr);
                    const double gl = 2.0 * pl * (1.0 - pl);
                    const double gr = 2.0 * pr * (1.0 - pr);
                    const double impurity = (static_cast<double>(nl) * gl +
                                             static_cast<double>(nr) * gr) /
                                            static_cast<double>(n);
                    if (impurity < best_impurity) {
                        best_impurity = impurity;
                        best_col = col;
                        best_threshold = 0.5 * (cells[i].first + cells[i + 1].first);
                    }
                }
            }

            if (!std::isfinite(best_impurity)) {
                nodes[task.slot].prob = prob;
                continue;
            }

            std::vector<std::size_t> left_rows;
            std::vector<std::size_t> right_rows;
            for (std::size_t r : task.rows) {
                (x.at(r, best_col) <= best_threshold ? left_rows : right_rows).push_back(r);
            }

            const auto left_slot = nodes.size();
            nodes.emplace_back();
            const auto right_slot = nodes.size();
            nodes.emplace_back();
            nodes[task.slot].feature = static_cast<int>(best_col);
            nodes[task.slot].threshold = best_threshold;
            nodes[task.slot].left = static_cast<int>(left_slot);
            nodes[task.slot].right = static_cast<int>(right_slot);
            nodes[task.slot].prob = prob;
            stack.push_back({std::move(right_rows), task.depth + 1, right_slot});
            stack.push_back({std::move(left_rows), task.depth + 1, left_slot});
        }
    }
};

// Bagged CART ensemble: tree t draws its bootstrap and per-split column
// subsets (floor(sqrt(m)) columns) from fork(t) of the training stream, and
// the predicted probability is the arithmetic mean over trees.
class RandomForestHead {
  public:
    std::vector<DecisionTreeHead> trees;

    double predict(const double* x) const {
        double s = 0.0;
        for (const auto& t : trees) s += t.predict(x);
        return s / static_cast<double>(trees.size());
    }

    static RandomForestHead fit(const Matrix& x, std::span<const int> y, const ForestParams& p,
                                RngStream rng) {
        if (p.n_trees <= 0) throw ValidationError("rforest: n_trees must be positive");
        const std::size_t mtry =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(
                                         static_cast<double>(x.m))));
        RandomForestHead f;
        f.trees.resize(static_cast<std::size_t>(p.n_trees));
        for (std::size_t t = 0; t < f.trees.size(); ++t) {
            RngStream tree_rng = rng.fork(t);
            std::vector<std::size_t> rows(x.n);
            for (std::size_t i = 0; i < x.n; ++i) {
                rows[i] = static_cast<std::size_t>(tree_rng.next_below(x.n));
            }
            f.trees[t].build(x, y, std::move(rows), p.max_depth, p.min_samples_leaf, mtry,
                             &tree_rng);
        }
        return f;
    }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& t : trees) arr.push_back(t.to_json());
        return nlohmann::json{{"trees", arr}};
    }

    static RandomForestHead from_json(const nlohmann::json& j) {
        RandomForestHead f;
        for (const auto& tj : j.at("trees")) f.trees.push_back(DecisionTreeHead::from_json(tj));
        if (f.trees.empty()) throw ConfigError("rforest: empty tree list");
        return f;
    }
};

}  // namespace shapaudit
