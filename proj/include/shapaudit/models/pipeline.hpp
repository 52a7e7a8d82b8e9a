#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "shapaudit/common.hpp"
#include "shapaudit/core.hpp"
#include "shapaudit/data.hpp"
#include "shapaudit/models/linear.hpp"
#include "shapaudit/models/mlp.hpp"
#include "shapaudit/models/tree.hpp"
#include "shapaudit/models/tuning.hpp"
#include "shapaudit/rng.hpp"

namespace shapaudit {

namespace detail {

inline void reject_unknown_keys(const json& hyper, const std::set<std::string>& allowed,
                                const std::string& cls) {
    if (!hyper.is_object()) throw ConfigError(cls + ": hyperparameters must be an object");
    for (const auto& [key, value] : hyper.items()) {
        (void)value;
        if (!allowed.count(key)) {
            throw ConfigError(cls + ": unknown hyperparameter '" + key + "'");
        }
    }
}

template <typename T>
T hyper_get(const json& hyper, const std::string& key, T fallback) {
    if (!hyper.contains(key) || hyper.at(key).is_null()) return fallback;
    return hyper.at(key).get<T>();
}

}  // namespace detail

inline LogregParams parse_logreg_params(const json& hyper) {
    detail::reject_unknown_keys(hyper, {"learning_rate", "epochs", "l2", "batch_size"}, "logreg");
    LogregParams p;
    p.learning_rate = detail::hyper_get(hyper, "learning_rate", p.learning_rate);
    p.epochs = detail::hyper_get(hyper, "epochs", p.epochs);
    p.l2 = detail::hyper_get(hyper, "l2", p.l2);
    p.batch_size = detail::hyper_get(hyper, "batch_size", p.batch_size);
    return p;
}

inline TreeParams parse_tree_params(const json& hyper) {
    detail::reject_unknown_keys(hyper, {"max_depth", "min_samples_leaf"}, "dtree");
    TreeParams p;
    p.max_depth = detail::hyper_get(hyper, "max_depth", p.max_depth);
    p.min_samples_leaf = detail::hyper_get(hyper, "min_samples_leaf", p.min_samples_leaf);
    return p;
}

inline ForestParams parse_forest_params(const json& hyper) {
    detail::reject_unknown_keys(hyper, {"n_trees", "max_depth", "min_samples_leaf"}, "rforest");
    ForestParams p;
    p.n_trees = detail::hyper_get(hyper, "n_trees", p.n_trees);
    p.max_depth = detail::hyper_get(hyper, "max_depth", p.max_depth);
    p.min_samples_leaf = detail::hyper_get(hyper, "min_samples_leaf", p.min_samples_leaf);
    return p;
}

inline MlpParams parse_mlp_params(const json& hyper) {
    detail::reject_unknown_keys(hyper, {"hidden", "learning_rate", "epochs", "l2", "batch_size"},
                                "mlp");
    MlpParams p;
    p.hidden = detail::hyper_get(hyper, "hidden", p.hidden);
    p.learning_rate = detail::hyper_get(hyper, "learning_rate", p.learning_rate);
    p.epochs = detail::hyper_get(hyper, "epochs", p.epochs);
    p.l2 = detail::hyper_get(hyper, "l2", p.l2);
    p.batch_size = detail::hyper_get(hyper, "batch_size", p.batch_size);
    return p;
}

inline json resolved_hyperparams(ModelClass cls, const json& hyper) {
    switch (cls) {
        case ModelClass::logreg: {
            const auto p = parse_logreg_params(hyper);
            return json{{"learning_rate", p.learning_rate},
                        {"epochs", p.epochs},
                        {"l2", p.l2},
                        {"batch_size", p.batch_size}};
        }
        case ModelClass::dtree: {
            const auto p = parse_tree_params(hyper);
            return json{{"max_depth", p.max_depth}, {"min_samples_leaf", p.min_samples_leaf}};
        }
        case ModelClass::rforest: {
            const auto p = parse_forest_params(hyper);
            return json{{"n_trees", p.n_trees},
                        {"max_depth", p.max_depth},
                        {"min_samples_leaf", p.min_samples_leaf}};
        }
        case ModelClass::mlp: {
            const auto p = parse_mlp_params(hyper);
            return json{{"hidden", p.hidden},
                        {"learning_rate", p.learning_rate},
                        {"epochs", p.epochs},
                        {"l2", p.l2},
                        {"batch_size", p.batch_size}};
        }
    }
    throw ValidationError("unknown model class");
}

// A fitted preprocessing transform plus classifier head, everything needed to
// score raw rows. Bitwise reproducible from (class, hyperparams, training
// rows, model_seed).
struct PipelineModel {
    ModelClass cls = ModelClass::logreg;
    std::uint64_t model_seed = 0;
    json hyperparams;  // resolved values, defaults filled in
    DatasetSchema schema;
    PreprocessTransform transform;
    std::vector<std::size_t> train_rows;
    std::variant<LogisticRegressionHead, DecisionTreeHead, RandomForestHead, MlpHead> head;

    double predict_encoded(const double* x) const {
        return std::visit([&](const auto& h) { return h.predict(x); }, head);
    }

    // Probability of the positive class for one semantic-space row.
    double predict_proba(const RawRow& row) const {
        thread_local std::vector<double> buf;
        buf.resize(transform.encoded_dim);
        transform.apply(row, buf.data());
        return predict_encoded(buf.data());
    }

    bool tail_loss_nonincreasing() const {
        if (const auto* h = std::get_if<LogisticRegressionHead>(&head)) {
            return h->tail_loss_nonincreasing;
        }
        if (const auto* h = std::get_if<MlpHead>(&head)) return h->tail_loss_nonincreasing;
        return true;
    }

    json to_json() const {
        json head_json;
        std::visit([&](const auto& h) { head_json = h.to_json(); }, head);
        return json{{"format_version", 1},
                    {"tool", json{{"name", kToolName}, {"version", kToolVersion}}},
                    {"model_class", to_string(cls)},
                    {"model_seed", model_seed},
                    {"hyperparams", hyperparams},
                    {"schema", schema.to_json()},
                    {"transform", transform.to_json()},
                    {"train_rows", train_rows},
                    {"head", head_json}};
    }

    static PipelineModel from_json(const json& j) {
        if (j.at("format_version").get<int>() != 1) {
            throw ConfigError("model file: unsupported format_version");
        }
        PipelineModel m;
        m.cls = model_class_from_string(j.at("model_class").get<std::string>());
        m.model_seed = j.at("model_seed").get<std::uint64_t>();
        m.hyperparams = j.at("hyperparams");
        m.schema = DatasetSchema::from_json(j.at("schema"));
        // schema files do not carry levels, but model files must
        {
            const auto& feats = j.at("schema").at("features");
            for (std::size_t f = 0; f < m.schema.features.size(); ++f) {
                if (feats[f].contains("levels")) {
                    m.schema.features[f].levels =
                        feats[f].at("levels").get<std::vector<std::string>>();
                }
            }
        }
        m.transform = PreprocessTransform::from_json(j.at("transform"));
        m.train_rows = j.at("train_rows").get<std::vector<std::size_t>>();
        const auto& hj = j.at("head");
        switch (m.cls) {
            case ModelClass::logreg: m.head = LogisticRegressionHead::from_json(hj); break;
            case ModelClass::dtree: m.head = DecisionTreeHead::from_json(hj); break;
            case ModelClass::rforest: m.head = RandomForestHead::from_json(hj); break;
            case ModelClass::mlp: m.head = MlpHead::from_json(hj); break;
        }
        return m;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write model file '" + path + "'");
        out << to_json().dump(2) << '\n';
        if (!out) throw IoError("failed writing model file '" + path + "'");
    }

    static PipelineModel load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open model file '" + path + "'");
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw IoError("model file '" + path + "': " + e.what());
        }
        return from_json(j);
    }
};

// Fits the preprocessing transform on the given rows, then the head, with all
// training randomness drawn from model_seed.
inline PipelineModel train_model(ModelClass cls, const Dataset& ds,
                                 std::span<const std::size_t> rows, const json& hyper,
                                 std::uint64_t model_seed) {
    if (rows.empty()) throw ValidationError("train: empty training split");
    std::size_t n1 = 0;
    for (std::size_t r : rows) {
        if (r >= ds.n()) throw ValidationError("train: row index out of range");
        n1 += static_cast<std::size_t>(ds.labels[r]);
    }
    if (n1 == 0 || n1 == rows.size()) {
        throw ValidationError("train: training split contains a single class");
    }

    PipelineModel m;
    m.cls = cls;
    m.model_seed = model_seed;
    m.hyperparams = resolved_hyperparams(cls, hyper);
    m.schema = ds.schema;
    m.transform = fit_transform(ds, rows);
    m.train_rows.assign(rows.begin(), rows.end());

    const Matrix x = encode_rows(m.transform, ds, rows);
    std::vector<int> y;
    y.reserve(rows.size());
    for (std::size_t r : rows) y.push_back(ds.labels[r]);

    RngStream rng = RngStream::from_seed(model_seed);
    switch (cls) {
        case ModelClass::logreg:
            m.head = LogisticRegressionHead::fit(x, y, parse_logreg_params(hyper), rng);
            break;
        case ModelClass::dtree:
            m.head = DecisionTreeHead::fit(x, y, parse_tree_params(hyper));
            break;
        case ModelClass::rforest:
            m.head = RandomForestHead::fit(x, y, parse_forest_params(hyper), rng);
            break;
        case ModelClass::mlp:
            m.head = MlpHead::fit(x, y, parse_mlp_params(hyper), rng);
            break;
    }
    return m;
}

struct GridSearchResult {
    json best_params;
    std::size_t best_index = 0;
    double best_auc = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> aucs;  // empty when selection was skipped
};

inline json default_hyper_grid(ModelClass cls) {
    switch (cls) {
        case ModelClass::logreg: {
            json grid = json::array();
            for (double lr : {0.1, 0.03}) {
                for (double l2 : {1e-4, 1e-3}) {
                    grid.push_back(json{{"learning_rate", lr}, {"l2", l2}});
                }
            }
            return grid;
        }
        case ModelClass::dtree: {
            json grid = json::array();
            for (int depth : {3, 5, 0}) {
                for (int leaf : {1, 5, 10}) {
                    grid.push_back(json{{"max_depth", depth}, {"min_samples_leaf", leaf}});
                }
            }
            return grid;
        }
        case ModelClass::rforest: {
            json grid = json::array();
            for (int depth : {0, 7, 15}) {
                for (int leaf : {1, 5}) {
                    grid.push_back(json{
                        {"n_trees", 200}, {"max_depth", depth}, {"min_samples_leaf", leaf}});
                }
            }
            return grid;
        }
        case ModelClass::mlp: {
            json grid = json::array();
            for (int hidden : {64, 128}) {
                for (double lr : {0.3, 0.1}) {
                    for (double l2 : {1e-4, 1e-3}) {
                        grid.push_back(
                            json{{"hidden", hidden}, {"learning_rate", lr}, {"l2", l2}});
                    }
                }
            }
            return grid;
        }
    }
    throw ValidationError("unknown model class");
}

// Picks the grid entry with the best validation ROC-AUC on one seeded shuffle
// split (validation fraction 0.2). Ties keep the earliest entry in grid
// order. A single-entry grid is returned as-is without fitting anything,
// since selection could not change the outcome.
inline GridSearchResult grid_search(ModelClass cls, const Dataset& ds,
                                    std::span<const std::size_t> rows, const json& grid,
                                    std::uint64_t seed) {
    if (!grid.is_array() || grid.empty()) {
        throw ConfigError("grid_search: hyperparameter grid must be a non-empty array");
    }
    GridSearchResult res;
    if (grid.size() == 1) {
        res.best_params = grid[0];
        resolved_hyperparams(cls, grid[0]);  // still validate the entry
        return res;
    }

    const auto split = shuffle_split(rows, 0.2, derive_seed(seed, 0x5e1ec7u));
    std::vector<int> val_labels;
    val_labels.reserve(split.val.size());
    for (std::size_t r : split.val) val_labels.push_back(ds.labels[r]);

    double best = -1.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const PipelineModel candidate = train_model(cls, ds, split.train, grid[g], seed);
        std::vector<double> scores;
        scores.reserve(split.val.size());
        for (std::size_t r : split.val) scores.push_back(candidate.predict_proba(ds.rows[r]));
        const double auc = roc_auc(scores, val_labels);
        res.aucs.push_back(auc);
        if (auc > best) {
            best = auc;
            res.best_index = g;
        }
    }
    res.best_params = grid[res.best_index];
    res.best_auc = best;
    return res;
}

}  // namespace shapaudit
