#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shapaudit/common.hpp"

namespace shapaudit {

using json = nlohmann::json;

// The two independent seeds that parameterize one audited run.
struct SeedPair {
    std::uint64_t model_seed = 0;
    std::uint64_t explainer_seed = 0;

    friend bool operator==(const SeedPair&, const SeedPair&) = default;
};

enum class ModelClass { logreg, dtree, rforest, mlp };
enum class ExplainerKind { exact, kernel };
enum class MultiplicitySetting { overall, model_induced, explainer_induced };

inline std::string to_string(ModelClass c) {
    switch (c) {
        case ModelClass::logreg: return "logreg";
        case ModelClass::dtree: return "dtree";
        case ModelClass::rforest: return "rforest";
        case ModelClass::mlp: return "mlp";
    }
    throw ValidationError("unknown model class");
}

inline ModelClass model_class_from_string(const std::string& s) {
    if (s == "logreg") return ModelClass::logreg;
    if (s == "dtree") return ModelClass::dtree;
    if (s == "rforest") return ModelClass::rforest;
    if (s == "mlp") return ModelClass::mlp;
    throw ValidationError("unknown model class '" + s + "' (expected logreg|dtree|rforest|mlp)");
}

inline std::string to_string(ExplainerKind k) {
    return k == ExplainerKind::exact ? "exact" : "kernel";
}

inline ExplainerKind explainer_kind_from_string(const std::string& s) {
    if (s == "exact") return ExplainerKind::exact;
    if (s == "kernel") return ExplainerKind::kernel;
    throw ValidationError("unknown explainer kind '" + s + "' (expected exact|kernel)");
}

inline std::string to_string(MultiplicitySetting m) {
    switch (m) {
        case MultiplicitySetting::overall: return "overall";
        case MultiplicitySetting::model_induced: return "model_induced";
        case MultiplicitySetting::explainer_induced: return "explainer_induced";
    }
    throw ValidationError("unknown multiplicity setting");
}

inline MultiplicitySetting setting_from_string(const std::string& s) {
    if (s == "overall") return MultiplicitySetting::overall;
    if (s == "model_induced") return MultiplicitySetting::model_induced;
    if (s == "explainer_induced") return MultiplicitySetting::explainer_induced;
    throw ValidationError("unknown setting '" + s +
                          "' (expected overall|model_induced|explainer_induced)");
}

// One attribution vector, tagged with where it came from.
struct ExplanationVector {
    std::vector<double> values;
    std::vector<std::string> feature_names;
    std::string instance_id;
    SeedPair seed_pair;

    std::size_t dim() const { return values.size(); }

    void validate() const {
        if (values.empty()) throw ValidationError("explanation has no values");
        if (values.size() != feature_names.size()) {
            throw ValidationError("explanation values and feature names disagree in length");
        }
        for (double v : values) {
            if (!std::isfinite(v)) throw ValidationError("explanation contains a non-finite value");
        }
    }

    json to_json() const {
        return json{{"instance_id", instance_id},
                    {"model_seed", seed_pair.model_seed},
                    {"explainer_seed", seed_pair.explainer_seed},
                    {"features", feature_names},
                    {"phi", values}};
    }

    static ExplanationVector from_json(const json& j) {
        ExplanationVector e;
        e.instance_id = j.at("instance_id").get<std::string>();
        e.seed_pair.model_seed = j.at("model_seed").get<std::uint64_t>();
        e.seed_pair.explainer_seed = j.at("explainer_seed").get<std::uint64_t>();
        e.feature_names = j.at("features").get<std::vector<std::string>>();
        e.values = j.at("phi").get<std::vector<double>>();
        e.validate();
        return e;
    }
};

// Feature indices ordered from most to least important.
struct Ranking {
    std::vector<int> order;

    std::size_t dim() const { return order.size(); }
};

// Ranks features by |value| descending; equal magnitudes keep ascending index
// order so rankings are total and reproducible.
inline Ranking ranking_of(std::span<const double> values) {
    if (values.empty()) throw ValidationError("ranking_of: empty vector");
    for (double v : values) {
        if (!std::isfinite(v)) throw ValidationError("ranking_of: non-finite value");
    }
    Ranking r;
    r.order.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) r.order[i] = static_cast<int>(i);
    std::sort(r.order.begin(), r.order.end(), [&](int a, int b) {
        const double ma = std::fabs(values[static_cast<std::size_t>(a)]);
        const double mb = std::fabs(values[static_cast<std::size_t>(b)]);
        if (ma != mb) return ma > mb;
        return a < b;
    });
    return r;
}

inline Ranking ranking_of(const ExplanationVector& e) {
    e.validate();
    return ranking_of(std::span<const double>(e.values));
}

// Identifies one cell of an audit: which instance of which fold gets explained
// for which model class, and how.
struct ExplanationQuery {
    std::string dataset_id;
    int fold_id = 0;
    std::size_t instance_index = 0;
    ModelClass model_class = ModelClass::logreg;
    ExplainerKind explainer_kind = ExplainerKind::kernel;
    std::size_t background_size = 0;

    void validate() const {
        if (dataset_id.empty()) throw ValidationError("query: dataset_id is empty");
        if (fold_id < 0) throw ValidationError("query: fold_id is negative");
        if (background_size == 0) throw ValidationError("query: background_size must be positive");
    }

    json to_json() const {
        return json{{"dataset_id", dataset_id},
                    {"fold_id", fold_id},
                    {"instance_index", instance_index},
                    {"model_class", to_string(model_class)},
                    {"explainer_kind", to_string(explainer_kind)},
                    {"background_size", background_size}};
    }
};

}  // namespace shapaudit
