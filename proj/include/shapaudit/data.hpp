#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shapaudit/common.hpp"
#include "shapaudit/csv.hpp"
#include "shapaudit/rng.hpp"

namespace shapaudit {

enum class FeatureKind { numeric, categorical };

inline std::string to_string(FeatureKind k) {
    return k == FeatureKind::numeric ? "numeric" : "categorical";
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
    if (s == "numeric") return FeatureKind::numeric;
    if (s == "categorical") return FeatureKind::categorical;
    throw ConfigError("unknown feature kind '" + s + "' (expected numeric|categorical)");
}

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::numeric;
    // Level strings for categorical features, ascending; filled at load time
    // as the union of levels observed in the full dataset.
    std::vector<std::string> levels;
};

struct DatasetSchema {
    std::string id;
    std::string label_name;
    std::string positive_label;
    std::vector<FeatureSpec> features;

    static DatasetSchema from_json(const nlohmann::json& j) {
        DatasetSchema s;
        s.id = j.at("id").get<std::string>();
        s.label_name = j.at("label").get<std::string>();
        s.positive_label = j.at("positive_label").get<std::string>();
        for (const auto& f : j.at("features")) {
            FeatureSpec spec;
            spec.name = f.at("name").get<std::string>();
            spec.kind = feature_kind_from_string(f.at("kind").get<std::string>());
            s.features.push_back(std::move(spec));
        }
        if (s.features.empty()) throw ConfigError("schema '" + s.id + "' declares no features");
        return s;
    }

    static DatasetSchema from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open schema file '" + path + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw IoError("schema file '" + path + "': " + e.what());
        }
        return from_json(j);
    }

    nlohmann::json to_json() const {
        nlohmann::json feats = nlohmann::json::array();
        for (const auto& f : features) {
            nlohmann::json fj{{"name", f.name}, {"kind", to_string(f.kind)}};
            if (f.kind == FeatureKind::categorical) fj["levels"] = f.levels;
            feats.push_back(std::move(fj));
        }
        return nlohmann::json{{"id", id},
                              {"label", label_name},
                              {"positive_label", positive_label},
                              {"features", feats}};
    }
};

// One instance in semantic-feature space: numeric cells hold the raw value,
// categorical cells hold the level index into the schema's level registry.
using RawRow = std::vector<double>;

struct Dataset {
    DatasetSchema schema;
    std::vector<RawRow> rows;
    std::vector<int> labels;  // 0/1, 1 = positive_label
    std::size_t dropped_rows = 0;

    std::size_t n() const { return rows.size(); }
    std::size_t d() const { return schema.features.size(); }
    const std::string& id() const { return schema.id; }
};

namespace detail {

inline bool is_missing_token(const std::string& s) {
    return s.empty() || s == "NA" || s == "N/A" || s == "?";
}

inline double parse_numeric_cell(const std::string& s, std::size_t line,
                                 const std::string& column) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
        throw IoError("line " + std::to_string(line) + ", column '" + column +
                      "': cannot parse '" + s + "' as a number");
    }
    return v;
}

}  // namespace detail

// Loads a CSV against a declared schema. Rows with any missing cell are
// dropped (counted in dropped_rows); categorical level registries are the
// sorted union of levels observed across the full file.
inline Dataset load_csv(const std::string& path, const DatasetSchema& schema) {
    const CsvTable table = read_csv_file(path);

    std::map<std::string, std::size_t> header_pos;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (!header_pos.emplace(table.header[i], i).second) {
            throw IoError("CSV file '" + path + "': duplicate column '" + table.header[i] + "'");
        }
    }

    std::set<std::string> expected;
    for (const auto& f : schema.features) expected.insert(f.name);
    expected.insert(schema.label_name);
    for (const auto& name : table.header) {
        if (!expected.count(name)) {
            throw IoError("CSV file '" + path + "': unknown column '" + name + "'");
        }
    }

    auto column_of = [&](const std::string& name) {
        auto it = header_pos.find(name);
        if (it == header_pos.end()) {
            throw IoError("CSV file '" + path + "': required column '" + name + "' is missing");
        }
        return it->second;
    };

    std::vector<std::size_t> feature_cols;
    for (const auto& f : schema.features) feature_cols.push_back(column_of(f.name));
    const std::size_t label_col = column_of(schema.label_name);

    Dataset ds;
    ds.schema = schema;
    const std::size_t d = schema.features.size();

    // First pass: drop incomplete rows, collect level registries.
    std::vector<std::set<std::string>> level_sets(d);
    std::vector<const std::vector<std::string>*> kept;
    std::set<std::string> label_values;
    for (const auto& row : table.rows) {
        bool missing = detail::is_missing_token(row[label_col]);
        for (std::size_t f = 0; f < d && !missing; ++f) {
            missing = detail::is_missing_token(row[feature_cols[f]]);
        }
        if (missing) {
            ++ds.dropped_rows;
            continue;
        }
        kept.push_back(&row);
        for (std::size_t f = 0; f < d; ++f) {
            if (schema.features[f].kind == FeatureKind::categorical) {
                level_sets[f].insert(row[feature_cols[f]]);
            }
        }
        label_values.insert(row[label_col]);
    }
    if (kept.empty()) throw IoError("CSV file '" + path + "': no complete rows");
    if (label_values.size() != 2) {
        throw ValidationError("CSV file '" + path + "': expected exactly 2 label values, found " +
                              std::to_string(label_values.size()));
    }
    if (!label_values.count(schema.positive_label)) {
        throw ValidationError("CSV file '" + path + "': positive label '" +
                              schema.positive_label + "' never occurs");
    }
    for (std::size_t f = 0; f < d; ++f) {
        ds.schema.features[f].levels.assign(level_sets[f].begin(), level_sets[f].end());
    }

    // Second pass: materialize rows, with line numbers for parse errors.
    std::size_t kept_idx = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (kept_idx >= kept.size() || kept[kept_idx] != &table.rows[r]) continue;
        const auto& row = table.rows[r];
        const std::size_t line = r + 2;  // header is line 1
        RawRow out(d);
        for (std::size_t f = 0; f < d; ++f) {
            const std::string& cell = row[feature_cols[f]];
            if (ds.schema.features[f].kind == FeatureKind::numeric) {
                out[f] = detail::parse_numeric_cell(cell, line, schema.features[f].name);
            } else {
                const auto& levels = ds.schema.features[f].levels;
                const auto it = std::lower_bound(levels.begin(), levels.end(), cell);
                out[f] = static_cast<double>(it - levels.begin());
            }
        }
        ds.rows.push_back(std::move(out));
        ds.labels.push_back(row[label_col] == schema.positive_label ? 1 : 0);
        ++kept_idx;
    }
    return ds;
}

// Dense row-major matrix of encoded rows.
struct Matrix {
    std::vector<double> data;
    std::size_t n = 0;
    std::size_t m = 0;

    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : data(rows * cols, 0.0), n(rows), m(cols) {}

    double* row(std::size_t i) { return data.data() + i * m; }
    const double* row(std::size_t i) const { return data.data() + i * m; }
    double& at(std::size_t i, std::size_t j) { return data[i * m + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * m + j]; }
};

// Column transform fitted on a training subset: numerics are standardized
// with the population standard deviation, categoricals are one-hot over the
// levels seen in that subset. Levels unseen at fit time encode to all zeros.
struct PreprocessTransform {
    struct FeatureEncoder {
        std::string name;
        FeatureKind kind = FeatureKind::numeric;
        double mean = 0.0;
        double stddev = 1.0;
        std::vector<int> train_levels;      // ascending level ids seen at fit time
        std::vector<std::string> registry;  // full level registry (strings)
    };

    std::vector<FeatureEncoder> encoders;
    std::vector<std::vector<std::size_t>> group_map;  // semantic feature -> encoded columns
    std::size_t encoded_dim = 0;

    std::size_t d() const { return encoders.size(); }

    std::vector<std::string> feature_names() const {
        std::vector<std::string> names;
        names.reserve(encoders.size());
        for (const auto& e : encoders) names.push_back(e.name);
        return names;
    }

    std::vector<std::string> encoded_names() const {
        std::vector<std::string> names(encoded_dim);
        for (std::size_t f = 0; f < encoders.size(); ++f) {
            const auto& e = encoders[f];
            for (std::size_t c = 0; c < group_map[f].size(); ++c) {
                names[group_map[f][c]] =
                    e.kind == FeatureKind::numeric
                        ? e.name
                        : e.name + "=" + e.registry[static_cast<std::size_t>(e.train_levels[c])];
            }
        }
        return names;
    }

    void apply(const RawRow& row, double* out) const {
        if (row.size() != encoders.size()) {
            throw ValidationError("transform: row has " + std::to_string(row.size()) +
                                  " features, transform expects " +
                                  std::to_string(encoders.size()));
        }
        for (std::size_t c = 0; c < encoded_dim; ++c) out[c] = 0.0;
        for (std::size_t f = 0; f < encoders.size(); ++f) {
            const auto& e = encoders[f];
            const double v = row[f];
            if (!std::isfinite(v)) throw ValidationError("transform: non-finite cell");
            if (e.kind == FeatureKind::numeric) {
                out[group_map[f][0]] = (v - e.mean) / e.stddev;
            } else {
                const int id = static_cast<int>(v);
                const auto it =
                    std::lower_bound(e.train_levels.begin(), e.train_levels.end(), id);
                if (it != e.train_levels.end() && *it == id) {
                    out[group_map[f][static_cast<std::size_t>(it - e.train_levels.begin())]] = 1.0;
                }
            }
        }
    }

    std::vector<double> apply(const RawRow& row) const {
        std::vector<double> out(encoded_dim);
        apply(row, out.data());
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json encs = nlohmann::json::array();
        for (const auto& e : encoders) {
            nlohmann::json ej{{"name", e.name}, {"kind", to_string(e.kind)}};
            if (e.kind == FeatureKind::numeric) {
                ej["mean"] = e.mean;
                ej["stddev"] = e.stddev;
            } else {
                std::vector<std::string> train_level_strings;
                for (int id : e.train_levels) {
                    train_level_strings.push_back(e.registry[static_cast<std::size_t>(id)]);
                }
                ej["train_levels"] = train_level_strings;
                ej["registry"] = e.registry;
            }
            encs.push_back(std::move(ej));
        }
        return nlohmann::json{{"encoders", encs}};
    }

    static PreprocessTransform from_json(const nlohmann::json& j) {
        PreprocessTransform t;
        for (const auto& ej : j.at("encoders")) {
            FeatureEncoder e;
            e.name = ej.at("name").get<std::string>();
            e.kind = feature_kind_from_string(ej.at("kind").get<std::string>());
            if (e.kind == FeatureKind::numeric) {
                e.mean = ej.at("mean").get<double>();
                e.stddev = ej.at("stddev").get<double>();
            } else {
                e.registry = ej.at("registry").get<std::vector<std::string>>();
                for (const auto& s : ej.at("train_levels").get<std::vector<std::string>>()) {
                    const auto it = std::lower_bound(e.registry.begin(), e.registry.end(), s);
                    if (it == e.registry.end() || *it != s) {
                        throw ConfigError("transform: train level '" + s + "' not in registry");
                    }
                    e.train_levels.push_back(static_cast<int>(it - e.registry.begin()));
                }
            }
            t.encoders.push_back(std::move(e));
        }
        t.rebuild_group_map();
        return t;
    }

    void rebuild_group_map() {
        group_map.clear();
        encoded_dim = 0;
        for (const auto& e : encoders) {
            std::vector<std::size_t> cols;
            const std::size_t width =
                e.kind == FeatureKind::numeric ? 1 : e.train_levels.size();
            for (std::size_t c = 0; c < width; ++c) cols.push_back(encoded_dim++);
            group_map.push_back(std::move(cols));
        }
    }
};

inline PreprocessTransform fit_transform(const Dataset& ds,
                                         std::span<const std::size_t> train_rows) {
    if (train_rows.empty()) throw ValidationError("fit_transform: empty training subset");
    for (std::size_t r : train_rows) {
        if (r >= ds.n()) throw ValidationError("fit_transform: row index out of range");
    }

    PreprocessTransform t;
    for (std::size_t f = 0; f < ds.d(); ++f) {
        PreprocessTransform::FeatureEncoder e;
        e.name = ds.schema.features[f].name;
        e.kind = ds.schema.features[f].kind;
        if (e.kind == FeatureKind::numeric) {
            double sum = 0.0;
            for (std::size_t r : train_rows) sum += ds.rows[r][f];
            e.mean = sum / static_cast<double>(train_rows.size());
            double ss = 0.0;
            for (std::size_t r : train_rows) {
                const double dlt = ds.rows[r][f] - e.mean;
                ss += dlt * dlt;
            }
            e.stddev = std::sqrt(ss / static_cast<double>(train_rows.size()));
            if (e.stddev == 0.0) e.stddev = 1.0;  // constant column passes through as zero
        } else {
            std::set<int> seen;
            for (std::size_t r : train_rows) seen.insert(static_cast<int>(ds.rows[r][f]));
            e.train_levels.assign(seen.begin(), seen.end());
            e.registry = ds.schema.features[f].levels;
        }
        t.encoders.push_back(std::move(e));
    }
    t.rebuild_group_map();
    return t;
}

inline Matrix encode_rows(const PreprocessTransform& t, const Dataset& ds,
                          std::span<const std::size_t> rows) {
    Matrix x(rows.size(), t.encoded_dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        t.apply(ds.rows[rows[i]], x.row(i));
    }
    return x;
}

// Deterministic assignment of every row to one of n_folds test folds.
struct FoldPlan {
    int n_folds = 0;
    std::uint64_t seed = 0;
    std::vector<int> assignments;  // row index -> fold

    std::vector<std::size_t> test_rows(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t r = 0; r < assignments.size(); ++r) {
            if (assignments[r] == fold) out.push_back(r);
        }
        return out;
    }

    std::vector<std::size_t> train_rows(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t r = 0; r < assignments.size(); ++r) {
            if (assignments[r] != fold) out.push_back(r);
        }
        return out;
    }

    nlohmann::json to_json() const {
        return nlohmann::json{
            {"n_folds", n_folds}, {"seed", seed}, {"assignments", assignments}};
    }
};

// Stratified K-fold split: per-class seeded shuffles dealt in near-equal
// chunks, rotating which folds absorb the remainders so overall fold sizes
// stay within one row of each other.
inline FoldPlan stratified_folds(const Dataset& ds, int n_folds, std::uint64_t seed) {
    if (n_folds < 2) throw ValidationError("stratified_folds: need at least 2 folds");
    const std::size_t folds = static_cast<std::size_t>(n_folds);

    std::vector<std::vector<std::size_t>> by_class(2);
    for (std::size_t r = 0; r < ds.n(); ++r) {
        by_class[static_cast<std::size_t>(ds.labels[r])].push_back(r);
    }
    for (std::size_t c = 0; c < 2; ++c) {
        if (by_class[c].size() < folds) {
            throw ValidationError("stratified_folds: class " + std::to_string(c) + " has " +
                                  std::to_string(by_class[c].size()) + " rows, fewer than " +
                                  std::to_string(n_folds) + " folds");
        }
    }

    FoldPlan plan;
    plan.n_folds = n_folds;
    plan.seed = seed;
    plan.assignments.assign(ds.n(), -1);

    RngStream root = RngStream::from_seed(seed);
    std::size_t remainder_offset = 0;
    for (std::size_t c = 0; c < 2; ++c) {
        auto& members = by_class[c];
        RngStream rng = root.fork(c);
        rng.shuffle(members);

        const std::size_t base = members.size() / folds;
        const std::size_t rem = members.size() % folds;
        std::size_t cursor = 0;
        for (std::size_t f = 0; f < folds; ++f) {
            // Fold f takes one extra row when it falls in the rotating
            // remainder window for this class.
            const std::size_t shifted = (f + folds - remainder_offset % folds) % folds;
            const std::size_t take = base + (shifted < rem ? 1 : 0);
            for (std::size_t i = 0; i < take; ++i) {
                plan.assignments[members[cursor++]] = static_cast<int>(f);
            }
        }
        remainder_offset += rem;
    }
    return plan;
}

}  // namespace shapaudit
