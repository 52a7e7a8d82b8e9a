#pragma once

// Audit campaigns: controlled dual-seed reruns of the train-then-explain
// pipeline, disagreement metrics over the resulting explanation sets, and
// calibrated null baselines. One campaign = one dataset, one model class,
// one multiplicity setting, R runs over a shared fold plan.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shapaudit/baselines.hpp"
#include "shapaudit/common.hpp"
#include "shapaudit/core.hpp"
#include "shapaudit/data.hpp"
#include "shapaudit/explainer.hpp"
#include "shapaudit/metrics.hpp"
#include "shapaudit/models/pipeline.hpp"
#include "shapaudit/parallel.hpp"
#include "shapaudit/rng.hpp"

namespace shapaudit {

struct MetricConfig {
    int jaccard_k = 3;
    double rbo_p = 0.0;  // <= 0: use 1 - 1/d
};

struct BaselineConfig {
    std::uint64_t seed = 0;
    std::vector<double> rho{0.6, 0.7, 0.8};
    std::vector<double> kappa{5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
    std::vector<double> q{0.3, 0.4, 0.5};
    std::size_t n_samples = 20000;
    double total_mass = 0.0;  // T; <= 0 means calibrate from observed explanations
};

struct ExplainerConfig {
    ExplainerKind kind = ExplainerKind::kernel;
    std::size_t background_size = 0;
    std::size_t n_coalitions = 0;  // 0 = default budget min(2d + 2048, 2^d - 2)
};

struct AuditCampaign {
    std::string dataset_id;
    ModelClass model_class = ModelClass::logreg;
    MultiplicitySetting setting = MultiplicitySetting::overall;
    std::size_t n_runs = 10;
    std::vector<std::uint64_t> model_seeds;
    std::vector<std::uint64_t> explainer_seeds;
    std::uint64_t fold_seed = 0;
    int n_folds = 5;
    ExplainerConfig explainer;
    MetricConfig metrics;
    BaselineConfig baselines;
    json hyper_grid = json::array();  // empty: use the class default grid
    std::size_t max_instances_per_fold = 0;  // 0 = every test row

    void validate() const {
        if (n_runs < 2) throw ConfigError("campaign: n_runs must be at least 2");
        if (n_folds < 2) throw ConfigError("campaign: n_folds must be at least 2");
        if (explainer.background_size == 0) {
            throw ConfigError("campaign: explainer.background_size must be positive");
        }
        if (metrics.jaccard_k < 1) throw ConfigError("campaign: jaccard_k must be positive");
        if (metrics.rbo_p >= 1.0) throw ConfigError("campaign: rbo_p must lie below 1");
        if (!hyper_grid.is_array()) {
            throw ConfigError("campaign: hyperparameters.grid must be an array");
        }

        auto require_distinct = [](std::span<const std::uint64_t> seeds, const char* what) {
            std::set<std::uint64_t> s(seeds.begin(), seeds.end());
            if (s.size() != seeds.size()) {
                throw ConfigError(std::string("campaign: ") + what + " must be distinct");
            }
        };
        switch (setting) {
            case MultiplicitySetting::overall: {
                if (model_seeds.size() != n_runs || explainer_seeds.size() != n_runs) {
                    throw ConfigError(
                        "campaign: overall setting needs n_runs model seeds and n_runs "
                        "explainer seeds");
                }
                std::set<std::pair<std::uint64_t, std::uint64_t>> pairs;
                for (std::size_t r = 0; r < n_runs; ++r) {
                    pairs.insert({model_seeds[r], explainer_seeds[r]});
                }
                if (pairs.size() != n_runs) {
                    throw ConfigError("campaign: overall setting needs distinct seed pairs");
                }
                break;
            }
            case MultiplicitySetting::model_induced:
                if (model_seeds.size() != n_runs) {
                    throw ConfigError(
                        "campaign: model_induced setting needs n_runs model seeds");
                }
                require_distinct(model_seeds, "model seeds");
                if (explainer_seeds.size() != 1) {
                    throw ConfigError(
                        "campaign: model_induced setting pins exactly one explainer seed");
                }
                break;
            case MultiplicitySetting::explainer_induced:
                if (explainer_seeds.size() != n_runs) {
                    throw ConfigError(
                        "campaign: explainer_induced setting needs n_runs explainer seeds");
                }
                require_distinct(explainer_seeds, "explainer seeds");
                if (model_seeds.size() != 1) {
                    throw ConfigError(
                        "campaign: explainer_induced setting pins exactly one model seed");
                }
                break;
        }
    }

    SeedPair run_seeds(std::size_t r) const {
        switch (setting) {
            case MultiplicitySetting::overall: return {model_seeds[r], explainer_seeds[r]};
            case MultiplicitySetting::model_induced:
                return {model_seeds[r], explainer_seeds[0]};
            case MultiplicitySetting::explainer_induced:
                return {model_seeds[0], explainer_seeds[r]};
        }
        throw ValidationError("unknown setting");
    }

    std::size_t model_variants() const {
        return setting == MultiplicitySetting::explainer_induced ? 1 : n_runs;
    }
    std::size_t explainer_variants() const {
        return setting == MultiplicitySetting::model_induced ? 1 : n_runs;
    }
    std::size_t model_variant_of_run(std::size_t r) const {
        return setting == MultiplicitySetting::explainer_induced ? 0 : r;
    }
    std::size_t explainer_variant_of_run(std::size_t r) const {
        return setting == MultiplicitySetting::model_induced ? 0 : r;
    }

    json to_json() const {
        return json{{"dataset_id", dataset_id},
                    {"model_class", to_string(model_class)},
                    {"setting", to_string(setting)},
                    {"n_runs", n_runs},
                    {"model_seeds", model_seeds},
                    {"explainer_seeds", explainer_seeds},
                    {"fold_seed", fold_seed},
                    {"n_folds", n_folds},
                    {"explainer",
                     json{{"kind", to_string(explainer.kind)},
                          {"background_size", explainer.background_size},
                          {"n_coalitions", explainer.n_coalitions}}},
                    {"metrics",
                     json{{"jaccard_k", metrics.jaccard_k}, {"rbo_p", metrics.rbo_p}}},
                    {"baselines",
                     json{{"seed", baselines.seed},
                          {"rho", baselines.rho},
                          {"kappa", baselines.kappa},
                          {"q", baselines.q},
                          {"n_samples", baselines.n_samples},
                          {"total_mass", baselines.total_mass}}},
                    {"hyperparameters", json{{"grid", hyper_grid}}},
                    {"max_instances_per_fold", max_instances_per_fold}};
    }
};

namespace detail {

template <typename T>
T json_get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return j.at(key).get<T>();
}

inline void reject_unknown_config_keys(const json& j, const std::set<std::string>& allowed,
                                       const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key)) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
    }
}

}  // namespace detail

// Parses the campaign portion of a config document. `require_setting` is off
// for dissect configs, which run both induced settings from one seed block.
inline AuditCampaign campaign_from_json(const json& j, bool require_setting = true) {
    detail::reject_unknown_config_keys(
        j,
        {"dataset", "model_class", "setting", "n_runs", "model_seeds", "explainer_seeds",
         "fold_seed", "n_folds", "explainer", "metrics", "baselines", "hyperparameters",
         "max_instances_per_fold"},
        "config");

    AuditCampaign c;
    c.model_class = model_class_from_string(j.at("model_class").get<std::string>());
    if (require_setting || j.contains("setting")) {
        c.setting = setting_from_string(j.at("setting").get<std::string>());
    }
    c.n_runs = j.at("n_runs").get<std::size_t>();
    c.model_seeds = j.at("model_seeds").get<std::vector<std::uint64_t>>();
    c.explainer_seeds = j.at("explainer_seeds").get<std::vector<std::uint64_t>>();
    c.fold_seed = j.at("fold_seed").get<std::uint64_t>();
    c.n_folds = detail::json_get_or(j, "n_folds", 5);
    c.max_instances_per_fold =
        detail::json_get_or<std::size_t>(j, "max_instances_per_fold", 0);

    const json& ex = j.at("explainer");
    detail::reject_unknown_config_keys(ex, {"kind", "background_size", "n_coalitions"},
                                       "config.explainer");
    c.explainer.kind = explainer_kind_from_string(
        detail::json_get_or<std::string>(ex, "kind", "kernel"));
    c.explainer.background_size = ex.at("background_size").get<std::size_t>();
    c.explainer.n_coalitions = detail::json_get_or<std::size_t>(ex, "n_coalitions", 0);

    if (j.contains("metrics")) {
        const json& me = j.at("metrics");
        detail::reject_unknown_config_keys(me, {"jaccard_k", "rbo_p"}, "config.metrics");
        c.metrics.jaccard_k = detail::json_get_or(me, "jaccard_k", 3);
        c.metrics.rbo_p = detail::json_get_or(me, "rbo_p", 0.0);
    }

    const json& ba = j.at("baselines");
    detail::reject_unknown_config_keys(
        ba, {"seed", "rho", "kappa", "q", "n_samples", "total_mass"}, "config.baselines");
    c.baselines.seed = ba.at("seed").get<std::uint64_t>();
    c.baselines.rho = detail::json_get_or(ba, "rho", c.baselines.rho);
    c.baselines.kappa = detail::json_get_or(ba, "kappa", c.baselines.kappa);
    c.baselines.q = detail::json_get_or(ba, "q", c.baselines.q);
    c.baselines.n_samples = detail::json_get_or(ba, "n_samples", c.baselines.n_samples);
    c.baselines.total_mass = detail::json_get_or(ba, "total_mass", 0.0);

    if (j.contains("hyperparameters")) {
        const json& hy = j.at("hyperparameters");
        detail::reject_unknown_config_keys(hy, {"grid"}, "config.hyperparameters");
        c.hyper_grid = hy.at("grid");
    }
    return c;
}

enum class ConfidenceStratum { certain, uncertain, other };

inline std::string to_string(ConfidenceStratum s) {
    switch (s) {
        case ConfidenceStratum::certain: return "certain";
        case ConfidenceStratum::uncertain: return "uncertain";
        case ConfidenceStratum::other: return "other";
    }
    throw ValidationError("unknown stratum");
}

inline ConfidenceStratum stratum_of(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw ValidationError("stratum_of: probability outside [0, 1]");
    }
    if (p > 0.9 || p < 0.1) return ConfidenceStratum::certain;
    if (p >= 0.4 && p <= 0.6) return ConfidenceStratum::uncertain;
    return ConfidenceStratum::other;
}

struct RunRecord {
    int fold = 0;
    std::size_t run = 0;
    SeedPair seeds;  // configured pair for this run
    std::uint64_t effective_explainer_seed = 0;
    json hyperparams;
    double validation_auc = std::numeric_limits<double>::quiet_NaN();
    std::size_t grid_index = 0;
    bool tail_loss_nonincreasing = true;
    double train_accuracy = 0.0;
};

struct InstanceResult {
    int fold = 0;
    std::size_t row = 0;
    std::string instance_id;
    std::vector<double> probabilities;  // per run
    double probability_mean = 0.0;
    ConfidenceStratum stratum = ConfidenceStratum::other;
    std::vector<PairwiseSummary> metrics;  // l2, topk_jaccard, rbo
    FeatureSensitivityProfile sensitivity;
    double mean_total_mass = 0.0;  // mean over runs of sum_i |phi_i|
};

struct MetricAggregate {
    MetricKind kind = MetricKind::l2;
    double param = 0.0;
    double mean = 0.0;
    double median = 0.0;
    std::size_t n_pairs = 0;
};

struct StratumSummary {
    ConfidenceStratum stratum = ConfidenceStratum::other;
    std::size_t n_instances = 0;
    std::vector<MetricAggregate> metrics;           // empty when no instances
    FeatureSensitivityProfile mean_sensitivity;      // averaged over instances
};

struct CampaignReport {
    AuditCampaign campaign;
    std::string dataset_id;
    std::size_t n_rows = 0;
    std::size_t n_features = 0;
    std::size_t dropped_rows = 0;
    std::size_t n_coalitions_effective = 0;
    FoldPlan folds;
    std::vector<RunRecord> runs;           // fold-major, then run
    std::vector<InstanceResult> instances;  // fold-major, then row
    std::vector<MetricAggregate> aggregates;
    FeatureSensitivityProfile overall_sensitivity;
    std::vector<StratumSummary> strata;  // explainer_induced only, else empty
    double baseline_total_mass = 0.0;
    BaselineBand l2_band;
    BaselineBand jaccard_band;
    BaselineBand rbo_band;
};

namespace detail {

inline std::vector<MetricAggregate> pool_metrics(
    std::span<const InstanceResult* const> members) {
    std::vector<MetricAggregate> out;
    if (members.empty()) return out;
    const std::size_t n_metrics = members[0]->metrics.size();
    for (std::size_t m = 0; m < n_metrics; ++m) {
        MetricAggregate agg;
        agg.kind = members[0]->metrics[m].kind;
        agg.param = members[0]->metrics[m].param;
        std::vector<double> pooled;
        for (const auto* inst : members) {
            const auto& v = inst->metrics[m].values;
            pooled.insert(pooled.end(), v.begin(), v.end());
        }
        double total = 0.0;
        for (double v : pooled) total += v;
        agg.n_pairs = pooled.size();
        agg.mean = total / static_cast<double>(pooled.size());
        agg.median = median_of(pooled);
        out.push_back(std::move(agg));
    }
    return out;
}

inline FeatureSensitivityProfile mean_profile(std::span<const InstanceResult* const> members) {
    FeatureSensitivityProfile prof;
    if (members.empty()) return prof;
    prof.feature_names = members[0]->sensitivity.feature_names;
    prof.n_runs = members[0]->sensitivity.n_runs;
    const std::size_t d = prof.feature_names.size();
    prof.mean_pairwise_abs_diff.assign(d, 0.0);
    prof.mean_abs_value.assign(d, 0.0);
    for (const auto* inst : members) {
        for (std::size_t f = 0; f < d; ++f) {
            prof.mean_pairwise_abs_diff[f] += inst->sensitivity.mean_pairwise_abs_diff[f];
            prof.mean_abs_value[f] += inst->sensitivity.mean_abs_value[f];
        }
    }
    const double n = static_cast<double>(members.size());
    for (std::size_t f = 0; f < d; ++f) {
        prof.mean_pairwise_abs_diff[f] /= n;
        prof.mean_abs_value[f] /= n;
    }
    return prof;
}

template <typename Fn>
auto with_context(const std::string& ctx, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(ctx + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(ctx + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError(ctx + ": " + e.what());
    } catch (const IoError& e) {
        throw IoError(ctx + ": " + e.what());
    }
}

}  // namespace detail

// Confidence stratification is defined only for explainer-induced audits,
// where the model is pinned and each instance has one predicted probability.
inline std::vector<StratumSummary> stratify_confidence(const CampaignReport& report) {
    if (report.campaign.setting != MultiplicitySetting::explainer_induced) {
        throw ValidationError(
            "stratify_confidence: defined only for the explainer_induced setting");
    }
    std::vector<StratumSummary> out;
    for (ConfidenceStratum s : {ConfidenceStratum::certain, ConfidenceStratum::uncertain,
                                ConfidenceStratum::other}) {
        StratumSummary sum;
        sum.stratum = s;
        std::vector<const InstanceResult*> members;
        for (const auto& inst : report.instances) {
            if (inst.stratum == s) members.push_back(&inst);
        }
        sum.n_instances = members.size();  // empty strata are reported, not an error
        sum.metrics = detail::pool_metrics(members);
        sum.mean_sensitivity = detail::mean_profile(members);
        out.push_back(std::move(sum));
    }
    return out;
}

inline CampaignReport run_campaign(const AuditCampaign& campaign, const Dataset& ds,
                                   int jobs = 1) {
    campaign.validate();
    const std::size_t d = ds.d();

    // dataset-dependent validation, before any training starts
    if (static_cast<std::size_t>(campaign.metrics.jaccard_k) >= d) {
        throw ValidationError("campaign: jaccard_k = " +
                              std::to_string(campaign.metrics.jaccard_k) +
                              " must be smaller than the feature count " + std::to_string(d));
    }
    if (campaign.explainer.kind == ExplainerKind::exact && d > kExactMaxFeatures) {
        throw ValidationError(
            "campaign: exact explainer supports at most " +
            std::to_string(kExactMaxFeatures) + " features; this dataset has " +
            std::to_string(d));
    }
    std::size_t n_coalitions = 0;
    if (campaign.explainer.kind == ExplainerKind::kernel) {
        n_coalitions = campaign.explainer.n_coalitions == 0
                           ? default_coalition_budget(d)
                           : campaign.explainer.n_coalitions;
        if (n_coalitions < d + 2) {
            throw ValidationError("campaign: n_coalitions = " + std::to_string(n_coalitions) +
                                  " is below the minimum d + 2 = " + std::to_string(d + 2));
        }
    }

    CampaignReport report;
    report.campaign = campaign;
    report.dataset_id = campaign.dataset_id.empty() ? ds.id() : campaign.dataset_id;
    report.campaign.dataset_id = report.dataset_id;
    report.n_rows = ds.n();
    report.n_features = d;
    report.dropped_rows = ds.dropped_rows;
    report.n_coalitions_effective = n_coalitions;
    report.folds = stratified_folds(ds, campaign.n_folds, campaign.fold_seed);

    const std::size_t n_folds = static_cast<std::size_t>(campaign.n_folds);
    const json grid = campaign.hyper_grid.empty() ? default_hyper_grid(campaign.model_class)
                                                  : campaign.hyper_grid;

    // fold-level row sets, shared by training and background sampling
    std::vector<std::vector<std::size_t>> train_rows(n_folds);
    std::vector<std::vector<std::size_t>> test_rows(n_folds);
    for (std::size_t f = 0; f < n_folds; ++f) {
        train_rows[f] = report.folds.train_rows(static_cast<int>(f));
        test_rows[f] = report.folds.test_rows(static_cast<int>(f));
        if (campaign.explainer.background_size > train_rows[f].size()) {
            throw ValidationError(
                "campaign: background_size exceeds the training split of fold " +
                std::to_string(f));
        }
        if (campaign.max_instances_per_fold > 0 &&
            test_rows[f].size() > campaign.max_instances_per_fold) {
            test_rows[f].resize(campaign.max_instances_per_fold);
        }
    }

    // 1) train one model per (fold, model variant)
    const std::size_t n_model_variants = campaign.model_variants();
    std::vector<PipelineModel> models(n_folds * n_model_variants);
    std::vector<RunRecord> run_slots(n_folds * n_model_variants);
    parallel_for(models.size(), jobs, [&](std::size_t slot) {
        const std::size_t f = slot / n_model_variants;
        const std::size_t variant = slot % n_model_variants;
        const std::uint64_t s_m =
            campaign.model_seeds[campaign.setting == MultiplicitySetting::explainer_induced
                                     ? 0
                                     : variant];
        const std::string ctx =
            "fold " + std::to_string(f) + ", model seed " + std::to_string(s_m);
        detail::with_context(ctx, [&] {
            const auto gs = grid_search(campaign.model_class, ds, train_rows[f], grid, s_m);
            models[slot] =
                train_model(campaign.model_class, ds, train_rows[f], gs.best_params, s_m);

            RunRecord rec;
            rec.fold = static_cast<int>(f);
            rec.run = variant;
            rec.seeds.model_seed = s_m;
            rec.hyperparams = models[slot].hyperparams;
            rec.validation_auc = gs.best_auc;
            rec.grid_index = gs.best_index;
            rec.tail_loss_nonincreasing = models[slot].tail_loss_nonincreasing();
            std::size_t correct = 0;
            for (std::size_t r : train_rows[f]) {
                const int pred = models[slot].predict_proba(ds.rows[r]) > 0.5 ? 1 : 0;
                correct += static_cast<std::size_t>(pred == ds.labels[r]);
            }
            rec.train_accuracy =
                static_cast<double>(correct) / static_cast<double>(train_rows[f].size());
            run_slots[slot] = std::move(rec);
            return 0;
        });
    });

    // 2) sample one background per (fold, explainer variant)
    const std::size_t n_expl_variants = campaign.explainer_variants();
    std::vector<BackgroundSet> backgrounds(n_folds * n_expl_variants);
    std::vector<std::uint64_t> effective_seeds(n_folds * n_expl_variants);
    for (std::size_t f = 0; f < n_folds; ++f) {
        for (std::size_t v = 0; v < n_expl_variants; ++v) {
            const std::uint64_t s_e =
                campaign.explainer_seeds[campaign.setting == MultiplicitySetting::model_induced
                                             ? 0
                                             : v];
            const std::uint64_t eff = derive_seed(s_e, f);
            effective_seeds[f * n_expl_variants + v] = eff;
            backgrounds[f * n_expl_variants + v] = sample_background(
                ds, train_rows[f], campaign.explainer.background_size, eff);
        }
    }

    // runs table: fold-major, then run index
    for (std::size_t f = 0; f < n_folds; ++f) {
        for (std::size_t r = 0; r < campaign.n_runs; ++r) {
            RunRecord rec = run_slots[f * n_model_variants + campaign.model_variant_of_run(r)];
            rec.run = r;
            rec.seeds = campaign.run_seeds(r);
            rec.effective_explainer_seed =
                effective_seeds[f * n_expl_variants + campaign.explainer_variant_of_run(r)];
            report.runs.push_back(std::move(rec));
        }
    }

    // 3) explain every audited instance under every run
    std::vector<std::pair<std::size_t, std::size_t>> units;  // (fold, index in test set)
    for (std::size_t f = 0; f < n_folds; ++f) {
        for (std::size_t i = 0; i < test_rows[f].size(); ++i) units.emplace_back(f, i);
    }
    std::vector<InstanceResult> results(units.size());
    parallel_for(units.size(), jobs, [&](std::size_t u) {
        const auto [f, i] = units[u];
        const std::size_t row = test_rows[f][i];
        const RawRow& x = ds.rows[row];
        const std::string instance_id =
            report.dataset_id + ":" + std::to_string(row);

        InstanceResult res;
        res.fold = static_cast<int>(f);
        res.row = row;
        res.instance_id = instance_id;

        std::vector<ExplanationVector> explanations;
        explanations.reserve(campaign.n_runs);
        for (std::size_t r = 0; r < campaign.n_runs; ++r) {
            const auto& model = models[f * n_model_variants + campaign.model_variant_of_run(r)];
            const std::size_t ev = f * n_expl_variants + campaign.explainer_variant_of_run(r);
            const auto& bg = backgrounds[ev];
            const std::uint64_t eff = effective_seeds[ev];
            const std::string ctx = "fold " + std::to_string(f) + ", run " + std::to_string(r) +
                                    ", instance " + instance_id;
            auto e = detail::with_context(ctx, [&] {
                return campaign.explainer.kind == ExplainerKind::exact
                           ? exact_shapley(model, x, bg, instance_id)
                           : kernel_shap(model, x, bg, n_coalitions, eff, instance_id);
            });
            e.seed_pair = campaign.run_seeds(r);  // report configured, not derived, seeds
            explanations.push_back(std::move(e));
            res.probabilities.push_back(model.predict_proba(x));
        }

        if (campaign.setting == MultiplicitySetting::explainer_induced) {
            // the model is pinned, so the predicted probability may not move
            for (double p : res.probabilities) {
                if (p != res.probabilities[0]) {
                    throw NumericError("explainer_induced: predicted probability varied "
                                       "across runs for instance " +
                                       instance_id);
                }
            }
        }
        double prob_total = 0.0;
        for (double p : res.probabilities) prob_total += p;
        res.probability_mean = prob_total / static_cast<double>(res.probabilities.size());
        res.stratum = stratum_of(res.probability_mean);

        MetricParams mp;
        mp.k = campaign.metrics.jaccard_k;
        mp.p = campaign.metrics.rbo_p;
        res.metrics.push_back(pairwise_aggregate(explanations, MetricKind::l2, mp));
        res.metrics.push_back(pairwise_aggregate(explanations, MetricKind::topk_jaccard, mp));
        res.metrics.push_back(pairwise_aggregate(explanations, MetricKind::rbo, mp));
        res.sensitivity = feature_sensitivity(explanations);

        double mass = 0.0;
        for (const auto& e : explanations) {
            for (double v : e.values) mass += std::fabs(v);
        }
        res.mean_total_mass = mass / static_cast<double>(explanations.size());
        results[u] = std::move(res);
    });
    report.instances = std::move(results);

    // 4) aggregates over every audited instance, in unit order
    std::vector<const InstanceResult*> all;
    all.reserve(report.instances.size());
    for (const auto& inst : report.instances) all.push_back(&inst);
    if (all.empty()) throw ValidationError("campaign: no instances were audited");
    report.aggregates = detail::pool_metrics(all);
    report.overall_sensitivity = detail::mean_profile(all);
    if (campaign.setting == MultiplicitySetting::explainer_induced) {
        report.strata = stratify_confidence(report);
    }

    // 5) null baselines calibrated to this campaign
    double total_mass = campaign.baselines.total_mass;
    if (total_mass <= 0.0) {
        double mass = 0.0;
        for (const auto& inst : report.instances) mass += inst.mean_total_mass;
        total_mass = mass / static_cast<double>(report.instances.size());
    }
    report.baseline_total_mass = total_mass;
    report.l2_band =
        dirichlet_l2_band(d, static_cast<std::size_t>(campaign.metrics.jaccard_k), total_mass,
                          campaign.baselines.rho, campaign.baselines.kappa);
    MetricParams mp;
    mp.k = campaign.metrics.jaccard_k;
    mp.p = campaign.metrics.rbo_p;
    report.jaccard_band =
        mallows_rank_band(d, MetricKind::topk_jaccard, mp, campaign.baselines.q,
                          campaign.baselines.n_samples,
                          derive_seed(campaign.baselines.seed, 1), jobs);
    report.rbo_band = mallows_rank_band(d, MetricKind::rbo, mp, campaign.baselines.q,
                                        campaign.baselines.n_samples,
                                        derive_seed(campaign.baselines.seed, 2), jobs);
    return report;
}

struct DissectReport {
    CampaignReport model_induced;
    CampaignReport explainer_induced;
};

// Runs the two induced settings over the same fold plan and dataset so their
// disagreement distributions are directly comparable.
inline DissectReport dissect(const AuditCampaign& base, const Dataset& ds, int jobs = 1) {
    if (base.model_seeds.size() != base.n_runs ||
        base.explainer_seeds.size() != base.n_runs) {
        throw ConfigError(
            "dissect: needs n_runs model seeds and n_runs explainer seeds; each induced "
            "setting pins the first seed of the other list");
    }
    AuditCampaign mi = base;
    mi.setting = MultiplicitySetting::model_induced;
    mi.explainer_seeds = {base.explainer_seeds[0]};

    AuditCampaign ei = base;
    ei.setting = MultiplicitySetting::explainer_induced;
    ei.model_seeds = {base.model_seeds[0]};

    DissectReport out;
    out.model_induced = run_campaign(mi, ds, jobs);
    out.explainer_induced = run_campaign(ei, ds, jobs);
    return out;
}

}  // namespace shapaudit
