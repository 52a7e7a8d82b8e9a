#pragma once

// Turns campaign results into the report artifacts: a single JSON document
// plus three flat CSV tables (pair values, per-instance summaries, feature
// sensitivity). No timestamps anywhere; identical inputs give identical bytes.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shapaudit/common.hpp"
#include "shapaudit/csv.hpp"
#include "shapaudit/protocol.hpp"

namespace shapaudit {

namespace detail {

inline json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

inline json band_json(const BaselineBand& band) {
    json entries = json::array();
    for (const auto& e : band.entries) {
        json ej = e.params;
        ej["value"] = e.value;
        entries.push_back(std::move(ej));
    }
    return json{{"metric", to_string(band.kind)},
                {"lower", band.lower},
                {"upper", band.upper},
                {"entries", std::move(entries)}};
}

inline json sensitivity_json(const FeatureSensitivityProfile& prof) {
    return json{{"features", prof.feature_names},
                {"mean_pairwise_abs_diff", prof.mean_pairwise_abs_diff},
                {"mean_abs_value", prof.mean_abs_value},
                {"n_runs", prof.n_runs}};
}

inline json aggregate_json(const std::vector<MetricAggregate>& aggs) {
    json out = json::object();
    for (const auto& a : aggs) {
        out[to_string(a.kind)] = json{{"param", a.param},
                                      {"mean", a.mean},
                                      {"median", a.median},
                                      {"n_pairs", a.n_pairs}};
    }
    return out;
}

}  // namespace detail

inline json report_document(const CampaignReport& rep) {
    json runs = json::array();
    for (const auto& r : rep.runs) {
        runs.push_back(json{{"fold", r.fold},
                            {"run", r.run},
                            {"model_seed", r.seeds.model_seed},
                            {"explainer_seed", r.seeds.explainer_seed},
                            {"effective_explainer_seed", r.effective_explainer_seed},
                            {"hyperparameters", r.hyperparams},
                            {"validation_auc", detail::finite_or_null(r.validation_auc)},
                            {"grid_index", r.grid_index},
                            {"tail_loss_nonincreasing", r.tail_loss_nonincreasing},
                            {"train_accuracy", r.train_accuracy}});
    }

    json instances = json::array();
    for (const auto& inst : rep.instances) {
        json metrics = json::object();
        for (const auto& m : inst.metrics) {
            metrics[to_string(m.kind)] = json{{"param", m.param},
                                              {"values", m.values},
                                              {"mean", m.mean},
                                              {"median", m.median}};
        }
        instances.push_back(json{{"fold", inst.fold},
                                 {"row", inst.row},
                                 {"instance_id", inst.instance_id},
                                 {"stratum", to_string(inst.stratum)},
                                 {"probabilities", inst.probabilities},
                                 {"probability_mean", inst.probability_mean},
                                 {"metrics", std::move(metrics)},
                                 {"sensitivity", detail::sensitivity_json(inst.sensitivity)}});
    }

    json strata = json::array();
    for (const auto& s : rep.strata) {
        strata.push_back(json{{"stratum", to_string(s.stratum)},
                              {"n_instances", s.n_instances},
                              {"metrics", detail::aggregate_json(s.metrics)},
                              {"sensitivity", detail::sensitivity_json(s.mean_sensitivity)}});
    }

    return json{
        {"campaign", rep.campaign.to_json()},
        {"dataset",
         json{{"id", rep.dataset_id},
              {"n_rows", rep.n_rows},
              {"n_features", rep.n_features},
              {"dropped_rows", rep.dropped_rows}}},
        {"n_coalitions_effective", rep.n_coalitions_effective},
        {"fold_plan", rep.folds.to_json()},
        {"runs", std::move(runs)},
        {"instances", std::move(instances)},
        {"aggregates", detail::aggregate_json(rep.aggregates)},
        {"sensitivity", detail::sensitivity_json(rep.overall_sensitivity)},
        {"strata", std::move(strata)},
        {"baselines",
         json{{"total_mass", rep.baseline_total_mass},
              {"l2", detail::band_json(rep.l2_band)},
              {"topk_jaccard", detail::band_json(rep.jaccard_band)},
              {"rbo", detail::band_json(rep.rbo_band)}}}};
}

inline json report_document(const DissectReport& rep) {
    json comparison = json::object();
    for (std::size_t m = 0; m < rep.model_induced.aggregates.size(); ++m) {
        const auto& mi = rep.model_induced.aggregates[m];
        const auto& ei = rep.explainer_induced.aggregates[m];
        json entry{{"model_induced_mean", mi.mean}, {"explainer_induced_mean", ei.mean}};
        entry["ratio"] =
            ei.mean != 0.0 ? json(mi.mean / ei.mean) : json(nullptr);
        comparison[to_string(mi.kind)] = std::move(entry);
    }
    return json{{"model_induced", report_document(rep.model_induced)},
                {"explainer_induced", report_document(rep.explainer_induced)},
                {"comparison", std::move(comparison)}};
}

// Flat tables over one or more campaigns; the setting column tells them apart.
struct CsvBundle {
    std::string pairs;
    std::string instances;
    std::string features;
};

inline CsvBundle render_csvs(std::span<const CampaignReport* const> reports) {
    std::ostringstream pairs_out, inst_out, feat_out;
    CsvWriter pairs(pairs_out), inst(inst_out), feat(feat_out);

    pairs.row({"dataset_id", "model_class", "setting", "fold", "row", "instance_id", "metric",
               "param", "run_i", "run_j", "value"});
    inst.row({"dataset_id", "model_class", "setting", "fold", "row", "instance_id", "stratum",
              "probability_mean", "metric", "param", "mean", "median"});
    feat.row({"dataset_id", "model_class", "setting", "scope", "feature",
              "mean_pairwise_abs_diff", "mean_abs_value"});

    for (const auto* rp : reports) {
        const auto& rep = *rp;
        const std::string cls = to_string(rep.campaign.model_class);
        const std::string setting = to_string(rep.campaign.setting);
        const std::size_t n_runs = rep.campaign.n_runs;

        for (const auto& instance : rep.instances) {
            for (const auto& m : instance.metrics) {
                // values are ordered (0,1),(0,2),...,(n-2,n-1)
                std::size_t idx = 0;
                for (std::size_t i = 0; i + 1 < n_runs; ++i) {
                    for (std::size_t j = i + 1; j < n_runs; ++j, ++idx) {
                        pairs.row({rep.dataset_id, cls, setting,
                                   std::to_string(instance.fold),
                                   std::to_string(instance.row), instance.instance_id,
                                   to_string(m.kind), format_double(m.param),
                                   std::to_string(i), std::to_string(j),
                                   format_double(m.values[idx])});
                    }
                }
                inst.row({rep.dataset_id, cls, setting, std::to_string(instance.fold),
                          std::to_string(instance.row), instance.instance_id,
                          to_string(instance.stratum),
                          format_double(instance.probability_mean), to_string(m.kind),
                          format_double(m.param), format_double(m.mean),
                          format_double(m.median)});
            }
        }

        auto feature_rows = [&](const std::string& scope,
                                const FeatureSensitivityProfile& prof) {
            for (std::size_t f = 0; f < prof.feature_names.size(); ++f) {
                feat.row({rep.dataset_id, cls, setting, scope, prof.feature_names[f],
                          format_double(prof.mean_pairwise_abs_diff[f]),
                          format_double(prof.mean_abs_value[f])});
            }
        };
        feature_rows("overall", rep.overall_sensitivity);
        for (const auto& s : rep.strata) {
            feature_rows(to_string(s.stratum), s.mean_sensitivity);
        }
    }

    return {pairs_out.str(), inst_out.str(), feat_out.str()};
}

inline CsvBundle render_csvs(const CampaignReport& rep) {
    const CampaignReport* p = &rep;
    return render_csvs(std::span<const CampaignReport* const>(&p, 1));
}

inline CsvBundle render_csvs(const DissectReport& rep) {
    const CampaignReport* ps[2] = {&rep.model_induced, &rep.explainer_induced};
    return render_csvs(std::span<const CampaignReport* const>(ps, 2));
}

}  // namespace shapaudit
