// Command-line front end. Every seed is explicit: commands fail rather than
// fall back to clocks or global RNG state, so reruns of the same invocation
// produce byte-identical artifacts.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "shapaudit/common.hpp"
#include "shapaudit/data.hpp"
#include "shapaudit/explainer.hpp"
#include "shapaudit/models/pipeline.hpp"
#include "shapaudit/protocol.hpp"
#include "shapaudit/report.hpp"

namespace fs = std::filesystem;
using namespace shapaudit;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("'" + path + "' is not valid JSON: " + e.what());
    }
    return j;
}

// Writes go through a temp file and a rename; if any write in a command
// fails, files already placed by that command are removed again.
class OutputSet {
  public:
    void write(const fs::path& path, const std::string& content) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        fs::path tmp = path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw IoError("cannot write '" + tmp.string() + "'");
            out << content;
            out.flush();
            if (!out) throw IoError("failed while writing '" + tmp.string() + "'");
        }
        fs::rename(tmp, path);
        written_.push_back(path);
    }

    void discard_all() noexcept {
        for (const auto& p : written_) {
            std::error_code ec;
            fs::remove(p, ec);
            fs::path tmp = p;
            tmp += ".tmp";
            fs::remove(tmp, ec);
        }
        written_.clear();
    }

  private:
    std::vector<fs::path> written_;
};

struct DatasetRef {
    std::string id;  // optional override of the schema id
    std::string csv;
    std::string schema;
};

// Relative csv/schema paths resolve against the config file's directory, so
// a config works no matter where the tool is invoked from.
DatasetRef dataset_ref_from_config(const json& cfg, const std::string& config_path) {
    if (!cfg.contains("dataset")) throw ConfigError("config: missing 'dataset' block");
    const json& d = cfg.at("dataset");
    detail::reject_unknown_config_keys(d, {"id", "csv", "schema"}, "config.dataset");
    const fs::path base = fs::path(config_path).parent_path();
    auto resolve = [&](const std::string& p) {
        return fs::path(p).is_absolute() ? p : (base / p).lexically_normal().string();
    };
    DatasetRef ref;
    ref.id = detail::json_get_or<std::string>(d, "id", "");
    ref.csv = resolve(d.at("csv").get<std::string>());
    ref.schema = resolve(d.at("schema").get<std::string>());
    return ref;
}

Dataset load_dataset(const DatasetRef& ref) {
    DatasetSchema schema = DatasetSchema::from_file(ref.schema);
    if (!ref.id.empty()) schema.id = ref.id;
    Dataset ds = load_csv(ref.csv, schema);
    std::cerr << "[shapaudit] loaded " << ds.n() << " rows (" << ds.dropped_rows
              << " dropped), " << ds.d() << " features from " << ref.csv << "\n";
    return ds;
}

json tool_stamp() {
    return json{{"name", kToolName}, {"version", kToolVersion}};
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    OutputSet outs;
    outs.write(out_path, text);
}

// --- audit / dissect -------------------------------------------------------

struct CampaignArgs {
    std::string config_path;
    std::string out_dir = ".";
    int jobs = 1;
    bool dry_run = false;
};

int run_audit_like(const CampaignArgs& args, bool is_dissect) {
    const json cfg = read_json_file(args.config_path);
    AuditCampaign campaign = campaign_from_json(cfg, /*require_setting=*/!is_dissect);
    const DatasetRef ref = dataset_ref_from_config(cfg, args.config_path);
    if (!ref.id.empty()) campaign.dataset_id = ref.id;

    if (args.dry_run) {
        if (!is_dissect) campaign.validate();
        json echo{{"tool", tool_stamp()},
                  {"kind", is_dissect ? "dissect" : "audit"},
                  {"status", "ok"},
                  {"config", campaign.to_json()},
                  {"dataset", json{{"id", ref.id}, {"csv", ref.csv}, {"schema", ref.schema}}}};
        std::cout << echo.dump(2) << "\n";
        return 0;
    }

    const Dataset ds = load_dataset(ref);

    json doc;
    CsvBundle csvs;
    json summary;
    if (is_dissect) {
        const DissectReport rep = dissect(campaign, ds, args.jobs);
        doc = report_document(rep);
        csvs = render_csvs(rep);
        summary = json{{"comparison", doc.at("comparison")},
                       {"model_induced", doc.at("model_induced").at("aggregates")},
                       {"explainer_induced", doc.at("explainer_induced").at("aggregates")}};
    } else {
        const CampaignReport rep = run_campaign(campaign, ds, args.jobs);
        doc = report_document(rep);
        csvs = render_csvs(rep);
        summary = json{{"aggregates", doc.at("aggregates")},
                       {"baselines",
                        json{{"total_mass", rep.baseline_total_mass},
                             {"l2", json{{"lower", rep.l2_band.lower},
                                         {"upper", rep.l2_band.upper}}},
                             {"topk_jaccard", json{{"lower", rep.jaccard_band.lower},
                                                   {"upper", rep.jaccard_band.upper}}},
                             {"rbo", json{{"lower", rep.rbo_band.lower},
                                          {"upper", rep.rbo_band.upper}}}}}};
    }
    doc["tool"] = tool_stamp();
    doc["kind"] = is_dissect ? "dissect" : "audit";

    const fs::path dir(args.out_dir);
    OutputSet outs;
    try {
        outs.write(dir / "report.json", doc.dump(2) + "\n");
        outs.write(dir / "pairs.csv", csvs.pairs);
        outs.write(dir / "instances.csv", csvs.instances);
        outs.write(dir / "features.csv", csvs.features);
    } catch (...) {
        outs.discard_all();
        throw;
    }
    std::cerr << "[shapaudit] wrote report.json, pairs.csv, instances.csv, features.csv to "
              << dir.string() << "\n";

    summary["out_dir"] = dir.string();
    std::cout << summary.dump(2) << "\n";
    return 0;
}

// --- baseline ---------------------------------------------------------------

struct BaselineArgs {
    std::string metric = "l2";
    std::size_t d = 0;
    int k = 3;
    double p = 0.0;
    double total_mass = 0.0;
    std::vector<double> rho{0.6, 0.7, 0.8};
    std::vector<double> kappa{5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
    std::vector<double> q{0.3, 0.4, 0.5};
    std::size_t n_samples = 20000;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    std::string out;
};

int run_baseline(const BaselineArgs& args) {
    const MetricKind kind = metric_kind_from_string(args.metric);
    BaselineBand band;
    json extra = json::object();
    if (kind == MetricKind::l2) {
        if (args.total_mass <= 0.0) {
            throw ConfigError("baseline: the l2 null needs --total-mass > 0");
        }
        band = dirichlet_l2_band(args.d, static_cast<std::size_t>(args.k), args.total_mass,
                                 args.rho, args.kappa);
        extra["total_mass"] = args.total_mass;
    } else {
        if (!args.seed.has_value()) {
            throw ConfigError(
                "baseline: rank-metric nulls are sampled; pass an explicit --seed");
        }
        MetricParams mp;
        mp.k = args.k;
        mp.p = args.p;
        band = mallows_rank_band(args.d, kind, mp, args.q, args.n_samples, *args.seed,
                                 args.jobs);
        extra["n_samples"] = args.n_samples;
        extra["seed"] = *args.seed;
    }
    json doc{{"tool", tool_stamp()},
             {"kind", "baseline"},
             {"d", args.d},
             {"band", detail::band_json(band)}};
    doc.update(extra);
    emit(doc.dump(2) + "\n", args.out);
    return 0;
}

// --- explain ----------------------------------------------------------------

struct ExplainArgs {
    std::string model_path;
    std::string csv;
    std::string schema;
    std::size_t row = 0;
    std::size_t background_size = 0;  // 0 = min(100, pool size)
    std::size_t n_coalitions = 0;     // 0 = default budget
    bool exact = false;
    std::optional<std::uint64_t> explainer_seed;
    std::string out;
};

int run_explain(const ExplainArgs& args) {
    if (!args.explainer_seed.has_value()) {
        throw ConfigError(
            "explain: pass an explicit --explainer-seed; this tool never seeds implicitly");
    }
    const PipelineModel model = PipelineModel::load(args.model_path);
    const Dataset ds = load_dataset({"", args.csv, args.schema});

    // The model's level registry must match the data file's byte for byte;
    // otherwise categorical masking would swap different semantic levels.
    if (model.schema.features.size() != ds.schema.features.size()) {
        throw ValidationError("explain: model expects " +
                              std::to_string(model.schema.features.size()) +
                              " features, data file has " +
                              std::to_string(ds.schema.features.size()));
    }
    for (std::size_t f = 0; f < ds.schema.features.size(); ++f) {
        const auto& mf = model.schema.features[f];
        const auto& df = ds.schema.features[f];
        if (mf.name != df.name || mf.kind != df.kind || mf.levels != df.levels) {
            throw ValidationError(
                "explain: feature '" + df.name +
                "' differs from the model's training schema (name, kind, or level "
                "registry); explain against the CSV the model was trained on");
        }
    }

    if (args.row >= ds.n()) {
        throw ValidationError("explain: --row " + std::to_string(args.row) +
                              " is out of range; dataset has " + std::to_string(ds.n()) +
                              " usable rows");
    }
    for (std::size_t r : model.train_rows) {
        if (r >= ds.n()) {
            throw ValidationError(
                "explain: the model's training row indices exceed this data file; pass "
                "the training CSV used to fit the model");
        }
    }

    const std::size_t pool = model.train_rows.size();
    const std::size_t k =
        args.background_size == 0 ? std::min<std::size_t>(100, pool) : args.background_size;
    const BackgroundSet bg = sample_background(ds, model.train_rows, k, *args.explainer_seed);

    const std::string instance_id = ds.id() + ":" + std::to_string(args.row);
    const ExplanationVector e =
        args.exact ? exact_shapley(model, ds.rows[args.row], bg, instance_id)
                   : kernel_shap(model, ds.rows[args.row], bg, args.n_coalitions,
                                 *args.explainer_seed, instance_id);

    json doc = e.to_json();
    doc["tool"] = tool_stamp();
    doc["kind"] = "explanation";
    doc["model_class"] = to_string(model.cls);
    doc["explainer"] = args.exact ? "exact" : "kernel";
    doc["background_size"] = k;
    if (!args.exact) {
        doc["n_coalitions"] = args.n_coalitions == 0
                                  ? default_coalition_budget(ds.d())
                                  : args.n_coalitions;
    }
    doc["predicted_probability"] = model.predict_proba(ds.rows[args.row]);
    emit(doc.dump(2) + "\n", args.out);
    return 0;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
    std::string config_path;
    std::string out = "model.json";
    std::optional<std::uint64_t> model_seed;
};

int run_train(const TrainArgs& args) {
    const json cfg = read_json_file(args.config_path);
    detail::reject_unknown_config_keys(
        cfg, {"dataset", "model_class", "model_seed", "hyperparameters"}, "config");
    const DatasetRef ref = dataset_ref_from_config(cfg, args.config_path);
    const ModelClass cls = model_class_from_string(cfg.at("model_class").get<std::string>());
    if (!cfg.contains("model_seed") && !args.model_seed.has_value()) {
        throw ConfigError(
            "train: set 'model_seed' in the config or pass --model-seed; this tool never "
            "seeds implicitly");
    }
    const std::uint64_t seed = args.model_seed.has_value()
                                   ? *args.model_seed
                                   : cfg.at("model_seed").get<std::uint64_t>();
    const json hyper = cfg.contains("hyperparameters") ? cfg.at("hyperparameters")
                                                       : json::object();
    if (!hyper.is_object()) {
        throw ConfigError("train: 'hyperparameters' must be a single object; grids belong "
                          "to the audit command");
    }

    const Dataset ds = load_dataset(ref);
    std::vector<std::size_t> rows(ds.n());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    const PipelineModel model = train_model(cls, ds, rows, hyper, seed);

    std::size_t correct = 0;
    for (std::size_t r : rows) {
        correct += (model.predict_proba(ds.rows[r]) > 0.5 ? 1 : 0) == ds.labels[r];
    }

    OutputSet outs;
    std::ostringstream body;
    body << model.to_json().dump(2) << "\n";
    outs.write(args.out, body.str());
    std::cerr << "[shapaudit] wrote model to " << args.out << "\n";

    json summary{{"tool", tool_stamp()},
                 {"kind", "train"},
                 {"model_class", to_string(cls)},
                 {"model_seed", seed},
                 {"n_rows", ds.n()},
                 {"hyperparameters", model.hyperparams},
                 {"train_accuracy",
                  static_cast<double>(correct) / static_cast<double>(ds.n())},
                 {"model_path", args.out}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"audit explanation multiplicity of Shapley-style feature attributions"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);

    CampaignArgs audit_args;
    auto* audit = app.add_subcommand(
        "audit", "rerun train-then-explain under one multiplicity setting and report "
                 "disagreement against null baselines");
    audit->add_option("--config", audit_args.config_path, "campaign config JSON")
        ->required();
    audit->add_option("--out-dir", audit_args.out_dir, "directory for report artifacts");
    audit->add_option("--jobs", audit_args.jobs, "worker threads (default 1)");
    audit->add_flag("--dry-run", audit_args.dry_run,
                    "validate and echo the config without loading data");

    CampaignArgs dissect_args;
    auto* dis = app.add_subcommand(
        "dissect", "run the model-induced and explainer-induced settings over one fold "
                   "plan and compare them");
    dis->add_option("--config", dissect_args.config_path, "campaign config JSON")
        ->required();
    dis->add_option("--out-dir", dissect_args.out_dir, "directory for report artifacts");
    dis->add_option("--jobs", dissect_args.jobs, "worker threads (default 1)");
    dis->add_flag("--dry-run", dissect_args.dry_run,
                  "validate and echo the config without loading data");

    BaselineArgs base_args;
    auto* base = app.add_subcommand(
        "baseline", "print calibrated null-distribution bands for a disagreement metric");
    base->add_option("--metric", base_args.metric, "l2, topk_jaccard, rbo, or kendall_tau");
    base->add_option("--d", base_args.d, "number of features")->required();
    base->add_option("--k", base_args.k, "top-k cut (topk_jaccard, l2 calibration)");
    base->add_option("--p", base_args.p, "rbo persistence; <= 0 resolves to 1 - 1/d");
    base->add_option("--total-mass", base_args.total_mass,
                     "attribution mass T for the l2 null");
    base->add_option("--rho", base_args.rho, "concentration sweep for the l2 null");
    base->add_option("--kappa", base_args.kappa, "precision sweep for the l2 null");
    base->add_option("--q", base_args.q, "dispersion sweep for rank-metric nulls");
    base->add_option("--n-samples", base_args.n_samples, "Monte Carlo pairs per band entry");
    base->add_option("--seed", base_args.seed, "sampling seed (required for rank metrics)");
    base->add_option("--jobs", base_args.jobs, "worker threads (default 1)");
    base->add_option("--out", base_args.out, "write the band JSON here instead of stdout");

    ExplainArgs explain_args;
    auto* exp = app.add_subcommand("explain", "explain one instance with a saved model");
    exp->add_option("--model", explain_args.model_path, "model JSON from 'train'")
        ->required();
    exp->add_option("--data", explain_args.csv, "dataset CSV")->required();
    exp->add_option("--schema", explain_args.schema, "dataset schema JSON")->required();
    exp->add_option("--row", explain_args.row, "0-based row index into the loaded dataset")
        ->required();
    exp->add_option("--background-size", explain_args.background_size,
                    "background rows to sample (default min(100, training rows))");
    exp->add_option("--n-coalitions", explain_args.n_coalitions,
                    "coalition budget (default min(2d + 2048, 2^d - 2))");
    exp->add_flag("--exact", explain_args.exact, "exact enumeration instead of the kernel "
                                                 "estimator (at most 14 features)");
    exp->add_option("--explainer-seed", explain_args.explainer_seed,
                    "seed for background and coalition sampling (required)");
    exp->add_option("--out", explain_args.out, "write the explanation here instead of stdout");

    TrainArgs train_args;
    auto* tr = app.add_subcommand("train", "fit one model on the full dataset and save it");
    tr->add_option("--config", train_args.config_path, "train config JSON")->required();
    tr->add_option("--out", train_args.out, "model output path (default model.json)");
    tr->add_option("--model-seed", train_args.model_seed,
                   "override the config's model seed");

    try {
        app.parse(argc, argv);
        if (*audit) return run_audit_like(audit_args, false);
        if (*dis) return run_audit_like(dissect_args, true);
        if (*base) return run_baseline(base_args);
        if (*exp) return run_explain(explain_args);
        if (*tr) return run_train(train_args);
        return 2;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
