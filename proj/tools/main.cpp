// Command-line surface for the correlation-aided trainer: compute importance
// values, train single models, and run repeated-trial benchmarks and
// learning curves with fully seeded, reproducible outputs.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cann/dataset.hpp"
#include "cann/eval.hpp"
#include "cann/fingerprint.hpp"
#include "cann/network.hpp"
#include "cann/stats.hpp"
#include "cann/trainer.hpp"
#include "cann/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Tracks files written by the running command. Unless commit() is reached,
/// destruction removes them, so a failing command leaves no partial outputs.
class OutputTracker {
public:
    OutputTracker() = default;
    OutputTracker(const OutputTracker&) = delete;
    OutputTracker& operator=(const OutputTracker&) = delete;

    ~OutputTracker() {
        if (committed_) return;
        for (const auto& p : written_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }

    void write_text(const fs::path& path, const std::string& content) {
        note(path);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
        out << content;
        if (!out) throw std::runtime_error("write failed: " + path.string());
    }

    /// Register a path about to be written by other code.
    void note(const fs::path& path) { written_.push_back(path); }

    void commit() { committed_ = true; }

    std::vector<std::string> paths() const {
        std::vector<std::string> out;
        out.reserve(written_.size());
        for (const auto& p : written_) out.push_back(p.string());
        return out;
    }

private:
    std::vector<fs::path> written_;
    bool committed_ = false;
};

std::string manifest_id(const std::string& command, const json& flags,
                        const std::string& dataset_fingerprint) {
    cann::Fingerprint fp;
    fp.mix("cann.manifest.v1");
    fp.mix(std::string(cann::kVersion));
    fp.mix(command);
    fp.mix(flags.dump());
    fp.mix(dataset_fingerprint);
    return fp.hex();
}

void write_manifest(OutputTracker& tracker, const fs::path& path, const std::string& command,
                    const json& flags, const std::string& dataset_fingerprint,
                    std::chrono::steady_clock::time_point started) {
    const auto duration = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    json j;
    j["manifest_id"] = manifest_id(command, flags, dataset_fingerprint);
    j["command"] = command;
    j["version"] = cann::kVersion;
    j["flags"] = flags;
    j["dataset_fingerprint"] = dataset_fingerprint;
    j["duration_ms"] = duration.count();
    j["outputs"] = tracker.paths();
    tracker.write_text(path, j.dump(2) + "\n");
}

std::vector<std::size_t> parse_size_list(const std::string& s, const std::string& flag) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoull(item));
        } catch (const std::exception&) {
            throw CLI::ValidationError(flag, "'" + item + "' is not a non-negative integer");
        }
    }
    if (out.empty()) throw CLI::ValidationError(flag, "empty list");
    return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw CLI::ValidationError(flag, "'" + item + "' is not a number");
        }
    }
    if (out.empty()) throw CLI::ValidationError(flag, "empty list");
    return out;
}

struct TrainingFlags {
    double alpha = 0.3;
    std::size_t epochs = 100;
    std::string hidden; // comma list, empty -> default architecture
    double init_range = 0.5;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--alpha", alpha, "Learning rate")->check(CLI::PositiveNumber);
        cmd.add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
        cmd.add_option("--hidden", hidden, "Hidden layer sizes, comma separated");
        cmd.add_option("--init-range", init_range,
                       "Weights drawn uniformly from [-r, +r)")
            ->check(CLI::NonNegativeNumber);
    }

    cann::TrainConfig to_config(std::uint64_t seed) const {
        cann::TrainConfig cfg;
        cfg.learning_rate = alpha;
        cfg.epochs = epochs;
        if (!hidden.empty()) cfg.hidden_sizes = parse_size_list(hidden, "--hidden");
        cfg.seed = seed;
        cfg.init_range = init_range;
        return cfg;
    }

    json to_json() const {
        return {{"alpha", alpha},
                {"epochs", epochs},
                {"hidden", hidden},
                {"init_range", init_range}};
    }
};

std::string trial_csv(const cann::TrialReport& report, std::uint64_t base_seed) {
    std::string csv = "trial,seed,test_accuracy\n";
    for (std::size_t i = 0; i < report.accuracies.size(); ++i) {
        csv += std::to_string(i) + "," + std::to_string(base_seed + i) + "," +
               format_g17(report.accuracies[i]) + "\n";
    }
    return csv;
}

json report_json(const cann::TrialReport& report, const std::string& manifest) {
    json j;
    j["manifest_id"] = manifest;
    j["method"] = report.method;
    j["n_trials"] = report.n_trials;
    j["mean_accuracy"] = report.mean;
    j["stddev_accuracy"] = report.stddev;
    j["accuracies"] = report.accuracies;
    j["config_fingerprint"] = report.config_fingerprint;
    return j;
}

void check_manifest_conflict(const fs::path& manifest_path, const std::string& id,
                             bool force) {
    if (!fs::exists(manifest_path) || force) return;
    std::ifstream in(manifest_path);
    json existing;
    try {
        in >> existing;
    } catch (const json::exception&) {
        throw std::runtime_error(manifest_path.string() +
                                 " exists but is unreadable; rerun with --force to overwrite");
    }
    const std::string old_id = existing.value("manifest_id", "");
    if (old_id != id) {
        throw std::runtime_error("output directory already holds results from a different "
                                 "configuration (" + manifest_path.string() +
                                 "); rerun with --force to overwrite");
    }
}

// ---------------------------------------------------------------------------
// importance
// ---------------------------------------------------------------------------

struct ImportanceArgs {
    std::string data, schema, out;
    std::string scope = "full";
    std::optional<std::uint64_t> seed;
    std::optional<double> train_fraction;
};

int run_importance(const ImportanceArgs& args) {
    if (args.scope == "train" && (!args.seed || !args.train_fraction)) {
        throw CLI::ValidationError("--scope",
                                   "train scope requires --seed and --train-fraction");
    }
    const auto started = std::chrono::steady_clock::now();
    const cann::Dataset ds = cann::load_dataset(args.data, args.schema);

    cann::CorrelationReport report;
    if (args.scope == "train") {
        const cann::Split sp = cann::split(ds, *args.train_fraction, *args.seed);
        report = cann::compute_importance(ds, sp.train_indices);
    } else {
        report = cann::compute_importance(ds);
    }
    const cann::ImportanceFile file =
        cann::make_importance_file(ds, report, args.scope, args.seed, args.train_fraction);

    OutputTracker tracker;
    tracker.note(args.out);
    cann::save_importance_file(file, args.out);

    json flags{{"data", args.data}, {"schema", args.schema}, {"out", args.out},
               {"scope", args.scope}};
    if (args.seed) flags["seed"] = *args.seed;
    if (args.train_fraction) flags["train_fraction"] = *args.train_fraction;
    write_manifest(tracker, fs::path(args.out).string() + ".manifest.json", "importance",
                   flags, ds.fingerprint(), started);
    tracker.commit();

    std::cout << "importance: " << ds.n_features() << " features x " << ds.n_outputs()
              << " outputs, scope=" << args.scope << ", " << report.undefined_count()
              << " undefined pairs reported as 0\n";
    if (ds.n_features() * ds.n_outputs() <= 60) {
        for (std::size_t k = 0; k < ds.n_features(); ++k) {
            std::cout << "  " << ds.feature_meta[k].name << ":";
            for (std::size_t o = 0; o < ds.n_outputs(); ++o) {
                std::cout << " " << format_g17(report.correlation(k, o));
            }
            std::cout << "\n";
        }
    }
    std::cout << "wrote " << args.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data, schema, out;
    std::string method = "plain";
    std::string importance;
    double p = 0.5;
    std::uint64_t seed = 1;
    TrainingFlags training;
};

int run_train(const TrainArgs& args) {
    const auto started = std::chrono::steady_clock::now();
    const cann::Dataset ds = cann::load_dataset(args.data, args.schema);

    const bool is_cann = args.method == "cann";
    if (!is_cann && !args.importance.empty()) {
        std::cerr << "warning: --importance is ignored with --method plain\n";
    }
    if (is_cann && args.p < 1.0 && args.importance.empty()) {
        throw CLI::ValidationError("--importance",
                                   "required for --method cann with --p below 1");
    }

    cann::TrainConfig cfg = args.training.to_config(args.seed);
    if (cfg.hidden_sizes.empty()) {
        cfg.hidden_sizes = {cann::default_hidden_size(ds.n_features(), ds.n_outputs())};
    }
    std::vector<std::size_t> arch{ds.n_features()};
    arch.insert(arch.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
    arch.push_back(ds.n_outputs());

    // Whole-dataset training; held-out evaluation belongs to `bench`.
    cann::Split sp;
    sp.train_fraction = 1.0;
    sp.seed = args.seed;
    sp.train_indices.resize(ds.n_instances());
    for (std::size_t i = 0; i < ds.n_instances(); ++i) sp.train_indices[i] = i;

    std::string log_csv = "epoch,data_error,correlation_error,blended_error,train_accuracy\n";
    const cann::EpochObserver observer = [&](const cann::EpochLog& log, const cann::Network&) {
        log_csv += std::to_string(log.epoch) + "," + format_g17(log.data_err) + ",";
        log_csv += log.corr_err ? format_g17(*log.corr_err) : std::string();
        log_csv += ",";
        log_csv += log.blended_err ? format_g17(*log.blended_err) : std::string();
        log_csv += "," + format_g17(log.train_accuracy) + "\n";
    };

    cann::Network net = cann::init_network(arch, args.seed, cfg.init_range);
    if (is_cann) {
        cann::Matrix importance(ds.n_features(), ds.n_outputs()); // zeros when no file
        if (!args.importance.empty()) {
            importance = cann::importance_matrix_for(
                cann::load_importance_file(args.importance), ds);
        }
        const cann::ImportanceSpec spec =
            cann::build_importance(ds, importance, sp.train_indices);
        net = cann::train_cann(std::move(net), ds, sp, spec, cfg, args.p, observer);
    } else {
        net = cann::train_plain(std::move(net), ds, sp, cfg, observer);
    }

    json flags{{"data", args.data},     {"schema", args.schema}, {"out", args.out},
               {"method", args.method}, {"p", args.p},           {"seed", args.seed},
               {"importance", args.importance}};
    flags.update(args.training.to_json());

    OutputTracker tracker;
    json provenance{{"seed", args.seed},
                    {"method", args.method},
                    {"alpha", cfg.learning_rate},
                    {"epochs", cfg.epochs},
                    {"hidden", cfg.hidden_sizes},
                    {"init_range", cfg.init_range},
                    {"dataset_fingerprint", ds.fingerprint()},
                    {"version", cann::kVersion}};
    if (is_cann) provenance["p"] = args.p;
    tracker.note(args.out);
    cann::save_network_json(net, args.out, provenance);

    const fs::path out_path(args.out);
    fs::path log_path = out_path;
    log_path.replace_extension();
    tracker.write_text(log_path.string() + ".log.csv", log_csv);
    write_manifest(tracker, log_path.string() + ".manifest.json", "train", flags,
                   ds.fingerprint(), started);
    tracker.commit();

    std::cout << "trained " << args.method << " model on " << ds.n_instances()
              << " instances; train accuracy "
              << format_g17(cann::accuracy_percent(net, ds, sp.train_indices)) << "%\n";
    std::cout << "wrote " << args.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// bench / curve
// ---------------------------------------------------------------------------

struct BenchCommonArgs {
    std::string data, schema;
    std::string importance;       // file path
    std::string importance_scope; // "", "full", "train"
    double p = 0.5;
    std::size_t trials = 20;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    TrainingFlags training;

    cann::ImportanceSource resolve_source(const cann::Dataset& ds) const {
        if (!importance.empty() && !importance_scope.empty()) {
            throw CLI::ValidationError("--importance",
                                       "give either --importance or --importance-scope");
        }
        if (!importance.empty()) {
            return cann::ImportanceSource::from_matrix(
                cann::importance_matrix_for(cann::load_importance_file(importance), ds));
        }
        if (importance_scope == "full") return cann::ImportanceSource::computed_full();
        return cann::ImportanceSource::computed_train(); // honest default
    }

    json to_json() const {
        json j{{"data", data},
               {"schema", schema},
               {"importance", importance},
               {"importance_scope", importance_scope.empty() ? "train" : importance_scope},
               {"p", p},
               {"trials", trials},
               {"seed", seed}};
        j.update(training.to_json());
        return j;
    }

    cann::TrialConfig trial_config(double fraction) const {
        cann::TrialConfig cfg;
        cfg.train = training.to_config(seed);
        cfg.p = p;
        cfg.base_seed = seed;
        cfg.n_trials = trials;
        cfg.train_fraction = fraction;
        cfg.jobs = jobs;
        return cfg;
    }
};

struct BenchArgs {
    BenchCommonArgs common;
    std::string out_dir;
    double fraction = 0.5;
    std::optional<double> keep_fraction;
    bool force = false;
};

int run_bench(const BenchArgs& args) {
    const auto started = std::chrono::steady_clock::now();
    const cann::Dataset ds = cann::load_dataset(args.common.data, args.common.schema);
    const cann::ImportanceSource source = args.common.resolve_source(ds);

    json flags = args.common.to_json();
    flags["fraction"] = args.fraction;
    flags["keep_fraction"] = args.keep_fraction ? json(*args.keep_fraction) : json(nullptr);
    const std::string id = manifest_id("bench", flags, ds.fingerprint());

    const fs::path out_dir(args.out_dir);
    check_manifest_conflict(out_dir / "manifest.json", id, args.force);
    fs::create_directories(out_dir);

    const cann::TrialConfig cfg = args.common.trial_config(args.fraction);

    // Feature selection, when requested, applies to the plain baseline only;
    // the correlation-aided runs always see the full feature set.
    const cann::TrialReport plain_report =
        args.keep_fraction
            ? cann::run_feature_selected_trials(ds, *args.keep_fraction, cann::Method::kPlain,
                                                nullptr, cfg)
            : cann::run_trials(ds, cann::Method::kPlain, nullptr, cfg);
    const cann::TrialReport cann_report =
        cann::run_trials(ds, cann::Method::kCann, &source, cfg);

    OutputTracker tracker;
    tracker.write_text(out_dir / "plain.report.json",
                       report_json(plain_report, id).dump(2) + "\n");
    tracker.write_text(out_dir / "plain.trials.csv", trial_csv(plain_report, args.common.seed));
    tracker.write_text(out_dir / "cann.report.json",
                       report_json(cann_report, id).dump(2) + "\n");
    tracker.write_text(out_dir / "cann.trials.csv", trial_csv(cann_report, args.common.seed));
    write_manifest(tracker, out_dir / "manifest.json", "bench", flags, ds.fingerprint(),
                   started);
    tracker.commit();

    std::cout << "bench: " << args.common.trials << " paired trials, train fraction "
              << args.fraction << "\n";
    std::cout << "  plain: mean " << format_g17(plain_report.mean) << "% (std "
              << format_g17(plain_report.stddev) << ")";
    if (args.keep_fraction) {
        std::cout << " [chi-squared selection kept " << *args.keep_fraction << " of features]";
    }
    std::cout << "\n  cann:  mean " << format_g17(cann_report.mean) << "% (std "
              << format_g17(cann_report.stddev) << ")\n";
    std::cout << "wrote " << (out_dir / "manifest.json").string() << "\n";
    return 0;
}

struct CurveArgs {
    BenchCommonArgs common;
    std::string out;
    std::string fractions = "0.1,0.2,0.4,0.8";
};

int run_curve(const CurveArgs& args) {
    const auto started = std::chrono::steady_clock::now();
    const cann::Dataset ds = cann::load_dataset(args.common.data, args.common.schema);
    const cann::ImportanceSource source = args.common.resolve_source(ds);
    const std::vector<double> fractions = parse_double_list(args.fractions, "--fractions");

    const cann::TrialConfig cfg = args.common.trial_config(0.5);
    const std::vector<cann::Method> methods{cann::Method::kPlain, cann::Method::kCann};
    const cann::LearningCurve curve =
        cann::learning_curve(ds, methods, fractions, &source, cfg);

    std::string csv = "method,train_fraction,mean_accuracy,stddev_accuracy\n";
    for (const auto& mc : curve.curves) {
        for (const auto& pt : mc.points) {
            csv += mc.method + "," + format_g17(pt.fraction) + "," + format_g17(pt.mean) +
                   "," + format_g17(pt.stddev) + "\n";
        }
    }

    json flags = args.common.to_json();
    flags["fractions"] = args.fractions;
    flags["out"] = args.out;

    OutputTracker tracker;
    tracker.write_text(args.out, csv);
    write_manifest(tracker, args.out + ".manifest.json", "curve", flags, ds.fingerprint(),
                   started);
    tracker.commit();

    std::cout << "curve: " << fractions.size() << " fractions x " << methods.size()
              << " methods, " << args.common.trials << " trials each\n";
    std::cout << "wrote " << args.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// synth / export-dataset
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out_dir;
    std::size_t instances = 240;
    std::size_t noise_features = 9;
    double noise = 0.3;
    std::uint64_t seed = 1;
};

int run_synth(const SynthArgs& args) {
    const auto started = std::chrono::steady_clock::now();
    cann::SyntheticSpec spec;
    spec.n_instances = args.instances;
    spec.n_noise_features = args.noise_features;
    spec.noise_sigma = args.noise;
    spec.seed = args.seed;

    const cann::RawTable table = cann::make_synthetic_raw(spec);
    std::string csv;
    for (std::size_t c = 0; c < table.column_names.size(); ++c) {
        csv += (c ? "," : "") + table.column_names[c];
    }
    csv += "\n";
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            csv += (c ? "," : "") + table.columns[c][r];
        }
        csv += "\n";
    }

    const fs::path out_dir(args.out_dir);
    fs::create_directories(out_dir);
    OutputTracker tracker;
    tracker.write_text(out_dir / "data.csv", csv);
    tracker.note(out_dir / "schema.json");
    cann::save_schema(cann::synthetic_schema(spec), out_dir / "schema.json");

    const json flags{{"out_dir", args.out_dir},
                     {"instances", args.instances},
                     {"noise_features", args.noise_features},
                     {"noise", args.noise},
                     {"seed", args.seed}};
    write_manifest(tracker, out_dir / "manifest.json", "synth", flags, "", started);
    tracker.commit();

    std::cout << "synthetic benchmark set: " << args.instances << " instances, 1 signal + "
              << args.noise_features << " noise features\n";
    std::cout << "wrote " << (out_dir / "data.csv").string() << "\n";
    return 0;
}

struct ExportArgs {
    std::string data, schema, out;
};

int run_export(const ExportArgs& args) {
    const auto started = std::chrono::steady_clock::now();
    const cann::Dataset ds = cann::load_dataset(args.data, args.schema);
    OutputTracker tracker;
    tracker.note(args.out);
    cann::save_dataset_json(ds, args.out);
    const json flags{{"data", args.data}, {"schema", args.schema}, {"out", args.out}};
    write_manifest(tracker, args.out + ".manifest.json", "export-dataset", flags,
                   ds.fingerprint(), started);
    tracker.commit();
    std::cout << "exported " << ds.n_instances() << " x " << ds.n_features()
              << " dataset to " << args.out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Correlation-aided neural network trainer and benchmark harness"};
    app.set_version_flag("--version", std::string("cann ") + cann::kVersion);
    app.require_subcommand(1);

    ImportanceArgs imp;
    auto* imp_cmd = app.add_subcommand(
        "importance", "Compute feature-output Pearson correlations and write them as an "
                      "importance file");
    imp_cmd->add_option("--data", imp.data, "CSV data file")->required();
    imp_cmd->add_option("--schema", imp.schema, "JSON schema file")->required();
    imp_cmd->add_option("--out", imp.out, "Output importance JSON")->required();
    imp_cmd->add_option("--scope", imp.scope, "Rows used: full dataset or a train split")
        ->check(CLI::IsMember({"full", "train"}));
    std::uint64_t imp_seed = 0;
    double imp_fraction = 0.0;
    auto* imp_seed_opt = imp_cmd->add_option("--seed", imp_seed, "Split seed (train scope)");
    auto* imp_frac_opt = imp_cmd->add_option("--train-fraction", imp_fraction,
                                             "Split fraction (train scope)");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train a single model on the full dataset");
    train_cmd->add_option("--data", train.data, "CSV data file")->required();
    train_cmd->add_option("--schema", train.schema, "JSON schema file")->required();
    train_cmd->add_option("--out", train.out, "Output model JSON")->required();
    train_cmd->add_option("--method", train.method, "plain or cann")
        ->check(CLI::IsMember({"plain", "cann"}));
    train_cmd->add_option("--importance", train.importance, "Importance file (cann)");
    train_cmd->add_option("--p", train.p, "Blend weight: data error vs correlation error")
        ->check(CLI::Range(0.0, 1.0));
    train_cmd->add_option("--seed", train.seed, "Init and shuffle seed");
    train.training.add_to(*train_cmd);

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand(
        "bench", "Paired repeated-trial accuracy comparison of plain vs cann");
    bench_cmd->add_option("--data", bench.common.data, "CSV data file")->required();
    bench_cmd->add_option("--schema", bench.common.schema, "JSON schema file")->required();
    bench_cmd->add_option("--out-dir", bench.out_dir, "Output directory")->required();
    bench_cmd->add_option("--importance", bench.common.importance, "Importance file");
    bench_cmd->add_option("--importance-scope", bench.common.importance_scope,
                          "Compute importance from data: full or train")
        ->check(CLI::IsMember({"full", "train"}));
    bench_cmd->add_option("--trials", bench.common.trials, "Trial count")
        ->check(CLI::PositiveNumber);
    bench_cmd->add_option("--fraction", bench.fraction, "Train fraction per trial");
    double bench_keep = 1.0;
    auto* keep_opt = bench_cmd->add_option(
        "--keep-fraction", bench_keep,
        "Chi-squared feature selection for the plain baseline (fraction kept)");
    bench_cmd->add_option("--p", bench.common.p, "Blend weight")->check(CLI::Range(0.0, 1.0));
    bench_cmd->add_option("--seed", bench.common.seed, "Base seed; trial i uses seed+i");
    bench_cmd->add_option("--jobs", bench.common.jobs, "Parallel trial workers")
        ->check(CLI::PositiveNumber);
    bench_cmd->add_flag("--force", bench.force, "Overwrite results from another configuration");
    bench.common.training.add_to(*bench_cmd);

    CurveArgs curve;
    auto* curve_cmd = app.add_subcommand("curve", "Learning curve over train fractions");
    curve_cmd->add_option("--data", curve.common.data, "CSV data file")->required();
    curve_cmd->add_option("--schema", curve.common.schema, "JSON schema file")->required();
    curve_cmd->add_option("--out", curve.out, "Output CSV path")->required();
    curve_cmd->add_option("--fractions", curve.fractions, "Comma-separated train fractions");
    curve_cmd->add_option("--importance", curve.common.importance, "Importance file");
    curve_cmd->add_option("--importance-scope", curve.common.importance_scope,
                          "Compute importance from data: full or train")
        ->check(CLI::IsMember({"full", "train"}));
    curve_cmd->add_option("--trials", curve.common.trials, "Trials per point")
        ->check(CLI::PositiveNumber);
    curve_cmd->add_option("--p", curve.common.p, "Blend weight")->check(CLI::Range(0.0, 1.0));
    curve_cmd->add_option("--seed", curve.common.seed, "Base seed");
    curve_cmd->add_option("--jobs", curve.common.jobs, "Parallel trial workers")
        ->check(CLI::PositiveNumber);
    curve.common.training.add_to(*curve_cmd);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand(
        "synth", "Generate the bundled synthetic benchmark set (CSV + schema)");
    synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();
    synth_cmd->add_option("--instances", synth.instances, "Instance count")
        ->check(CLI::PositiveNumber);
    synth_cmd->add_option("--noise-features", synth.noise_features, "Pure-noise feature count");
    synth_cmd->add_option("--noise", synth.noise, "Noise sigma on the signal feature")
        ->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--seed", synth.seed, "Generator seed");

    ExportArgs exp;
    auto* export_cmd = app.add_subcommand(
        "export-dataset", "Encode a CSV and write the numeric dataset with its feature metadata");
    export_cmd->add_option("--data", exp.data, "CSV data file")->required();
    export_cmd->add_option("--schema", exp.schema, "JSON schema file")->required();
    export_cmd->add_option("--out", exp.out, "Output dataset JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*imp_cmd) {
            if (*imp_seed_opt) imp.seed = imp_seed;
            if (*imp_frac_opt) imp.train_fraction = imp_fraction;
            return run_importance(imp);
        }
        if (*train_cmd) return run_train(train);
        if (*bench_cmd) {
            if (*keep_opt) bench.keep_fraction = bench_keep;
            return run_bench(bench);
        }
        if (*curve_cmd) return run_curve(curve);
        if (*synth_cmd) return run_synth(synth);
        if (*export_cmd) return run_export(exp);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
