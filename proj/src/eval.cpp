#include "cann/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "cann/fingerprint.hpp"
#include "cann/rng.hpp"
#include "cann/stats.hpp"

namespace cann {

std::string method_label(Method m) {
    return m == Method::kPlain ? "plain" : "cann";
}

ImportanceSource ImportanceSource::from_matrix(Matrix m) {
    ImportanceSource s;
    s.kind = Kind::kMatrix;
    s.values = std::move(m);
    return s;
}

ImportanceSource ImportanceSource::computed_full() {
    ImportanceSource s;
    s.kind = Kind::kComputedFull;
    return s;
}

ImportanceSource ImportanceSource::computed_train() {
    ImportanceSource s;
    s.kind = Kind::kComputedTrain;
    return s;
}

namespace {

std::vector<std::size_t> architecture(const Dataset& ds, const TrainConfig& cfg) {
    std::vector<std::size_t> sizes;
    sizes.push_back(ds.n_features());
    if (cfg.hidden_sizes.empty()) {
        sizes.push_back(default_hidden_size(ds.n_features(), ds.n_outputs()));
    } else {
        sizes.insert(sizes.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
    }
    sizes.push_back(ds.n_outputs());
    return sizes;
}

std::string trial_fingerprint(const Dataset& ds, Method method,
                              const ImportanceSource* source, const TrialConfig& cfg) {
    Fingerprint fp;
    fp.mix("cann.trials.v1");
    fp.mix(ds.fingerprint());
    fp.mix(method_label(method));
    fp.mix_u64(cfg.n_trials);
    fp.mix_u64(cfg.base_seed);
    fp.mix_double(cfg.train_fraction);
    fp.mix_double(cfg.p);
    fp.mix_double(cfg.train.learning_rate);
    fp.mix_u64(cfg.train.epochs);
    fp.mix_double(cfg.train.init_range);
    for (std::size_t h : cfg.train.hidden_sizes) fp.mix_u64(h);
    if (source != nullptr) {
        switch (source->kind) {
        case ImportanceSource::Kind::kMatrix:
            fp.mix("matrix");
            fp.mix_doubles(source->values.data());
            break;
        case ImportanceSource::Kind::kComputedFull:
            fp.mix("computed_full");
            break;
        case ImportanceSource::Kind::kComputedTrain:
            fp.mix("computed_train");
            break;
        }
    }
    return fp.hex();
}

double run_one_trial(const Dataset& ds, Method method, const ImportanceSource* source,
                     const TrialConfig& cfg, const Matrix* full_importance,
                     std::uint64_t seed) {
    const Split sp = split(ds, cfg.train_fraction, seed);
    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = seed;

    Network net = init_network(architecture(ds, train_cfg), seed, train_cfg.init_range);
    if (method == Method::kPlain) {
        net = train_plain(std::move(net), ds, sp, train_cfg);
    } else {
        Matrix importance;
        switch (source->kind) {
        case ImportanceSource::Kind::kMatrix:
            importance = source->values;
            break;
        case ImportanceSource::Kind::kComputedFull:
            importance = *full_importance;
            break;
        case ImportanceSource::Kind::kComputedTrain:
            importance = compute_importance(ds, sp.train_indices).correlation;
            break;
        }
        const ImportanceSpec spec = build_importance(ds, importance, sp.train_indices);
        net = train_cann(std::move(net), ds, sp, spec, train_cfg, cfg.p);
    }
    return accuracy_percent(net, ds, sp.test_indices);
}

} // namespace

TrialReport run_trials(const Dataset& ds, Method method, const ImportanceSource* source,
                       const TrialConfig& cfg) {
    if ((method == Method::kCann) != (source != nullptr)) {
        throw std::invalid_argument(
            "run_trials: importance source is required for cann and only for cann");
    }
    if (cfg.n_trials < 1) throw std::invalid_argument("run_trials: n_trials must be >= 1");
    cfg.train.validate();

    Matrix full_importance;
    if (source != nullptr && source->kind == ImportanceSource::Kind::kComputedFull) {
        full_importance = compute_importance(ds).correlation;
    }

    TrialReport report;
    report.method = method_label(method);
    report.n_trials = cfg.n_trials;
    report.config_fingerprint = trial_fingerprint(ds, method, source, cfg);
    report.accuracies.assign(cfg.n_trials, 0.0);

    const std::size_t jobs = std::max<std::size_t>(1, std::min(cfg.jobs, cfg.n_trials));
    if (jobs == 1) {
        for (std::size_t i = 0; i < cfg.n_trials; ++i) {
            report.accuracies[i] = run_one_trial(ds, method, source, cfg, &full_importance,
                                                 cfg.base_seed + i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        std::vector<std::thread> workers;
        workers.reserve(jobs);
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= cfg.n_trials) return;
                    try {
                        report.accuracies[i] = run_one_trial(ds, method, source, cfg,
                                                             &full_importance,
                                                             cfg.base_seed + i);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!first_error) first_error = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& t : workers) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    double sum = 0.0;
    for (double a : report.accuracies) sum += a;
    report.mean = sum / static_cast<double>(cfg.n_trials);
    double var = 0.0;
    for (double a : report.accuracies) {
        var += (a - report.mean) * (a - report.mean);
    }
    report.stddev = std::sqrt(var / static_cast<double>(cfg.n_trials));
    return report;
}

std::vector<std::size_t> chi_squared_selection(const Dataset& ds, double keep_fraction) {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
        throw std::invalid_argument("keep_fraction must lie in (0, 1]");
    }
    const auto n_keep = static_cast<std::size_t>(
        std::llround(keep_fraction * static_cast<double>(ds.n_features())));
    if (n_keep == 0) {
        throw std::invalid_argument("keep_fraction retains zero features");
    }
    const auto ranking = chi_squared_rank(ds);
    std::vector<std::size_t> keep;
    keep.reserve(std::min(n_keep, ds.n_features()));
    for (std::size_t i = 0; i < std::min(n_keep, ds.n_features()); ++i) {
        keep.push_back(ranking[i].feature);
    }
    std::sort(keep.begin(), keep.end());
    return keep;
}

TrialReport run_feature_selected_trials(const Dataset& ds, double keep_fraction,
                                        Method method, const ImportanceSource* source,
                                        const TrialConfig& cfg) {
    const std::vector<std::size_t> keep = chi_squared_selection(ds, keep_fraction);
    if (keep.size() >= ds.n_features()) {
        return run_trials(ds, method, source, cfg); // nothing removed
    }
    return run_trials(select_features(ds, keep), method, source, cfg);
}

LearningCurve learning_curve(const Dataset& ds, std::span<const Method> methods,
                             std::span<const double> fractions,
                             const ImportanceSource* source, const TrialConfig& cfg) {
    if (fractions.empty()) throw std::invalid_argument("learning_curve: no fractions");
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (!(fractions[i] > 0.0 && fractions[i] < 1.0)) {
            throw std::invalid_argument("learning_curve: fractions must lie in (0, 1)");
        }
        if (i > 0 && fractions[i] <= fractions[i - 1]) {
            throw std::invalid_argument("learning_curve: fractions must be strictly increasing");
        }
    }
    LearningCurve curve;
    for (Method m : methods) {
        MethodCurve mc;
        mc.method = method_label(m);
        for (double f : fractions) {
            TrialConfig point_cfg = cfg;
            point_cfg.train_fraction = f;
            const TrialReport r =
                run_trials(ds, m, m == Method::kCann ? source : nullptr, point_cfg);
            mc.points.push_back({f, r.mean, r.stddev});
        }
        curve.curves.push_back(std::move(mc));
    }
    return curve;
}

RawTable make_synthetic_raw(const SyntheticSpec& spec) {
    if (spec.n_instances < 4) throw std::invalid_argument("synthetic set needs >= 4 instances");
    Rng rng(spec.seed);
    RawTable table;
    table.column_names.push_back("signal");
    table.column_types.push_back(ColumnType::kContinuous);
    for (std::size_t k = 0; k < spec.n_noise_features; ++k) {
        table.column_names.push_back("noise" + std::to_string(k));
        table.column_types.push_back(ColumnType::kContinuous);
    }
    table.column_names.push_back("label");
    table.column_types.push_back(ColumnType::kNominal);
    table.class_column = table.column_names.size() - 1;
    table.columns.assign(table.column_names.size(), {});

    char buf[64];
    const auto format_cell = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (std::size_t i = 0; i < spec.n_instances; ++i) {
        const int label = i % 2 == 0 ? 0 : 1; // balanced classes
        const double signal = static_cast<double>(label) + spec.noise_sigma * gaussian(rng);
        table.columns[0].push_back(format_cell(signal));
        for (std::size_t k = 0; k < spec.n_noise_features; ++k) {
            // fair coin flips: pure noise, but easy for a small-sample fit
            // to latch onto
            table.columns[1 + k].push_back(uniform_unit(rng) < 0.5 ? "0" : "1");
        }
        table.columns[table.class_column].push_back(label == 0 ? "neg" : "pos");
    }
    return table;
}

TableSchema synthetic_schema(const SyntheticSpec& spec) {
    TableSchema schema;
    schema.has_header = true;
    schema.columns.push_back({"signal", ColumnType::kContinuous});
    for (std::size_t k = 0; k < spec.n_noise_features; ++k) {
        schema.columns.push_back({"noise" + std::to_string(k), ColumnType::kContinuous});
    }
    schema.columns.push_back({"label", ColumnType::kNominal});
    schema.class_column = schema.columns.size() - 1;
    return schema;
}

} // namespace cann
