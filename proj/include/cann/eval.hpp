#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cann/dataset.hpp"
#include "cann/matrix.hpp"
#include "cann/network.hpp"
#include "cann/trainer.hpp"

namespace cann {

enum class Method { kPlain, kCann };

std::string method_label(Method m);

/// Where the target-correlation values for CANN trials come from.
///   kMatrix        - fixed values (loaded importance file, or constructed)
///   kComputedFull  - Pearson correlations over the full dataset, shared by
///                    every trial (train+test leak, deliberate)
///   kComputedTrain - recomputed per trial over that trial's train rows
struct ImportanceSource {
    enum class Kind { kMatrix, kComputedFull, kComputedTrain };
    Kind kind = Kind::kComputedTrain;
    Matrix values; // used when kind == kMatrix

    static ImportanceSource from_matrix(Matrix m);
    static ImportanceSource computed_full();
    static ImportanceSource computed_train();
};

struct TrialConfig {
    TrainConfig train;      // seed field is ignored; per-trial seeds below
    double p = 0.5;
    std::uint64_t base_seed = 1;
    std::size_t n_trials = 20;
    double train_fraction = 0.5;
    std::size_t jobs = 1;
};

struct TrialReport {
    std::string method;
    std::vector<double> accuracies; // percent, one per trial
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t n_trials = 0;
    std::string config_fingerprint;
};

/// Repeated seeded trials: trial i splits and initializes with seed
/// base_seed + i, trains, and scores accuracy on the held-out rows.
/// `source` must be non-null iff method == kCann.
TrialReport run_trials(const Dataset& ds, Method method, const ImportanceSource* source,
                       const TrialConfig& cfg);

/// The top round(keep_fraction * K) encoded features by chi-squared rank,
/// in their original column order. Errors when the rounding keeps nothing.
std::vector<std::size_t> chi_squared_selection(const Dataset& ds, double keep_fraction);

/// Chi-squared ranking first: the top round(keep_fraction * K) encoded
/// features are retained, then trials run on the reduced dataset.
TrialReport run_feature_selected_trials(const Dataset& ds, double keep_fraction,
                                        Method method, const ImportanceSource* source,
                                        const TrialConfig& cfg);

struct CurvePoint {
    double fraction = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
};

struct MethodCurve {
    std::string method;
    std::vector<CurvePoint> points;
};

struct LearningCurve {
    std::vector<MethodCurve> curves;
};

/// run_trials at every fraction for every method, all sharing base_seed so
/// the methods see identical splits point by point.
LearningCurve learning_curve(const Dataset& ds, std::span<const Method> methods,
                             std::span<const double> fractions,
                             const ImportanceSource* source, const TrialConfig& cfg);

/// Binary-classification benchmark generator: one informative feature
/// (class value plus Gaussian noise) and `n_noise_features` uniform-noise
/// features. Emitted as a raw table so it flows through the normal encoding
/// path.
struct SyntheticSpec {
    std::size_t n_instances = 240;
    std::size_t n_noise_features = 9;
    double noise_sigma = 0.3;
    std::uint64_t seed = 1;
};

RawTable make_synthetic_raw(const SyntheticSpec& spec);
TableSchema synthetic_schema(const SyntheticSpec& spec);

} // namespace cann
