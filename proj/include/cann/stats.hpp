#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cann/dataset.hpp"
#include "cann/matrix.hpp"

namespace cann {

/// Sample covariance with divisor N (biased estimator):
/// (1/N) * sum_i (x_i - xbar)(y_i - ybar).
double sample_cov(std::span<const double> x, std::span<const double> y);

/// Standard deviation under the same 1/N convention.
double sample_stddev(std::span<const double> x);

/// Pearson correlation; nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Feature-vs-output correlation grid. Pairs where either side is constant
/// carry defined == false and a correlation of 0.
struct CorrelationReport {
    Matrix correlation;          // K x C
    Matrix covariance;           // K x C
    std::vector<double> sigma_x; // per feature
    std::vector<double> sigma_y; // per output column
    std::vector<std::uint8_t> defined_flags; // K x C, row-major

    bool defined(std::size_t k, std::size_t o) const {
        return defined_flags[k * correlation.cols() + o] != 0;
    }
    std::size_t undefined_count() const;
};

CorrelationReport compute_importance(const Dataset& ds);
CorrelationReport compute_importance(const Dataset& ds, std::span<const std::size_t> rows);

/// Running mean with one stored contribution (value/n) per instance, so a
/// single instance's value can be replaced in O(1): subtract the old
/// contribution, add the new one. The instance count is fixed at
/// construction. Accumulated rounding is bounded by refresh(), which re-sums
/// the contributions exactly.
class MeanTable {
public:
    explicit MeanTable(std::span<const double> values);

    /// Overwrite every contribution from a fresh value vector (same length)
    /// and recompute the mean exactly.
    void reset(std::span<const double> values);

    std::size_t size() const { return contributions_.size(); }
    double mean() const { return mean_; }
    double contribution(std::size_t i) const { return contributions_[i]; }

    void update(std::size_t i, double new_value);
    void refresh();

private:
    std::vector<double> contributions_; // contributions_[i] == value_i / n
    double mean_ = 0.0;
};

struct RankedFeature {
    std::size_t feature = 0;
    double score = 0.0;
};

/// Chi-squared statistic of each encoded feature against the class, features
/// sorted by descending score (ties: lower index first). Continuous features
/// are discretized into at most `bins` equal-frequency bins; exact 0/1
/// columns are used as-is.
std::vector<RankedFeature> chi_squared_rank(const Dataset& ds, std::size_t bins = 10);

/// On-disk importance values: per (feature name, output node) target
/// correlations plus the fingerprint of the dataset they were computed for.
/// Pairs missing from the file default to 0 on lookup.
struct ImportanceFile {
    std::string dataset_fingerprint;
    std::vector<std::string> feature_names;
    std::vector<std::string> output_labels;
    Matrix values;                           // K x C
    std::vector<std::uint8_t> defined_flags; // K x C, row-major
    std::string scope;                       // "full" or "train"
    std::optional<std::uint64_t> seed;       // set when scope == "train"
    std::optional<double> train_fraction;
};

ImportanceFile make_importance_file(const Dataset& ds, const CorrelationReport& report,
                                    const std::string& scope,
                                    std::optional<std::uint64_t> seed = std::nullopt,
                                    std::optional<double> train_fraction = std::nullopt);

void save_importance_file(const ImportanceFile& file, const std::filesystem::path& path);

/// Loads and validates: every value must lie in [-1, 1], feature/output
/// references must be well-formed.
ImportanceFile load_importance_file(const std::filesystem::path& path);

/// Checks the file against a dataset (fingerprint, feature names, output
/// count) and returns its K x C value matrix. Throws on any mismatch.
Matrix importance_matrix_for(const ImportanceFile& file, const Dataset& ds);

} // namespace cann
