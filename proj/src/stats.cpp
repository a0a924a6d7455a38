#include "cann/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace cann {

using nlohmann::json;

namespace {

double mean_of(std::span<const double> x) {
    double sum = 0.0;
    for (double v : x) sum += v;
    return sum / static_cast<double>(x.size());
}

bool is_constant(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

} // namespace

double sample_cov(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("sample_cov: length mismatch");
    if (x.empty()) throw std::invalid_argument("sample_cov: empty input");
    // a centered constant is identically zero; the summed formula would
    // leave rounding residue from the inexact mean
    if (is_constant(x) || is_constant(y)) return 0.0;
    const double xbar = mean_of(x);
    const double ybar = mean_of(y);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        acc += (x[i] - xbar) * (y[i] - ybar);
    }
    return acc / static_cast<double>(x.size());
}

double sample_stddev(std::span<const double> x) {
    return std::sqrt(sample_cov(x, x));
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 samples");
    const double sx = sample_stddev(x);
    const double sy = sample_stddev(y);
    if (sx == 0.0 || sy == 0.0) return std::nullopt;
    return sample_cov(x, y) / (sx * sy);
}

CorrelationReport compute_importance(const Dataset& ds) {
    std::vector<std::size_t> rows(ds.n_instances());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return compute_importance(ds, rows);
}

CorrelationReport compute_importance(const Dataset& ds, std::span<const std::size_t> rows) {
    if (rows.empty()) throw std::invalid_argument("compute_importance: no rows selected");
    const std::size_t k_count = ds.n_features();
    const std::size_t c_count = ds.n_outputs();

    CorrelationReport report;
    report.correlation = Matrix(k_count, c_count);
    report.covariance = Matrix(k_count, c_count);
    report.sigma_x.resize(k_count);
    report.sigma_y.resize(c_count);
    report.defined_flags.assign(k_count * c_count, 0);

    std::vector<double> xcol(rows.size());
    std::vector<std::vector<double>> ycols(c_count, std::vector<double>(rows.size()));
    for (std::size_t o = 0; o < c_count; ++o) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            ycols[o][i] = ds.targets(rows[i], o);
        }
        report.sigma_y[o] = sample_stddev(ycols[o]);
    }

    for (std::size_t k = 0; k < k_count; ++k) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            xcol[i] = ds.features(rows[i], k);
        }
        report.sigma_x[k] = sample_stddev(xcol);
        for (std::size_t o = 0; o < c_count; ++o) {
            const double cov = sample_cov(xcol, ycols[o]);
            report.covariance(k, o) = cov;
            if (report.sigma_x[k] == 0.0 || report.sigma_y[o] == 0.0) {
                report.correlation(k, o) = 0.0;
            } else {
                // clamp away rounding residue; the coefficient itself
                // cannot leave [-1, 1]
                const double r = cov / (report.sigma_x[k] * report.sigma_y[o]);
                report.correlation(k, o) = std::clamp(r, -1.0, 1.0);
                report.defined_flags[k * c_count + o] = 1;
            }
        }
    }
    return report;
}

std::size_t CorrelationReport::undefined_count() const {
    return defined_flags.size() -
           static_cast<std::size_t>(std::count(defined_flags.begin(), defined_flags.end(), 1));
}

MeanTable::MeanTable(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("MeanTable: empty input");
    contributions_.resize(values.size());
    reset(values);
}

void MeanTable::reset(std::span<const double> values) {
    if (values.size() != contributions_.size()) {
        throw std::invalid_argument("MeanTable::reset: size change not allowed");
    }
    const auto n = static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        contributions_[i] = values[i] / n;
    }
    refresh();
}

void MeanTable::update(std::size_t i, double new_value) {
    if (i >= contributions_.size()) throw std::out_of_range("MeanTable::update: bad index");
    const double contribution = new_value / static_cast<double>(contributions_.size());
    mean_ += contribution - contributions_[i]; // rewriting the same value is a no-op
    contributions_[i] = contribution;
}

void MeanTable::refresh() {
    double sum = 0.0;
    for (double c : contributions_) sum += c;
    mean_ = sum;
}

namespace {

// Equal-frequency bin assignment. Edges sit at the sorted order statistics
// floor(i*N/bins); duplicate edges collapse, so heavily tied columns end up
// with fewer bins.
std::vector<std::size_t> equal_frequency_bins(std::span<const double> values,
                                              std::size_t bins) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> edges;
    for (std::size_t b = 1; b < bins; ++b) {
        const double edge = sorted[b * sorted.size() / bins];
        if (edges.empty() || edge > edges.back()) edges.push_back(edge);
    }
    std::vector<std::size_t> assignment(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        assignment[i] = static_cast<std::size_t>(
            std::upper_bound(edges.begin(), edges.end(), values[i]) - edges.begin());
    }
    return assignment;
}

bool is_binary_column(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(),
                       [](double v) { return v == 0.0 || v == 1.0; });
}

double chi_squared_statistic(const std::vector<std::vector<std::size_t>>& observed) {
    const std::size_t n_bins = observed.size();
    if (n_bins == 0) return 0.0;
    const std::size_t n_classes = observed.front().size();
    std::vector<double> row_total(n_bins, 0.0);
    std::vector<double> col_total(n_classes, 0.0);
    double total = 0.0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        for (std::size_t c = 0; c < n_classes; ++c) {
            const auto v = static_cast<double>(observed[b][c]);
            row_total[b] += v;
            col_total[c] += v;
            total += v;
        }
    }
    double stat = 0.0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        for (std::size_t c = 0; c < n_classes; ++c) {
            const double expected = row_total[b] * col_total[c] / total;
            if (expected == 0.0) continue;
            const double diff = static_cast<double>(observed[b][c]) - expected;
            stat += diff * diff / expected;
        }
    }
    return stat;
}

} // namespace

std::vector<RankedFeature> chi_squared_rank(const Dataset& ds, std::size_t bins) {
    if (bins < 2) throw std::invalid_argument("chi_squared_rank: bins must be >= 2");
    if (ds.n_outputs() < 2) throw std::invalid_argument("chi_squared_rank: single class");
    const std::size_t n = ds.n_instances();

    std::vector<std::size_t> class_of(n);
    for (std::size_t r = 0; r < n; ++r) class_of[r] = ds.class_of(r);

    std::vector<RankedFeature> ranking(ds.n_features());
    std::vector<double> column(n);
    for (std::size_t k = 0; k < ds.n_features(); ++k) {
        for (std::size_t r = 0; r < n; ++r) column[r] = ds.features(r, k);

        std::vector<std::size_t> bin_of;
        std::size_t n_bins;
        if (is_binary_column(column)) {
            bin_of.resize(n);
            for (std::size_t r = 0; r < n; ++r) bin_of[r] = column[r] == 1.0 ? 1 : 0;
            n_bins = 2;
        } else {
            bin_of = equal_frequency_bins(column, bins);
            n_bins = *std::max_element(bin_of.begin(), bin_of.end()) + 1;
        }

        std::vector<std::vector<std::size_t>> observed(
            n_bins, std::vector<std::size_t>(ds.n_outputs(), 0));
        for (std::size_t r = 0; r < n; ++r) {
            ++observed[bin_of[r]][class_of[r]];
        }
        ranking[k] = {k, chi_squared_statistic(observed)};
    }

    std::stable_sort(ranking.begin(), ranking.end(),
                     [](const RankedFeature& a, const RankedFeature& b) {
                         if (a.score != b.score) return a.score > b.score;
                         return a.feature < b.feature;
                     });
    return ranking;
}

ImportanceFile make_importance_file(const Dataset& ds, const CorrelationReport& report,
                                    const std::string& scope,
                                    std::optional<std::uint64_t> seed,
                                    std::optional<double> train_fraction) {
    ImportanceFile file;
    file.dataset_fingerprint = ds.fingerprint();
    file.feature_names = ds.feature_names();
    file.output_labels = ds.class_labels;
    file.values = report.correlation;
    file.defined_flags = report.defined_flags;
    file.scope = scope;
    file.seed = seed;
    file.train_fraction = train_fraction;
    return file;
}

void save_importance_file(const ImportanceFile& file, const std::filesystem::path& path) {
    json j;
    j["dataset_fingerprint"] = file.dataset_fingerprint;
    j["feature_names"] = file.feature_names;
    j["output_labels"] = file.output_labels;
    j["scope"] = file.scope;
    if (file.seed) j["seed"] = *file.seed;
    if (file.train_fraction) j["train_fraction"] = *file.train_fraction;
    j["values"] = json::array();
    const std::size_t c_count = file.values.cols();
    for (std::size_t k = 0; k < file.values.rows(); ++k) {
        for (std::size_t o = 0; o < c_count; ++o) {
            json entry;
            entry["feature"] = file.feature_names[k];
            entry["output"] = o;
            entry["I"] = file.values(k, o);
            if (!file.defined_flags.empty() && file.defined_flags[k * c_count + o] == 0) {
                entry["undefined"] = true;
            }
            j["values"].push_back(std::move(entry));
        }
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

ImportanceFile load_importance_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }

    ImportanceFile file;
    file.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
    file.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    file.output_labels = j.at("output_labels").get<std::vector<std::string>>();
    file.scope = j.value("scope", "external");
    if (j.contains("seed")) file.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("train_fraction")) file.train_fraction = j["train_fraction"].get<double>();

    const std::size_t k_count = file.feature_names.size();
    const std::size_t c_count = file.output_labels.size();
    file.values = Matrix(k_count, c_count); // absent pairs stay 0
    file.defined_flags.assign(k_count * c_count, 1);

    std::map<std::string, std::size_t> name_index;
    for (std::size_t k = 0; k < k_count; ++k) name_index[file.feature_names[k]] = k;

    for (const auto& entry : j.at("values")) {
        const std::string feature = entry.at("feature").get<std::string>();
        const auto it = name_index.find(feature);
        if (it == name_index.end()) {
            throw std::runtime_error(path.string() + ": unknown feature '" + feature + "'");
        }
        const auto o = entry.at("output").get<std::size_t>();
        if (o >= c_count) {
            throw std::runtime_error(path.string() + ": output index " + std::to_string(o) +
                                     " out of range");
        }
        const double v = entry.at("I").get<double>();
        if (!(v >= -1.0 && v <= 1.0)) {
            throw std::runtime_error(path.string() + ": importance for '" + feature +
                                     "' is outside [-1, 1]");
        }
        file.values(it->second, o) = v;
        if (entry.value("undefined", false)) {
            file.defined_flags[it->second * c_count + o] = 0;
        }
    }
    return file;
}

Matrix importance_matrix_for(const ImportanceFile& file, const Dataset& ds) {
    if (file.dataset_fingerprint != ds.fingerprint()) {
        throw std::runtime_error("importance file fingerprint does not match the dataset");
    }
    if (file.feature_names != ds.feature_names()) {
        throw std::runtime_error("importance file feature names do not match the dataset");
    }
    if (file.output_labels != ds.class_labels) {
        throw std::runtime_error("importance file output labels do not match the dataset");
    }
    return file.values;
}

} // namespace cann
