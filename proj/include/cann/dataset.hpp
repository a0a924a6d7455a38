#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cann/matrix.hpp"

namespace cann {

enum class ColumnType { kContinuous, kNominal };

struct ColumnSchema {
    std::string name;
    ColumnType type = ColumnType::kNominal;
};

/// Column-type declarations for a CSV file, normally loaded from a JSON
/// side file: {"has_header": bool, "columns": [{"name", "type"}...],
/// "class_column": name-or-index}.
struct TableSchema {
    std::vector<ColumnSchema> columns;
    std::size_t class_column = 0;
    bool has_header = false;
};

TableSchema load_schema(const std::filesystem::path& path);
void save_schema(const TableSchema& schema, const std::filesystem::path& path);

/// Tabular data exactly as read: cells are text, the empty string marks a
/// missing value. Stored column-major.
struct RawTable {
    std::vector<std::string> column_names;
    std::vector<ColumnType> column_types;
    std::vector<std::vector<std::string>> columns; // columns[c][row]
    std::size_t class_column = 0;

    std::size_t n_rows() const { return columns.empty() ? 0 : columns.front().size(); }
    std::size_t n_columns() const { return columns.size(); }
    void validate() const; // throws on invariant violation
};

RawTable load_csv(const std::filesystem::path& path, const TableSchema& schema);

/// How one encoded feature column was produced from a raw column. Enough to
/// re-apply the exact transform to new rows of the same raw table.
struct FeatureEncoding {
    std::size_t source_column = 0;
    std::string name;
    ColumnType type = ColumnType::kContinuous;
    std::string category;      // nominal: the indicated category ("" = missing-as-category)
    double min = 0.0;          // continuous: observed range before scaling
    double max = 0.0;
    double impute_mean = 0.0;  // continuous: mean substituted for missing cells
    bool constant = false;     // continuous: max == min, column encoded as all zeros
};

/// Fully numeric instance matrix. Features lie in [0,1]; targets are one-hot
/// rows over the class labels.
struct Dataset {
    Matrix features; // N x K
    Matrix targets;  // N x C
    std::vector<FeatureEncoding> feature_meta;
    std::vector<std::string> class_labels;
    std::size_t class_source_column = 0;

    std::size_t n_instances() const { return features.rows(); }
    std::size_t n_features() const { return features.cols(); }
    std::size_t n_outputs() const { return targets.cols(); }

    std::size_t class_of(std::size_t row) const;
    std::vector<std::string> feature_names() const;

    /// Stable content hash: dimensions, names, and the exact bits of both
    /// matrices. Computed fresh each call.
    std::string fingerprint() const;
};

Dataset encode(const RawTable& raw);

/// Re-applies a recorded encoding to a raw table, producing the feature
/// matrix only. encode() routes through this, so re-encoding the same table
/// reproduces the matrix bit for bit.
Matrix apply_encoding(const RawTable& raw, const std::vector<FeatureEncoding>& meta);

/// Dataset restricted to the given encoded feature columns (sorted,
/// duplicate-free). Keeping every column returns an identical dataset.
Dataset select_features(const Dataset& ds, std::span<const std::size_t> keep);

void save_dataset_json(const Dataset& ds, const std::filesystem::path& path);

struct Split {
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
    std::uint64_t seed = 0;
    double train_fraction = 0.5;
};

/// Seeded uniform permutation; the first round(train_fraction * N) indices
/// form the train set.
Split split(const Dataset& ds, double train_fraction, std::uint64_t seed);

/// Convenience for loading + encoding in one step.
Dataset load_dataset(const std::filesystem::path& csv_path,
                     const std::filesystem::path& schema_path);

} // namespace cann
