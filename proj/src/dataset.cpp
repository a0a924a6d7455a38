#include "cann/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "cann/fingerprint.hpp"
#include "cann/rng.hpp"

#include "json.hpp"

namespace cann {

using nlohmann::json;

namespace {

std::string column_type_name(ColumnType t) {
    return t == ColumnType::kContinuous ? "continuous" : "nominal";
}

ColumnType parse_column_type(const std::string& s) {
    if (s == "continuous") return ColumnType::kContinuous;
    if (s == "nominal") return ColumnType::kNominal;
    throw std::runtime_error("unknown column type '" + s + "' (expected continuous|nominal)");
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    return j;
}

void write_json_file(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

// One CSV record; handles quoted fields with doubled-quote escapes and CRLF.
std::vector<std::string> parse_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    std::size_t i = 0;
    const std::size_t n = line.size();
    while (i <= n) {
        if (i == n) {
            if (quoted) {
                throw std::runtime_error("row " + std::to_string(line_no) +
                                         ": unterminated quoted field");
            }
            fields.push_back(field);
            break;
        }
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < n && line[i + 1] == '"') {
                    field += '"';
                    i += 2;
                } else {
                    quoted = false;
                    ++i;
                }
            } else {
                field += c;
                ++i;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
            ++i;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
            ++i;
        } else {
            field += c;
            ++i;
        }
    }
    return fields;
}

double parse_double(const std::string& cell, std::size_t row, const std::string& col) {
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw std::runtime_error("row " + std::to_string(row) + ", column '" + col +
                                 "': cannot parse '" + cell + "' as a number");
    }
    return value;
}

} // namespace

TableSchema load_schema(const std::filesystem::path& path) {
    const json j = read_json_file(path);
    TableSchema schema;
    schema.has_header = j.value("has_header", false);
    if (!j.contains("columns") || !j["columns"].is_array() || j["columns"].empty()) {
        throw std::runtime_error(path.string() + ": schema needs a non-empty 'columns' array");
    }
    std::size_t idx = 0;
    for (const auto& col : j["columns"]) {
        ColumnSchema c;
        c.name = col.value("name", "col" + std::to_string(idx));
        c.type = parse_column_type(col.at("type").get<std::string>());
        schema.columns.push_back(std::move(c));
        ++idx;
    }
    if (!j.contains("class_column")) {
        throw std::runtime_error(path.string() + ": schema needs 'class_column'");
    }
    const auto& cc = j["class_column"];
    if (cc.is_number_integer()) {
        const long long v = cc.get<long long>();
        if (v < 0 || static_cast<std::size_t>(v) >= schema.columns.size()) {
            throw std::runtime_error(path.string() + ": class_column index out of range");
        }
        schema.class_column = static_cast<std::size_t>(v);
    } else if (cc.is_string()) {
        const std::string name = cc.get<std::string>();
        const auto it = std::find_if(schema.columns.begin(), schema.columns.end(),
                                     [&](const ColumnSchema& c) { return c.name == name; });
        if (it == schema.columns.end()) {
            throw std::runtime_error(path.string() + ": class_column '" + name +
                                     "' not found among column names");
        }
        schema.class_column = static_cast<std::size_t>(it - schema.columns.begin());
    } else {
        throw std::runtime_error(path.string() + ": class_column must be a name or an index");
    }
    if (schema.columns[schema.class_column].type != ColumnType::kNominal) {
        throw std::runtime_error(path.string() + ": class column must be nominal");
    }
    return schema;
}

void save_schema(const TableSchema& schema, const std::filesystem::path& path) {
    json j;
    j["has_header"] = schema.has_header;
    j["class_column"] = schema.columns[schema.class_column].name;
    j["columns"] = json::array();
    for (const auto& c : schema.columns) {
        j["columns"].push_back({{"name", c.name}, {"type", column_type_name(c.type)}});
    }
    write_json_file(j, path);
}

void RawTable::validate() const {
    if (columns.empty()) throw std::invalid_argument("raw table has no columns");
    const std::size_t rows = columns.front().size();
    if (rows == 0) throw std::invalid_argument("raw table has no rows");
    for (const auto& col : columns) {
        if (col.size() != rows) {
            throw std::invalid_argument("raw table columns have unequal lengths");
        }
    }
    if (column_names.size() != columns.size() || column_types.size() != columns.size()) {
        throw std::invalid_argument("raw table metadata does not match column count");
    }
    if (class_column >= columns.size()) {
        throw std::invalid_argument("class column index out of range");
    }
    if (column_types[class_column] != ColumnType::kNominal) {
        throw std::invalid_argument("class column must be nominal");
    }
}

RawTable load_csv(const std::filesystem::path& path, const TableSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());

    const std::size_t n_cols = schema.columns.size();
    RawTable table;
    table.columns.assign(n_cols, {});
    table.class_column = schema.class_column;
    for (const auto& c : schema.columns) {
        table.column_names.push_back(c.name);
        table.column_types.push_back(c.type);
    }

    std::string line;
    std::size_t line_no = 0;
    bool header_pending = schema.has_header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break; // trailing newline
        auto fields = parse_csv_line(line, line_no);
        if (fields.size() != n_cols) {
            throw std::runtime_error(path.string() + ": row " + std::to_string(line_no) +
                                     " has " + std::to_string(fields.size()) +
                                     " fields, schema declares " + std::to_string(n_cols));
        }
        if (header_pending) {
            header_pending = false;
            continue;
        }
        for (std::size_t c = 0; c < n_cols; ++c) {
            table.columns[c].push_back(std::move(fields[c]));
        }
    }
    if (in.bad()) throw std::runtime_error("I/O error reading " + path.string());
    if (table.n_rows() == 0) {
        throw std::runtime_error(path.string() + ": no data rows");
    }
    table.validate();
    return table;
}

namespace {

std::vector<std::string> sorted_categories(const std::vector<std::string>& column) {
    std::set<std::string> cats(column.begin(), column.end());
    return {cats.begin(), cats.end()};
}

} // namespace

Matrix apply_encoding(const RawTable& raw, const std::vector<FeatureEncoding>& meta) {
    raw.validate();
    const std::size_t n = raw.n_rows();
    Matrix features(n, meta.size());
    for (std::size_t f = 0; f < meta.size(); ++f) {
        const FeatureEncoding& enc = meta[f];
        if (enc.source_column >= raw.n_columns()) {
            throw std::invalid_argument("feature meta references a missing raw column");
        }
        const auto& col = raw.columns[enc.source_column];
        if (enc.type == ColumnType::kNominal) {
            for (std::size_t r = 0; r < n; ++r) {
                features(r, f) = (col[r] == enc.category) ? 1.0 : 0.0;
            }
        } else {
            const double range = enc.max - enc.min;
            for (std::size_t r = 0; r < n; ++r) {
                const double v = col[r].empty()
                                     ? enc.impute_mean
                                     : parse_double(col[r], r + 1, enc.name);
                features(r, f) = enc.constant ? 0.0 : (v - enc.min) / range;
            }
        }
    }
    return features;
}

Dataset encode(const RawTable& raw) {
    raw.validate();
    const std::size_t n = raw.n_rows();

    Dataset ds;
    ds.class_source_column = raw.class_column;

    for (std::size_t c = 0; c < raw.n_columns(); ++c) {
        if (c == raw.class_column) continue;
        const auto& col = raw.columns[c];
        const std::string& name = raw.column_names[c];
        if (raw.column_types[c] == ColumnType::kNominal) {
            for (const auto& cat : sorted_categories(col)) {
                FeatureEncoding enc;
                enc.source_column = c;
                enc.type = ColumnType::kNominal;
                enc.category = cat;
                enc.name = name + "=" + (cat.empty() ? "<missing>" : cat);
                ds.feature_meta.push_back(std::move(enc));
            }
        } else {
            double lo = 0.0, hi = 0.0, sum = 0.0;
            std::size_t seen = 0;
            for (std::size_t r = 0; r < n; ++r) {
                if (col[r].empty()) continue;
                const double v = parse_double(col[r], r + 1, name);
                if (seen == 0) {
                    lo = hi = v;
                } else {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                sum += v;
                ++seen;
            }
            if (seen == 0) {
                throw std::runtime_error("continuous column '" + name +
                                         "' has no non-missing values");
            }
            FeatureEncoding enc;
            enc.source_column = c;
            enc.type = ColumnType::kContinuous;
            enc.name = name;
            enc.min = lo;
            enc.max = hi;
            enc.impute_mean = sum / static_cast<double>(seen);
            enc.constant = (hi == lo);
            ds.feature_meta.push_back(std::move(enc));
        }
    }

    // Class column: one-hot targets over the sorted label set.
    const auto& class_col = raw.columns[raw.class_column];
    for (std::size_t r = 0; r < n; ++r) {
        if (class_col[r].empty()) {
            throw std::runtime_error("missing class label at row " + std::to_string(r + 1));
        }
    }
    ds.class_labels = sorted_categories(class_col);
    if (ds.class_labels.size() < 2) {
        throw std::runtime_error("class column '" + raw.column_names[raw.class_column] +
                                 "' has a single category");
    }

    ds.features = apply_encoding(raw, ds.feature_meta);
    ds.targets = Matrix(n, ds.class_labels.size());
    for (std::size_t r = 0; r < n; ++r) {
        const auto it = std::lower_bound(ds.class_labels.begin(), ds.class_labels.end(),
                                         class_col[r]);
        ds.targets(r, static_cast<std::size_t>(it - ds.class_labels.begin())) = 1.0;
    }
    return ds;
}

std::size_t Dataset::class_of(std::size_t row) const {
    std::size_t best = 0;
    for (std::size_t c = 1; c < targets.cols(); ++c) {
        if (targets(row, c) > targets(row, best)) best = c;
    }
    return best;
}

std::vector<std::string> Dataset::feature_names() const {
    std::vector<std::string> names;
    names.reserve(feature_meta.size());
    for (const auto& m : feature_meta) names.push_back(m.name);
    return names;
}

std::string Dataset::fingerprint() const {
    Fingerprint fp;
    fp.mix("cann.dataset.v1");
    fp.mix_u64(n_instances()).mix_u64(n_features()).mix_u64(n_outputs());
    for (const auto& m : feature_meta) fp.mix(m.name);
    for (const auto& label : class_labels) fp.mix(label);
    fp.mix_doubles(features.data());
    fp.mix_doubles(targets.data());
    return fp.hex();
}

Dataset select_features(const Dataset& ds, std::span<const std::size_t> keep) {
    if (keep.empty()) throw std::invalid_argument("feature selection kept zero features");
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i] >= ds.n_features()) {
            throw std::invalid_argument("feature index out of range in selection");
        }
        if (i > 0 && keep[i] <= keep[i - 1]) {
            throw std::invalid_argument("feature selection must be sorted and duplicate-free");
        }
    }
    Dataset out;
    out.targets = ds.targets;
    out.class_labels = ds.class_labels;
    out.class_source_column = ds.class_source_column;
    out.features = Matrix(ds.n_instances(), keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        out.feature_meta.push_back(ds.feature_meta[keep[i]]);
        for (std::size_t r = 0; r < ds.n_instances(); ++r) {
            out.features(r, i) = ds.features(r, keep[i]);
        }
    }
    return out;
}

Split split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("train_fraction must lie in (0, 1)");
    }
    const std::size_t n = ds.n_instances();
    if (n < 2) throw std::invalid_argument("need at least 2 instances to split");

    const auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train == n) {
        throw std::invalid_argument("train_fraction yields an empty train or test set");
    }

    Rng rng(seed);
    const auto perm = random_permutation(n, rng);
    Split sp;
    sp.seed = seed;
    sp.train_fraction = train_fraction;
    sp.train_indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    sp.test_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    return sp;
}

void save_dataset_json(const Dataset& ds, const std::filesystem::path& path) {
    json j;
    j["fingerprint"] = ds.fingerprint();
    j["n_instances"] = ds.n_instances();
    j["n_features"] = ds.n_features();
    j["n_outputs"] = ds.n_outputs();
    j["class_labels"] = ds.class_labels;
    j["class_source_column"] = ds.class_source_column;

    j["feature_meta"] = json::array();
    for (const auto& m : ds.feature_meta) {
        json jm;
        jm["source_column"] = m.source_column;
        jm["name"] = m.name;
        jm["type"] = column_type_name(m.type);
        if (m.type == ColumnType::kNominal) {
            jm["category"] = m.category;
        } else {
            jm["min"] = m.min;
            jm["max"] = m.max;
            jm["impute_mean"] = m.impute_mean;
            jm["constant"] = m.constant;
        }
        j["feature_meta"].push_back(std::move(jm));
    }

    j["features"] = json::array();
    for (std::size_t r = 0; r < ds.n_instances(); ++r) {
        const auto row = ds.features.row(r);
        j["features"].push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["targets"] = json::array();
    for (std::size_t r = 0; r < ds.n_instances(); ++r) {
        const auto row = ds.targets.row(r);
        j["targets"].push_back(std::vector<double>(row.begin(), row.end()));
    }
    write_json_file(j, path);
}

Dataset load_dataset(const std::filesystem::path& csv_path,
                     const std::filesystem::path& schema_path) {
    return encode(load_csv(csv_path, load_schema(schema_path)));
}

} // namespace cann
