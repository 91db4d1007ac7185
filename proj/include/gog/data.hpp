#pragma once

// Tabular datasets: schema-driven CSV ingestion, standardization fitted on
// the training split, random splits, label-noise injection and the synthetic
// generator shared by the end-to-end benchmark and the correlation study.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gog/csv.hpp"
#include "gog/error.hpp"
#include "gog/kv.hpp"
#include "gog/metrics.hpp"
#include "gog/numeric.hpp"

namespace gog {

// ---------------------------------------------------------------------------
// Dataset

struct Dataset {
    Matrix features;  // n x t'
    std::vector<int> labels;
    std::size_t num_classes = 0;
    std::vector<std::vector<std::string>> sensitive;  // n x q, evaluation only
    std::vector<std::string> feature_names;
    std::vector<std::string> sensitive_names;
    std::vector<std::string> class_names;
    std::vector<double> s_cont;         // continuous sensitive value (synthetic data only)
    std::vector<std::size_t> flipped;   // rows whose label was replaced by inject_label_noise

    std::size_t size() const { return labels.size(); }
    std::size_t num_features() const { return features.cols(); }

    GroupIndex groups() const { return group_partition(sensitive); }

    Dataset subset(std::span<const std::size_t> rows) const {
        Dataset out;
        out.features = gather_rows(features, rows);
        out.num_classes = num_classes;
        out.feature_names = feature_names;
        out.sensitive_names = sensitive_names;
        out.class_names = class_names;
        std::vector<std::size_t> position(size(), std::numeric_limits<std::size_t>::max());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.labels.push_back(labels[rows[i]]);
            out.sensitive.push_back(sensitive[rows[i]]);
            if (!s_cont.empty()) out.s_cont.push_back(s_cont[rows[i]]);
            position[rows[i]] = i;
        }
        for (std::size_t f : flipped)
            if (position[f] != std::numeric_limits<std::size_t>::max()) out.flipped.push_back(position[f]);
        std::sort(out.flipped.begin(), out.flipped.end());
        return out;
    }
};

// ---------------------------------------------------------------------------
// Schema sidecar
//
//   label = two_year_recid
//   classes = 0,1                       (optional; default sorted distinct values)
//   column.sex = categorical sensitive
//   column.age = continuous sensitive bins=25,45
//   column.priors_count = continuous
//   column.id = ignore
//
// Every CSV column must be declared; sensitive columns never become features.

enum class ColumnType { Continuous, Categorical, Ignore };

struct ColumnSpec {
    std::string name;
    ColumnType type = ColumnType::Continuous;
    bool sensitive = false;
    std::vector<double> bins;  // edges for continuous sensitive columns
};

struct Schema {
    std::string label;
    std::vector<std::string> classes;
    std::vector<ColumnSpec> columns;

    const ColumnSpec* find(const std::string& name) const {
        for (const auto& c : columns)
            if (c.name == name) return &c;
        return nullptr;
    }

    static Schema parse(std::istream& in) {
        Schema s;
        for (const auto& e : kv::parse(in)) {
            if (e.key == "label") {
                s.label = e.value;
            } else if (e.key == "classes") {
                s.classes = kv::split_list(e.value);
            } else if (e.key.rfind("column.", 0) == 0) {
                ColumnSpec c;
                c.name = e.key.substr(7);
                if (c.name.empty()) throw ParseError("schema: empty column name", e.line);
                std::istringstream words(e.value);
                std::string w;
                bool typed = false;
                while (words >> w) {
                    if (w == "continuous" || w == "categorical" || w == "ignore") {
                        c.type = w == "continuous" ? ColumnType::Continuous
                                 : w == "categorical" ? ColumnType::Categorical
                                                      : ColumnType::Ignore;
                        typed = true;
                    } else if (w == "sensitive") {
                        c.sensitive = true;
                    } else if (w.rfind("bins=", 0) == 0) {
                        for (const auto& b : kv::split_list(w.substr(5))) {
                            try {
                                c.bins.push_back(std::stod(b));
                            } catch (const std::exception&) {
                                throw ParseError("schema: bad bin edge '" + b + "'", e.line);
                            }
                        }
                        if (!std::is_sorted(c.bins.begin(), c.bins.end()) ||
                            std::adjacent_find(c.bins.begin(), c.bins.end()) != c.bins.end())
                            throw ParseError("schema: bin edges must be strictly increasing", e.line);
                    } else {
                        throw ParseError("schema: unknown column attribute '" + w + "'", e.line);
                    }
                }
                if (!typed) throw ParseError("schema: column '" + c.name + "' has no type", e.line);
                if (c.type == ColumnType::Ignore && c.sensitive)
                    throw ParseError("schema: ignored column cannot be sensitive", e.line);
                if (!c.bins.empty() && !(c.sensitive && c.type == ColumnType::Continuous))
                    throw ParseError("schema: bins apply to continuous sensitive columns only", e.line);
                s.columns.push_back(std::move(c));
            } else {
                throw ParseError("schema: unknown key '" + e.key + "'", e.line);
            }
        }
        if (s.label.empty()) throw ParseError("schema: missing 'label'");
        if (s.find(s.label)) throw ParseError("schema: label column must not also be declared as column." + s.label);
        bool any_sensitive = false;
        for (const auto& c : s.columns) any_sensitive = any_sensitive || c.sensitive;
        if (!any_sensitive) throw ParseError("schema: at least one sensitive column is required");
        return s;
    }

    static Schema load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open schema '" + path + "'");
        return parse(in);
    }

    void write(std::ostream& os) const {
        os << "label = " << label << '\n';
        if (!classes.empty()) {
            os << "classes = ";
            for (std::size_t i = 0; i < classes.size(); ++i) os << (i ? "," : "") << classes[i];
            os << '\n';
        }
        for (const auto& c : columns) {
            os << "column." << c.name << " = "
               << (c.type == ColumnType::Continuous ? "continuous"
                   : c.type == ColumnType::Categorical ? "categorical"
                                                       : "ignore");
            if (c.sensitive) os << " sensitive";
            if (!c.bins.empty()) {
                os << " bins=";
                for (std::size_t i = 0; i < c.bins.size(); ++i) os << (i ? "," : "") << c.bins[i];
            }
            os << '\n';
        }
    }
};

namespace detail {

inline bool is_missing(const std::string& cell) {
    const std::string t = kv::trim(cell);
    return t.empty() || t == "NA" || t == "NaN" || t == "nan" || t == "?";
}

inline double parse_number(const std::string& cell, std::size_t row, std::size_t col) {
    const std::string t = kv::trim(cell);
    try {
        std::size_t used = 0;
        const double v = std::stod(t, &used);
        if (used != t.size() || !std::isfinite(v)) throw std::invalid_argument("bad");
        return v;
    } catch (const std::exception&) {
        throw CellParseError("cannot parse '" + cell + "' as a number", row, col);
    }
}

inline std::string format_edge(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

/// Category name of a continuous value under the given bin edges.
inline std::string bin_label(double v, const std::vector<double>& edges) {
    if (v < edges.front()) return "<" + format_edge(edges.front());
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (v < edges[i]) return "[" + format_edge(edges[i - 1]) + "," + format_edge(edges[i]) + ")";
    return ">=" + format_edge(edges.back());
}

inline bool all_integral(const std::set<std::string>& values) {
    for (const auto& v : values) {
        try {
            std::size_t used = 0;
            (void)std::stoll(v, &used);
            if (used != v.size()) return false;
        } catch (const std::exception&) {
            return false;
        }
    }
    return true;
}

}  // namespace detail

/// Column-wise standardization fitted on a subset of rows. Missing entries
/// (NaN) are imputed with the fitted mean; zero-variance columns map to 0.
class FeatureScaler {
public:
    static FeatureScaler fit(const Matrix& x, std::span<const std::size_t> rows) {
        FeatureScaler s;
        s.mean_.assign(x.cols(), 0.0);
        s.scale_.assign(x.cols(), 0.0);
        for (std::size_t j = 0; j < x.cols(); ++j) {
            double sum = 0.0, count = 0.0;
            for (std::size_t r : rows)
                if (!std::isnan(x(r, j))) {
                    sum += x(r, j);
                    count += 1.0;
                }
            const double m = count > 0.0 ? sum / count : 0.0;
            double ss = 0.0;
            for (std::size_t r : rows) {
                const double v = std::isnan(x(r, j)) ? m : x(r, j);
                ss += (v - m) * (v - m);
            }
            const double var = rows.empty() ? 0.0 : ss / static_cast<double>(rows.size());
            s.mean_[j] = m;
            s.scale_[j] = var > 1e-24 ? 1.0 / std::sqrt(var) : 0.0;
        }
        return s;
    }

    void apply(Matrix& x) const {
        if (x.cols() != mean_.size()) throw ShapeError("FeatureScaler: column count mismatch");
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) {
                const double v = std::isnan(x(i, j)) ? mean_[j] : x(i, j);
                x(i, j) = (v - mean_[j]) * scale_[j];
            }
    }

    const std::vector<double>& means() const { return mean_; }

private:
    std::vector<double> mean_;
    std::vector<double> scale_;
};

/// Parses and encodes a CSV against its schema without standardizing.
/// Categorical features are one-hot encoded over their sorted distinct values;
/// missing feature cells are left as NaN; rows with a missing label are dropped.
inline Dataset read_encoded_csv(std::istream& in, const Schema& schema) {
    const auto rows = csv::read(in);
    if (rows.empty()) throw EmptyInputError("CSV input is empty");
    const auto& header = rows.front();
    if (rows.size() < 2) throw EmptyInputError("CSV input has a header but no data rows", 1);

    std::map<std::string, std::size_t> col_of;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string name = kv::trim(header[c]);
        if (!col_of.emplace(name, c).second) throw ParseError("duplicate column '" + name + "' in header", 1, c + 1);
        if (name != schema.label && !schema.find(name))
            throw UnknownColumnError("column '" + name + "' is not declared in the schema", 1, c + 1);
    }
    if (!col_of.count(schema.label)) throw UnknownColumnError("label column '" + schema.label + "' missing from header", 1);
    for (const auto& spec : schema.columns)
        if (!col_of.count(spec.name))
            throw UnknownColumnError("schema column '" + spec.name + "' missing from header", 1);

    const std::size_t label_col = col_of.at(schema.label);
    std::vector<std::size_t> kept;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(rows[r].size()),
                             r + 1);
        if (!detail::is_missing(rows[r][label_col])) kept.push_back(r);
    }
    if (kept.empty()) throw EmptyInputError("no rows with a label");

    Dataset ds;
    // Classes.
    if (!schema.classes.empty()) {
        ds.class_names = schema.classes;
    } else {
        std::set<std::string> values;
        for (std::size_t r : kept) values.insert(kv::trim(rows[r][label_col]));
        ds.class_names.assign(values.begin(), values.end());
        if (detail::all_integral(values))
            std::sort(ds.class_names.begin(), ds.class_names.end(),
                      [](const std::string& a, const std::string& b) { return std::stoll(a) < std::stoll(b); });
    }
    ds.num_classes = ds.class_names.size();
    if (ds.num_classes < 2) throw InvalidArgument("label column needs at least two classes");
    for (std::size_t r : kept) {
        const std::string v = kv::trim(rows[r][label_col]);
        const auto it = std::find(ds.class_names.begin(), ds.class_names.end(), v);
        if (it == ds.class_names.end()) throw CellParseError("label '" + v + "' not in declared classes", r + 1, label_col + 1);
        ds.labels.push_back(static_cast<int>(it - ds.class_names.begin()));
    }

    // Feature layout.
    struct Block {
        std::size_t col;
        ColumnType type;
        std::vector<std::string> categories;
    };
    std::vector<Block> blocks;
    for (const auto& spec : schema.columns) {
        if (spec.sensitive || spec.type == ColumnType::Ignore) continue;
        Block b{col_of.at(spec.name), spec.type, {}};
        if (spec.type == ColumnType::Categorical) {
            std::set<std::string> cats;
            for (std::size_t r : kept)
                if (!detail::is_missing(rows[r][b.col])) cats.insert(kv::trim(rows[r][b.col]));
            b.categories.assign(cats.begin(), cats.end());
            for (const auto& c : b.categories) ds.feature_names.push_back(spec.name + "=" + c);
        } else {
            ds.feature_names.push_back(spec.name);
        }
        blocks.push_back(std::move(b));
    }
    if (ds.feature_names.empty()) throw InvalidArgument("schema leaves no feature columns");

    ds.features = Matrix(kept.size(), ds.feature_names.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const std::size_t r = kept[i];
        std::size_t j = 0;
        for (const auto& b : blocks) {
            const std::string& cell = rows[r][b.col];
            if (b.type == ColumnType::Continuous) {
                ds.features(i, j++) = detail::is_missing(cell) ? std::numeric_limits<double>::quiet_NaN()
                                                               : detail::parse_number(cell, r + 1, b.col + 1);
            } else {
                const bool missing = detail::is_missing(cell);
                const std::string v = kv::trim(cell);
                for (const auto& c : b.categories)
                    ds.features(i, j++) = missing ? std::numeric_limits<double>::quiet_NaN() : (c == v ? 1.0 : 0.0);
            }
        }
    }

    // Sensitive block.
    for (const auto& spec : schema.columns)
        if (spec.sensitive) ds.sensitive_names.push_back(spec.name);
    ds.sensitive.assign(kept.size(), {});
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const std::size_t r = kept[i];
        for (const auto& spec : schema.columns) {
            if (!spec.sensitive) continue;
            const std::size_t c = col_of.at(spec.name);
            const std::string& cell = rows[r][c];
            if (detail::is_missing(cell)) {
                ds.sensitive[i].push_back(kUnknownCategory);
            } else if (spec.type == ColumnType::Continuous && !spec.bins.empty()) {
                ds.sensitive[i].push_back(detail::bin_label(detail::parse_number(cell, r + 1, c + 1), spec.bins));
            } else {
                ds.sensitive[i].push_back(kv::trim(cell));
            }
        }
    }
    return ds;
}

inline Dataset read_encoded_csv(const std::string& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return read_encoded_csv(in, schema);
}

/// Loads a CSV and standardizes it treating every row as training data.
inline Dataset load_csv(const std::string& path, const Schema& schema) {
    Dataset ds = read_encoded_csv(path, schema);
    std::vector<std::size_t> all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    FeatureScaler::fit(ds.features, all).apply(ds.features);
    return ds;
}

// ---------------------------------------------------------------------------
// Splits and noise

struct SplitIndices {
    std::vector<std::size_t> train, validation, test;
};

/// Random 0.75 / 0.1 / 0.15 split: floor(0.75 n), floor(0.1 n), remainder.
inline SplitIndices split_indices(std::size_t n, std::uint64_t seed) {
    if (n < 20) throw InvalidArgument("split: need at least 20 samples, got " + std::to_string(n));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    const std::size_t n_train = n * 3 / 4;
    const std::size_t n_val = n / 10;
    SplitIndices s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                        idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
    return s;
}

struct DataSplits {
    Dataset train, validation, test;
};

/// Splits an encoded (unstandardized) dataset and standardizes every split
/// with statistics of the training split.
inline DataSplits make_splits(const Dataset& encoded, std::uint64_t seed) {
    const auto idx = split_indices(encoded.size(), seed);
    const auto scaler = FeatureScaler::fit(encoded.features, idx.train);
    DataSplits out{encoded.subset(idx.train), encoded.subset(idx.validation), encoded.subset(idx.test)};
    scaler.apply(out.train.features);
    scaler.apply(out.validation.features);
    scaler.apply(out.test.features);
    return out;
}

/// Replaces the labels of exactly floor(fraction * n) distinct, uniformly
/// chosen rows with a uniformly chosen different class.
inline Dataset inject_label_noise(const Dataset& ds, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidArgument("noise fraction must lie in [0, 1]");
    if (ds.num_classes < 2) throw InvalidArgument("label noise needs at least two classes");
    Dataset out = ds;
    const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(ds.size())));
    if (count == 0) return out;
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    for (std::size_t r : idx) {
        const auto shift = 1 + rng.index(ds.num_classes - 1);
        out.labels[r] = static_cast<int>((static_cast<std::size_t>(out.labels[r]) + shift) % ds.num_classes);
    }
    std::vector<std::size_t> merged;
    std::set_union(ds.flipped.begin(), ds.flipped.end(), idx.begin(), idx.end(), std::back_inserter(merged));
    out.flipped = std::move(merged);
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator
//
// x ~ N(0, I_t'); s = a x_0 + e_a with e_a ~ N(mu_a, var_a); e_b ~ N(mu_b, var_b)
// and U = (s - e_b) / b are kept for the correlation study. The clean label is
// sign(w . x) with w = e_1, except that rows with s above `rule_threshold` use
// w rotated by `rule_rotation` degrees towards e_2. Each label is then flipped
// with probability clamp(flip_base + flip_scale * sigmoid(s), 0, 0.5).

struct SyntheticSpec {
    double a = 1.0;
    double b = 1.0;
    double mu_a = 0.0;
    double mu_b = 0.0;
    double var_a = 1.0;
    double var_b = 1.0;
    std::size_t n = 2000;
    std::size_t num_features = 4;
    double group_threshold = 0.0;     // two groups by s > threshold (sign rule at 0)
    std::size_t quantile_groups = 0;  // > 1: equal-frequency groups over s instead
    double rule_rotation = 0.0;       // degrees
    double rule_threshold = 0.0;
    double flip_base = 0.1;
    double flip_scale = 0.3;

    void validate() const {
        if (!(var_a >= 0.0)) throw InvalidArgument("var_a must be nonnegative");
        if (!(var_b >= 0.0)) throw InvalidArgument("var_b must be nonnegative");
        if (b == 0.0) throw InvalidArgument("b must be nonzero");
        if (n == 0) throw InvalidArgument("n must be positive");
        if (num_features < 2) throw InvalidArgument("num_features must be at least 2");
        if (rule_rotation != 0.0 && num_features < 3) throw InvalidArgument("rule_rotation needs num_features >= 3");
        if (quantile_groups == 1) throw InvalidArgument("quantile_groups must be 0 or at least 2");
        if (!(flip_base >= 0.0) || !(flip_scale >= 0.0)) throw InvalidArgument("flip parameters must be nonnegative");
    }

    double flip_probability(double s) const { return std::clamp(flip_base + flip_scale * sigmoid(s), 0.0, 0.5); }
};

struct SyntheticData {
    Dataset data;               // features unstandardized (already standard normal)
    std::vector<double> eps_a;
    std::vector<double> eps_b;
    std::vector<double> u;      // (s - e_b) / b
};

inline SyntheticData gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    SyntheticData out;
    Dataset& ds = out.data;
    const std::size_t t = spec.num_features;
    ds.features = Matrix(spec.n, t);
    ds.num_classes = 2;
    ds.class_names = {"0", "1"};
    ds.sensitive_names = {"group"};
    for (std::size_t j = 0; j < t; ++j) ds.feature_names.push_back("x" + std::to_string(j));
    const double sd_a = std::sqrt(spec.var_a), sd_b = std::sqrt(spec.var_b);
    const double rot = spec.rule_rotation * std::numbers::pi / 180.0;

    for (std::size_t i = 0; i < spec.n; ++i) {
        for (std::size_t j = 0; j < t; ++j) ds.features(i, j) = rng.normal();
        const double ea = spec.mu_a + sd_a * rng.normal();
        const double eb = spec.mu_b + sd_b * rng.normal();
        const double s = spec.a * ds.features(i, 0) + ea;
        out.eps_a.push_back(ea);
        out.eps_b.push_back(eb);
        out.u.push_back((s - eb) / spec.b);
        ds.s_cont.push_back(s);

        double score = ds.features(i, 1);
        if (spec.rule_rotation != 0.0 && s > spec.rule_threshold)
            score = std::cos(rot) * ds.features(i, 1) + std::sin(rot) * ds.features(i, 2);
        int y = score > 0.0 ? 1 : 0;
        if (rng.bernoulli(spec.flip_probability(s))) y = 1 - y;
        ds.labels.push_back(y);
    }

    ds.sensitive.resize(spec.n);
    if (spec.quantile_groups > 1) {
        std::vector<double> sorted = ds.s_cont;
        std::sort(sorted.begin(), sorted.end());
        std::vector<double> cuts;
        for (std::size_t q = 1; q < spec.quantile_groups; ++q) cuts.push_back(sorted[q * spec.n / spec.quantile_groups]);
        for (std::size_t i = 0; i < spec.n; ++i) {
            const auto g = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), ds.s_cont[i]) - cuts.begin());
            ds.sensitive[i] = {"g" + std::to_string(g)};
        }
    } else {
        for (std::size_t i = 0; i < spec.n; ++i) ds.sensitive[i] = {ds.s_cont[i] > spec.group_threshold ? "g1" : "g0"};
    }
    return out;
}

/// Writes features, label and the sensitive group as CSV with a matching schema.
inline void write_dataset_csv(std::ostream& csv_out, std::ostream& schema_out, const Dataset& ds,
                              const std::string& label_name = "label") {
    csv::Row header = ds.feature_names;
    header.push_back(label_name);
    for (const auto& s : ds.sensitive_names) header.push_back(s);
    csv::write_row(csv_out, header);
    std::ostringstream cell;
    cell.precision(17);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        csv::Row row;
        for (double v : ds.features.row_span(i)) {
            cell.str("");
            cell << v;
            row.push_back(cell.str());
        }
        row.push_back(ds.class_names[static_cast<std::size_t>(ds.labels[i])]);
        for (const auto& s : ds.sensitive[i]) row.push_back(s);
        csv::write_row(csv_out, row);
    }
    Schema schema;
    schema.label = label_name;
    schema.classes = ds.class_names;
    for (const auto& f : ds.feature_names) schema.columns.push_back({f, ColumnType::Continuous, false, {}});
    for (const auto& s : ds.sensitive_names) schema.columns.push_back({s, ColumnType::Categorical, true, {}});
    schema.write(schema_out);
}

}  // namespace gog
