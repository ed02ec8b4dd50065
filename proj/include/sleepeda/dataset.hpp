#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sleepeda/csv.hpp"
#include "sleepeda/errors.hpp"

namespace sleepeda {

enum class ColumnKind { Continuous, Discrete };

// Rectangular dataset with named columns, each continuous (real) or discrete
// (small integer category set). Discrete values are stored as exact small
// integers in doubles.
struct MixedDataset {
    std::vector<std::string> names;
    std::vector<ColumnKind> kinds;
    std::vector<std::vector<double>> columns;  // column-major

    std::size_t n_rows() const { return columns.empty() ? 0 : columns[0].size(); }
    std::size_t n_cols() const { return columns.size(); }

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        throw NameError("unknown column '" + name + "'");
    }

    void add_column(std::string name, ColumnKind kind, std::vector<double> values) {
        if (!columns.empty() && values.size() != n_rows())
            throw ValidationError("column '" + name + "' length mismatch");
        for (const auto& existing : names)
            if (existing == name) throw DuplicateError("duplicate column '" + name + "'");
        names.push_back(std::move(name));
        kinds.push_back(kind);
        columns.push_back(std::move(values));
    }
};

// Distinct values of a discrete column, ascending.
inline std::vector<double> discrete_levels(const std::vector<double>& column) {
    std::set<double> levels(column.begin(), column.end());
    return {levels.begin(), levels.end()};
}

inline void check_dataset(const MixedDataset& d) {
    if (d.n_cols() == 0 || d.n_rows() == 0) throw ValidationError("dataset is empty");
    for (std::size_t j = 0; j < d.n_cols(); ++j) {
        const auto& col = d.columns[j];
        for (double v : col)
            if (!std::isfinite(v))
                throw ValidationError("column '" + d.names[j] + "' has a missing or non-finite value");
        if (d.kinds[j] == ColumnKind::Discrete) {
            for (double v : col)
                if (v != std::floor(v))
                    throw ValidationError("discrete column '" + d.names[j] + "' has a non-integer value");
            if (discrete_levels(col).size() < 2)
                throw ValidationError("discrete column '" + d.names[j] +
                                      "' has fewer than 2 observed categories");
        } else {
            double mean = 0.0;
            for (double v : col) mean += v;
            mean /= static_cast<double>(col.size());
            double ss = 0.0;
            for (double v : col) ss += (v - mean) * (v - mean);
            if (!(ss > 0.0))
                throw ValidationError("continuous column '" + d.names[j] + "' has zero variance");
        }
    }
}

// Columns centered to mean 0 and scaled to sd 1 (n-1 denominator).
struct StandardizedMatrix {
    std::vector<std::string> names;
    Eigen::MatrixXd values;  // n x p
    std::vector<double> original_means;
    std::vector<double> original_sds;
};

inline StandardizedMatrix standardize(const std::vector<std::string>& names,
                                      const Eigen::MatrixXd& raw) {
    if (static_cast<std::size_t>(raw.cols()) != names.size())
        throw ValidationError("column name count does not match matrix width");
    if (raw.rows() < 2) throw DomainError("standardization needs at least 2 rows");
    StandardizedMatrix out;
    out.names = names;
    out.values.resize(raw.rows(), raw.cols());
    const double n = static_cast<double>(raw.rows());
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        const double mean = raw.col(j).mean();
        const double ss = (raw.col(j).array() - mean).square().sum();
        const double sd = std::sqrt(ss / (n - 1.0));
        if (!(sd > 0.0))
            throw DomainError("column '" + names[static_cast<std::size_t>(j)] +
                              "' has zero variance, cannot standardize");
        out.values.col(j) = (raw.col(j).array() - mean) / sd;
        out.original_means.push_back(mean);
        out.original_sds.push_back(sd);
    }
    return out;
}

inline StandardizedMatrix standardize_columns(const MixedDataset& d,
                                              const std::vector<std::string>& which) {
    Eigen::MatrixXd raw(d.n_rows(), which.size());
    for (std::size_t j = 0; j < which.size(); ++j) {
        const auto& col = d.columns[d.index_of(which[j])];
        for (std::size_t i = 0; i < col.size(); ++i)
            raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    }
    return standardize(which, raw);
}

// Pearson correlation matrix of standardized data.
inline Eigen::MatrixXd correlation_matrix(const StandardizedMatrix& z) {
    const double n = static_cast<double>(z.values.rows());
    Eigen::MatrixXd r = (z.values.transpose() * z.values) / (n - 1.0);
    // Exact unit diagonal despite rounding.
    for (Eigen::Index i = 0; i < r.rows(); ++i) r(i, i) = 1.0;
    return 0.5 * (r + r.transpose());
}

inline std::string dataset_to_csv(const MixedDataset& d) {
    std::string out;
    for (std::size_t j = 0; j < d.n_cols(); ++j) {
        if (j) out += ',';
        out += d.names[j];
    }
    out += '\n';
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
        for (std::size_t j = 0; j < d.n_cols(); ++j) {
            if (j) out += ',';
            out += format_double(d.columns[j][i]);
        }
        out += '\n';
    }
    return out;
}

// Columns named in `discrete` are tagged DISCRETE, the rest CONTINUOUS.
inline MixedDataset dataset_from_csv(std::string_view text,
                                     const std::vector<std::string>& discrete = {}) {
    const auto lines = split_lines(text);
    if (lines.size() < 2) throw ParseError("dataset CSV needs a header and at least one row");
    const auto header = split_fields(lines[0]);
    MixedDataset d;
    const std::set<std::string> discrete_set(discrete.begin(), discrete.end());
    for (auto h : header) {
        const std::string name(trim(h));
        if (name.empty()) throw ParseError("dataset CSV has an empty column name");
        d.names.push_back(name);
        d.kinds.push_back(discrete_set.count(name) ? ColumnKind::Discrete
                                                   : ColumnKind::Continuous);
        d.columns.emplace_back();
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto fields = split_fields(lines[i]);
        if (fields.size() != d.names.size())
            throw ParseError("line " + std::to_string(i + 1) + ": expected " +
                             std::to_string(d.names.size()) + " fields");
        for (std::size_t j = 0; j < fields.size(); ++j) {
            auto v = try_parse_double(fields[j]);
            if (!v) throw ParseError("line " + std::to_string(i + 1) + ": non-numeric value");
            d.columns[j].push_back(*v);
        }
    }
    check_dataset(d);
    return d;
}

}  // namespace sleepeda
