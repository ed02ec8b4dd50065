#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "sleepeda/dataset.hpp"
#include "sleepeda/errors.hpp"

namespace sleepeda {

struct ScoreConfig {
    double penalty_discount = 1.0;
    // Multiplicative prior on edges; 1 contributes no term.
    double structure_prior = 1.0;
    // When true, a cell too small for its own covariance falls back to the
    // pooled covariance over all rows instead of throwing; the scorer flags
    // that the fallback fired.
    bool pooled_cell_fallback = false;
};

// BIC for mixed continuous/discrete variable sets. The score of a set is the
// maximized log-likelihood of a conditional-Gaussian model (one multivariate
// Gaussian per discrete cell, multinomial over cells) minus
// penalty_discount * (k/2) * ln n. Local scores are differences of set
// scores, so they are decomposable and cache well.
class CgScorer {
public:
    explicit CgScorer(const MixedDataset& data, ScoreConfig config = {})
        : data_(&data), config_(config), n_(0) {
        check_dataset(data);
        n_ = static_cast<int>(data.columns.front().size());
        levels_.resize(data.names.size());
        for (std::size_t j = 0; j < data.names.size(); ++j)
            if (data.kinds[j] == ColumnKind::Discrete)
                levels_[j] = discrete_levels(data.columns[j]);
    }

    int sample_size() const { return n_; }
    bool used_pooled_fallback() const { return used_pooled_fallback_; }

    // score(child | parents) = score(parents + child) - score(parents).
    double local_score(int child, std::vector<int> parents) const {
        std::sort(parents.begin(), parents.end());
        const auto key = std::make_pair(child, parents);
        if (auto it = local_cache_.find(key); it != local_cache_.end()) return it->second;
        std::vector<int> with_child = parents;
        with_child.push_back(child);
        std::sort(with_child.begin(), with_child.end());
        double value = set_score(with_child) - set_score(parents);
        if (config_.structure_prior != 1.0)
            value += static_cast<double>(parents.size()) * std::log(config_.structure_prior);
        local_cache_[key] = value;
        return value;
    }

    double local_score(const std::string& child, const std::vector<std::string>& parents) const {
        std::vector<int> p;
        for (const auto& name : parents) p.push_back(data_->index_of(name));
        return local_score(data_->index_of(child), std::move(p));
    }

    // Sum of local scores over the DAG's families.
    template <typename DagT>
    double dag_score(const DagT& dag) const {
        double total = 0.0;
        for (std::size_t c = 0; c < dag.nodes.size(); ++c) {
            std::vector<int> parents;
            for (int p : dag.parents[c]) parents.push_back(data_->index_of(dag.nodes[static_cast<std::size_t>(p)]));
            total += local_score(data_->index_of(dag.nodes[c]), std::move(parents));
        }
        return total;
    }

private:
    double set_score(const std::vector<int>& vars) const {
        if (auto it = set_cache_.find(vars); it != set_cache_.end()) return it->second;
        double value = joint_loglik(vars) -
                       config_.penalty_discount * 0.5 * param_count(vars) * std::log(n_);
        set_cache_[vars] = value;
        return value;
    }

    double param_count(const std::vector<int>& vars) const {
        double cells = 1.0;
        int c = 0;
        for (int v : vars) {
            if (data_->kinds[static_cast<std::size_t>(v)] == ColumnKind::Discrete)
                cells *= static_cast<double>(levels_[static_cast<std::size_t>(v)].size());
            else
                ++c;
        }
        const double per_cell = c + 0.5 * c * (c + 1);
        return (cells - 1.0) + cells * per_cell;
    }

    double joint_loglik(const std::vector<int>& vars) const {
        std::vector<int> disc;
        std::vector<int> cont;
        for (int v : vars) {
            if (data_->kinds[static_cast<std::size_t>(v)] == ColumnKind::Discrete)
                disc.push_back(v);
            else
                cont.push_back(v);
        }
        if (vars.empty()) return 0.0;

        // Group rows by their discrete configuration.
        std::map<std::vector<int>, std::vector<int>> cells;
        std::vector<int> key(disc.size());
        for (int row = 0; row < n_; ++row) {
            for (std::size_t d = 0; d < disc.size(); ++d)
                key[d] = static_cast<int>(data_->columns[static_cast<std::size_t>(disc[d])][static_cast<std::size_t>(row)]);
            cells[key].push_back(row);
        }

        const int c = static_cast<int>(cont.size());
        double ll = 0.0;
        for (const auto& [cfg, rows] : cells) {
            const double m = static_cast<double>(rows.size());
            if (!disc.empty()) ll += m * std::log(m / n_);
            if (c == 0) continue;
            if (static_cast<int>(rows.size()) < c + 1) {
                if (!config_.pooled_cell_fallback)
                    throw DegenerateCellError("cell with " + std::to_string(rows.size()) +
                                              " rows cannot support " + std::to_string(c) +
                                              " continuous dimensions");
                used_pooled_fallback_ = true;
                ll += pooled_cell_loglik(rows, cont);
                continue;
            }
            ll += gaussian_loglik(rows, cell_covariance(rows, cont));
        }
        return ll;
    }

    Eigen::MatrixXd cell_covariance(const std::vector<int>& rows, const std::vector<int>& cont) const {
        const int c = static_cast<int>(cont.size());
        const double m = static_cast<double>(rows.size());
        Eigen::MatrixXd x(rows.size(), c);
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (int j = 0; j < c; ++j)
                x(static_cast<Eigen::Index>(r), j) =
                    data_->columns[static_cast<std::size_t>(cont[static_cast<std::size_t>(j)])][static_cast<std::size_t>(rows[r])];
        const Eigen::RowVectorXd mean = x.colwise().mean();
        x.rowwise() -= mean;
        return (x.transpose() * x) / m;  // maximum-likelihood denominator
    }

    Eigen::MatrixXd pooled_covariance(const std::vector<int>& cont) const {
        std::vector<int> all_rows(static_cast<std::size_t>(n_));
        for (int r = 0; r < n_; ++r) all_rows[static_cast<std::size_t>(r)] = r;
        return cell_covariance(all_rows, cont);
    }

    double gaussian_loglik(const std::vector<int>& rows, const Eigen::MatrixXd& sigma) const {
        const double m = static_cast<double>(rows.size());
        const int c = static_cast<int>(sigma.rows());
        const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
        if (llt.info() != Eigen::Success)
            throw NumericalError("singular covariance in conditional-Gaussian cell");
        double logdet = 0.0;
        for (int j = 0; j < c; ++j) logdet += 2.0 * std::log(llt.matrixL()(j, j));
        // With the cell's own ML covariance, the trace term equals the dimension.
        return -0.5 * m * (c * std::log(2.0 * std::numbers::pi) + logdet + c);
    }

    // Likelihood of an undersized cell under the pooled (whole-sample)
    // covariance, with the cell's own mean. The quadratic form no longer
    // collapses to the dimension, so it is computed explicitly.
    double pooled_cell_loglik(const std::vector<int>& rows, const std::vector<int>& cont) const {
        const double m = static_cast<double>(rows.size());
        const int c = static_cast<int>(cont.size());
        const Eigen::MatrixXd sigma = pooled_covariance(cont);
        const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
        if (llt.info() != Eigen::Success)
            throw NumericalError("singular pooled covariance in conditional-Gaussian cell");
        double logdet = 0.0;
        for (int j = 0; j < c; ++j) logdet += 2.0 * std::log(llt.matrixL()(j, j));
        Eigen::MatrixXd x(rows.size(), c);
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (int j = 0; j < c; ++j)
                x(static_cast<Eigen::Index>(r), j) =
                    data_->columns[static_cast<std::size_t>(cont[static_cast<std::size_t>(j)])][static_cast<std::size_t>(rows[r])];
        const Eigen::RowVectorXd mean = x.colwise().mean();
        x.rowwise() -= mean;
        const double quad = (x * llt.solve(x.transpose())).trace();
        return -0.5 * (m * (c * std::log(2.0 * std::numbers::pi) + logdet) + quad);
    }

    const MixedDataset* data_;
    ScoreConfig config_;
    int n_;
    std::vector<std::vector<double>> levels_;
    mutable bool used_pooled_fallback_ = false;
    mutable std::map<std::pair<int, std::vector<int>>, double> local_cache_;
    mutable std::map<std::vector<int>, double> set_cache_;
};

}  // namespace sleepeda
