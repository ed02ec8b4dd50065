#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sleepeda/dists.hpp"
#include "sleepeda/errors.hpp"
#include "sleepeda/rng.hpp"

namespace sleepeda {

namespace predict_detail {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline void check_columns(const std::vector<double>& y,
                          const std::vector<std::vector<double>>& x_columns) {
    if (y.empty()) throw ValidationError("response column is empty");
    for (const auto& col : x_columns)
        if (col.size() != y.size())
            throw ValidationError("feature column length does not match the response");
    for (double v : y)
        if (!std::isfinite(v)) throw ValidationError("response has a non-finite value");
    for (const auto& col : x_columns)
        for (double v : col)
            if (!std::isfinite(v)) throw ValidationError("feature has a non-finite value");
}

inline std::vector<std::string> resolve_names(std::vector<std::string> names,
                                              std::size_t n_features) {
    if (names.empty()) {
        for (std::size_t j = 0; j < n_features; ++j)
            names.push_back("x" + std::to_string(j + 1));
    } else if (names.size() != n_features) {
        throw ValidationError("feature name count does not match the feature count");
    }
    return names;
}

// Design matrix with a leading intercept column.
inline Eigen::MatrixXd design_matrix(const std::vector<std::vector<double>>& x_columns,
                                     std::size_t n) {
    Eigen::MatrixXd design(n, x_columns.size() + 1);
    design.col(0).setOnes();
    for (std::size_t j = 0; j < x_columns.size(); ++j)
        for (std::size_t i = 0; i < n; ++i)
            design(i, j + 1) = x_columns[j][i];
    return design;
}

inline void check_binary_labels(const std::vector<double>& y) {
    bool has_zero = false, has_one = false;
    for (double v : y) {
        if (v == 0.0)
            has_zero = true;
        else if (v == 1.0)
            has_one = true;
        else
            throw ValidationError("labels must be 0 or 1");
    }
    if (!has_zero || !has_one) throw DomainError("labels contain a single class");
}

}  // namespace predict_detail

struct RegressionFit {
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;
    double intercept = 0.0;
    double residual_variance = 0.0;  // RSS / (n - k - 1)
    double r_squared = 0.0;
    double r_squared_adjusted = 0.0;
    double f_statistic = 0.0;
    int f_df1 = 0;
    int f_df2 = 0;
    double p_value = 1.0;

    double predict(const std::vector<double>& row) const {
        if (static_cast<Eigen::Index>(row.size()) != coefficients.size())
            throw ValidationError("prediction row has the wrong number of features");
        double value = intercept;
        for (Eigen::Index j = 0; j < coefficients.size(); ++j) value += coefficients(j) * row[j];
        return value;
    }
};

// Least squares through a rank-revealing QR decomposition, with the
// intercept-only model as the F-test baseline.
inline RegressionFit ols_fit(const std::vector<double>& y,
                             const std::vector<std::vector<double>>& x_columns,
                             std::vector<std::string> names = {}) {
    predict_detail::check_columns(y, x_columns);
    const auto n = static_cast<Eigen::Index>(y.size());
    const auto k = static_cast<Eigen::Index>(x_columns.size());
    if (n <= k + 1) throw ValidationError("least squares needs more rows than coefficients");

    const Eigen::MatrixXd design = predict_detail::design_matrix(x_columns, y.size());
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < k + 1) throw SingularError("design matrix is rank deficient");
    const Eigen::VectorXd response = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    const Eigen::VectorXd beta = qr.solve(response);

    const double mean = response.mean();
    const double tss = (response.array() - mean).square().sum();
    if (tss == 0.0) throw DomainError("response is constant");
    const double rss = (response - design * beta).squaredNorm();

    RegressionFit fit;
    fit.names = predict_detail::resolve_names(std::move(names), x_columns.size());
    fit.intercept = beta(0);
    fit.coefficients = beta.tail(k);
    fit.f_df1 = static_cast<int>(k);
    fit.f_df2 = static_cast<int>(n - k - 1);
    fit.residual_variance = rss / fit.f_df2;
    fit.r_squared = 1.0 - rss / tss;
    fit.r_squared_adjusted = 1.0 - (1.0 - fit.r_squared) * (n - 1.0) / fit.f_df2;
    if (k == 0) {
        fit.f_statistic = predict_detail::kNaN;
        fit.p_value = predict_detail::kNaN;
    } else if (rss <= 1e-12 * tss) {
        // Exact interpolation: the F statistic diverges and the test is
        // vacuously significant.
        fit.f_statistic = std::numeric_limits<double>::infinity();
        fit.p_value = 0.0;
    } else {
        fit.f_statistic = ((tss - rss) / k) / (rss / fit.f_df2);
        fit.p_value = f_sf(fit.f_statistic, fit.f_df1, fit.f_df2);
    }
    return fit;
}

// Log-likelihood of a logistic model; beta holds the intercept first, then
// one coefficient per feature column.
inline double logistic_log_likelihood(const std::vector<double>& y,
                                      const std::vector<std::vector<double>>& x_columns,
                                      const Eigen::VectorXd& beta) {
    predict_detail::check_columns(y, x_columns);
    if (beta.size() != static_cast<Eigen::Index>(x_columns.size()) + 1)
        throw ValidationError("coefficient vector length does not match the design");
    const Eigen::MatrixXd design = predict_detail::design_matrix(x_columns, y.size());
    const Eigen::VectorXd eta = design * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        // y*eta - log(1 + exp(eta)), with the softplus evaluated stably.
        const double softplus = std::max(eta(i), 0.0) + std::log1p(std::exp(-std::abs(eta(i))));
        ll += y[i] * eta(i) - softplus;
    }
    return ll;
}

inline Eigen::VectorXd logistic_gradient(const std::vector<double>& y,
                                         const std::vector<std::vector<double>>& x_columns,
                                         const Eigen::VectorXd& beta) {
    predict_detail::check_columns(y, x_columns);
    if (beta.size() != static_cast<Eigen::Index>(x_columns.size()) + 1)
        throw ValidationError("coefficient vector length does not match the design");
    const Eigen::MatrixXd design = predict_detail::design_matrix(x_columns, y.size());
    const Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd residual(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i)
        residual(i) = y[i] - 1.0 / (1.0 + std::exp(-eta(i)));
    return design.transpose() * residual;
}

struct LogisticOptions {
    double ridge = 0.0;  // penalty on feature coefficients, never the intercept
    int max_iterations = 100;
    double tolerance = 1e-10;
};

struct LogisticFit {
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;  // log-odds per feature
    double intercept = 0.0;
    Eigen::VectorXd odds_ratios;
    Eigen::VectorXd wald_chi_square;
    Eigen::VectorXd wald_p;
    double model_chi_square = 0.0;
    int model_df = 0;
    double model_p = 1.0;
    double cox_snell_r2 = 0.0;
    double log_likelihood = 0.0;
    double null_log_likelihood = 0.0;
    bool converged = false;
    int iterations = 0;

    double predict_probability(const std::vector<double>& row) const {
        if (static_cast<Eigen::Index>(row.size()) != coefficients.size())
            throw ValidationError("prediction row has the wrong number of features");
        double eta = intercept;
        for (Eigen::Index j = 0; j < coefficients.size(); ++j) eta += coefficients(j) * row[j];
        return 1.0 / (1.0 + std::exp(-eta));
    }
};

// Maximum likelihood by iteratively reweighted least squares with step
// halving, so the (optionally ridge-penalized) log-likelihood never
// decreases. A coefficient escaping past +-30 log-odds means a separating
// direction: the likelihood has no finite maximizer there.
inline LogisticFit logistic_fit(const std::vector<double>& y,
                                const std::vector<std::vector<double>>& x_columns,
                                std::vector<std::string> names = {},
                                const LogisticOptions& options = {}) {
    predict_detail::check_columns(y, x_columns);
    predict_detail::check_binary_labels(y);
    const auto n = static_cast<Eigen::Index>(y.size());
    const auto k = static_cast<Eigen::Index>(x_columns.size());
    const Eigen::MatrixXd design = predict_detail::design_matrix(x_columns, y.size());
    if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(design).rank() < k + 1)
        throw SingularError("design matrix is rank deficient");
    const Eigen::VectorXd response = Eigen::Map<const Eigen::VectorXd>(y.data(), n);

    Eigen::VectorXd penalty_mask = Eigen::VectorXd::Ones(k + 1);
    penalty_mask(0) = 0.0;
    auto penalized_ll = [&](const Eigen::VectorXd& beta) {
        const double penalty =
            0.5 * options.ridge * (penalty_mask.array() * beta.array().square()).sum();
        return logistic_log_likelihood(y, x_columns, beta) - penalty;
    };

    LogisticFit fit;
    fit.names = predict_detail::resolve_names(std::move(names), x_columns.size());
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k + 1);
    double current = penalized_ll(beta);
    Eigen::MatrixXd information(k + 1, k + 1);
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        fit.iterations = iter + 1;
        const Eigen::VectorXd eta = design * beta;
        Eigen::VectorXd probability(n), weight(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            probability(i) = 1.0 / (1.0 + std::exp(-eta(i)));
            weight(i) = probability(i) * (1.0 - probability(i));
        }
        const Eigen::VectorXd gradient =
            design.transpose() * (response - probability) -
            options.ridge * (penalty_mask.array() * beta.array()).matrix();
        information = design.transpose() * weight.asDiagonal() * design +
                      options.ridge * Eigen::MatrixXd(penalty_mask.asDiagonal());
        const Eigen::VectorXd delta = information.ldlt().solve(gradient);

        // Near the optimum the true improvement shrinks below rounding noise;
        // accept flat steps at that level or the last Newton step never lands.
        const double flat = 1e-12 * (1.0 + std::abs(current));
        double step = 1.0;
        Eigen::VectorXd next = beta + delta;
        double next_ll = penalized_ll(next);
        for (int halving = 0; halving < 40 && !(next_ll >= current - flat); ++halving) {
            step *= 0.5;
            next = beta + step * delta;
            next_ll = penalized_ll(next);
        }
        if (!(next_ll >= current - flat)) break;  // no acceptable step left
        const double movement = (step * delta).lpNorm<Eigen::Infinity>();
        beta = next;
        current = next_ll;

        if (beta.lpNorm<Eigen::Infinity>() > 30.0) {
            Eigen::Index worst = 0;
            beta.cwiseAbs().maxCoeff(&worst);
            const std::string which =
                worst == 0 ? "intercept" : "'" + fit.names[worst - 1] + "'";
            const std::string direction = beta(worst) > 0.0 ? "positive" : "negative";
            throw SeparationError("perfect separation: " + which + " diverges in the " +
                                  direction + " direction");
        }
        if (movement < options.tolerance) {
            fit.converged = true;
            break;
        }
    }

    fit.intercept = beta(0);
    fit.coefficients = beta.tail(k);
    fit.odds_ratios = beta.tail(k).array().exp();
    fit.log_likelihood = logistic_log_likelihood(y, x_columns, beta);
    const double share = response.mean();
    fit.null_log_likelihood =
        n * (share * std::log(share) + (1.0 - share) * std::log(1.0 - share));
    fit.model_chi_square = std::max(0.0, 2.0 * (fit.log_likelihood - fit.null_log_likelihood));
    fit.model_df = static_cast<int>(k);
    fit.model_p = k > 0 ? chi_squared_sf(fit.model_chi_square, fit.model_df) : 1.0;
    fit.cox_snell_r2 = 1.0 - std::exp(-fit.model_chi_square / n);

    fit.wald_chi_square.resize(k);
    fit.wald_p.resize(k);
    const Eigen::MatrixXd covariance =
        information.ldlt().solve(Eigen::MatrixXd::Identity(k + 1, k + 1));
    for (Eigen::Index j = 0; j < k; ++j) {
        const double variance = covariance(j + 1, j + 1);
        if (variance > 0.0) {
            fit.wald_chi_square(j) = beta(j + 1) * beta(j + 1) / variance;
            fit.wald_p(j) = chi_squared_sf(fit.wald_chi_square(j), 1);
        } else {
            fit.wald_chi_square(j) = predict_detail::kNaN;
            fit.wald_p(j) = predict_detail::kNaN;
        }
    }
    return fit;
}

struct NaiveBayesFit {
    std::vector<std::string> names;
    double prior_negative = 0.0;
    double prior_positive = 0.0;
    std::vector<double> mean_negative, mean_positive;
    std::vector<double> variance_negative, variance_positive;  // >= the floor
    bool variance_floored = false;

    // Posterior of class 1 via the log-space Bayes rule; a common factor on
    // both class likelihoods cancels in the difference.
    double predict_probability(const std::vector<double>& row) const {
        if (row.size() != mean_negative.size())
            throw ValidationError("prediction row has the wrong number of features");
        auto log_joint = [&](double prior, const std::vector<double>& mean,
                             const std::vector<double>& variance) {
            double value = std::log(prior);
            for (std::size_t j = 0; j < row.size(); ++j) {
                const double d = row[j] - mean[j];
                value += -0.5 * (std::log(2.0 * std::numbers::pi * variance[j]) +
                                 d * d / variance[j]);
            }
            return value;
        };
        const double negative = log_joint(prior_negative, mean_negative, variance_negative);
        const double positive = log_joint(prior_positive, mean_positive, variance_positive);
        return 1.0 / (1.0 + std::exp(negative - positive));
    }
};

constexpr double kNaiveBayesVarianceFloor = 1e-9;

inline NaiveBayesFit naive_bayes_fit(const std::vector<double>& y,
                                     const std::vector<std::vector<double>>& x_columns,
                                     std::vector<std::string> names = {}) {
    predict_detail::check_columns(y, x_columns);
    predict_detail::check_binary_labels(y);
    const std::size_t n = y.size();
    const std::size_t k = x_columns.size();

    NaiveBayesFit fit;
    fit.names = predict_detail::resolve_names(std::move(names), k);
    const std::size_t n_positive = static_cast<std::size_t>(
        std::count(y.begin(), y.end(), 1.0));
    fit.prior_positive = static_cast<double>(n_positive) / n;
    fit.prior_negative = 1.0 - fit.prior_positive;

    auto moments = [&](double label, std::vector<double>& means,
                       std::vector<double>& variances) {
        const auto count = static_cast<double>(
            label == 1.0 ? n_positive : n - n_positive);
        for (std::size_t j = 0; j < k; ++j) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (y[i] == label) mean += x_columns[j][i];
            mean /= count;
            double variance = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (y[i] == label) variance += (x_columns[j][i] - mean) *
                                               (x_columns[j][i] - mean);
            variance /= count;
            if (variance < kNaiveBayesVarianceFloor) {
                variance = kNaiveBayesVarianceFloor;
                fit.variance_floored = true;
            }
            means.push_back(mean);
            variances.push_back(variance);
        }
    };
    moments(0.0, fit.mean_negative, fit.variance_negative);
    moments(1.0, fit.mean_positive, fit.variance_positive);
    return fit;
}

struct ClassificationMetrics {
    double auc = 0.0;
    double f1 = 0.0;         // support-weighted across both classes
    double precision = 0.0;
    double recall = 0.0;
    double f1_positive = 0.0, precision_positive = 0.0, recall_positive = 0.0;
    double f1_negative = 0.0, precision_negative = 0.0, recall_negative = 0.0;
};

// AUC as the tie-corrected rank statistic (Mann-Whitney U over the pair
// count); precision, recall, and F1 per class at the threshold, plus their
// support-weighted averages. A class with no predicted members scores 0
// precision by convention.
inline ClassificationMetrics classification_metrics(const std::vector<double>& scores,
                                                    const std::vector<double>& labels,
                                                    double threshold = 0.5) {
    if (scores.size() != labels.size())
        throw ValidationError("scores and labels differ in length");
    if (scores.empty()) throw ValidationError("no scores given");
    for (double s : scores)
        if (!std::isfinite(s)) throw ValidationError("score is not finite");
    bool has_zero = false, has_one = false;
    for (double v : labels) {
        if (v == 0.0)
            has_zero = true;
        else if (v == 1.0)
            has_one = true;
        else
            throw ValidationError("labels must be 0 or 1");
    }
    if (!has_zero || !has_one) throw DomainError("labels contain a single class");

    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double shared = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
        for (std::size_t t = i; t < j; ++t) rank[order[t]] = shared;
        i = j;
    }
    double positive_rank_sum = 0.0;
    double n_positive = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (labels[i] == 1.0) {
            positive_rank_sum += rank[i];
            n_positive += 1.0;
        }
    const double n_negative = static_cast<double>(n) - n_positive;

    ClassificationMetrics m;
    m.auc = (positive_rank_sum - n_positive * (n_positive + 1.0) / 2.0) /
            (n_positive * n_negative);

    double tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i] == 1.0)
            (predicted ? tp : fn) += 1;
        else
            (predicted ? fp : tn) += 1;
    }
    auto safe_ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
    m.precision_positive = safe_ratio(tp, tp + fp);
    m.recall_positive = safe_ratio(tp, tp + fn);
    m.f1_positive = safe_ratio(2.0 * m.precision_positive * m.recall_positive,
                               m.precision_positive + m.recall_positive);
    m.precision_negative = safe_ratio(tn, tn + fn);
    m.recall_negative = safe_ratio(tn, tn + fp);
    m.f1_negative = safe_ratio(2.0 * m.precision_negative * m.recall_negative,
                               m.precision_negative + m.recall_negative);
    m.precision = (n_positive * m.precision_positive + n_negative * m.precision_negative) / n;
    m.recall = (n_positive * m.recall_positive + n_negative * m.recall_negative) / n;
    m.f1 = (n_positive * m.f1_positive + n_negative * m.f1_negative) / n;
    return m;
}

enum class ModelKind { Ols, Logistic, NaiveBayes };

struct FoldStats {
    int fold = 0;
    int test_size = 0;
    double rmse = 0.0;
    double mae = 0.0;
    double auc = 0.0;  // NaN when the test fold lacks a class or for OLS
};

struct EvalReport {
    double auc = 0.0, f1 = 0.0, precision = 0.0, recall = 0.0;  // NaN for OLS
    double rmse = 0.0, mae = 0.0;
    std::vector<FoldStats> folds;
    std::uint64_t seed = 0;
    std::vector<double> pooled_predictions;  // out-of-fold, by original row
};

// Seeded shuffle into k near-equal folds; metrics are computed once on the
// pooled out-of-fold predictions, with a per-fold breakdown alongside.
inline EvalReport cross_validate(ModelKind kind, const std::vector<double>& y,
                                 const std::vector<std::vector<double>>& x_columns, int k,
                                 std::uint64_t seed) {
    predict_detail::check_columns(y, x_columns);
    const auto n = static_cast<int>(y.size());
    if (k < 2 || k > n) throw ValidationError("fold count must lie in [2, n]");
    if (kind != ModelKind::Ols) predict_detail::check_binary_labels(y);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    EvalReport report;
    report.seed = seed;
    report.pooled_predictions.assign(n, predict_detail::kNaN);

    int cursor = 0;
    for (int fold = 0; fold < k; ++fold) {
        const int size = n / k + (fold < n % k ? 1 : 0);
        std::vector<int> test(order.begin() + cursor, order.begin() + cursor + size);
        cursor += size;
        std::sort(test.begin(), test.end());

        std::vector<double> train_y;
        std::vector<std::vector<double>> train_x(x_columns.size());
        std::size_t probe = 0;
        for (int row = 0; row < n; ++row) {
            if (probe < test.size() && test[probe] == row) {
                ++probe;
                continue;
            }
            train_y.push_back(y[row]);
            for (std::size_t j = 0; j < x_columns.size(); ++j)
                train_x[j].push_back(x_columns[j][row]);
        }
        if (kind != ModelKind::Ols) {
            const bool has_zero = std::count(train_y.begin(), train_y.end(), 0.0) > 0;
            const bool has_one = std::count(train_y.begin(), train_y.end(), 1.0) > 0;
            if (!has_zero || !has_one)
                throw FoldError("training fold " + std::to_string(fold) + " lacks a class");
        }

        auto predictor = [&]() -> std::function<double(const std::vector<double>&)> {
            switch (kind) {
                case ModelKind::Ols: {
                    auto fit = ols_fit(train_y, train_x);
                    return [fit](const std::vector<double>& row) { return fit.predict(row); };
                }
                case ModelKind::Logistic: {
                    auto fit = logistic_fit(train_y, train_x);
                    return [fit](const std::vector<double>& row) {
                        return fit.predict_probability(row);
                    };
                }
                default: {
                    auto fit = naive_bayes_fit(train_y, train_x);
                    return [fit](const std::vector<double>& row) {
                        return fit.predict_probability(row);
                    };
                }
            }
        }();

        FoldStats stats;
        stats.fold = fold;
        stats.test_size = size;
        double square_sum = 0.0, abs_sum = 0.0;
        std::vector<double> fold_scores, fold_labels;
        for (int row : test) {
            std::vector<double> features;
            features.reserve(x_columns.size());
            for (const auto& col : x_columns) features.push_back(col[row]);
            const double prediction = predictor(features);
            report.pooled_predictions[row] = prediction;
            const double error = prediction - y[row];
            square_sum += error * error;
            abs_sum += std::abs(error);
            fold_scores.push_back(prediction);
            fold_labels.push_back(y[row]);
        }
        stats.rmse = std::sqrt(square_sum / size);
        stats.mae = abs_sum / size;
        stats.auc = predict_detail::kNaN;
        if (kind != ModelKind::Ols) {
            const bool both = std::count(fold_labels.begin(), fold_labels.end(), 1.0) > 0 &&
                              std::count(fold_labels.begin(), fold_labels.end(), 0.0) > 0;
            if (both) stats.auc = classification_metrics(fold_scores, fold_labels).auc;
        }
        report.folds.push_back(std::move(stats));
    }

    double square_sum = 0.0, abs_sum = 0.0;
    for (int row = 0; row < n; ++row) {
        const double error = report.pooled_predictions[row] - y[row];
        square_sum += error * error;
        abs_sum += std::abs(error);
    }
    report.rmse = std::sqrt(square_sum / n);
    report.mae = abs_sum / n;
    if (kind == ModelKind::Ols) {
        report.auc = report.f1 = report.precision = report.recall = predict_detail::kNaN;
    } else {
        const ClassificationMetrics m = classification_metrics(report.pooled_predictions, y);
        report.auc = m.auc;
        report.f1 = m.f1;
        report.precision = m.precision;
        report.recall = m.recall;
    }
    return report;
}

struct PartialCorrelation {
    double r = 0.0;
    double p_value = 1.0;
    int df = 0;
};

// Pearson correlation of the least-squares residuals of x and y on the
// controls, with the t-transform p-value at n - #controls - 2 degrees of
// freedom. With no controls this is the plain correlation.
inline PartialCorrelation partial_correlation(const std::vector<double>& x,
                                              const std::vector<double>& y,
                                              const std::vector<std::vector<double>>& controls) {
    predict_detail::check_columns(x, controls);
    if (y.size() != x.size()) throw ValidationError("columns differ in length");
    for (double v : y)
        if (!std::isfinite(v)) throw ValidationError("column has a non-finite value");
    const auto n = static_cast<Eigen::Index>(x.size());
    const auto c = static_cast<Eigen::Index>(controls.size());
    if (n <= c + 2) throw ValidationError("partial correlation needs n > #controls + 2");

    const Eigen::MatrixXd design = predict_detail::design_matrix(controls, x.size());
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    auto residualize = [&](const std::vector<double>& column) {
        const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(column.data(), n);
        const Eigen::VectorXd residual = v - design * qr.solve(v);
        const double centered = (v.array() - v.mean()).square().sum();
        if (residual.squaredNorm() <= 1e-12 * std::max(centered, 1e-300))
            throw DomainError("residual variance is zero after removing the controls");
        return residual;
    };
    const Eigen::VectorXd rx = residualize(x);
    const Eigen::VectorXd ry = residualize(y);

    PartialCorrelation out;
    out.df = static_cast<int>(n - c - 2);
    out.r = std::clamp(rx.dot(ry) / (rx.norm() * ry.norm()), -1.0, 1.0);
    if (std::abs(out.r) >= 1.0) {
        out.p_value = 0.0;
    } else {
        const double t = out.r * std::sqrt(out.df / (1.0 - out.r * out.r));
        out.p_value = t_two_sided_p(t, out.df);
    }
    return out;
}

}  // namespace sleepeda
