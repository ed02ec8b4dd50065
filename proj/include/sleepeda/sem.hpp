#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sleepeda/dataset.hpp"
#include "sleepeda/dists.hpp"
#include "sleepeda/errors.hpp"
#include "sleepeda/optimize.hpp"

namespace sleepeda {

// Path model over latent and observed variables. Each latent is measured by
// an ordered indicator list; the first indicator's loading is fixed to 1 to
// set the latent's scale, and a single-indicator latent additionally gets
// that indicator's residual variance fixed to 0. Structural edges run
// between any declared variables (latent names or data columns).
struct PathModelSpec {
    std::vector<std::pair<std::string, std::vector<std::string>>> latents;
    std::vector<std::pair<std::string, std::string>> edges;
    // Extra observed columns to include beyond indicators and edge
    // endpoints; with no latents and no edges this is the saturated model
    // over the listed columns.
    std::vector<std::string> observed;
};

struct SemOptions {
    // Rescale rows/columns of the sample covariance for binary columns to
    // the latent-response scale (unit-variance threshold variable) before
    // fitting, so paths into a binarized endpoint are not attenuated by the
    // 0/1 coding. Off treats binary columns as plain numeric.
    bool binary_latent_scale = true;
    double gradient_tolerance = 1e-6;
    int max_iterations = 1000;
};

struct SemParameter {
    std::string kind;  // "loading" | "path" | "variance" | "covariance"
    std::string from;
    std::string to;
    double estimate = 0.0;
    double standardized = 0.0;
    double std_error = std::numeric_limits<double>::quiet_NaN();
    double z = std::numeric_limits<double>::quiet_NaN();
    double p_value = std::numeric_limits<double>::quiet_NaN();
    bool fixed = false;
};

struct FitIndices {
    double rmsea = 0.0;
    double cfi = 1.0;
    double p_value = 1.0;
};

struct SemFit {
    std::vector<SemParameter> parameters;
    double chi_square = 0.0;
    int df = 0;
    double p_value = 1.0;
    double rmsea = 0.0;
    double cfi = 1.0;
    double chi_square_baseline = 0.0;
    int df_baseline = 0;
    double discrepancy = 0.0;  // ML fit function at the optimum
    int free_parameter_count = 0;
    bool converged = false;
    int iterations = 0;
    bool latent_scale_applied = false;
    std::vector<std::string> observed_names;
    Eigen::MatrixXd implied_covariance;  // over observed_names

    const SemParameter* find(const std::string& kind, const std::string& from,
                             const std::string& to) const {
        for (const auto& p : parameters)
            if (p.kind == kind && p.from == from && p.to == to) return &p;
        return nullptr;
    }
    const SemParameter& require(const std::string& kind, const std::string& from,
                                const std::string& to) const {
        const SemParameter* p = find(kind, from, to);
        if (!p) throw NameError("no " + kind + " parameter '" + from + "' -> '" + to + "'");
        return *p;
    }
    double path(const std::string& from, const std::string& to) const {
        return require("path", from, to).estimate;
    }
    double standardized_path(const std::string& from, const std::string& to) const {
        return require("path", from, to).standardized;
    }
    double loading(const std::string& latent, const std::string& indicator) const {
        return require("loading", latent, indicator).estimate;
    }
    double standardized_loading(const std::string& latent, const std::string& indicator) const {
        return require("loading", latent, indicator).standardized;
    }
};

// rmsea / cfi / chi-square p-value from fitted and baseline statistics. The
// baseline is the independence model (diagonal covariance). df = 0 means a
// saturated model, which must fit exactly; a positive chi-square there is a
// caller bug, not a data property.
inline FitIndices fit_indices(double chi_square, int df, int n, double chi_square_baseline,
                              int df_baseline) {
    if (df < 0) throw ValidationError("fit_indices: df must be nonnegative");
    if (n < 2) throw ValidationError("fit_indices: n must be at least 2");
    if (chi_square < 0.0) throw ValidationError("fit_indices: chi_square must be nonnegative");
    if (df == 0 && chi_square > 0.0)
        throw ContractError("saturated model (df = 0) reported a positive chi-square");

    FitIndices out;
    out.rmsea = df == 0 ? 0.0
                        : std::sqrt(std::max(chi_square - df, 0.0) /
                                    (static_cast<double>(df) * (n - 1)));
    const double excess = std::max(chi_square - df, 0.0);
    const double baseline_excess = chi_square_baseline - static_cast<double>(df_baseline);
    out.cfi = 1.0 - excess / std::max({baseline_excess, excess, 1e-12});
    out.p_value = df == 0 ? 1.0 : chi_squared_sf(chi_square, df);
    return out;
}

namespace sem_detail {

struct Slot {
    bool in_a = false;  // true: A(i, j); false: S0(i, j)
    int i = 0;
    int j = 0;
};

struct ReportPlan {
    std::string kind;
    std::string from;
    std::string to;
    int slot = -1;          // -1: fixed
    double fixed_value = 0.0;
    int var_i = 0;          // source / row variable index, for standardization
    int var_j = 0;          // target / column variable index
};

// Model skeleton resolved against a dataset: variable order is observed
// columns (data order) followed by latents (spec order), so the observed
// block is the leading p x p corner of every full-size matrix.
struct Model {
    std::vector<std::string> variables;
    int n_observed = 0;
    std::vector<int> observed_columns;      // dataset column per observed variable
    std::vector<Slot> slots;                // free parameters, optimizer order
    std::vector<ReportPlan> report;
    Eigen::MatrixXd a_fixed;                // fixed entries of A (first loadings)
    std::vector<int> proxy;                 // per variable: its own index, or the
                                            // first indicator for a latent
    std::vector<bool> endogenous;
    std::vector<bool> single_indicator_latent;
};

inline Model build_model(const PathModelSpec& spec, const MixedDataset& data) {
    for (std::size_t a = 0; a < spec.latents.size(); ++a) {
        const auto& [name, indicators] = spec.latents[a];
        if (indicators.empty()) throw ValidationError("latent '" + name + "' has no indicators");
        for (std::size_t b = a + 1; b < spec.latents.size(); ++b)
            if (spec.latents[b].first == name)
                throw ValidationError("duplicate latent '" + name + "'");
        for (const auto& col : data.names)
            if (col == name)
                throw ValidationError("latent '" + name + "' collides with a data column");
    }
    std::vector<std::string> seen_indicators;
    for (const auto& [name, indicators] : spec.latents)
        for (const auto& ind : indicators) {
            data.index_of(ind);  // NameError when absent
            if (std::find(seen_indicators.begin(), seen_indicators.end(), ind) !=
                seen_indicators.end())
                throw ValidationError("indicator '" + ind + "' appears under two latents");
            seen_indicators.push_back(ind);
        }

    auto is_latent = [&](const std::string& v) {
        for (const auto& [name, _] : spec.latents)
            if (name == v) return true;
        return false;
    };
    for (const auto& [from, to] : spec.edges) {
        if (!is_latent(from)) data.index_of(from);
        if (!is_latent(to)) data.index_of(to);
    }
    for (std::size_t a = 0; a < spec.edges.size(); ++a)
        for (std::size_t b = a + 1; b < spec.edges.size(); ++b)
            if (spec.edges[a] == spec.edges[b])
                throw ValidationError("duplicate edge '" + spec.edges[a].first + "' -> '" +
                                      spec.edges[a].second + "'");

    // Referenced observed columns, in data order.
    std::vector<bool> used(data.n_cols(), false);
    for (const auto& ind : seen_indicators) used[data.index_of(ind)] = true;
    for (const auto& [from, to] : spec.edges) {
        if (!is_latent(from)) used[data.index_of(from)] = true;
        if (!is_latent(to)) used[data.index_of(to)] = true;
    }
    for (const auto& extra : spec.observed) {
        if (is_latent(extra))
            throw ValidationError("'" + extra + "' is a latent, not an observed column");
        used[data.index_of(extra)] = true;
    }

    Model model;
    for (std::size_t c = 0; c < data.n_cols(); ++c)
        if (used[c]) {
            model.variables.push_back(data.names[c]);
            model.observed_columns.push_back(static_cast<int>(c));
        }
    model.n_observed = static_cast<int>(model.variables.size());
    if (model.n_observed == 0) throw ValidationError("model references no data columns");
    for (const auto& [name, _] : spec.latents) model.variables.push_back(name);

    const int m = static_cast<int>(model.variables.size());
    auto var_index = [&](const std::string& v) {
        for (int i = 0; i < m; ++i)
            if (model.variables[i] == v) return i;
        throw NameError("unknown model variable '" + v + "'");
    };

    // Directed entries of A: loadings then structural edges. A(i, j) is the
    // coefficient of variable j in the equation for variable i.
    model.a_fixed = Eigen::MatrixXd::Zero(m, m);
    model.endogenous.assign(m, false);
    model.single_indicator_latent.assign(m, false);
    model.proxy.resize(m);
    for (int i = 0; i < m; ++i) model.proxy[i] = i;

    std::vector<std::pair<int, int>> a_entries;  // (target, source), fixed included
    for (const auto& [name, indicators] : spec.latents) {
        const int latent = var_index(name);
        model.proxy[latent] = var_index(indicators.front());
        model.single_indicator_latent[latent] = indicators.size() == 1;
        for (std::size_t k = 0; k < indicators.size(); ++k) {
            const int ind = var_index(indicators[k]);
            a_entries.emplace_back(ind, latent);
            model.endogenous[ind] = true;
            ReportPlan plan;
            plan.kind = "loading";
            plan.from = name;
            plan.to = indicators[k];
            plan.var_i = latent;
            plan.var_j = ind;
            if (k == 0) {
                model.a_fixed(ind, latent) = 1.0;
                plan.fixed_value = 1.0;
            } else {
                plan.slot = static_cast<int>(model.slots.size());
                model.slots.push_back({true, ind, latent});
            }
            model.report.push_back(std::move(plan));
        }
    }
    for (const auto& [from, to] : spec.edges) {
        const int source = var_index(from);
        const int target = var_index(to);
        for (const auto& [i, j] : a_entries)
            if (i == target && j == source)
                throw ValidationError("edge '" + from + "' -> '" + to +
                                      "' duplicates a loading");
        a_entries.emplace_back(target, source);
        model.endogenous[target] = true;
        ReportPlan plan;
        plan.kind = "path";
        plan.from = from;
        plan.to = to;
        plan.var_i = source;
        plan.var_j = target;
        plan.slot = static_cast<int>(model.slots.size());
        model.slots.push_back({true, target, source});
        model.report.push_back(std::move(plan));
    }

    // The directed part must be acyclic; otherwise (I - A) has no triangular
    // order and the model is not a path model.
    {
        std::vector<int> indegree(m, 0);
        for (const auto& [i, j] : a_entries) {
            if (i == j) throw ValidationError("self edge on '" + model.variables[i] + "'");
            ++indegree[i];
        }
        std::vector<int> queue;
        for (int i = 0; i < m; ++i)
            if (indegree[i] == 0) queue.push_back(i);
        int removed = 0;
        while (!queue.empty()) {
            const int j = queue.back();
            queue.pop_back();
            ++removed;
            for (const auto& [ti, tj] : a_entries)
                if (tj == j && --indegree[ti] == 0) queue.push_back(ti);
        }
        if (removed != m) throw ValidationError("structural graph has a cycle");
    }

    // Diagonal of S0: a variance for every variable (residual variance when
    // endogenous), free except the fixed-0 residual of a single-indicator
    // latent's indicator. Off-diagonal: free covariances between exogenous
    // variables.
    std::vector<bool> fixed_zero_residual(m, false);
    for (const auto& [name, indicators] : spec.latents)
        if (indicators.size() == 1) fixed_zero_residual[var_index(indicators.front())] = true;
    for (int v = 0; v < m; ++v) {
        ReportPlan plan;
        plan.kind = "variance";
        plan.from = model.variables[v];
        plan.to = model.variables[v];
        plan.var_i = v;
        plan.var_j = v;
        if (fixed_zero_residual[v]) {
            plan.fixed_value = 0.0;
        } else {
            plan.slot = static_cast<int>(model.slots.size());
            model.slots.push_back({false, v, v});
        }
        model.report.push_back(std::move(plan));
    }
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) {
            if (model.endogenous[i] || model.endogenous[j]) continue;
            ReportPlan plan;
            plan.kind = "covariance";
            plan.from = model.variables[i];
            plan.to = model.variables[j];
            plan.var_i = i;
            plan.var_j = j;
            plan.slot = static_cast<int>(model.slots.size());
            model.slots.push_back({false, i, j});
            model.report.push_back(std::move(plan));
        }
    return model;
}

}  // namespace sem_detail

// ML fit of a path model to a dataset's covariance matrix. Minimizes
// F = ln|Sigma| + tr(S Sigma^-1) - ln|S| - p over the free parameters of the
// directed-effect matrix A and the residual matrix S0, where
// Sigma = [(I - A)^-1 S0 (I - A)^-T] restricted to observed rows. The
// chi-square statistic is (n - 1) F at the optimum; standard errors come from
// the inverse Hessian of F scaled by 2 / (n - 1).
inline SemFit fit_path_model(const PathModelSpec& spec, const MixedDataset& data,
                             const SemOptions& options = {}) {
    check_dataset(data);
    sem_detail::Model model = sem_detail::build_model(spec, data);
    const int m = static_cast<int>(model.variables.size());
    const int p = model.n_observed;
    const int n = static_cast<int>(data.n_rows());
    const int n_free = static_cast<int>(model.slots.size());
    const int moments = p * (p + 1) / 2;
    if (n_free > moments)
        throw ValidationError("model has more free parameters than observed moments");
    if (n <= n_free)
        throw ValidationError("model needs more rows than free parameters");

    // Sample covariance (unbiased) over the observed variables, optionally
    // rescaled to the latent-response scale for binary columns: a column with
    // values {a, b} thresholding a unit-variance normal at t has
    // cov(x, indicator) = (b - a) * pdf(t) * cov(x, latent), so dividing its
    // row and column by that factor and pinning its variance to 1 restores
    // the latent scale.
    Eigen::MatrixXd sample(p, p);
    {
        Eigen::MatrixXd centered(n, p);
        for (int v = 0; v < p; ++v) {
            const auto& col = data.columns[model.observed_columns[v]];
            const double mean =
                std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
            for (int r = 0; r < n; ++r) centered(r, v) = col[r] - mean;
        }
        if (n < 2) throw ValidationError("covariance needs at least 2 rows");
        sample = centered.transpose() * centered / static_cast<double>(n - 1);
    }
    bool latent_scale_applied = false;
    if (options.binary_latent_scale) {
        for (int v = 0; v < p; ++v) {
            const int c = model.observed_columns[v];
            if (data.kinds[c] != ColumnKind::Discrete) continue;
            const std::vector<double> levels = discrete_levels(data.columns[c]);
            if (levels.size() != 2) continue;
            const auto& col = data.columns[c];
            const double share_high =
                static_cast<double>(std::count(col.begin(), col.end(), levels[1])) / n;
            const double threshold = normal_quantile(1.0 - share_high);
            const double scale = (levels[1] - levels[0]) * normal_pdf(threshold);
            sample.row(v) /= scale;
            sample.col(v) /= scale;
            sample(v, v) = 1.0;
            latent_scale_applied = true;
        }
    }

    // Eigenvalue-based definiteness check: exactly collinear columns leave
    // the smallest eigenvalue at rounding scale, where a Cholesky pivot's
    // sign is luck.
    double log_det_sample = 0.0;
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sample);
        const double floor = 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
        if (es.eigenvalues().minCoeff() <= floor)
            throw NumericalError("sample covariance is not positive definite");
        for (int v = 0; v < p; ++v) log_det_sample += std::log(es.eigenvalues()(v));
    }

    // Independence baseline: diagonal covariance, so the fit function
    // reduces to sum(ln S_ii) - ln|S|.
    double baseline_discrepancy = -log_det_sample;
    for (int v = 0; v < p; ++v) baseline_discrepancy += std::log(sample(v, v));
    const double chi_square_baseline = std::max(0.0, (n - 1) * baseline_discrepancy);
    const int df_baseline = p * (p - 1) / 2;

    // Start values from single-proxy moments: each latent borrows its first
    // indicator's column. Exogenous covariances start at the proxy
    // covariance scaled congruently with the halved latent variances, which
    // keeps the starting S0 positive definite.
    Eigen::VectorXd start(n_free);
    {
        std::vector<double> diag_scale(m, 1.0);
        for (int v = p; v < m; ++v)
            if (!model.single_indicator_latent[v]) diag_scale[v] = 0.5;
        // Proxies are observed columns, so they always index into the sample
        // covariance's leading block.
        auto proxy_cov = [&](int a, int b) { return sample(model.proxy[a], model.proxy[b]); };
        for (const auto& plan : model.report) {
            if (plan.slot < 0) continue;
            const sem_detail::Slot& slot = model.slots[plan.slot];
            double value = 0.0;
            if (plan.kind == "loading" || plan.kind == "path") {
                const double denom = proxy_cov(slot.j, slot.j);
                value = denom > 0.0 ? proxy_cov(slot.i, slot.j) / denom : 0.0;
            } else if (plan.kind == "variance") {
                const int v = slot.i;
                const double own = proxy_cov(v, v);
                value = model.endogenous[v] ? own * 0.5 : own * diag_scale[v];
            } else {
                value = proxy_cov(slot.i, slot.j) * std::sqrt(diag_scale[slot.i]) *
                        std::sqrt(diag_scale[slot.j]);
            }
            start(plan.slot) = value;
        }
    }

    auto unpack = [&](const Eigen::VectorXd& theta, Eigen::MatrixXd& a, Eigen::MatrixXd& s0) {
        a = model.a_fixed;
        s0.setZero(m, m);
        for (int k = 0; k < n_free; ++k) {
            const sem_detail::Slot& slot = model.slots[k];
            if (slot.in_a) {
                a(slot.i, slot.j) = theta(k);
            } else {
                s0(slot.i, slot.j) = theta(k);
                s0(slot.j, slot.i) = theta(k);
            }
        }
    };

    // Fit function and analytic gradient. With B = (I - A)^-1, T = B S0 B^T,
    // Sigma the observed corner of T, W = Sigma^-1 (Sigma - S) Sigma^-1, and
    // K = W embedded at the observed rows: dF/dA_ij = 2 (T K B)_ji,
    // dF/dS0_ii = (B^T K B)_ii, dF/dS0_ij = 2 (B^T K B)_ij off the diagonal.
    constexpr double kBarrier = std::numeric_limits<double>::infinity();
    auto objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
        Eigen::MatrixXd a, s0;
        unpack(theta, a, s0);
        Eigen::MatrixXd b =
            (Eigen::MatrixXd::Identity(m, m) - a).partialPivLu().solve(
                Eigen::MatrixXd::Identity(m, m));
        Eigen::MatrixXd t = b * s0 * b.transpose();
        Eigen::MatrixXd sigma = t.topLeftCorner(p, p);
        Eigen::LLT<Eigen::MatrixXd> llt(sigma);
        if (llt.info() != Eigen::Success) {
            if (grad) grad->setZero(n_free);
            return kBarrier;
        }
        double log_det = 0.0;
        for (int v = 0; v < p; ++v) log_det += 2.0 * std::log(llt.matrixL()(v, v));
        const Eigen::MatrixXd sigma_inv_s = llt.solve(sample);
        const double value = log_det + sigma_inv_s.trace() - log_det_sample - p;
        if (!std::isfinite(value)) {
            if (grad) grad->setZero(n_free);
            return kBarrier;
        }
        if (grad) {
            const Eigen::MatrixXd sigma_inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
            const Eigen::MatrixXd w = sigma_inv - sigma_inv_s * sigma_inv;
            Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);
            k.topLeftCorner(p, p) = w;
            const Eigen::MatrixXd tkb = t * k * b;
            const Eigen::MatrixXd btkb = b.transpose() * k * b;
            grad->resize(n_free);
            for (int idx = 0; idx < n_free; ++idx) {
                const sem_detail::Slot& slot = model.slots[idx];
                if (slot.in_a)
                    (*grad)(idx) = 2.0 * tkb(slot.j, slot.i);
                else if (slot.i == slot.j)
                    (*grad)(idx) = btkb(slot.i, slot.i);
                else
                    (*grad)(idx) = 2.0 * btkb(slot.i, slot.j);
            }
        }
        return value;
    };

    OptimizeOptions opt_options;
    opt_options.gradient_tolerance = options.gradient_tolerance;
    opt_options.max_iterations = options.max_iterations;
    OptimizeResult opt = bfgs_minimize(objective, start, opt_options);

    SemFit fit;
    fit.converged = opt.converged;
    fit.iterations = opt.iterations;
    fit.free_parameter_count = n_free;
    fit.latent_scale_applied = latent_scale_applied;
    fit.df = moments - n_free;
    fit.discrepancy = opt.value;
    // A saturated parameter count reproduces S exactly at the optimum; any
    // residual discrepancy there is optimizer noise, not misfit.
    fit.chi_square = fit.df == 0 ? 0.0 : std::max(0.0, (n - 1) * opt.value);
    fit.chi_square_baseline = chi_square_baseline;
    fit.df_baseline = df_baseline;
    const FitIndices indices =
        fit_indices(fit.chi_square, fit.df, n, chi_square_baseline, df_baseline);
    fit.rmsea = indices.rmsea;
    fit.cfi = indices.cfi;
    fit.p_value = indices.p_value;

    Eigen::MatrixXd a_hat, s0_hat;
    unpack(opt.x, a_hat, s0_hat);
    const Eigen::MatrixXd b_hat =
        (Eigen::MatrixXd::Identity(m, m) - a_hat).partialPivLu().solve(
            Eigen::MatrixXd::Identity(m, m));
    const Eigen::MatrixXd t_hat = b_hat * s0_hat * b_hat.transpose();
    fit.observed_names.assign(model.variables.begin(), model.variables.begin() + p);
    fit.implied_covariance = t_hat.topLeftCorner(p, p);

    // Standard errors: numerical Hessian of F (central differences of the
    // analytic gradient), covariance 2 / (n - 1) times its inverse. A
    // non-positive-definite Hessian means the optimum is degenerate; no
    // standard errors are fabricated in that case.
    Eigen::VectorXd std_errors =
        Eigen::VectorXd::Constant(n_free, std::numeric_limits<double>::quiet_NaN());
    if (n_free > 0) {
        Eigen::MatrixXd hessian(n_free, n_free);
        Eigen::VectorXd plus(n_free), minus(n_free);
        for (int k = 0; k < n_free; ++k) {
            const double h = 1e-5 * std::max(1.0, std::abs(opt.x(k)));
            Eigen::VectorXd shifted = opt.x;
            shifted(k) = opt.x(k) + h;
            objective(shifted, &plus);
            shifted(k) = opt.x(k) - h;
            objective(shifted, &minus);
            hessian.col(k) = (plus - minus) / (2.0 * h);
        }
        hessian = ((hessian + hessian.transpose()) / 2.0).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian);
        const double floor = 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
        if (es.eigenvalues().minCoeff() > floor) {
            const Eigen::MatrixXd cov = es.eigenvectors() *
                                        es.eigenvalues().cwiseInverse().asDiagonal() *
                                        es.eigenvectors().transpose() * (2.0 / (n - 1));
            for (int k = 0; k < n_free; ++k)
                std_errors(k) = cov(k, k) > 0.0
                                    ? std::sqrt(cov(k, k))
                                    : std::numeric_limits<double>::quiet_NaN();
        }
    }

    auto implied_sd = [&](int v) {
        const double var = t_hat(v, v);
        return var > 0.0 ? std::sqrt(var) : std::numeric_limits<double>::quiet_NaN();
    };
    for (const auto& plan : model.report) {
        SemParameter out;
        out.kind = plan.kind;
        out.from = plan.from;
        out.to = plan.to;
        out.fixed = plan.slot < 0;
        out.estimate = out.fixed ? plan.fixed_value : opt.x(plan.slot);
        if (plan.kind == "variance") {
            const double total = t_hat(plan.var_i, plan.var_i);
            out.standardized = total > 0.0 ? out.estimate / total
                                           : std::numeric_limits<double>::quiet_NaN();
        } else if (plan.kind == "covariance") {
            out.standardized = out.estimate / (implied_sd(plan.var_i) * implied_sd(plan.var_j));
        } else {
            out.standardized = out.estimate * implied_sd(plan.var_i) / implied_sd(plan.var_j);
        }
        if (!out.fixed) {
            out.std_error = std_errors(plan.slot);
            if (std::isfinite(out.std_error) && out.std_error > 0.0) {
                out.z = out.estimate / out.std_error;
                out.p_value = 2.0 * normal_cdf(-std::abs(out.z));
            }
        }
        fit.parameters.push_back(std::move(out));
    }
    return fit;
}

// Fixed-width parameter table: estimate, standard error, z, p, and the
// standardized estimate per row, in model order.
inline std::string sem_table(const SemFit& fit) {
    std::string out =
        "kind        parameter                              estimate        se         z"
        "         p       std\n";
    char buffer[256];
    auto cell = [&](double v) {
        if (!std::isfinite(v)) return std::string("         -");
        std::snprintf(buffer, sizeof(buffer), "%10.4f", v);
        return std::string(buffer);
    };
    for (const auto& p : fit.parameters) {
        const std::string name = p.from + " -> " + p.to;
        std::snprintf(buffer, sizeof(buffer), "%-11s %-36s", p.kind.c_str(), name.c_str());
        out += buffer;
        out += cell(p.estimate);
        if (p.fixed) {
            out += "     fixed         -         -";
        } else {
            out += cell(p.std_error) + cell(p.z) + cell(p.p_value);
        }
        out += cell(p.standardized);
        out += '\n';
    }
    std::snprintf(buffer, sizeof(buffer),
                  "chi-square %.4f on %d df (p = %.4f), rmsea %.4f, cfi %.4f\n",
                  fit.chi_square, fit.df, fit.p_value, fit.rmsea, fit.cfi);
    out += buffer;
    return out;
}

}  // namespace sleepeda
