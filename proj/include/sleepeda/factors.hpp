#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sleepeda/dataset.hpp"
#include "sleepeda/errors.hpp"

namespace sleepeda {

struct FactorSolution {
    int k = 0;
    std::vector<std::string> feature_names;
    Eigen::MatrixXd loadings;             // p x k promax pattern
    Eigen::MatrixXd unrotated_loadings;   // p x k ML solution
    Eigen::VectorXd uniquenesses;         // p, clamped to [0.005, 1]
    Eigen::VectorXd eigenvalues;          // p, descending, of the correlation matrix
    Eigen::MatrixXd factor_correlations;  // k x k
    Eigen::VectorXd variance_explained;   // k proportions, eigenvalue_j / p
    std::vector<bool> heywood;            // per variable: uniqueness hit the floor
    bool converged = true;
    int iterations = 0;
};

namespace detail {

inline Eigen::VectorXd descending_eigenvalues(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& es) {
    return es.eigenvalues().reverse();
}

// Flips each column so its largest-magnitude entry is positive. `also`
// receives the same flips on its columns when provided (rotation bookkeeping).
inline void fix_column_signs(Eigen::MatrixXd& m, Eigen::MatrixXd* also = nullptr) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        Eigen::Index at = 0;
        m.col(j).cwiseAbs().maxCoeff(&at);
        if (m(at, j) < 0.0) {
            m.col(j) = -m.col(j);
            if (also) also->col(j) = -also->col(j);
        }
    }
}

}  // namespace detail

// Orthogonal varimax rotation (Kaiser row normalization, pairwise planar
// rotations). Returns rotated loadings; `rotation` receives T with
// rotated = input * T.
inline Eigen::MatrixXd varimax_rotate(const Eigen::MatrixXd& input,
                                      Eigen::MatrixXd* rotation = nullptr, bool normalize = true,
                                      double eps = 1e-10, int max_sweeps = 1000) {
    const Eigen::Index p = input.rows();
    const Eigen::Index k = input.cols();
    Eigen::MatrixXd t = Eigen::MatrixXd::Identity(k, k);
    if (k < 2) {
        if (rotation) *rotation = t;
        return input;
    }

    Eigen::VectorXd row_scale = Eigen::VectorXd::Ones(p);
    Eigen::MatrixXd x = input;
    if (normalize) {
        row_scale = input.rowwise().norm();
        for (Eigen::Index i = 0; i < p; ++i)
            if (row_scale(i) > 0.0) x.row(i) /= row_scale(i);
    }

    const double np = static_cast<double>(p);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double total = 0.0;
        for (Eigen::Index a = 0; a + 1 < k; ++a) {
            for (Eigen::Index b = a + 1; b < k; ++b) {
                const Eigen::VectorXd u =
                    x.col(a).array().square() - x.col(b).array().square();
                const Eigen::VectorXd v = 2.0 * x.col(a).array() * x.col(b).array();
                const double su = u.sum();
                const double sv = v.sum();
                const double num = 2.0 * (u.dot(v) - su * sv / np);
                const double den =
                    u.squaredNorm() - v.squaredNorm() - (su * su - sv * sv) / np;
                const double angle = 0.25 * std::atan2(num, den);
                if (std::abs(angle) < 1e-14) continue;
                total += std::abs(angle);
                const double c = std::cos(angle);
                const double s = std::sin(angle);
                const Eigen::VectorXd xa = x.col(a);
                x.col(a) = c * xa + s * x.col(b);
                x.col(b) = -s * xa + c * x.col(b);
                const Eigen::VectorXd ta = t.col(a);
                t.col(a) = c * ta + s * t.col(b);
                t.col(b) = -s * ta + c * t.col(b);
            }
        }
        if (total < eps) break;
    }

    if (normalize)
        for (Eigen::Index i = 0; i < p; ++i) x.row(i) *= row_scale(i);
    if (rotation) *rotation = t;
    return x;
}

struct PromaxResult {
    Eigen::MatrixXd pattern;              // p x k
    Eigen::MatrixXd factor_correlations;  // k x k
    Eigen::MatrixXd rotation;             // k x k, pattern = input * rotation
};

// Oblique promax rotation: varimax first, then a least-squares transform
// toward the sign-preserving |loading|^power target, columns scaled so the
// factor correlation matrix has a unit diagonal.
inline PromaxResult promax_rotate(const Eigen::MatrixXd& unrotated, int power = 4) {
    if (unrotated.cols() < 1) throw ValidationError("promax needs at least one factor");
    if (power < 1) throw ValidationError("promax power must be >= 1");
    const Eigen::Index k = unrotated.cols();

    PromaxResult out;
    if (k == 1) {
        out.pattern = unrotated;
        out.rotation = Eigen::MatrixXd::Identity(1, 1);
        detail::fix_column_signs(out.pattern, &out.rotation);
        out.factor_correlations = Eigen::MatrixXd::Identity(1, 1);
        return out;
    }

    Eigen::MatrixXd vm_rot;
    const Eigen::MatrixXd x = varimax_rotate(unrotated, &vm_rot);

    // Target: elementwise sign(x) * |x|^power.
    Eigen::MatrixXd q = x;
    for (Eigen::Index i = 0; i < q.rows(); ++i)
        for (Eigen::Index j = 0; j < q.cols(); ++j)
            q(i, j) = std::copysign(std::pow(std::abs(x(i, j)), power), x(i, j));

    const Eigen::MatrixXd xtx = x.transpose() * x;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(xtx);
    if (!lu.isInvertible()) throw NumericalError("promax target is rank deficient");
    Eigen::MatrixXd u = lu.solve(x.transpose() * q);

    Eigen::FullPivLU<Eigen::MatrixXd> lu_u(u.transpose() * u);
    if (!lu_u.isInvertible()) throw NumericalError("promax transform is rank deficient");
    const Eigen::VectorXd d = lu_u.inverse().diagonal();
    u = u * d.cwiseSqrt().asDiagonal();

    out.pattern = x * u;
    out.rotation = vm_rot * u;
    Eigen::FullPivLU<Eigen::MatrixXd> lu_total(out.rotation);
    if (!lu_total.isInvertible()) throw NumericalError("promax rotation is singular");
    const Eigen::MatrixXd ui = lu_total.inverse();
    out.factor_correlations = ui * ui.transpose();

    // Deterministic column signs; S * Phi * S keeps the unit diagonal.
    Eigen::VectorXd signs = Eigen::VectorXd::Ones(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        Eigen::Index at = 0;
        out.pattern.col(j).cwiseAbs().maxCoeff(&at);
        if (out.pattern(at, j) < 0.0) signs(j) = -1.0;
    }
    out.pattern = out.pattern * signs.asDiagonal();
    out.rotation = out.rotation * signs.asDiagonal();
    out.factor_correlations = signs.asDiagonal() * out.factor_correlations * signs.asDiagonal();
    return out;
}

struct EfaOptions {
    int promax_power = 4;
    double tolerance = 1e-7;
    int max_iterations = 500;
    double uniqueness_floor = 0.005;
    int fixed_k = 0;  // 0 selects k by the eigenvalue-above-1 rule
};

// Maximum-likelihood extraction: at fixed uniquenesses the optimal loadings
// come from the top-k eigenpairs of psi^{-1/2} R psi^{-1/2}; the uniqueness
// update 1 - rowSums(loadings^2) makes the pair a fixed-point iteration whose
// stationary points satisfy the ML normal equations. Kaiser retention:
// k = #(eigenvalue of R > 1).
inline FactorSolution efa_fit(const StandardizedMatrix& data, const EfaOptions& opts = {}) {
    const Eigen::Index p = data.values.cols();
    if (data.values.rows() <= p) throw DomainError("efa_fit needs more rows than columns");

    const Eigen::MatrixXd r = correlation_matrix(data);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    const Eigen::VectorXd eigenvalues = detail::descending_eigenvalues(es);

    if (opts.fixed_k < 0 || opts.fixed_k >= static_cast<int>(p))
        throw DomainError("fixed_k must lie in [0, p)");
    int k = opts.fixed_k;
    if (k == 0) {
        for (Eigen::Index i = 0; i < p; ++i)
            if (eigenvalues(i) > 1.0) ++k;
        if (k == 0)
            throw NoFactorsRetained(
                std::vector<double>(eigenvalues.data(), eigenvalues.data() + p));
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(r);
    if (!lu.isInvertible()) throw NumericalError("correlation matrix is singular");
    const Eigen::MatrixXd r_inv = lu.inverse();

    // Squared-multiple-correlation start: psi_j = 1 / (R^{-1})_jj.
    Eigen::VectorXd psi(p);
    for (Eigen::Index j = 0; j < p; ++j)
        psi(j) = std::clamp(1.0 / r_inv(j, j), opts.uniqueness_floor, 1.0);

    FactorSolution sol;
    sol.k = k;
    sol.feature_names = data.names;
    sol.eigenvalues = eigenvalues;
    sol.heywood.assign(static_cast<std::size_t>(p), false);
    sol.converged = false;

    Eigen::MatrixXd lambda(p, k);
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        const Eigen::VectorXd psi_isqrt = psi.cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd scaled = psi_isqrt.asDiagonal() * r * psi_isqrt.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esc(scaled);
        if (esc.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
        for (int j = 0; j < k; ++j) {
            const Eigen::Index src = p - 1 - j;  // descending order
            const double theta = esc.eigenvalues()(src);
            const double scale = std::sqrt(std::max(theta - 1.0, 0.0));
            lambda.col(j) = psi.cwiseSqrt().asDiagonal() * esc.eigenvectors().col(src) * scale;
        }
        Eigen::VectorXd psi_new(p);
        for (Eigen::Index j = 0; j < p; ++j)
            psi_new(j) = std::clamp(1.0 - lambda.row(j).squaredNorm(), opts.uniqueness_floor, 1.0);
        const double delta = (psi_new - psi).cwiseAbs().maxCoeff();
        psi = psi_new;
        sol.iterations = iter + 1;
        if (delta < opts.tolerance) {
            sol.converged = true;
            break;
        }
    }
    for (Eigen::Index j = 0; j < p; ++j)
        sol.heywood[static_cast<std::size_t>(j)] =
            1.0 - lambda.row(j).squaredNorm() < opts.uniqueness_floor;

    sol.uniquenesses = psi;
    sol.unrotated_loadings = lambda;
    detail::fix_column_signs(sol.unrotated_loadings);

    const PromaxResult rot = promax_rotate(sol.unrotated_loadings, opts.promax_power);
    sol.loadings = rot.pattern;
    sol.factor_correlations = rot.factor_correlations;

    sol.variance_explained.resize(k);
    for (int j = 0; j < k; ++j) sol.variance_explained(j) = eigenvalues(j) / static_cast<double>(p);
    return sol;
}

// Thomson regression scores: Z * R^{-1} * (pattern * Phi). Score columns are
// centered because Z is.
inline Eigen::MatrixXd factor_scores(const StandardizedMatrix& data,
                                     const FactorSolution& solution) {
    if (solution.feature_names != data.names)
        throw ValidationError("factor_scores needs the columns the solution was fitted on");
    const Eigen::MatrixXd r = correlation_matrix(data);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(r);
    if (!lu.isInvertible()) throw NumericalError("correlation matrix is singular");
    const Eigen::MatrixXd structure = solution.loadings * solution.factor_correlations;
    return data.values * lu.solve(structure);
}

}  // namespace sleepeda
