#pragma once

// Independent reference implementations of varimax and promax, ported from
// the classic SVD-iteration formulation. Used only to cross-check the
// production pairwise-rotation implementation; kept free of production code.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

namespace oracle {

struct VarimaxRef {
    Eigen::MatrixXd loadings;
    Eigen::MatrixXd rotmat;
};

// eps tighter than the classic 1e-5 default so the oracle reaches the same
// optimum the production rotation iterates to.
inline VarimaxRef varimax_ref(Eigen::MatrixXd x, bool normalize = true, double eps = 1e-12) {
    const Eigen::Index nc = x.cols();
    const Eigen::Index p = x.rows();
    VarimaxRef out;
    out.rotmat = Eigen::MatrixXd::Identity(nc, nc);
    if (nc < 2) {
        out.loadings = x;
        return out;
    }
    Eigen::VectorXd sc = Eigen::VectorXd::Ones(p);
    if (normalize) {
        sc = x.rowwise().norm();
        for (Eigen::Index i = 0; i < p; ++i)
            if (sc(i) > 0.0) x.row(i) /= sc(i);
    }
    Eigen::MatrixXd tt = Eigen::MatrixXd::Identity(nc, nc);
    double d = 0.0;
    for (int it = 0; it < 1000; ++it) {
        const Eigen::MatrixXd z = x * tt;
        const Eigen::VectorXd colsq = z.array().square().colwise().sum();
        const Eigen::MatrixXd b =
            x.transpose() *
            (z.array().cube().matrix() - z * colsq.asDiagonal() / static_cast<double>(p));
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
        tt = svd.matrixU() * svd.matrixV().transpose();
        const double dpast = d;
        d = svd.singularValues().sum();
        if (d < dpast * (1.0 + eps)) break;
    }
    Eigen::MatrixXd z = x * tt;
    if (normalize)
        for (Eigen::Index i = 0; i < p; ++i) z.row(i) *= sc(i);
    out.loadings = z;
    out.rotmat = tt;
    return out;
}

struct PromaxRef {
    Eigen::MatrixXd loadings;
    Eigen::MatrixXd rotmat;
    Eigen::MatrixXd phi;
};

inline PromaxRef promax_ref(const Eigen::MatrixXd& input, int m = 4) {
    const VarimaxRef vm = varimax_ref(input);
    const Eigen::MatrixXd& x = vm.loadings;
    Eigen::MatrixXd q = x;
    for (Eigen::Index i = 0; i < q.rows(); ++i)
        for (Eigen::Index j = 0; j < q.cols(); ++j)
            q(i, j) = x(i, j) * std::pow(std::abs(x(i, j)), m - 1);
    Eigen::MatrixXd u = (x.transpose() * x).ldlt().solve(x.transpose() * q);
    const Eigen::VectorXd d = (u.transpose() * u).inverse().diagonal();
    u = u * d.cwiseSqrt().asDiagonal();
    PromaxRef out;
    out.loadings = x * u;
    out.rotmat = vm.rotmat * u;
    const Eigen::MatrixXd ui = out.rotmat.inverse();
    out.phi = ui * ui.transpose();
    return out;
}

}  // namespace oracle
