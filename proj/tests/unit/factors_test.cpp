#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "rotation_oracle.hpp"
#include "sleepeda/factors.hpp"
#include "sleepeda/rng.hpp"
#include "sleepeda/synth.hpp"

using namespace sleepeda;

namespace {

// Columns 2..7 of the order-8 Hadamard matrix: exactly orthogonal, zero-sum,
// so the sample correlation matrix is the identity in exact arithmetic.
StandardizedMatrix hadamard_data() {
    const int h[8][8] = {
        {1, 1, 1, 1, 1, 1, 1, 1},     {1, -1, 1, -1, 1, -1, 1, -1},
        {1, 1, -1, -1, 1, 1, -1, -1}, {1, -1, -1, 1, 1, -1, -1, 1},
        {1, 1, 1, 1, -1, -1, -1, -1}, {1, -1, 1, -1, -1, 1, -1, 1},
        {1, 1, -1, -1, -1, -1, 1, 1}, {1, -1, -1, 1, -1, 1, 1, -1}};
    Eigen::MatrixXd raw(8, 6);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 6; ++j) raw(i, j) = h[i][j + 1];
    std::vector<std::string> names;
    for (int j = 0; j < 6; ++j) names.push_back("f" + std::to_string(j + 1));
    return standardize(names, raw);
}

StandardizedMatrix single_factor_data(std::size_t n, double loading, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    Eigen::MatrixXd raw(n, 6);
    const double noise_sd = std::sqrt(1.0 - loading * loading);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = standard_normal(rng);
        for (int j = 0; j < 6; ++j)
            raw(static_cast<Eigen::Index>(i), j) = loading * z + noise_sd * standard_normal(rng);
    }
    std::vector<std::string> names;
    for (int j = 0; j < 6; ++j) names.push_back("x" + std::to_string(j + 1));
    return standardize(names, raw);
}

// Identified two-factor design: four indicators on the first factor, two on
// the second, latent correlation 0.3.
struct TwoFactorSample {
    StandardizedMatrix data;
    std::vector<double> latent1;
    std::vector<double> latent2;
};

TwoFactorSample two_factor_data(std::size_t n, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    const double phi = 0.3;
    const double l1[4] = {0.95, 0.9, 0.85, 0.8};
    const double l2[2] = {0.85, 0.8};
    TwoFactorSample out;
    Eigen::MatrixXd raw(n, 6);
    out.latent1.resize(n);
    out.latent2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double f1 = standard_normal(rng);
        const double f2 = phi * f1 + std::sqrt(1.0 - phi * phi) * standard_normal(rng);
        out.latent1[i] = f1;
        out.latent2[i] = f2;
        for (int j = 0; j < 4; ++j)
            raw(static_cast<Eigen::Index>(i), j) =
                l1[j] * f1 + std::sqrt(1.0 - l1[j] * l1[j]) * standard_normal(rng);
        for (int j = 0; j < 2; ++j)
            raw(static_cast<Eigen::Index>(i), 4 + j) =
                l2[j] * f2 + std::sqrt(1.0 - l2[j] * l2[j]) * standard_normal(rng);
    }
    std::vector<std::string> names;
    for (int j = 0; j < 6; ++j) names.push_back("v" + std::to_string(j + 1));
    out.data = standardize(names, raw);
    return out;
}

double corr(const Eigen::VectorXd& a, const std::vector<double>& b) {
    Eigen::Map<const Eigen::VectorXd> bv(b.data(), static_cast<Eigen::Index>(b.size()));
    const Eigen::VectorXd ac = a.array() - a.mean();
    const Eigen::VectorXd bc = bv.array() - bv.mean();
    return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
}

}  // namespace

TEST_CASE("independent features retain no factors") {
    const auto data = hadamard_data();
    try {
        efa_fit(data);
        FAIL("expected NoFactorsRetained");
    } catch (const NoFactorsRetained& e) {
        REQUIRE(e.eigenvalues.size() == 6);
        for (double v : e.eigenvalues) CHECK(v == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("single-factor data retains one factor with the closed-form eigenvalue") {
    const auto data = single_factor_data(4000, 0.9, 31);
    const auto sol = efa_fit(data);
    CHECK(sol.k == 1);
    // Population top eigenvalue of the equicorrelation matrix: 1 + 5 * 0.81.
    CHECK(sol.eigenvalues(0) == Catch::Approx(5.05).margin(0.15));
    CHECK(sol.eigenvalues.sum() == Catch::Approx(6.0).margin(1e-9));
    CHECK(sol.variance_explained(0) == Catch::Approx(5.05 / 6.0).margin(0.03));
    for (int j = 0; j < 6; ++j) {
        CHECK(sol.loadings(j, 0) == Catch::Approx(0.9).margin(0.05));
        CHECK(sol.uniquenesses(j) == Catch::Approx(0.19).margin(0.05));
    }
    CHECK(sol.factor_correlations(0, 0) == 1.0);
    CHECK(sol.converged);
}

TEST_CASE("identified two-factor structure is recovered") {
    const auto sample = two_factor_data(5000, 77);
    const auto sol = efa_fit(sample.data);
    REQUIRE(sol.k == 2);

    // Column of the pattern matrix dominated by the four-indicator block.
    const int big = std::abs(sol.loadings(0, 0)) > std::abs(sol.loadings(0, 1)) ? 0 : 1;
    const int small = 1 - big;
    for (int j = 0; j < 4; ++j) {
        CHECK(std::abs(sol.loadings(j, big)) > 0.6);
        CHECK(std::abs(sol.loadings(j, small)) < 0.25);
    }
    for (int j = 4; j < 6; ++j) {
        CHECK(std::abs(sol.loadings(j, small)) > 0.6);
        CHECK(std::abs(sol.loadings(j, big)) < 0.25);
    }
    CHECK(std::abs(sol.factor_correlations(0, 1)) == Catch::Approx(0.3).margin(0.12));

    const auto scores = factor_scores(sample.data, sol);
    REQUIRE(scores.cols() == 2);
    const double r1 = std::abs(corr(scores.col(big), sample.latent1));
    const double r2 = std::abs(corr(scores.col(small), sample.latent2));
    CHECK(r1 >= 0.9);
    CHECK(r2 >= 0.9);
    for (int j = 0; j < 2; ++j)
        CHECK(std::abs(scores.col(j).mean()) <= 1e-9);
}

TEST_CASE("default generator data yields a single dominant factor") {
    const auto sample = generate_tabular(GroundTruthModel{}, 5000, 13);
    const auto z = standardize_columns(sample.data, feature_column_names());
    const auto sol = efa_fit(z);
    CHECK(sol.k == 1);
    CHECK(sol.eigenvalues(0) == Catch::Approx(4.545).margin(0.15));
    CHECK(sol.variance_explained(0) == Catch::Approx(0.758).margin(0.04));
    // The five magnitude indicators dominate; storm_count barely loads.
    CHECK(std::abs(sol.loadings(0, 0)) > 0.85);
    CHECK(std::abs(sol.loadings(1, 0)) < 0.2);
}

TEST_CASE("exact low-rank correlation is reconstructed") {
    // Build data whose sample correlation equals the one-factor matrix
    // loading 0.9 almost exactly: X = sqrt(n-1) * Q * chol(R)', Q orthonormal
    // with zero-mean columns.
    const Eigen::Index n = 40, p = 6;
    Eigen::MatrixXd r = Eigen::MatrixXd::Constant(p, p, 0.81);
    r.diagonal().setOnes();
    Rng rng = make_rng(5);
    Eigen::MatrixXd seed_mat(n, p + 1);
    seed_mat.col(0).setOnes();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 1; j <= p; ++j) seed_mat(i, j) = standard_normal(rng);
    const Eigen::MatrixXd q_full =
        Eigen::HouseholderQR<Eigen::MatrixXd>(seed_mat).householderQ() *
        Eigen::MatrixXd::Identity(n, p + 1);
    const Eigen::MatrixXd q = q_full.rightCols(p);
    const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(r).matrixL();
    Eigen::MatrixXd raw = std::sqrt(static_cast<double>(n - 1)) * q * chol.transpose();
    std::vector<std::string> names;
    for (int j = 0; j < p; ++j) names.push_back("c" + std::to_string(j));
    const auto data = standardize(names, raw);

    const auto sol = efa_fit(data);
    REQUIRE(sol.k == 1);
    const Eigen::MatrixXd implied =
        sol.unrotated_loadings * sol.unrotated_loadings.transpose() +
        Eigen::MatrixXd(sol.uniquenesses.asDiagonal());
    const Eigen::MatrixXd rr = correlation_matrix(data);
    CHECK((rr - implied).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("promax rotation preserves the implied correlation matrix") {
    const auto sample = two_factor_data(2000, 99);
    const auto sol = efa_fit(sample.data);
    REQUIRE(sol.k == 2);
    const Eigen::MatrixXd unrotated = sol.unrotated_loadings * sol.unrotated_loadings.transpose();
    const Eigen::MatrixXd rotated =
        sol.loadings * sol.factor_correlations * sol.loadings.transpose();
    CHECK((unrotated - rotated).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("Kaiser retention ignores column order") {
    const auto sample = two_factor_data(1500, 3);
    const auto sol = efa_fit(sample.data);

    StandardizedMatrix shuffled;
    const std::vector<int> order = {3, 5, 0, 4, 1, 2};
    shuffled.values.resize(sample.data.values.rows(), 6);
    for (int j = 0; j < 6; ++j) {
        shuffled.values.col(j) = sample.data.values.col(order[static_cast<std::size_t>(j)]);
        shuffled.names.push_back(sample.data.names[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])]);
    }
    const auto sol2 = efa_fit(shuffled);
    CHECK(sol.k == sol2.k);
    CHECK(sol.eigenvalues(0) == Catch::Approx(sol2.eigenvalues(0)).margin(1e-9));
}

TEST_CASE("near-duplicate indicators trip the Heywood guard") {
    Rng rng = make_rng(17);
    const Eigen::Index n = 300;
    Eigen::MatrixXd raw(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = standard_normal(rng);
        raw(i, 0) = z + 0.02 * standard_normal(rng);
        raw(i, 1) = z + 0.02 * standard_normal(rng);
        raw(i, 2) = 0.5 * z + standard_normal(rng);
    }
    const auto data = standardize({"a", "b", "c"}, raw);
    const auto sol = efa_fit(data);
    REQUIRE(sol.k == 1);
    CHECK((sol.heywood[0] || sol.heywood[1]));
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(sol.uniquenesses(j) >= 0.005);
}

TEST_CASE("promax of a single factor is the identity rotation") {
    Eigen::MatrixXd loadings(4, 1);
    loadings << 0.9, 0.8, 0.7, 0.6;
    const auto rot = promax_rotate(loadings);
    CHECK((rot.pattern - loadings).cwiseAbs().maxCoeff() == 0.0);
    CHECK(rot.factor_correlations(0, 0) == 1.0);
}

TEST_CASE("perfect simple structure is a promax fixed point") {
    Eigen::MatrixXd loadings(6, 2);
    loadings << 0.9, 0.0, 0.85, 0.0, 0.8, 0.0, 0.0, 0.75, 0.0, 0.7, 0.0, 0.8;
    const auto rot = promax_rotate(loadings);
    CHECK((rot.pattern - loadings).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((rot.factor_correlations - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <=
          1e-8);
}

TEST_CASE("promax matches the independent reference implementation") {
    Eigen::MatrixXd loadings(6, 2);
    loadings << 0.83, 0.25, 0.78, 0.31, 0.75, 0.18, 0.21, 0.72, 0.15, 0.68, 0.28, 0.64;

    const auto ours = promax_rotate(loadings, 4);
    auto ref = oracle::promax_ref(loadings, 4);

    // Align reference columns (order and sign) with ours before comparing.
    for (Eigen::Index j = 0; j < 2; ++j) {
        Eigen::Index at = 0;
        ref.loadings.col(j).cwiseAbs().maxCoeff(&at);
        if (ref.loadings(at, j) < 0.0) {
            ref.loadings.col(j) = -ref.loadings.col(j);
            ref.phi.col(j) = -ref.phi.col(j);
            ref.phi.row(j) = -ref.phi.row(j);
        }
    }
    const bool swapped = (ours.pattern.col(0) - ref.loadings.col(0)).cwiseAbs().maxCoeff() >
                         (ours.pattern.col(0) - ref.loadings.col(1)).cwiseAbs().maxCoeff();
    Eigen::MatrixXd ref_pat = ref.loadings;
    Eigen::MatrixXd ref_phi = ref.phi;
    if (swapped) {
        ref_pat.col(0) = ref.loadings.col(1);
        ref_pat.col(1) = ref.loadings.col(0);
        ref_phi(0, 1) = ref.phi(1, 0);
        ref_phi(1, 0) = ref.phi(0, 1);
    }
    CHECK((ours.pattern - ref_pat).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(std::abs(ours.factor_correlations(0, 1) - ref_phi(0, 1)) <= 1e-6);
}

TEST_CASE("varimax matches the reference on a fixed matrix") {
    Eigen::MatrixXd loadings(5, 2);
    loadings << 0.9, 0.2, 0.8, 0.3, 0.7, 0.1, 0.3, 0.8, 0.2, 0.7;
    Eigen::MatrixXd rot;
    const Eigen::MatrixXd ours = varimax_rotate(loadings, &rot);
    const auto ref = oracle::varimax_ref(loadings);
    // Same criterion optimum up to column sign/order; this input keeps both.
    CHECK((ours - ref.loadings).cwiseAbs().maxCoeff() <= 1e-5);
    // Rotation bookkeeping: rotated = input * rotation.
    CHECK((loadings * rot - ours).cwiseAbs().maxCoeff() <= 1e-12);
    // Orthogonality of the accumulated rotation.
    CHECK((rot.transpose() * rot - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <=
          1e-12);
}

TEST_CASE("single-indicator solution scores equal the standardized column") {
    Rng rng = make_rng(9);
    Eigen::MatrixXd raw(50, 1);
    for (Eigen::Index i = 0; i < 50; ++i) raw(i, 0) = standard_normal(rng);
    const auto data = standardize({"only"}, raw);

    FactorSolution sol;
    sol.k = 1;
    sol.feature_names = {"only"};
    sol.loadings = Eigen::MatrixXd::Constant(1, 1, 1.0);
    sol.unrotated_loadings = sol.loadings;
    sol.uniquenesses = Eigen::VectorXd::Constant(1, 0.005);
    sol.eigenvalues = Eigen::VectorXd::Constant(1, 1.0);
    sol.factor_correlations = Eigen::MatrixXd::Identity(1, 1);
    sol.variance_explained = Eigen::VectorXd::Constant(1, 1.0);

    const auto scores = factor_scores(data, sol);
    CHECK((scores.col(0) - data.values.col(0)).cwiseAbs().maxCoeff() <= 1e-12);
}
