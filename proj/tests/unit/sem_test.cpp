#include <catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "sleepeda/rng.hpp"
#include "sleepeda/sem.hpp"

using namespace sleepeda;
using Catch::Matchers::WithinAbs;

namespace {

// Unit-variance chain m -> se -> sq with standardized paths b1, b2.
MixedDataset chain_data(int n, double b1, double b2, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::vector<double> m(n), se(n), sq(n);
    for (int i = 0; i < n; ++i) {
        m[i] = standard_normal(rng);
        se[i] = b1 * m[i] + std::sqrt(1.0 - b1 * b1) * standard_normal(rng);
        sq[i] = b2 * se[i] + std::sqrt(1.0 - b2 * b2) * standard_normal(rng);
    }
    MixedDataset d;
    d.add_column("m", ColumnKind::Continuous, std::move(m));
    d.add_column("se", ColumnKind::Continuous, std::move(se));
    d.add_column("sq", ColumnKind::Continuous, std::move(sq));
    return d;
}

Eigen::MatrixXd sample_cov(const MixedDataset& d) {
    const int n = static_cast<int>(d.n_rows());
    const int p = static_cast<int>(d.n_cols());
    Eigen::MatrixXd centered(n, p);
    for (int j = 0; j < p; ++j) {
        double mean = 0.0;
        for (double v : d.columns[j]) mean += v;
        mean /= n;
        for (int i = 0; i < n; ++i) centered(i, j) = d.columns[j][i] - mean;
    }
    return centered.transpose() * centered / static_cast<double>(n - 1);
}

}  // namespace

TEST_CASE("fit indices reproduce the published statistic") {
    const FitIndices idx = fit_indices(28.69, 22, 77, 300.0, 28);
    REQUIRE_THAT(idx.rmsea, WithinAbs(0.06325500906844299, 1e-12));
    REQUIRE(idx.rmsea >= 0.062);
    REQUIRE(idx.rmsea <= 0.065);
    REQUIRE_THAT(idx.p_value, WithinAbs(0.15392608925187462, 1e-9));
    REQUIRE_THAT(idx.cfi, WithinAbs(1.0 - 6.69 / 272.0, 1e-12));
}

TEST_CASE("chi-square at or below df clamps the excess to zero") {
    const FitIndices idx = fit_indices(20.0, 22, 77, 300.0, 28);
    REQUIRE(idx.rmsea == 0.0);
    REQUIRE(idx.cfi == 1.0);
    // The chi-square median sits below its df, so an on-target statistic is
    // unremarkable.
    REQUIRE(fit_indices(22.0, 22, 77, 300.0, 28).p_value > 0.4);
}

TEST_CASE("saturated indices and their contract") {
    const FitIndices idx = fit_indices(0.0, 0, 77, 10.0, 3);
    REQUIRE(idx.rmsea == 0.0);
    REQUIRE(idx.cfi == 1.0);
    REQUIRE(idx.p_value == 1.0);
    REQUIRE_THROWS_AS(fit_indices(5.0, 0, 77, 10.0, 3), ContractError);
    REQUIRE_THROWS_AS(fit_indices(5.0, -1, 77, 10.0, 3), ValidationError);
    REQUIRE_THROWS_AS(fit_indices(5.0, 2, 1, 10.0, 3), ValidationError);
    REQUIRE_THROWS_AS(fit_indices(-0.5, 2, 77, 10.0, 3), ValidationError);
}

TEST_CASE("saturated path model reproduces the sample covariance") {
    Rng rng = make_rng(3);
    const int n = 60;
    std::vector<double> x(n), y(n), z(n);
    for (int i = 0; i < n; ++i) {
        x[i] = standard_normal(rng);
        z[i] = standard_normal(rng);
        y[i] = 0.5 * x[i] + z[i] + standard_normal(rng);
    }
    MixedDataset d;
    d.add_column("x", ColumnKind::Continuous, std::move(x));
    d.add_column("y", ColumnKind::Continuous, std::move(y));
    d.add_column("z", ColumnKind::Continuous, std::move(z));

    PathModelSpec spec;
    spec.observed = {"x", "y", "z"};
    const SemFit fit = fit_path_model(spec, d);
    REQUIRE(fit.converged);
    REQUIRE(fit.df == 0);
    REQUIRE(fit.free_parameter_count == 6);
    REQUIRE(fit.chi_square == 0.0);
    REQUIRE(fit.rmsea == 0.0);
    REQUIRE(fit.cfi == 1.0);

    const Eigen::MatrixXd s = sample_cov(d);
    REQUIRE((fit.implied_covariance - s).cwiseAbs().maxCoeff() < 1e-6);
    REQUIRE_THAT(fit.require("variance", "x", "x").estimate, WithinAbs(s(0, 0), 1e-6));
    const SemParameter& cov_xy = fit.require("covariance", "x", "y");
    REQUIRE_THAT(cov_xy.estimate, WithinAbs(s(0, 1), 1e-6));
    REQUIRE_THAT(cov_xy.standardized,
                 WithinAbs(s(0, 1) / std::sqrt(s(0, 0) * s(1, 1)), 1e-6));
}

TEST_CASE("two-variable path model equals ordinary least squares") {
    Rng rng = make_rng(9);
    const int n = 200;
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
        x[i] = standard_normal(rng);
        y[i] = 0.8 * x[i] + 0.5 * standard_normal(rng);
    }
    MixedDataset d;
    d.add_column("x", ColumnKind::Continuous, std::move(x));
    d.add_column("y", ColumnKind::Continuous, std::move(y));
    PathModelSpec spec;
    spec.edges = {{"x", "y"}};
    const SemFit fit = fit_path_model(spec, d);
    const Eigen::MatrixXd s = sample_cov(d);
    REQUIRE(fit.df == 0);
    REQUIRE_THAT(fit.path("x", "y"), WithinAbs(s(0, 1) / s(0, 0), 1e-7));
    REQUIRE_THAT(fit.standardized_path("x", "y"),
                 WithinAbs(s(0, 1) / std::sqrt(s(0, 0) * s(1, 1)), 1e-7));
}

TEST_CASE("chain model matches the closed-form maximum likelihood solution") {
    const MixedDataset d = chain_data(2000, 0.31, 0.61, 5);
    PathModelSpec spec;
    spec.edges = {{"m", "se"}, {"se", "sq"}};
    const SemFit fit = fit_path_model(spec, d);
    REQUIRE(fit.converged);
    REQUIRE(fit.free_parameter_count == 5);
    REQUIRE(fit.df == 1);

    // The chain's ML solution is closed form: each regression is fitted by
    // least squares and the implied covariance matches every sample moment
    // except the (m, sq) entry, which becomes the path product.
    const Eigen::MatrixXd s = sample_cov(d);
    const double b1 = s(0, 1) / s(0, 0);
    const double b2 = s(1, 2) / s(1, 1);
    const double v2 = s(1, 1) - s(0, 1) * s(0, 1) / s(0, 0);
    Eigen::MatrixXd implied = s;
    implied(0, 2) = implied(2, 0) = s(0, 1) * s(1, 2) / s(1, 1);
    const double f_oracle = std::log(implied.determinant()) +
                            (implied.llt().solve(s)).trace() -
                            std::log(s.determinant()) - 3.0;

    REQUIRE_THAT(fit.discrepancy, WithinAbs(f_oracle, 1e-8));
    REQUIRE_THAT(fit.chi_square, WithinAbs(1999.0 * f_oracle, 1e-4));
    REQUIRE_THAT(fit.path("m", "se"), WithinAbs(b1, 1e-6));
    REQUIRE_THAT(fit.path("se", "sq"), WithinAbs(b2, 1e-6));
    REQUIRE_THAT(fit.require("variance", "se", "se").estimate, WithinAbs(v2, 1e-5));
    REQUIRE_THAT(fit.implied_covariance(0, 2), WithinAbs(implied(0, 2), 1e-6));
    REQUIRE_THAT(fit.standardized_path("m", "se"),
                 WithinAbs(s(0, 1) / std::sqrt(s(0, 0) * s(1, 1)), 1e-6));

    REQUIRE(fit.cfi > 0.98);
    REQUIRE(fit.p_value > 0.0);
    REQUIRE(fit.p_value < 1.0);
    const SemParameter& strong = fit.require("path", "se", "sq");
    REQUIRE(std::isfinite(strong.std_error));
    REQUIRE(strong.z > 10.0);
    REQUIRE(strong.p_value < 1e-6);
}

TEST_CASE("standardized estimates recover generator paths") {
    const MixedDataset d = chain_data(5000, 0.31, 0.61, 11);
    PathModelSpec spec;
    spec.edges = {{"m", "se"}, {"se", "sq"}};
    const SemFit fit = fit_path_model(spec, d);
    REQUIRE_THAT(fit.standardized_path("m", "se"), WithinAbs(0.31, 0.05));
    REQUIRE_THAT(fit.standardized_path("se", "sq"), WithinAbs(0.61, 0.05));

    // Adding the structurally absent direct path estimates it near zero.
    PathModelSpec with_direct = spec;
    with_direct.edges.push_back({"m", "sq"});
    const SemFit wider = fit_path_model(with_direct, d);
    REQUIRE_THAT(wider.standardized_path("m", "sq"), WithinAbs(0.0, 0.05));
    REQUIRE_THAT(wider.standardized_path("se", "sq"), WithinAbs(0.61, 0.05));
}

TEST_CASE("latent measurement model recovers loadings and scale invariance") {
    Rng rng = make_rng(17);
    const int n = 4000;
    std::vector<double> x1(n), x2(n), x3(n);
    for (int i = 0; i < n; ++i) {
        const double latent = standard_normal(rng);
        x1[i] = latent + 0.6 * standard_normal(rng);
        x2[i] = 0.8 * latent + 0.7 * standard_normal(rng);
        x3[i] = 0.6 * latent + 0.8 * standard_normal(rng);
    }
    MixedDataset d;
    d.add_column("x1", ColumnKind::Continuous, x1);
    d.add_column("x2", ColumnKind::Continuous, x2);
    d.add_column("x3", ColumnKind::Continuous, x3);
    PathModelSpec spec;
    spec.latents = {{"f", {"x1", "x2", "x3"}}};

    const SemFit fit = fit_path_model(spec, d);
    REQUIRE(fit.converged);
    REQUIRE(fit.df == 0);
    const SemParameter& first = fit.require("loading", "f", "x1");
    REQUIRE(first.fixed);
    REQUIRE(first.estimate == 1.0);
    REQUIRE_THAT(fit.loading("f", "x2"), WithinAbs(0.8, 0.05));
    REQUIRE_THAT(fit.loading("f", "x3"), WithinAbs(0.6, 0.05));
    REQUIRE_THAT(fit.require("variance", "f", "f").estimate, WithinAbs(1.0, 0.1));
    REQUIRE_THAT(fit.standardized_loading("f", "x1"),
                 WithinAbs(1.0 / std::sqrt(1.36), 0.05));

    // Multiplying one indicator by a constant scales its loading and leaves
    // the standardized loading untouched.
    MixedDataset scaled;
    scaled.add_column("x1", ColumnKind::Continuous, x1);
    for (double& v : x2) v *= 10.0;
    scaled.add_column("x2", ColumnKind::Continuous, x2);
    scaled.add_column("x3", ColumnKind::Continuous, x3);
    const SemFit refit = fit_path_model(spec, scaled);
    REQUIRE_THAT(refit.loading("f", "x2"), WithinAbs(10.0 * fit.loading("f", "x2"), 1e-4));
    REQUIRE_THAT(refit.standardized_loading("f", "x2"),
                 WithinAbs(fit.standardized_loading("f", "x2"), 1e-6));
}

TEST_CASE("single-indicator latent acts as its indicator") {
    Rng rng = make_rng(23);
    const int n = 300;
    std::vector<double> s_col(n), y(n);
    for (int i = 0; i < n; ++i) {
        s_col[i] = standard_normal(rng);
        y[i] = 0.7 * s_col[i] + 0.5 * standard_normal(rng);
    }
    MixedDataset d;
    d.add_column("s", ColumnKind::Continuous, std::move(s_col));
    d.add_column("y", ColumnKind::Continuous, std::move(y));
    PathModelSpec spec;
    spec.latents = {{"S", {"s"}}};
    spec.edges = {{"S", "y"}};
    const SemFit fit = fit_path_model(spec, d);

    const Eigen::MatrixXd s = sample_cov(d);
    REQUIRE(fit.df == 0);
    REQUIRE_THAT(fit.path("S", "y"), WithinAbs(s(0, 1) / s(0, 0), 1e-6));
    const SemParameter& residual = fit.require("variance", "s", "s");
    REQUIRE(residual.fixed);
    REQUIRE(residual.estimate == 0.0);
    REQUIRE(fit.require("loading", "S", "s").fixed);
}

TEST_CASE("binary endpoint fits on the latent response scale") {
    Rng rng = make_rng(42);
    const int n = 20000;
    std::vector<double> se(n), sq(n);
    for (int i = 0; i < n; ++i) {
        se[i] = standard_normal(rng);
        const double latent = 0.61 * se[i] + std::sqrt(1.0 - 0.61 * 0.61) * standard_normal(rng);
        sq[i] = latent > 0.0 ? 1.0 : 0.0;
    }
    MixedDataset d;
    d.add_column("se", ColumnKind::Continuous, std::move(se));
    d.add_column("sq", ColumnKind::Discrete, std::move(sq));
    PathModelSpec spec;
    spec.edges = {{"se", "sq"}};

    const SemFit corrected = fit_path_model(spec, d);
    REQUIRE(corrected.latent_scale_applied);
    REQUIRE_THAT(corrected.standardized_path("se", "sq"), WithinAbs(0.61, 0.03));

    // Plain 0/1 coding attenuates the standardized path by
    // pdf(0) / sqrt(1/4) toward 0.487.
    SemOptions numeric;
    numeric.binary_latent_scale = false;
    const SemFit plain = fit_path_model(spec, d, numeric);
    REQUIRE_FALSE(plain.latent_scale_applied);
    REQUIRE_THAT(plain.standardized_path("se", "sq"), WithinAbs(0.4867, 0.03));
}

TEST_CASE("path model spec validation") {
    MixedDataset d = chain_data(40, 0.3, 0.3, 1);

    PathModelSpec cycle;
    cycle.edges = {{"m", "se"}, {"se", "m"}};
    REQUIRE_THROWS_AS(fit_path_model(cycle, d), ValidationError);

    PathModelSpec self_edge;
    self_edge.edges = {{"m", "m"}};
    REQUIRE_THROWS_AS(fit_path_model(self_edge, d), ValidationError);

    PathModelSpec duplicate_edge;
    duplicate_edge.edges = {{"m", "se"}, {"m", "se"}};
    REQUIRE_THROWS_AS(fit_path_model(duplicate_edge, d), ValidationError);

    PathModelSpec unknown;
    unknown.edges = {{"m", "nope"}};
    REQUIRE_THROWS_AS(fit_path_model(unknown, d), NameError);

    PathModelSpec shared_indicator;
    shared_indicator.latents = {{"f", {"m", "se"}}, {"g", {"se", "sq"}}};
    REQUIRE_THROWS_AS(fit_path_model(shared_indicator, d), ValidationError);

    PathModelSpec empty_latent;
    empty_latent.latents = {{"f", {}}};
    REQUIRE_THROWS_AS(fit_path_model(empty_latent, d), ValidationError);

    PathModelSpec colliding;
    colliding.latents = {{"m", {"se"}}};
    REQUIRE_THROWS_AS(fit_path_model(colliding, d), ValidationError);

    PathModelSpec loading_edge;
    loading_edge.latents = {{"f", {"m", "se"}}};
    loading_edge.edges = {{"f", "se"}};
    REQUIRE_THROWS_AS(fit_path_model(loading_edge, d), ValidationError);

    PathModelSpec latent_observed;
    latent_observed.latents = {{"f", {"m"}}};
    latent_observed.observed = {"f"};
    REQUIRE_THROWS_AS(fit_path_model(latent_observed, d), ValidationError);

    // A two-indicator factor alone has more free parameters than moments.
    PathModelSpec unidentified;
    unidentified.latents = {{"f", {"m", "se"}}};
    REQUIRE_THROWS_AS(fit_path_model(unidentified, d), ValidationError);
}

TEST_CASE("path model rejects unusable samples") {
    // More free parameters than rows.
    MixedDataset tiny = chain_data(4, 0.3, 0.3, 2);
    PathModelSpec saturated;
    saturated.observed = {"m", "se", "sq"};
    REQUIRE_THROWS_AS(fit_path_model(saturated, tiny), ValidationError);

    // Exactly collinear columns: the covariance is rank deficient.
    MixedDataset collinear;
    collinear.add_column("x", ColumnKind::Continuous, {-3.0, -3.0, 3.0, 3.0});
    collinear.add_column("y", ColumnKind::Continuous, {-3.0, -3.0, 3.0, 3.0});
    PathModelSpec pair;
    pair.observed = {"x", "y"};
    REQUIRE_THROWS_AS(fit_path_model(pair, collinear), NumericalError);
}

TEST_CASE("exhausted iteration budget reports non-convergence") {
    const MixedDataset d = chain_data(500, 0.31, 0.61, 7);
    PathModelSpec spec;
    spec.edges = {{"m", "se"}, {"se", "sq"}};
    SemOptions opts;
    opts.gradient_tolerance = 1e-14;
    opts.max_iterations = 1;
    const SemFit fit = fit_path_model(spec, d, opts);
    REQUIRE_FALSE(fit.converged);
    REQUIRE(fit.iterations == 1);
    for (const auto& p : fit.parameters) REQUIRE(std::isfinite(p.estimate));
}

TEST_CASE("parameter table lists every row once") {
    const MixedDataset d = chain_data(400, 0.31, 0.61, 13);
    PathModelSpec spec;
    spec.latents = {{"S", {"m"}}};
    spec.edges = {{"S", "se"}, {"se", "sq"}};
    const SemFit fit = fit_path_model(spec, d);
    const std::string table = sem_table(fit);
    REQUIRE(table.find("loading") != std::string::npos);
    REQUIRE(table.find("fixed") != std::string::npos);
    REQUIRE(table.find("chi-square") != std::string::npos);
    REQUIRE(table.find("S -> se") != std::string::npos);
    REQUIRE(table.back() == '\n');
    REQUIRE(sem_table(fit) == table);
}
