#include <doctest.h>

#include <cmath>

#include "baselines.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "simgen.hpp"

using namespace bn2mf;

namespace {

ExposureMatrix exact_rank_k(Index n, Index p, int k, std::uint64_t seed) {
    Rng rng(seed);
    Matrix w(n, k), h(k, p);
    for (Index i = 0; i < n; ++i)
        for (int c = 0; c < k; ++c) w(i, c) = rng.uniform(0.2, 2.0);
    for (int c = 0; c < k; ++c)
        for (Index j = 0; j < p; ++j) h(c, j) = rng.uniform(0.2, 2.0);
    return ExposureMatrix::from_values(w * h);
}

void check_monotone(const std::vector<double>& trace, double slack) {
    for (std::size_t i = 1; i < trace.size(); ++i)
        CHECK(trace[i] <= trace[i - 1] + slack);
}

ExposureMatrix distinct_noisy(Index n, double noise, std::uint64_t seed) {
    SimSpec spec;
    spec.n = n;
    spec.noise_prop = noise;
    spec.seed = seed;
    return gen_dataset(spec).noisy_exposures();
}

}  // namespace

TEST_CASE("squared-error NMF reconstructs exact low-rank data") {
    const ExposureMatrix x = exact_rank_k(20, 8, 2, 5);
    const BaselineResult result = nmf_l2(x, 2, 7, 20000, 1e-12);
    CHECK(relative_error(x.values(), result.scores * result.loadings) < 1e-3);
    CHECK((result.scores.array() >= 0.0).all());
    CHECK((result.loadings.array() >= 0.0).all());
    check_monotone(result.objective_trace, 1e-10);
}

TEST_CASE("squared-error NMF capacity is monotone in rank") {
    const ExposureMatrix x = distinct_noisy(120, 0.3, 9);
    const BaselineResult narrow = nmf_l2(x, 4, 3);
    const BaselineResult full = nmf_l2(x, static_cast<int>(x.cols()), 3);
    const double err_narrow = relative_error(x.values(), narrow.scores * narrow.loadings);
    const double err_full = relative_error(x.values(), full.scores * full.loadings);
    CHECK(err_full <= err_narrow + 1e-3);
}

TEST_CASE("Poisson NMF drives the divergence to zero on exact data") {
    const ExposureMatrix x = exact_rank_k(20, 8, 2, 15);
    const BaselineResult result = nmf_poisson(x, 2, 3, 50000, 1e-13);
    CHECK(result.objective_trace.back() < 1e-6);
    check_monotone(result.objective_trace, 1e-10);
}

TEST_CASE("Poisson NMF concentrates on a single positive entry") {
    Matrix data = Matrix::Zero(4, 3);
    data(2, 1) = 6.0;
    const ExposureMatrix x = ExposureMatrix::from_values(data);
    const BaselineResult result = nmf_poisson(x, 1, 11, 20000, 1e-12);
    const Matrix recon = result.scores * result.loadings;
    CHECK(recon(2, 1) == doctest::Approx(6.0).epsilon(1e-3));
    CHECK(recon.sum() - recon(2, 1) < 1e-3);
}

TEST_CASE("NMF fits are deterministic given the seed") {
    const ExposureMatrix x = exact_rank_k(15, 6, 2, 33);
    const BaselineResult a = nmf_l2(x, 3, 21);
    const BaselineResult b = nmf_l2(x, 3, 21);
    CHECK(a.scores == b.scores);
    CHECK(a.loadings == b.loadings);
}

TEST_CASE("PCA keeps one component for one dominant direction") {
    Rng rng(41);
    Vector direction(6);
    for (Index j = 0; j < 6; ++j) direction(j) = rng.uniform(0.5, 1.0);
    Matrix data(200, 6);
    for (Index i = 0; i < 200; ++i) {
        const double t = rng.uniform(0.0, 10.0);
        for (Index j = 0; j < 6; ++j)
            data(i, j) = t * direction(j) + 0.01 * rng.uniform(0.0, 1.0);
    }
    const BaselineResult result = pca_retain(ExposureMatrix::from_values(data), 0.80);
    CHECK(result.k == 1);
    CHECK(result.selection_stat >= 0.80);
}

TEST_CASE("PCA retains four of five near-equal orthogonal directions") {
    // Mean-zero orthonormal columns with norms nudged upward so the leading
    // four land strictly above the 0.8 threshold.
    Rng rng(47);
    Matrix raw(60, 5);
    for (Index i = 0; i < 60; ++i)
        for (Index j = 0; j < 5; ++j) raw(i, j) = rng.normal();
    raw.rowwise() -= raw.colwise().mean();
    // Gram-Schmidt keeps columns centered.
    for (Index j = 0; j < 5; ++j) {
        for (Index prev = 0; prev < j; ++prev)
            raw.col(j) -= raw.col(prev).dot(raw.col(j)) * raw.col(prev);
        raw.col(j) /= raw.col(j).norm();
        raw.col(j) *= 1.0 + 1e-6 * static_cast<double>(5 - j);
    }
    raw.array() += 10.0;  // keep the data non-negative; PCA recenters anyway
    const BaselineResult result = pca_retain(ExposureMatrix::from_values(raw), 0.80);
    CHECK(result.k == 4);
}

TEST_CASE("PCA explained-variance fractions behave") {
    const ExposureMatrix x = distinct_noisy(150, 0.5, 13);
    const BaselineResult result = pca_retain(x, 0.999999);
    CHECK(result.selection_stat <= 1.0 + 1e-12);
    CHECK(result.k <= static_cast<int>(x.cols()));
}

TEST_CASE("factor analysis recovers a generative model's loading span") {
    Rng rng(61);
    const Index p = 10, n = 4000;
    const int k = 2;
    Matrix lambda(p, k);
    for (Index j = 0; j < p; ++j)
        for (int c = 0; c < k; ++c) lambda(j, c) = rng.uniform(-1.0, 1.0);
    Vector psi(p);
    for (Index j = 0; j < p; ++j) psi(j) = rng.uniform(0.1, 0.3);

    Matrix data(n, p);
    for (Index i = 0; i < n; ++i) {
        Vector z(k);
        for (int c = 0; c < k; ++c) z(c) = rng.normal();
        for (Index j = 0; j < p; ++j)
            data(i, j) = 20.0 + lambda.row(j).dot(z) + std::sqrt(psi(j)) * rng.normal();
    }
    const BaselineResult result = factor_analysis(ExposureMatrix::from_values(data), k);
    CHECK(result.converged);
    for (std::size_t i = 1; i < result.objective_trace.size(); ++i)
        CHECK(result.objective_trace[i] >= result.objective_trace[i - 1] - 1e-6);
    CHECK(subspace_distance(lambda, result.loadings.transpose()) < 0.05);
}

TEST_CASE("factor analysis rejects invalid ranks and flags degeneracy") {
    const ExposureMatrix x = distinct_noisy(100, 0.3, 17);
    CHECK_THROWS_AS(factor_analysis(x, 0), std::invalid_argument);

    // Noise-free data leave nothing for the uniquenesses to explain.
    SimSpec spec;
    spec.n = 100;
    spec.noise_prop = 0.0;
    spec.seed = 18;
    const ExposureMatrix clean = gen_dataset(spec).noisy_exposures();
    const BaselineResult result = factor_analysis(clean, 4, 500);
    CHECK((result.heywood || !result.converged));
}

TEST_CASE("BIC selection picks the true rank on clear data") {
    const ExposureMatrix x = distinct_noisy(400, 0.2, 23);
    const BaselineResult nmf = select_by_bic(x, BaselineMethod::NmfL2, {3, 4, 5}, 5);
    CHECK(nmf.k == 4);
    const ExposureMatrix x50 = distinct_noisy(400, 0.5, 29);
    const BaselineResult fa = select_by_bic(x50, BaselineMethod::FactorAnalysis, {3, 4, 5}, 5);
    CHECK(fa.k == 4);
}

TEST_CASE("BIC selection handles a single candidate and input order") {
    const ExposureMatrix x = distinct_noisy(150, 0.3, 31);
    const BaselineResult only = select_by_bic(x, BaselineMethod::NmfPoisson, {4}, 9);
    CHECK(only.k == 4);
    const BaselineResult shuffled = select_by_bic(x, BaselineMethod::NmfL2, {5, 3, 4}, 9);
    const BaselineResult sorted = select_by_bic(x, BaselineMethod::NmfL2, {3, 4, 5}, 9);
    CHECK(shuffled.k == sorted.k);
    CHECK_THROWS_AS(select_by_bic(x, BaselineMethod::NmfL2, {}, 9), std::invalid_argument);
    CHECK_THROWS_AS(select_by_bic(x, BaselineMethod::Pca, {3}, 9), std::invalid_argument);
}
