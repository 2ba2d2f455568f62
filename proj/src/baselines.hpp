#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "model.hpp"

namespace bn2mf {

enum class BaselineMethod { NmfL2, NmfPoisson, Pca, FactorAnalysis };

std::string baseline_method_name(BaselineMethod method);

struct BaselineResult {
    BaselineMethod method = BaselineMethod::NmfL2;
    Matrix scores;    // N x k
    Matrix loadings;  // k x P
    int k = 0;
    // BIC for NMF/FA selections, cumulative variance fraction for PCA.
    double selection_stat = 0.0;
    bool converged = false;
    long iterations = 0;
    bool heywood = false;  // FA only: some uniqueness hit the floor
    std::vector<double> objective_trace;
};

// Multiplicative-update NMF minimizing ||X - WH||_F^2. Five internal
// restarts, best objective kept; stop on relative objective change < tol.
BaselineResult nmf_l2(const ExposureMatrix& x, int k, std::uint64_t seed, long max_iter = 5000,
                      double tol = 1e-6);

// Multiplicative-update NMF minimizing the generalized KL divergence
// D(X || WH), with factors floored at 1e-10.
BaselineResult nmf_poisson(const ExposureMatrix& x, int k, std::uint64_t seed,
                           long max_iter = 5000, double tol = 1e-6);

// Mean-centered PCA retaining the smallest number of leading components whose
// cumulative explained variance reaches the threshold.
BaselineResult pca_retain(const ExposureMatrix& x, double variance_threshold = 0.80);

// Maximum-likelihood factor analysis with diagonal uniquenesses, fit by EM;
// scores by the regression method. Uniquenesses are floored at 1e-6 and
// flagged when the floor binds.
BaselineResult factor_analysis(const ExposureMatrix& x, int k, long max_iter = 2000,
                               double tol = 1e-6);

// BIC of a fitted NMF or FA result on the same data.
double bic_of(const ExposureMatrix& x, const BaselineResult& result);

// Fit each candidate rank and return the lowest-BIC model, ties toward the
// smaller rank. Failures are collected; all failing is an error.
BaselineResult select_by_bic(const ExposureMatrix& x, BaselineMethod method,
                             const std::vector<int>& k_candidates, std::uint64_t seed);

}  // namespace bn2mf
