#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>

#include "model.hpp"
#include "vi.hpp"

namespace bn2mf {

// Per-entry interval summaries for scaled individual scores. The mean is the
// analytic expectation; the bounds are empirical quantiles, so mean is not
// constrained to lie between them (lower <= upper always holds). Entries of
// a bootstrap run whose row was never resampled are flagged missing and carry
// NaN bounds.
struct ScoreIntervals {
    Matrix mean;
    Matrix lower;
    Matrix upper;
    Matrix missing;  // 0/1 mask
    long n_draws = 0;
    double level = 0.95;
    std::string warning;

    Index rows() const { return mean.rows(); }
    Index cols() const { return mean.cols(); }
};

// l1-normalize each loading row and scale the matching score column by the
// normalization constant; the product scores * loadings is unchanged.
std::pair<Matrix, Matrix> normalize_and_scale(const Matrix& scores, const Matrix& loadings);

// Restrict a converged state to its active components.
VariationalState active_substate(const VariationalState& state);

// Empirical interval from n_draws joint draws of (W, a, H); every draw is
// rescaled against its own drawn dictionary so loading uncertainty propagates
// into the score intervals. Expects an active-only state.
ScoreIntervals variational_ci(const VariationalState& state, long n_draws, std::uint64_t seed,
                              double level = 0.95);

// A factorization procedure for the bootstrap: maps (data, seed) to
// (scores, loadings).
using BootstrapFitter =
    std::function<std::pair<Matrix, Matrix>(const ExposureMatrix&, std::uint64_t)>;

// Case-resampling bootstrap: n_boot refits on row resamples, each normalized
// and aligned to the full-data reference, with every resampled row's scores
// accumulated back at its original index. Resamples run on n_threads workers;
// results are identical for any thread count.
ScoreIntervals bootstrap_ci(const ExposureMatrix& x, const BootstrapFitter& fitter, long n_boot,
                            std::uint64_t seed, double level = 0.95, int n_threads = 1);

// Fraction of entries with lower <= truth <= upper; missing entries are
// excluded from both numerator and denominator. Truth must already be aligned
// to the interval columns.
double coverage(const Matrix& truth, const ScoreIntervals& intervals);

}  // namespace bn2mf
