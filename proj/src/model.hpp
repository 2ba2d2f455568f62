#pragma once

#include <string>
#include <vector>

#include "common.hpp"

namespace bn2mf {

// N x P non-negative data matrix with row/column labels. Immutable once
// constructed; safe to share across threads.
class ExposureMatrix {
  public:
    ExposureMatrix(Matrix values, std::vector<std::string> row_ids,
                   std::vector<std::string> col_ids);

    // Synthesizes r1..rN / c1..cP labels.
    static ExposureMatrix from_values(Matrix values);

    const Matrix& values() const { return values_; }
    Index rows() const { return values_.rows(); }
    Index cols() const { return values_.cols(); }
    const std::vector<std::string>& row_ids() const { return row_ids_; }
    const std::vector<std::string>& col_ids() const { return col_ids_; }

    // sum_ij lgamma(x_ij + 1), cached because every objective evaluation
    // needs it.
    double log_gamma_data_term() const { return lgamma_sum_; }

  private:
    Matrix values_;
    std::vector<std::string> row_ids_;
    std::vector<std::string> col_ids_;
    double lgamma_sum_ = 0.0;
};

// Prior parameters of the factorization model, shape-rate convention
// (mean = shape/rate). The prior shape on the rank weights is 1/k and is
// recomputed whenever k changes, which keeps it below one and sparse.
struct Hyperparameters {
    double alpha_w = 1.0;
    double beta_w = 1.0;
    double alpha_h = 1.0;
    double beta_h = 1.0;
    double beta_a = 1.0;
    int k_init = 0;  // 0 = use the number of columns at fit time

    double alpha_a(int k) const { return 1.0 / static_cast<double>(k); }
    void validate() const;
};

// Element-wise Gamma parameter block, shape-rate form.
struct GammaMatrix {
    Matrix shape;
    Matrix rate;
};

struct GammaVector {
    Vector shape;
    Vector rate;
};

// E[x] = shape/rate.
Matrix expected_value(const GammaMatrix& q);
Vector expected_value(const GammaVector& q);

// E[ln x] = digamma(shape) - ln(rate).
Matrix expected_log(const GammaMatrix& q);
Vector expected_log(const GammaVector& q);

// Full mean-field state over the coefficient matrix (w: N x K), the rank
// weights (a: K) and the dictionary (h: K x P).
struct VariationalState {
    GammaMatrix w;
    GammaVector a;
    GammaMatrix h;
    double temperature = 1.0;
    std::vector<double> elbo_trace;
    std::vector<bool> active;  // component mask, filled in after convergence

    Index n() const { return w.shape.rows(); }
    int k() const { return static_cast<int>(a.shape.size()); }
    Index p() const { return h.shape.cols(); }
    void check_consistent() const;
};

struct LogJointTerms {
    double likelihood = 0.0;
    double prior_w = 0.0;
    double prior_a = 0.0;
    double prior_h = 0.0;
    double total() const { return likelihood + prior_w + prior_a + prior_h; }
};

// Log of the unnormalized posterior at a point (w, a, h): Poisson terms with
// rate lambda = w diag(a) h plus the Gamma prior log-densities. lgamma(x+1)
// uses the continuous gamma function so non-integer data are accepted.
LogJointTerms model_log_joint_terms(const ExposureMatrix& x, const Matrix& w,
                                    const Vector& a, const Matrix& h,
                                    const Hyperparameters& hp);

double model_log_joint(const ExposureMatrix& x, const Matrix& w, const Vector& a,
                       const Matrix& h, const Hyperparameters& hp);

}  // namespace bn2mf
