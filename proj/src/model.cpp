#include "model.hpp"

#include <cmath>
#include <sstream>

#include "special_functions.hpp"

namespace bn2mf {

namespace {

std::vector<std::string> sequential_ids(const char* prefix, Index n) {
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i + 1));
    return ids;
}

// Gamma(alpha, beta) log-density at theta > 0, shape-rate form.
double gamma_log_pdf(double theta, double alpha, double beta) {
    return alpha * std::log(beta) - log_gamma(alpha) + (alpha - 1.0) * std::log(theta) -
           beta * theta;
}

}  // namespace

ExposureMatrix::ExposureMatrix(Matrix values, std::vector<std::string> row_ids,
                               std::vector<std::string> col_ids)
    : values_(std::move(values)), row_ids_(std::move(row_ids)), col_ids_(std::move(col_ids)) {
    if (values_.rows() < 1 || values_.cols() < 1)
        throw std::invalid_argument("ExposureMatrix: empty matrix");
    if (static_cast<Index>(row_ids_.size()) != values_.rows() ||
        static_cast<Index>(col_ids_.size()) != values_.cols())
        throw std::invalid_argument("ExposureMatrix: label counts do not match dimensions");
    for (Index i = 0; i < values_.rows(); ++i) {
        for (Index j = 0; j < values_.cols(); ++j) {
            const double v = values_(i, j);
            if (!std::isfinite(v) || v < 0.0) {
                std::ostringstream msg;
                msg << "ExposureMatrix: entry (" << row_ids_[static_cast<std::size_t>(i)]
                    << ", " << col_ids_[static_cast<std::size_t>(j)]
                    << ") is " << (std::isfinite(v) ? "negative" : "not finite");
                throw std::invalid_argument(msg.str());
            }
            lgamma_sum_ += log_gamma(v + 1.0);
        }
    }
}

ExposureMatrix ExposureMatrix::from_values(Matrix values) {
    const Index n = values.rows();
    const Index p = values.cols();
    return ExposureMatrix(std::move(values), sequential_ids("r", n), sequential_ids("c", p));
}

void Hyperparameters::validate() const {
    if (!(alpha_w > 0.0 && beta_w > 0.0 && alpha_h > 0.0 && beta_h > 0.0 && beta_a > 0.0))
        throw std::invalid_argument("Hyperparameters: all prior parameters must be positive");
    if (k_init < 0)
        throw std::invalid_argument("Hyperparameters: k_init must be positive (or 0 for P)");
}

Matrix expected_value(const GammaMatrix& q) { return q.shape.array() / q.rate.array(); }
Vector expected_value(const GammaVector& q) { return q.shape.array() / q.rate.array(); }

Matrix expected_log(const GammaMatrix& q) {
    return q.shape.unaryExpr([](double s) { return digamma(s); }).array() -
           q.rate.array().log();
}

Vector expected_log(const GammaVector& q) {
    return q.shape.unaryExpr([](double s) { return digamma(s); }).array() -
           q.rate.array().log();
}

void VariationalState::check_consistent() const {
    const Index nn = w.shape.rows();
    const Index kk = a.shape.size();
    const Index pp = h.shape.cols();
    if (w.shape.cols() != kk || h.shape.rows() != kk)
        throw std::invalid_argument("VariationalState: block dimensions disagree");
    if (w.rate.rows() != nn || w.rate.cols() != kk || a.rate.size() != kk ||
        h.rate.rows() != kk || h.rate.cols() != pp)
        throw std::invalid_argument("VariationalState: shape/rate dimensions disagree");
    if (temperature < 1.0)
        throw std::invalid_argument("VariationalState: temperature must be >= 1");
    if ((w.shape.array() <= 0).any() || (w.rate.array() <= 0).any() ||
        (a.shape.array() <= 0).any() || (a.rate.array() <= 0).any() ||
        (h.shape.array() <= 0).any() || (h.rate.array() <= 0).any())
        throw std::invalid_argument("VariationalState: Gamma parameters must be positive");
}

LogJointTerms model_log_joint_terms(const ExposureMatrix& x, const Matrix& w, const Vector& a,
                                    const Matrix& h, const Hyperparameters& hp) {
    const Index n = x.rows();
    const Index p = x.cols();
    const int k = static_cast<int>(a.size());
    if (w.rows() != n || w.cols() != k || h.rows() != k || h.cols() != p)
        throw std::invalid_argument("model_log_joint: dimensions disagree");
    if ((w.array() <= 0).any() || (a.array() <= 0).any() || (h.array() <= 0).any())
        throw std::invalid_argument("model_log_joint: w, a, h must be strictly positive");
    hp.validate();

    LogJointTerms out;
    const Matrix lambda = w * a.asDiagonal() * h;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) {
            const double xv = x.values()(i, j);
            const double lv = lambda(i, j);
            const double term =
                (xv > 0.0 ? xv * std::log(lv) : 0.0) - lv - log_gamma(xv + 1.0);
            if (!std::isfinite(term)) {
                std::ostringstream msg;
                msg << "model_log_joint: non-finite Poisson term at (" << i << ", " << j << ")";
                throw NumericalError(msg.str());
            }
            out.likelihood += term;
        }
    }

    const double alpha_a = hp.alpha_a(k);
    for (Index i = 0; i < n; ++i)
        for (int c = 0; c < k; ++c) out.prior_w += gamma_log_pdf(w(i, c), hp.alpha_w, hp.beta_w);
    for (int c = 0; c < k; ++c) out.prior_a += gamma_log_pdf(a(c), alpha_a, hp.beta_a);
    for (int c = 0; c < k; ++c)
        for (Index j = 0; j < p; ++j) out.prior_h += gamma_log_pdf(h(c, j), hp.alpha_h, hp.beta_h);

    if (!std::isfinite(out.prior_w) || !std::isfinite(out.prior_a) || !std::isfinite(out.prior_h))
        throw NumericalError("model_log_joint: non-finite prior term");
    return out;
}

double model_log_joint(const ExposureMatrix& x, const Matrix& w, const Vector& a,
                       const Matrix& h, const Hyperparameters& hp) {
    return model_log_joint_terms(x, w, a, h, hp).total();
}

}  // namespace bn2mf
