#include "baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rng.hpp"
#include "special_functions.hpp"

namespace bn2mf {

namespace {

constexpr double kFloor = 1e-10;

Matrix random_factor(Index rows, Index cols, double scale, Rng& rng) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = scale * rng.uniform_pos();
    return m;
}

double squared_error(const Matrix& x, const Matrix& w, const Matrix& h) {
    return (x - w * h).squaredNorm();
}

// Generalized KL divergence D(X || WH); x log x terms vanish at x = 0.
double kl_divergence(const Matrix& x, const Matrix& wh) {
    double total = 0.0;
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) {
            const double xv = x(i, j);
            const double mv = wh(i, j);
            total += (xv > 0.0 ? xv * std::log(xv / mv) - xv : 0.0) + mv;
        }
    }
    return total;
}

double poisson_loglik(const ExposureMatrix& x, const Matrix& wh) {
    double total = 0.0;
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) {
            const double xv = x.values()(i, j);
            const double mv = std::max(wh(i, j), kFloor);
            total += (xv > 0.0 ? xv * std::log(mv) : 0.0) - mv;
        }
    }
    return total - x.log_gamma_data_term();
}

void check_nmf_args(const ExposureMatrix& x, int k) {
    if (k < 1 || k > x.cols())
        throw std::invalid_argument("nmf: rank must be between 1 and the column count");
}

struct NmfRun {
    Matrix w, h;
    std::vector<double> trace;
    bool converged = false;
    long iterations = 0;
};

template <typename Step, typename Objective>
NmfRun run_multiplicative(const Matrix& x, int k, std::uint64_t seed, long max_iter, double tol,
                          Step step, Objective objective) {
    Rng rng(seed);
    // Uniform init scaled so mean(WH) matches mean(X).
    const double scale = 2.0 * std::sqrt(std::max(x.mean(), kFloor) / k);
    NmfRun run;
    run.w = random_factor(x.rows(), k, scale, rng);
    run.h = random_factor(k, x.cols(), scale, rng);
    double prev = objective(x, run.w, run.h);
    run.trace.push_back(prev);
    for (long it = 1; it <= max_iter; ++it) {
        step(x, run.w, run.h);
        const double cur = objective(x, run.w, run.h);
        run.trace.push_back(cur);
        run.iterations = it;
        if (std::abs(prev - cur) < tol * std::max(std::abs(prev), 1e-12)) {
            run.converged = true;
            break;
        }
        prev = cur;
    }
    return run;
}

template <typename Step, typename Objective>
BaselineResult best_of_restarts(const ExposureMatrix& x, int k, std::uint64_t seed, long max_iter,
                                double tol, BaselineMethod method, Step step,
                                Objective objective) {
    constexpr int kRestarts = 5;
    NmfRun best;
    double best_obj = 0.0;
    for (int r = 0; r < kRestarts; ++r) {
        NmfRun run = run_multiplicative(x.values(), k, derive_seed(seed, r), max_iter, tol, step,
                                        objective);
        const double obj = run.trace.back();
        if (r == 0 || obj < best_obj) {
            best_obj = obj;
            best = std::move(run);
        }
    }
    BaselineResult result;
    result.method = method;
    result.scores = std::move(best.w);
    result.loadings = std::move(best.h);
    result.k = k;
    result.converged = best.converged;
    result.iterations = best.iterations;
    result.objective_trace = std::move(best.trace);
    result.selection_stat = 0.0;
    return result;
}

// Covariance with the ML (1/N) normalization, matching the FA likelihood.
Matrix ml_covariance(const Matrix& x) {
    const Matrix centered = x.rowwise() - x.colwise().mean();
    Matrix s = (centered.transpose() * centered) / static_cast<double>(x.rows());
    return s;
}

}  // namespace

std::string baseline_method_name(BaselineMethod method) {
    switch (method) {
        case BaselineMethod::NmfL2: return "nmf_l2";
        case BaselineMethod::NmfPoisson: return "nmf_p";
        case BaselineMethod::Pca: return "pca";
        case BaselineMethod::FactorAnalysis: return "fa";
    }
    return "unknown";
}

BaselineResult nmf_l2(const ExposureMatrix& x, int k, std::uint64_t seed, long max_iter,
                      double tol) {
    check_nmf_args(x, k);
    const auto step = [](const Matrix& xv, Matrix& w, Matrix& h) {
        h.array() *= (w.transpose() * xv).array() /
                     ((w.transpose() * w) * h).array().max(kFloor);
        w.array() *= (xv * h.transpose()).array() /
                     (w * (h * h.transpose())).array().max(kFloor);
    };
    return best_of_restarts(x, k, seed, max_iter, tol, BaselineMethod::NmfL2, step,
                            [](const Matrix& xv, const Matrix& w, const Matrix& h) {
                                return squared_error(xv, w, h);
                            });
}

BaselineResult nmf_poisson(const ExposureMatrix& x, int k, std::uint64_t seed, long max_iter,
                           double tol) {
    check_nmf_args(x, k);
    const auto step = [](const Matrix& xv, Matrix& w, Matrix& h) {
        const Matrix ratio_w = xv.array() / (w * h).array().max(kFloor);
        const Vector h_rowsum = h.rowwise().sum();
        w.array() *= (ratio_w * h.transpose()).array();
        w.array().rowwise() /= h_rowsum.transpose().array().max(kFloor);
        w = w.cwiseMax(kFloor);
        const Matrix ratio_h = xv.array() / (w * h).array().max(kFloor);
        const Vector w_colsum = w.colwise().sum();
        h.array() *= (w.transpose() * ratio_h).array();
        h.array().colwise() /= w_colsum.array().max(kFloor);
        h = h.cwiseMax(kFloor);
    };
    return best_of_restarts(x, k, seed, max_iter, tol, BaselineMethod::NmfPoisson, step,
                            [](const Matrix& xv, const Matrix& w, const Matrix& h) {
                                return kl_divergence(xv, (w * h).eval());
                            });
}

BaselineResult pca_retain(const ExposureMatrix& x, double variance_threshold) {
    if (!(variance_threshold > 0.0 && variance_threshold <= 1.0))
        throw std::invalid_argument("pca_retain: threshold must be in (0, 1]");
    const Matrix centered = x.values().rowwise() - x.values().colwise().mean();
    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector sv = svd.singularValues();
    const double total = sv.squaredNorm();
    if (total == 0.0) throw std::invalid_argument("pca_retain: data has no variance");

    int k = 0;
    double cum = 0.0;
    for (Index i = 0; i < sv.size(); ++i) {
        cum += sv(i) * sv(i);
        ++k;
        if (cum / total >= variance_threshold) break;
    }

    BaselineResult result;
    result.method = BaselineMethod::Pca;
    result.k = k;
    result.scores = svd.matrixU().leftCols(k) * sv.head(k).asDiagonal();
    result.loadings = svd.matrixV().leftCols(k).transpose();
    result.selection_stat = cum / total;
    result.converged = true;
    result.iterations = 0;
    return result;
}

BaselineResult factor_analysis(const ExposureMatrix& x, int k, long max_iter, double tol) {
    if (k < 1) throw std::invalid_argument("factor_analysis: rank must be positive");
    const Index p = x.cols();
    const auto n = static_cast<double>(x.rows());
    if (k >= p) throw std::invalid_argument("factor_analysis: rank must be below the column count");

    const Matrix s = ml_covariance(x.values());
    constexpr double kPsiFloor = 1e-6;

    // Principal-component start.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
    Matrix lambda(p, k);
    for (int c = 0; c < k; ++c) {
        const Index src = p - 1 - c;  // eigenvalues ascend
        const double ev = std::max(eig.eigenvalues()(src), kPsiFloor);
        lambda.col(c) = eig.eigenvectors().col(src) * std::sqrt(0.9 * ev);
    }
    Vector psi = (s.diagonal() - lambda.rowwise().squaredNorm()).cwiseMax(kPsiFloor);

    const double lik_const = static_cast<double>(p) * std::log(2.0 * M_PI);
    const auto loglik = [&](const Matrix& lam, const Vector& ps) {
        const Matrix sigma = lam * lam.transpose() + Matrix(ps.asDiagonal());
        Eigen::LLT<Matrix> llt(sigma);
        if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
        const Matrix l = llt.matrixL();
        const double logdet = 2.0 * l.diagonal().array().log().sum();
        const double trace = llt.solve(s).trace();
        return -0.5 * n * (lik_const + logdet + trace);
    };

    BaselineResult result;
    result.method = BaselineMethod::FactorAnalysis;
    result.k = k;
    double prev = loglik(lambda, psi);
    result.objective_trace.push_back(prev);
    bool heywood = false;
    long it = 0;
    for (it = 1; it <= max_iter; ++it) {
        const Matrix sigma = lambda * lambda.transpose() + Matrix(psi.asDiagonal());
        const Matrix beta = sigma.ldlt().solve(lambda).transpose();  // k x p
        const Matrix ezz =
            Matrix::Identity(k, k) - beta * lambda + beta * s * beta.transpose();
        const Matrix sbt = s * beta.transpose();  // p x k
        lambda = sbt * ezz.ldlt().solve(Matrix::Identity(k, k));
        Vector psi_new = (s - lambda * sbt.transpose()).diagonal();
        for (Index j = 0; j < p; ++j) {
            if (psi_new(j) < kPsiFloor) {
                psi_new(j) = kPsiFloor;
                heywood = true;
            }
        }
        psi = psi_new;
        const double cur = loglik(lambda, psi);
        result.objective_trace.push_back(cur);
        if (std::isfinite(cur) && std::abs(cur - prev) < tol * std::max(std::abs(prev), 1.0)) {
            result.converged = true;
            prev = cur;
            break;
        }
        prev = cur;
    }
    result.iterations = it > max_iter ? max_iter : it;
    result.heywood = heywood;

    // Regression-method scores on centered data.
    const Matrix sigma = lambda * lambda.transpose() + Matrix(psi.asDiagonal());
    const Matrix beta = sigma.ldlt().solve(lambda).transpose();
    const Matrix centered = x.values().rowwise() - x.values().colwise().mean();
    result.scores = centered * beta.transpose();
    result.loadings = lambda.transpose();
    result.selection_stat = prev;  // log-likelihood; BIC applied by the caller
    return result;
}

double bic_of(const ExposureMatrix& x, const BaselineResult& result) {
    const auto n = static_cast<double>(x.rows());
    const auto p = static_cast<double>(x.cols());
    const double k = result.k;
    switch (result.method) {
        case BaselineMethod::NmfL2: {
            const double rss = squared_error(x.values(), result.scores, result.loadings);
            return n * p * std::log(std::max(rss, kFloor) / (n * p)) +
                   k * (n + p) * std::log(n * p);
        }
        case BaselineMethod::NmfPoisson: {
            const Matrix wh = result.scores * result.loadings;
            return -2.0 * poisson_loglik(x, wh) + k * (n + p) * std::log(n * p);
        }
        case BaselineMethod::FactorAnalysis: {
            const double params = p * k + p - k * (k - 1.0) / 2.0;
            return -2.0 * result.selection_stat + params * std::log(n);
        }
        case BaselineMethod::Pca:
            throw std::invalid_argument("bic_of: PCA uses variance retention, not BIC");
    }
    throw std::invalid_argument("bic_of: unknown method");
}

BaselineResult select_by_bic(const ExposureMatrix& x, BaselineMethod method,
                             const std::vector<int>& k_candidates, std::uint64_t seed) {
    if (k_candidates.empty()) throw std::invalid_argument("select_by_bic: no candidate ranks");
    if (method == BaselineMethod::Pca)
        throw std::invalid_argument("select_by_bic: PCA selects by variance, not BIC");

    std::vector<int> candidates = k_candidates;
    std::sort(candidates.begin(), candidates.end());

    bool have_best = false;
    BaselineResult best;
    double best_bic = 0.0;
    std::string failures;
    for (int k : candidates) {
        try {
            BaselineResult candidate;
            switch (method) {
                case BaselineMethod::NmfL2: candidate = nmf_l2(x, k, seed); break;
                case BaselineMethod::NmfPoisson: candidate = nmf_poisson(x, k, seed); break;
                case BaselineMethod::FactorAnalysis: candidate = factor_analysis(x, k); break;
                default: break;
            }
            const double bic = bic_of(x, candidate);
            candidate.selection_stat = bic;
            // Strict comparison: ties keep the earlier (smaller) rank.
            if (!have_best || bic < best_bic) {
                best = std::move(candidate);
                best_bic = bic;
                have_best = true;
            }
        } catch (const std::exception& e) {
            if (!failures.empty()) failures += "; ";
            failures += "k=" + std::to_string(k) + ": " + e.what();
        }
    }
    if (!have_best)
        throw NumericalError("select_by_bic: all candidates failed (" + failures + ")");
    return best;
}

}  // namespace bn2mf
