#include "vi.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <sstream>
#include <thread>

#include "rng.hpp"
#include "special_functions.hpp"

namespace bn2mf {

namespace {

int resolved_k(const ExposureMatrix& x, const Hyperparameters& hp) {
    const int k = hp.k_init > 0 ? hp.k_init : static_cast<int>(x.cols());
    if (k < 1) throw std::invalid_argument("fit: k_init must be at least 1");
    return k;
}

// Shared per-sweep quantities. The responsibilities never materialize as an
// N x P x K tensor: phi_ijk = aw_ik * bh_kj / denom_ij exactly, because the
// row/column stabilization shifts cancel between numerator and denominator.
struct SweepWork {
    Matrix eln_w;  // E[ln W], N x K
    Vector eln_a;  // E[ln a], K
    Matrix eln_h;  // E[ln H], K x P
    Matrix mean_w;
    Vector mean_a;
    Matrix mean_h;
    Matrix aw;         // exp(eln_w + eln_a' - row_shift), N x K
    Matrix bh;         // exp(eln_h - col_shift), K x P
    Vector row_shift;  // N
    Vector col_shift;  // P
    Matrix denom;      // aw * bh, N x P (stabilized responsibility normalizer)
};

SweepWork compute_work(const ExposureMatrix& x, const VariationalState& state) {
    SweepWork w;
    w.eln_w = expected_log(state.w);
    w.eln_a = expected_log(state.a);
    w.eln_h = expected_log(state.h);
    w.mean_w = expected_value(state.w);
    w.mean_a = expected_value(state.a);
    w.mean_h = expected_value(state.h);

    Matrix lwa = w.eln_w;
    lwa.rowwise() += w.eln_a.transpose();
    w.row_shift = lwa.rowwise().maxCoeff();
    w.aw = (lwa.colwise() - w.row_shift).array().exp();
    w.col_shift = w.eln_h.colwise().maxCoeff();
    w.bh = (w.eln_h.rowwise() - w.col_shift.transpose()).array().exp();
    w.denom = w.aw * w.bh;

    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) {
            const double d = w.denom(i, j);
            if (x.values()(i, j) > 0.0 && !(d > 0.0 && std::isfinite(d))) {
                std::ostringstream msg;
                msg << "cavi: responsibility normalizer is " << d << " at (" << i << ", " << j
                    << ")";
                throw NumericalError(msg.str());
            }
        }
    }
    return w;
}

// Tempered write-back of one block's untempered optimum:
// shape = (shape* - 1)/T + 1, rate = rate*/T.
template <typename Arr>
void temper_into(const Arr& shape_opt, const Arr& rate_opt, double t, Arr& shape_out,
                 Arr& rate_out) {
    shape_out = ((shape_opt.array() - 1.0) / t + 1.0).matrix();
    rate_out = (rate_opt.array() / t).matrix();
}

void apply_update(const ExposureMatrix& x, const SweepWork& work, const Hyperparameters& hp,
                  VariationalState& state) {
    const double t = state.temperature;
    const int k = state.k();

    // x / denom is zero wherever x is zero, so only observed cells allocate.
    const Matrix ratio = (x.values().array() / work.denom.array()).matrix();
    const Matrix sw = work.aw.array() * (ratio * work.bh.transpose()).array();
    const Matrix sh = work.bh.array() * (work.aw.transpose() * ratio).array();
    if (!sw.allFinite() || !sh.allFinite())
        throw NumericalError("cavi: non-finite responsibility sums");
    const Vector sa = sw.colwise().sum();

    // q(W): rates from the current a and h means.
    const Vector h_rowsum = work.mean_h.rowwise().sum();
    const Vector rate_w_col = (hp.beta_w + (work.mean_a.array() * h_rowsum.array())).matrix();
    Matrix shape_w = (sw.array() + hp.alpha_w).matrix();
    Matrix rate_w(state.n(), k);
    rate_w.rowwise() = rate_w_col.transpose();
    temper_into(shape_w, rate_w, t, state.w.shape, state.w.rate);
    const Matrix mean_w_new = expected_value(state.w);
    const Vector w_colsum = mean_w_new.colwise().sum();

    // q(a): rates from the fresh W means and current h means.
    Vector shape_a = (sa.array() + hp.alpha_a(k)).matrix();
    Vector rate_a = (hp.beta_a + (w_colsum.array() * h_rowsum.array())).matrix();
    temper_into(shape_a, rate_a, t, state.a.shape, state.a.rate);
    const Vector mean_a_new = expected_value(state.a);

    // q(H): rates from the fresh W and a means.
    Matrix shape_h = (sh.array() + hp.alpha_h).matrix();
    const Vector rate_h_row = (hp.beta_h + (w_colsum.array() * mean_a_new.array())).matrix();
    Matrix rate_h(k, state.p());
    rate_h.colwise() = rate_h_row;
    temper_into(shape_h, rate_h, t, state.h.shape, state.h.rate);

    if (!state.w.shape.allFinite() || !state.a.shape.allFinite() || !state.h.shape.allFinite())
        throw NumericalError("cavi: non-finite variational shapes after sweep");
}

// Expectation of the prior log-density under q for one block.
template <typename ShapeArr, typename ElnArr>
double prior_expectation(const ShapeArr& mean, const ElnArr& eln, double alpha, double beta) {
    const double count = static_cast<double>(mean.size());
    return count * (alpha * std::log(beta) - log_gamma(alpha)) + (alpha - 1.0) * eln.sum() -
           beta * mean.sum();
}

// E_q[ln q] for one Gamma block (negative entropy).
template <typename Arr, typename ElnArr>
double negative_entropy(const Arr& shape, const Arr& rate, const ElnArr& eln) {
    double total = 0.0;
    const auto* s = shape.data();
    const auto* r = rate.data();
    const auto* e = eln.data();
    const auto count = static_cast<std::size_t>(shape.size());
    for (std::size_t i = 0; i < count; ++i)
        total += s[i] * std::log(r[i]) - log_gamma(s[i]) + (s[i] - 1.0) * e[i] - s[i];
    return total;
}

struct ElboParts {
    double core = 0.0;    // likelihood bound + prior expectations
    double negent = 0.0;  // sum of E_q[ln q] over the three blocks
    double at(double t) const { return core - t * negent; }
};

ElboParts elbo_parts(const ExposureMatrix& x, const SweepWork& work,
                     const VariationalState& state, const Hyperparameters& hp) {
    // sum_ij x_ij ln(sum_k exp(eln terms)); the shifts restore the
    // unstabilized normalizer.
    double lik = 0.0;
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) {
            const double xv = x.values()(i, j);
            if (xv > 0.0)
                lik += xv * (work.row_shift(i) + work.col_shift(j) + std::log(work.denom(i, j)));
        }
    }
    // sum_ij E[W] diag(E[a]) E[H] is separable over components.
    const Vector w_colsum = work.mean_w.colwise().sum();
    const Vector h_rowsum = work.mean_h.rowwise().sum();
    lik -= (w_colsum.array() * work.mean_a.array() * h_rowsum.array()).sum();
    lik -= x.log_gamma_data_term();
    if (!std::isfinite(lik)) throw NumericalError("elbo: non-finite likelihood term");

    const int k = state.k();
    const double pw = prior_expectation(work.mean_w, work.eln_w, hp.alpha_w, hp.beta_w);
    const double pa = prior_expectation(work.mean_a, work.eln_a, hp.alpha_a(k), hp.beta_a);
    const double ph = prior_expectation(work.mean_h, work.eln_h, hp.alpha_h, hp.beta_h);
    if (!std::isfinite(pw)) throw NumericalError("elbo: non-finite W prior term");
    if (!std::isfinite(pa)) throw NumericalError("elbo: non-finite a prior term");
    if (!std::isfinite(ph)) throw NumericalError("elbo: non-finite H prior term");

    const double qw = negative_entropy(state.w.shape, state.w.rate, work.eln_w);
    const double qa = negative_entropy(state.a.shape, state.a.rate, work.eln_a);
    const double qh = negative_entropy(state.h.shape, state.h.rate, work.eln_h);
    if (!std::isfinite(qw) || !std::isfinite(qa) || !std::isfinite(qh))
        throw NumericalError("elbo: non-finite entropy term");

    return ElboParts{lik + pw + pa + ph, qw + qa + qh};
}

struct RestartOutcome {
    VariationalState state;
    long sweeps = 0;
    bool converged = false;
};

RestartOutcome run_restart(const ExposureMatrix& x, const Hyperparameters& hp,
                           const FitConfig& cfg, std::uint64_t seed) {
    RestartOutcome out;
    out.state = init_state(x, hp, seed, cfg.t0);
    VariationalState& state = out.state;
    std::vector<double>& trace = state.elbo_trace;

    long t = 0;
    for (;; ++t) {
        const SweepWork work = compute_work(x, state);
        if (t > 0) {
            // Objective of the state produced by sweep t-1, at the
            // temperature that produced it.
            const ElboParts parts = elbo_parts(x, work, state, hp);
            trace.push_back(parts.at(state.temperature));
            const std::size_t m = trace.size();
            // Two consecutive untempered sweeps within tolerance.
            if (t - 1 >= cfg.anneal_sweeps + 1 && m >= 2) {
                const double prev = trace[m - 2];
                const double rel =
                    std::abs(trace[m - 1] - prev) / std::max(std::abs(prev), 1e-12);
                if (rel < cfg.rel_tol) {
                    out.converged = true;
                    break;
                }
            }
            if (t >= cfg.max_sweeps) break;
        }
        state.temperature = anneal_temperature(t, cfg);
        apply_update(x, work, hp, state);
    }
    out.sweeps = t;
    return out;
}

}  // namespace

void FitConfig::validate() const {
    if (n_restarts < 1 || max_sweeps < 1 || anneal_sweeps < 0 || n_threads < 1)
        throw std::invalid_argument("FitConfig: counts must be positive");
    if (!(rel_tol > 0.0 && rel_tol < 1.0))
        throw std::invalid_argument("FitConfig: rel_tol must be in (0, 1)");
    if (t0 < 1.0) throw std::invalid_argument("FitConfig: t0 must be >= 1");
    if (!(prune_rel_threshold > 0.0 && prune_rel_threshold < 1.0))
        throw std::invalid_argument("FitConfig: prune_rel_threshold must be in (0, 1)");
}

VariationalState init_state(const ExposureMatrix& x, const Hyperparameters& hp,
                            std::uint64_t seed, double t0) {
    hp.validate();
    const int k = resolved_k(x, hp);
    const Index n = x.rows();
    const Index p = x.cols();
    Rng rng(seed);

    VariationalState state;
    state.w.shape.resize(n, k);
    for (Index i = 0; i < n; ++i)
        for (int c = 0; c < k; ++c) state.w.shape(i, c) = hp.alpha_w * rng.uniform(0.5, 1.5);
    state.w.rate = Matrix::Constant(n, k, hp.beta_w);

    // The rank-weight block starts at unit shape, not at its sparse prior
    // shape: digamma is so steep near zero that multiplicative noise on 1/K
    // would hand the first sweep's responsibilities to a single component and
    // starve the rest. Sparsity still acts through the updates.
    state.a.shape.resize(k);
    for (int c = 0; c < k; ++c) state.a.shape(c) = rng.uniform(0.5, 1.5);
    state.a.rate = Vector::Constant(k, hp.beta_a);

    state.h.shape.resize(k, p);
    for (int c = 0; c < k; ++c)
        for (Index j = 0; j < p; ++j) state.h.shape(c, j) = hp.alpha_h * rng.uniform(0.5, 1.5);
    state.h.rate = Matrix::Constant(k, p, hp.beta_h);

    state.temperature = t0;
    state.active.assign(static_cast<std::size_t>(k), true);
    return state;
}

VariationalState cavi_sweep(const ExposureMatrix& x, VariationalState state,
                            const Hyperparameters& hp) {
    state.check_consistent();
    const SweepWork work = compute_work(x, state);
    apply_update(x, work, hp, state);
    return state;
}

double compute_elbo(const ExposureMatrix& x, const VariationalState& state,
                    const Hyperparameters& hp) {
    state.check_consistent();
    const SweepWork work = compute_work(x, state);
    return elbo_parts(x, work, state, hp).at(state.temperature);
}

double anneal_temperature(long sweep_index, const FitConfig& cfg) {
    if (sweep_index < 0) throw std::invalid_argument("anneal_temperature: negative sweep index");
    if (cfg.anneal_sweeps == 0) return 1.0;
    const double frac =
        1.0 - static_cast<double>(sweep_index) / static_cast<double>(cfg.anneal_sweeps);
    return 1.0 + (cfg.t0 - 1.0) * std::max(0.0, frac);
}

std::pair<int, std::vector<bool>> effective_rank(const VariationalState& state,
                                                 const FitConfig& cfg) {
    const Vector mean_a = expected_value(state.a);
    const double cutoff = cfg.prune_rel_threshold * mean_a.maxCoeff();
    std::vector<bool> mask(static_cast<std::size_t>(state.k()));
    int count = 0;
    for (int c = 0; c < state.k(); ++c) {
        mask[static_cast<std::size_t>(c)] = mean_a(c) >= cutoff;
        if (mask[static_cast<std::size_t>(c)]) ++count;
    }
    return {count, mask};
}

FactorizationResult fit(const ExposureMatrix& x, const Hyperparameters& hp,
                        const FitConfig& cfg) {
    hp.validate();
    cfg.validate();
    if (x.rows() < 2 || x.cols() < 2)
        throw std::invalid_argument("fit: need at least a 2 x 2 data matrix");

    std::vector<std::optional<RestartOutcome>> outcomes(static_cast<std::size_t>(cfg.n_restarts));
    std::vector<std::string> errors(static_cast<std::size_t>(cfg.n_restarts));

    const auto run_one = [&](int r) {
        try {
            outcomes[static_cast<std::size_t>(r)] =
                run_restart(x, hp, cfg, cfg.seed + static_cast<std::uint64_t>(r));
        } catch (const NumericalError& e) {
            errors[static_cast<std::size_t>(r)] =
                "restart " + std::to_string(r) + ": " + e.what();
        }
    };

    if (cfg.n_threads <= 1 || cfg.n_restarts == 1) {
        for (int r = 0; r < cfg.n_restarts; ++r) run_one(r);
    } else {
        std::atomic<int> next{0};
        const int workers = std::min(cfg.n_threads, cfg.n_restarts);
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int wkr = 0; wkr < workers; ++wkr)
            pool.emplace_back([&] {
                for (int r = next.fetch_add(1); r < cfg.n_restarts; r = next.fetch_add(1))
                    run_one(r);
            });
        for (auto& th : pool) th.join();
    }

    int best = -1;
    for (int r = 0; r < cfg.n_restarts; ++r) {
        const auto& oc = outcomes[static_cast<std::size_t>(r)];
        if (!oc) continue;
        const double e = oc->state.elbo_trace.back();
        if (best < 0 || e > outcomes[static_cast<std::size_t>(best)]->state.elbo_trace.back())
            best = r;
    }
    if (best < 0) {
        std::string joined = "fit: all restarts failed";
        for (const auto& e : errors)
            if (!e.empty()) joined += "; " + e;
        throw NumericalError(joined);
    }

    RestartOutcome& chosen = *outcomes[static_cast<std::size_t>(best)];
    FactorizationResult result;
    result.state = std::move(chosen.state);
    auto [k_eff, mask] = effective_rank(result.state, cfg);
    result.state.active = mask;
    result.k_effective = k_eff;
    result.elbo = result.state.elbo_trace.back();
    result.sweeps_used = chosen.sweeps;
    result.restart_index = best;
    result.converged = chosen.converged;
    for (auto& e : errors)
        if (!e.empty()) result.restart_errors.push_back(std::move(e));

    const Matrix mean_w = expected_value(result.state.w);
    const Vector mean_a = expected_value(result.state.a);
    const Matrix mean_h = expected_value(result.state.h);
    result.scores.resize(x.rows(), k_eff);
    result.loadings.resize(k_eff, x.cols());
    int dst = 0;
    for (int c = 0; c < result.state.k(); ++c) {
        if (!mask[static_cast<std::size_t>(c)]) continue;
        result.scores.col(dst) = mean_w.col(c) * mean_a(c);
        result.loadings.row(dst) = mean_h.row(c);
        ++dst;
    }
    return result;
}

std::vector<Matrix> responsibilities(const ExposureMatrix& x, const VariationalState& state) {
    state.check_consistent();
    const SweepWork work = compute_work(x, state);
    std::vector<Matrix> phi;
    phi.reserve(static_cast<std::size_t>(state.k()));
    for (int c = 0; c < state.k(); ++c) {
        Matrix m = (work.aw.col(c) * work.bh.row(c)).array() / work.denom.array();
        m = (x.values().array() > 0.0).select(m, 0.0);
        phi.push_back(std::move(m));
    }
    return phi;
}

}  // namespace bn2mf
