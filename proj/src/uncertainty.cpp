#include "uncertainty.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "metrics.hpp"
#include "rng.hpp"

namespace bn2mf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Type-7 quantile (linear interpolation between order statistics) of a
// sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= n) return sorted[n - 1];
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

void validate_level(double level) {
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("confidence level must be in (0, 1)");
}

}  // namespace

std::pair<Matrix, Matrix> normalize_and_scale(const Matrix& scores, const Matrix& loadings) {
    if (scores.cols() != loadings.rows())
        throw std::invalid_argument("normalize_and_scale: inner dimensions disagree");
    const int k = static_cast<int>(loadings.rows());
    Matrix scaled = scores;
    Matrix normalized = loadings;
    for (int c = 0; c < k; ++c) {
        const double norm = loadings.row(c).cwiseAbs().sum();
        if (!(norm > 0.0))
            throw std::invalid_argument("normalize_and_scale: zero-norm loading row " +
                                        std::to_string(c));
        normalized.row(c) /= norm;
        scaled.col(c) *= norm;
    }
    return {std::move(scaled), std::move(normalized)};
}

VariationalState active_substate(const VariationalState& state) {
    if (state.active.empty() || static_cast<int>(state.active.size()) != state.k())
        throw std::invalid_argument("active_substate: state has no component mask");
    int k_eff = 0;
    for (bool b : state.active) k_eff += b ? 1 : 0;
    VariationalState out;
    out.temperature = state.temperature;
    out.elbo_trace = state.elbo_trace;
    out.w.shape.resize(state.n(), k_eff);
    out.w.rate.resize(state.n(), k_eff);
    out.a.shape.resize(k_eff);
    out.a.rate.resize(k_eff);
    out.h.shape.resize(k_eff, state.p());
    out.h.rate.resize(k_eff, state.p());
    int dst = 0;
    for (int c = 0; c < state.k(); ++c) {
        if (!state.active[static_cast<std::size_t>(c)]) continue;
        out.w.shape.col(dst) = state.w.shape.col(c);
        out.w.rate.col(dst) = state.w.rate.col(c);
        out.a.shape(dst) = state.a.shape(c);
        out.a.rate(dst) = state.a.rate(c);
        out.h.shape.row(dst) = state.h.shape.row(c);
        out.h.rate.row(dst) = state.h.rate.row(c);
        ++dst;
    }
    out.active.assign(static_cast<std::size_t>(k_eff), true);
    return out;
}

ScoreIntervals variational_ci(const VariationalState& state, long n_draws, std::uint64_t seed,
                              double level) {
    state.check_consistent();
    validate_level(level);
    if (n_draws < 2) throw std::invalid_argument("variational_ci: need at least 2 draws");
    const Index n = state.n();
    const int k = state.k();
    const Index p = state.p();

    ScoreIntervals out;
    out.n_draws = n_draws;
    out.level = level;
    if (n_draws < 100) out.warning = "fewer than 100 draws; quantiles will be unstable";

    // Analytic mean: E[W diag(a)] scaled by E[H] row sums.
    const Matrix mean_w = expected_value(state.w);
    const Vector mean_a = expected_value(state.a);
    const Matrix mean_h = expected_value(state.h);
    auto [scaled_mean, norm_loadings] =
        normalize_and_scale(mean_w * mean_a.asDiagonal(), mean_h);
    (void)norm_loadings;
    out.mean = std::move(scaled_mean);

    // One row per draw, one column per (i, k) cell.
    Matrix draws(n_draws, n * k);
    Rng rng(seed);
    Matrix w_draw(n, k);
    Vector a_draw(k);
    Matrix h_draw(k, p);
    for (long d = 0; d < n_draws; ++d) {
        for (Index i = 0; i < n; ++i)
            for (int c = 0; c < k; ++c)
                w_draw(i, c) = rng.gamma(state.w.shape(i, c), state.w.rate(i, c));
        for (int c = 0; c < k; ++c) a_draw(c) = rng.gamma(state.a.shape(c), state.a.rate(c));
        for (int c = 0; c < k; ++c)
            for (Index j = 0; j < p; ++j)
                h_draw(c, j) = rng.gamma(state.h.shape(c, j), state.h.rate(c, j));
        const Vector scale = h_draw.rowwise().sum();
        for (Index i = 0; i < n; ++i)
            for (int c = 0; c < k; ++c)
                draws(d, i * k + c) = w_draw(i, c) * a_draw(c) * scale(c);
    }

    out.lower.resize(n, k);
    out.upper.resize(n, k);
    out.missing = Matrix::Zero(n, k);
    const double q_lo = (1.0 - level) / 2.0;
    const double q_hi = 1.0 - q_lo;
    std::vector<double> column(static_cast<std::size_t>(n_draws));
    for (Index i = 0; i < n; ++i) {
        for (int c = 0; c < k; ++c) {
            for (long d = 0; d < n_draws; ++d)
                column[static_cast<std::size_t>(d)] = draws(d, i * k + c);
            std::sort(column.begin(), column.end());
            out.lower(i, c) = quantile_sorted(column, q_lo);
            out.upper(i, c) = quantile_sorted(column, q_hi);
        }
    }
    return out;
}

ScoreIntervals bootstrap_ci(const ExposureMatrix& x, const BootstrapFitter& fitter, long n_boot,
                            std::uint64_t seed, double level, int n_threads) {
    validate_level(level);
    if (n_boot < 2) throw std::invalid_argument("bootstrap_ci: need at least 2 resamples");
    const Index n = x.rows();

    // Full-data reference solution; bootstrap patterns align against it.
    auto [ref_scores, ref_loadings] = fitter(x, derive_seed(seed, 0));
    auto [ref_scaled, ref_norm] = normalize_and_scale(ref_scores, ref_loadings);
    const int k = static_cast<int>(ref_norm.rows());

    // One slot per resample so accumulation order never depends on worker
    // scheduling.
    struct BootSlot {
        std::vector<Index> idx;
        Matrix aligned;
        bool rank_mismatch = false;
    };
    std::vector<BootSlot> slots(static_cast<std::size_t>(n_boot));

    const auto run_one = [&](long b) {
        BootSlot& slot = slots[static_cast<std::size_t>(b - 1)];
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
        Matrix xb(n, x.cols());
        slot.idx.resize(static_cast<std::size_t>(n));
        std::vector<std::string> row_ids(static_cast<std::size_t>(n));
        for (Index r = 0; r < n; ++r) {
            const auto i = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
            slot.idx[static_cast<std::size_t>(r)] = i;
            xb.row(r) = x.values().row(i);
            row_ids[static_cast<std::size_t>(r)] = x.row_ids()[static_cast<std::size_t>(i)];
        }
        ExposureMatrix boot(std::move(xb), std::move(row_ids), x.col_ids());

        auto [scores_b, loadings_b] = fitter(boot, derive_seed(seed, 1000003ULL + b));
        if (static_cast<int>(loadings_b.rows()) != k) {
            slot.rank_mismatch = true;  // pattern count changed; no correspondence
            return;
        }
        auto [scaled_b, norm_b] = normalize_and_scale(scores_b, loadings_b);
        const Alignment alignment =
            align(ref_norm.transpose(), norm_b.transpose(), /*allow_sign=*/false);
        slot.aligned = apply_alignment(scaled_b, alignment);
    };

    if (n_threads <= 1) {
        for (long b = 1; b <= n_boot; ++b) run_one(b);
    } else {
        std::atomic<long> next{1};
        std::vector<std::thread> pool;
        const int workers = static_cast<int>(std::min<long>(n_threads, n_boot));
        pool.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t)
            pool.emplace_back([&] {
                for (long b = next.fetch_add(1); b <= n_boot; b = next.fetch_add(1)) run_one(b);
            });
        for (auto& th : pool) th.join();
    }

    std::vector<std::vector<double>> samples(static_cast<std::size_t>(n * k));
    long skipped_rank = 0;
    for (const BootSlot& slot : slots) {
        if (slot.rank_mismatch) {
            ++skipped_rank;
            continue;
        }
        for (Index r = 0; r < n; ++r) {
            const Index orig = slot.idx[static_cast<std::size_t>(r)];
            for (int c = 0; c < k; ++c)
                samples[static_cast<std::size_t>(orig * k + c)].push_back(slot.aligned(r, c));
        }
    }

    ScoreIntervals out;
    out.mean = ref_scaled;
    out.n_draws = n_boot;
    out.level = level;
    out.lower = Matrix::Constant(n, k, kNaN);
    out.upper = Matrix::Constant(n, k, kNaN);
    out.missing = Matrix::Zero(n, k);
    if (skipped_rank > 0)
        out.warning = std::to_string(skipped_rank) +
                      " resamples dropped: pattern count differed from the reference";
    const double q_lo = (1.0 - level) / 2.0;
    const double q_hi = 1.0 - q_lo;
    for (Index i = 0; i < n; ++i) {
        for (int c = 0; c < k; ++c) {
            auto& cell = samples[static_cast<std::size_t>(i * k + c)];
            if (cell.empty()) {
                out.missing(i, c) = 1.0;
                continue;
            }
            std::sort(cell.begin(), cell.end());
            out.lower(i, c) = quantile_sorted(cell, q_lo);
            out.upper(i, c) = quantile_sorted(cell, q_hi);
        }
    }
    return out;
}

double coverage(const Matrix& truth, const ScoreIntervals& intervals) {
    if (truth.rows() != intervals.rows() || truth.cols() != intervals.cols())
        throw std::invalid_argument("coverage: dimensions disagree");
    long hits = 0;
    long total = 0;
    for (Index i = 0; i < truth.rows(); ++i) {
        for (Index c = 0; c < truth.cols(); ++c) {
            if (intervals.missing(i, c) != 0.0) continue;
            ++total;
            if (intervals.lower(i, c) <= truth(i, c) && truth(i, c) <= intervals.upper(i, c))
                ++hits;
        }
    }
    if (total == 0) throw std::invalid_argument("coverage: all intervals missing");
    return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace bn2mf
