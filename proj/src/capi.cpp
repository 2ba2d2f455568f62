#include "bn2mf.h"

#include <cstring>
#include <new>
#include <string>

#include "baselines.hpp"
#include "csv.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "simgen.hpp"
#include "uncertainty.hpp"
#include "vi.hpp"

// The matrix handle is a plain labeled matrix: results of PCA/FA carry signed
// entries and interval bounds may be NaN for missing cells, so the exposure
// invariants (finite, non-negative) are enforced only when a handle enters a
// model-facing call.
struct bn2mf_matrix {
    bn2mf::Matrix values;
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;

    bn2mf::ExposureMatrix exposures() const {
        return bn2mf::ExposureMatrix(values, row_ids, col_ids);
    }
};

struct bn2mf_result {
    bn2mf::FactorizationResult fit;
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;
};

struct bn2mf_intervals {
    bn2mf::ScoreIntervals ci;
    std::vector<std::string> row_ids;
};

struct bn2mf_sim {
    bn2mf::SimTruth truth;
};

struct bn2mf_baseline {
    bn2mf::BaselineResult result;
};

namespace {

thread_local std::string g_last_error;

void set_error(const char* what) { g_last_error = what ? what : "unknown error"; }

int fail(int code, const char* what) {
    set_error(what);
    return code;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return BN2MF_OK;
    } catch (const bn2mf::NumericalError& e) {
        return fail(BN2MF_ENUMERIC, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(BN2MF_EINVAL, e.what());
    } catch (const std::runtime_error& e) {
        // Core file errors surface as runtime_error with the path in the text.
        return fail(BN2MF_EIO, e.what());
    } catch (const std::bad_alloc&) {
        return fail(BN2MF_ENUMERIC, "out of memory");
    } catch (const std::exception& e) {
        return fail(BN2MF_EINVAL, e.what());
    }
}

std::vector<std::string> collect_ids(const char* const* ids, int64_t count, const char* prefix) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
        if (ids && ids[i])
            out.emplace_back(ids[i]);
        else
            out.emplace_back(prefix + std::to_string(i + 1));
    }
    return out;
}

std::vector<std::string> sequential(const char* prefix, int64_t n) {
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(n));
    for (int64_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i + 1));
    return ids;
}

std::vector<std::string> pattern_ids(int k) {
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) ids.push_back("pattern" + std::to_string(c + 1));
    return ids;
}

bn2mf_matrix* wrap(bn2mf::Matrix values, std::vector<std::string> row_ids,
                   std::vector<std::string> col_ids) {
    return new bn2mf_matrix{std::move(values), std::move(row_ids), std::move(col_ids)};
}

bn2mf::Hyperparameters convert(const bn2mf_hyperparams& hp) {
    bn2mf::Hyperparameters out;
    out.alpha_w = hp.alpha_w;
    out.beta_w = hp.beta_w;
    out.alpha_h = hp.alpha_h;
    out.beta_h = hp.beta_h;
    out.beta_a = hp.beta_a;
    out.k_init = hp.k_init;
    return out;
}

bn2mf::FitConfig convert(const bn2mf_fit_config& cfg) {
    bn2mf::FitConfig out;
    out.n_restarts = cfg.n_restarts;
    out.max_sweeps = cfg.max_sweeps;
    out.rel_tol = cfg.rel_tol;
    out.t0 = cfg.t0;
    out.anneal_sweeps = cfg.anneal_sweeps;
    out.prune_rel_threshold = cfg.prune_rel_threshold;
    out.seed = cfg.seed;
    out.n_threads = cfg.n_threads;
    return out;
}

}  // namespace

const char* bn2mf_version(void) { return "0.1.0"; }

const char* bn2mf_last_error(void) { return g_last_error.c_str(); }

int bn2mf_matrix_create(int64_t n, int64_t p, const double* values, const char* const* row_ids,
                        const char* const* col_ids, bn2mf_matrix** out) {
    if (!values || !out || n < 1 || p < 1)
        return fail(BN2MF_EINVAL, "bn2mf_matrix_create: bad arguments");
    return guarded([&] {
        bn2mf::Matrix m(n, p);
        std::memcpy(m.data(), values, sizeof(double) * static_cast<std::size_t>(n * p));
        *out = wrap(std::move(m), collect_ids(row_ids, n, "r"), collect_ids(col_ids, p, "c"));
    });
}

int bn2mf_matrix_read_csv(const char* path, bn2mf_matrix** out) {
    if (!path || !out) return fail(BN2MF_EINVAL, "bn2mf_matrix_read_csv: bad arguments");
    return guarded([&] {
        const bn2mf::ExposureMatrix loaded = bn2mf::load_csv(path);
        *out = wrap(loaded.values(), loaded.row_ids(), loaded.col_ids());
    });
}

int bn2mf_matrix_write_csv(const bn2mf_matrix* m, const char* path) {
    if (!m || !path) return fail(BN2MF_EINVAL, "bn2mf_matrix_write_csv: bad arguments");
    return guarded([&] { bn2mf::write_csv(path, m->values, m->row_ids, m->col_ids); });
}

int64_t bn2mf_matrix_rows(const bn2mf_matrix* m) { return m ? m->values.rows() : -1; }
int64_t bn2mf_matrix_cols(const bn2mf_matrix* m) { return m ? m->values.cols() : -1; }

int bn2mf_matrix_copy_values(const bn2mf_matrix* m, double* out) {
    if (!m || !out) return fail(BN2MF_EINVAL, "bn2mf_matrix_copy_values: bad arguments");
    std::memcpy(out, m->values.data(),
                sizeof(double) * static_cast<std::size_t>(m->values.size()));
    return BN2MF_OK;
}

const char* bn2mf_matrix_row_id(const bn2mf_matrix* m, int64_t i) {
    if (!m || i < 0 || i >= m->values.rows()) return nullptr;
    return m->row_ids[static_cast<std::size_t>(i)].c_str();
}

const char* bn2mf_matrix_col_id(const bn2mf_matrix* m, int64_t j) {
    if (!m || j < 0 || j >= m->values.cols()) return nullptr;
    return m->col_ids[static_cast<std::size_t>(j)].c_str();
}

int bn2mf_matrix_product(const bn2mf_matrix* a, const bn2mf_matrix* b, bn2mf_matrix** out) {
    if (!a || !b || !out) return fail(BN2MF_EINVAL, "bn2mf_matrix_product: bad arguments");
    if (a->values.cols() != b->values.rows())
        return fail(BN2MF_EINVAL, "bn2mf_matrix_product: inner dimensions disagree");
    return guarded([&] {
        bn2mf::Matrix m = a->values * b->values;
        *out = wrap(std::move(m), a->row_ids, b->col_ids);
    });
}

int bn2mf_matrix_transpose(const bn2mf_matrix* m, bn2mf_matrix** out) {
    if (!m || !out) return fail(BN2MF_EINVAL, "bn2mf_matrix_transpose: bad arguments");
    return guarded([&] {
        bn2mf::Matrix t = m->values.transpose();
        *out = wrap(std::move(t), m->col_ids, m->row_ids);
    });
}

void bn2mf_matrix_free(bn2mf_matrix* m) { delete m; }

int bn2mf_preprocess(const bn2mf_matrix* x, const double* lod, int scale_sd, bn2mf_matrix** out) {
    if (!x || !out) return fail(BN2MF_EINVAL, "bn2mf_preprocess: bad arguments");
    return guarded([&] {
        std::optional<bn2mf::Vector> limits;
        if (lod) {
            bn2mf::Vector v(x->values.cols());
            for (bn2mf::Index j = 0; j < x->values.cols(); ++j) v(j) = lod[j];
            limits = std::move(v);
        }
        const bn2mf::ExposureMatrix result =
            bn2mf::preprocess(x->exposures(), limits, scale_sd != 0);
        *out = wrap(result.values(), result.row_ids(), result.col_ids());
    });
}

void bn2mf_hyperparams_init(bn2mf_hyperparams* hp) {
    if (!hp) return;
    *hp = bn2mf_hyperparams{1.0, 1.0, 1.0, 1.0, 1.0, 0};
}

void bn2mf_fit_config_init(bn2mf_fit_config* cfg) {
    if (!cfg) return;
    *cfg = bn2mf_fit_config{10, 100000, 1e-6, 2.0, 25, 1e-3, 0, 1};
}

int bn2mf_fit(const bn2mf_matrix* x, const bn2mf_hyperparams* hp, const bn2mf_fit_config* cfg,
              bn2mf_result** out) {
    if (!x || !hp || !cfg || !out) return fail(BN2MF_EINVAL, "bn2mf_fit: bad arguments");
    return guarded([&] {
        auto result = bn2mf::fit(x->exposures(), convert(*hp), convert(*cfg));
        *out = new bn2mf_result{std::move(result), x->row_ids, x->col_ids};
    });
}

int bn2mf_result_rank(const bn2mf_result* r) { return r ? r->fit.k_effective : -1; }
double bn2mf_result_elbo(const bn2mf_result* r) { return r ? r->fit.elbo : 0.0; }
long bn2mf_result_sweeps(const bn2mf_result* r) { return r ? r->fit.sweeps_used : -1; }
int bn2mf_result_restart_index(const bn2mf_result* r) { return r ? r->fit.restart_index : -1; }
int bn2mf_result_converged(const bn2mf_result* r) { return r && r->fit.converged ? 1 : 0; }

long bn2mf_result_trace_length(const bn2mf_result* r) {
    return r ? static_cast<long>(r->fit.state.elbo_trace.size()) : -1;
}

int bn2mf_result_copy_trace(const bn2mf_result* r, double* out) {
    if (!r || !out) return fail(BN2MF_EINVAL, "bn2mf_result_copy_trace: bad arguments");
    std::memcpy(out, r->fit.state.elbo_trace.data(),
                sizeof(double) * r->fit.state.elbo_trace.size());
    return BN2MF_OK;
}

int bn2mf_result_scores(const bn2mf_result* r, bn2mf_matrix** out) {
    if (!r || !out) return fail(BN2MF_EINVAL, "bn2mf_result_scores: bad arguments");
    return guarded(
        [&] { *out = wrap(r->fit.scores, r->row_ids, pattern_ids(r->fit.k_effective)); });
}

int bn2mf_result_loadings(const bn2mf_result* r, bn2mf_matrix** out) {
    if (!r || !out) return fail(BN2MF_EINVAL, "bn2mf_result_loadings: bad arguments");
    return guarded(
        [&] { *out = wrap(r->fit.loadings, pattern_ids(r->fit.k_effective), r->col_ids); });
}

int bn2mf_result_scaled(const bn2mf_result* r, bn2mf_matrix** scaled_scores,
                        bn2mf_matrix** normalized_loadings) {
    if (!r || !scaled_scores || !normalized_loadings)
        return fail(BN2MF_EINVAL, "bn2mf_result_scaled: bad arguments");
    return guarded([&] {
        auto [scaled, normalized] = bn2mf::normalize_and_scale(r->fit.scores, r->fit.loadings);
        *scaled_scores = wrap(std::move(scaled), r->row_ids, pattern_ids(r->fit.k_effective));
        *normalized_loadings =
            wrap(std::move(normalized), pattern_ids(r->fit.k_effective), r->col_ids);
    });
}

void bn2mf_result_free(bn2mf_result* r) { delete r; }

int bn2mf_variational_ci(const bn2mf_result* r, long n_draws, uint64_t seed, double level,
                         bn2mf_intervals** out) {
    if (!r || !out) return fail(BN2MF_EINVAL, "bn2mf_variational_ci: bad arguments");
    return guarded([&] {
        const auto active = bn2mf::active_substate(r->fit.state);
        auto ci = bn2mf::variational_ci(active, n_draws, seed, level);
        *out = new bn2mf_intervals{std::move(ci), r->row_ids};
    });
}

int bn2mf_bootstrap_ci(const bn2mf_matrix* x, int fitter, int k_for_nmf,
                       const bn2mf_fit_config* cfg, long n_boot, uint64_t seed, double level,
                       bn2mf_intervals** out) {
    if (!x || !cfg || !out) return fail(BN2MF_EINVAL, "bn2mf_bootstrap_ci: bad arguments");
    return guarded([&] {
        const bn2mf::FitConfig fit_cfg = convert(*cfg);
        bn2mf::BootstrapFitter run;
        if (fitter == BN2MF_BOOT_BN2MF) {
            run = [fit_cfg](const bn2mf::ExposureMatrix& data, std::uint64_t s) {
                bn2mf::FitConfig local = fit_cfg;
                local.seed = s;
                local.n_threads = 1;  // parallelism lives at the resample level
                auto fitted = bn2mf::fit(data, bn2mf::Hyperparameters{}, local);
                return std::make_pair(fitted.scores, fitted.loadings);
            };
        } else if (fitter == BN2MF_BOOT_NMF_POISSON) {
            if (k_for_nmf < 1)
                throw std::invalid_argument("bootstrap: Poisson NMF needs a fixed rank");
            run = [k_for_nmf](const bn2mf::ExposureMatrix& data, std::uint64_t s) {
                auto fitted = bn2mf::nmf_poisson(data, k_for_nmf, s);
                return std::make_pair(fitted.scores, fitted.loadings);
            };
        } else {
            throw std::invalid_argument("bootstrap: unknown fitter");
        }
        auto ci = bn2mf::bootstrap_ci(x->exposures(), run, n_boot, seed, level,
                                      fit_cfg.n_threads);
        *out = new bn2mf_intervals{std::move(ci), x->row_ids};
    });
}

int64_t bn2mf_intervals_rows(const bn2mf_intervals* ci) { return ci ? ci->ci.rows() : -1; }
int64_t bn2mf_intervals_cols(const bn2mf_intervals* ci) { return ci ? ci->ci.cols() : -1; }
long bn2mf_intervals_draws(const bn2mf_intervals* ci) { return ci ? ci->ci.n_draws : -1; }

const char* bn2mf_intervals_warning(const bn2mf_intervals* ci) {
    return ci ? ci->ci.warning.c_str() : nullptr;
}

int bn2mf_intervals_component(const bn2mf_intervals* ci, int part, bn2mf_matrix** out) {
    if (!ci || !out) return fail(BN2MF_EINVAL, "bn2mf_intervals_component: bad arguments");
    return guarded([&] {
        const bn2mf::Matrix* source = nullptr;
        switch (part) {
            case BN2MF_INTERVAL_LOWER: source = &ci->ci.lower; break;
            case BN2MF_INTERVAL_MEAN: source = &ci->ci.mean; break;
            case BN2MF_INTERVAL_UPPER: source = &ci->ci.upper; break;
            case BN2MF_INTERVAL_MISSING: source = &ci->ci.missing; break;
            default: throw std::invalid_argument("bn2mf_intervals_component: unknown part");
        }
        *out = wrap(*source, ci->row_ids, pattern_ids(static_cast<int>(ci->ci.cols())));
    });
}

void bn2mf_intervals_free(bn2mf_intervals* ci) { delete ci; }

int bn2mf_coverage(const bn2mf_matrix* truth, const bn2mf_matrix* lower,
                   const bn2mf_matrix* upper, double* out) {
    if (!truth || !lower || !upper || !out)
        return fail(BN2MF_EINVAL, "bn2mf_coverage: bad arguments");
    return guarded([&] {
        bn2mf::ScoreIntervals ci;
        ci.lower = lower->values;
        ci.upper = upper->values;
        ci.mean = ci.lower;
        ci.missing = bn2mf::Matrix::Zero(ci.lower.rows(), ci.lower.cols());
        for (bn2mf::Index i = 0; i < ci.lower.rows(); ++i)
            for (bn2mf::Index j = 0; j < ci.lower.cols(); ++j)
                if (std::isnan(ci.lower(i, j)) || std::isnan(ci.upper(i, j)))
                    ci.missing(i, j) = 1.0;
        *out = bn2mf::coverage(truth->values, ci);
    });
}

void bn2mf_sim_spec_init(bn2mf_sim_spec* spec) {
    if (!spec) return;
    *spec = bn2mf_sim_spec{1000, 40, 4, 10, 0.2, 0, 0};
}

int bn2mf_simulate(const bn2mf_sim_spec* spec, bn2mf_sim** out) {
    if (!spec || !out) return fail(BN2MF_EINVAL, "bn2mf_simulate: bad arguments");
    return guarded([&] {
        bn2mf::SimSpec s;
        s.n = spec->n;
        s.p = spec->p;
        s.k = spec->k;
        s.distinct_per_pattern = spec->distinct_per_pattern;
        s.noise_prop = spec->noise_prop;
        s.seed = spec->seed;
        s.noise_scale = spec->per_column_noise ? bn2mf::SimSpec::NoiseScale::PerColumn
                                               : bn2mf::SimSpec::NoiseScale::Grand;
        *out = new bn2mf_sim{bn2mf::gen_dataset(s)};
    });
}

int bn2mf_sim_component(const bn2mf_sim* sim, int part, bn2mf_matrix** out) {
    if (!sim || !out) return fail(BN2MF_EINVAL, "bn2mf_sim_component: bad arguments");
    return guarded([&] {
        const auto n = sim->truth.scores_true.rows();
        const auto p = sim->truth.loadings_true.cols();
        const int k = static_cast<int>(sim->truth.loadings_true.rows());
        switch (part) {
            case BN2MF_SIM_NOISY:
                *out = wrap(sim->truth.x_noisy, sequential("r", n), sequential("c", p));
                break;
            case BN2MF_SIM_CLEAN:
                *out = wrap(sim->truth.x_clean, sequential("r", n), sequential("c", p));
                break;
            case BN2MF_SIM_SCORES:
                *out = wrap(sim->truth.scores_true, sequential("r", n), pattern_ids(k));
                break;
            case BN2MF_SIM_LOADINGS:
                *out = wrap(sim->truth.loadings_true, pattern_ids(k), sequential("c", p));
                break;
            default: throw std::invalid_argument("bn2mf_sim_component: unknown part");
        }
    });
}

double bn2mf_sim_noise_sigma(const bn2mf_sim* sim) { return sim ? sim->truth.noise_sigma : 0.0; }

void bn2mf_sim_free(bn2mf_sim* sim) { delete sim; }

int bn2mf_nmf(const bn2mf_matrix* x, int method, int k, uint64_t seed, long max_iter, double tol,
              bn2mf_baseline** out) {
    if (!x || !out) return fail(BN2MF_EINVAL, "bn2mf_nmf: bad arguments");
    return guarded([&] {
        if (method == BN2MF_BASE_NMF_L2)
            *out = new bn2mf_baseline{bn2mf::nmf_l2(x->exposures(), k, seed, max_iter, tol)};
        else if (method == BN2MF_BASE_NMF_POISSON)
            *out =
                new bn2mf_baseline{bn2mf::nmf_poisson(x->exposures(), k, seed, max_iter, tol)};
        else
            throw std::invalid_argument("bn2mf_nmf: method must be an NMF variant");
    });
}

int bn2mf_pca(const bn2mf_matrix* x, double variance_threshold, bn2mf_baseline** out) {
    if (!x || !out) return fail(BN2MF_EINVAL, "bn2mf_pca: bad arguments");
    return guarded([&] {
        *out = new bn2mf_baseline{bn2mf::pca_retain(x->exposures(), variance_threshold)};
    });
}

int bn2mf_factor_analysis(const bn2mf_matrix* x, int k, long max_iter, double tol,
                          bn2mf_baseline** out) {
    if (!x || !out) return fail(BN2MF_EINVAL, "bn2mf_factor_analysis: bad arguments");
    return guarded([&] {
        *out = new bn2mf_baseline{bn2mf::factor_analysis(x->exposures(), k, max_iter, tol)};
    });
}

int bn2mf_select_by_bic(const bn2mf_matrix* x, int method, const int* k_candidates,
                        int n_candidates, uint64_t seed, bn2mf_baseline** out) {
    if (!x || !k_candidates || n_candidates < 1 || !out)
        return fail(BN2MF_EINVAL, "bn2mf_select_by_bic: bad arguments");
    return guarded([&] {
        bn2mf::BaselineMethod m;
        switch (method) {
            case BN2MF_BASE_NMF_L2: m = bn2mf::BaselineMethod::NmfL2; break;
            case BN2MF_BASE_NMF_POISSON: m = bn2mf::BaselineMethod::NmfPoisson; break;
            case BN2MF_BASE_FA: m = bn2mf::BaselineMethod::FactorAnalysis; break;
            default: throw std::invalid_argument("bn2mf_select_by_bic: method has no BIC");
        }
        std::vector<int> ks(k_candidates, k_candidates + n_candidates);
        *out = new bn2mf_baseline{bn2mf::select_by_bic(x->exposures(), m, ks, seed)};
    });
}

int bn2mf_baseline_rank(const bn2mf_baseline* b) { return b ? b->result.k : -1; }
double bn2mf_baseline_stat(const bn2mf_baseline* b) { return b ? b->result.selection_stat : 0.0; }
int bn2mf_baseline_converged(const bn2mf_baseline* b) {
    return b && b->result.converged ? 1 : 0;
}

int bn2mf_baseline_scores(const bn2mf_baseline* b, bn2mf_matrix** out) {
    if (!b || !out) return fail(BN2MF_EINVAL, "bn2mf_baseline_scores: bad arguments");
    return guarded([&] {
        *out = wrap(b->result.scores, sequential("r", b->result.scores.rows()),
                    pattern_ids(b->result.k));
    });
}

int bn2mf_baseline_loadings(const bn2mf_baseline* b, bn2mf_matrix** out) {
    if (!b || !out) return fail(BN2MF_EINVAL, "bn2mf_baseline_loadings: bad arguments");
    return guarded([&] {
        *out = wrap(b->result.loadings, pattern_ids(b->result.k),
                    sequential("c", b->result.loadings.cols()));
    });
}

void bn2mf_baseline_free(bn2mf_baseline* b) { delete b; }

int bn2mf_relative_error(const bn2mf_matrix* truth, const bn2mf_matrix* estimate, double* out) {
    if (!truth || !estimate || !out)
        return fail(BN2MF_EINVAL, "bn2mf_relative_error: bad arguments");
    return guarded([&] { *out = bn2mf::relative_error(truth->values, estimate->values); });
}

int bn2mf_cosine_distance(const bn2mf_matrix* truth, const bn2mf_matrix* estimate, double* out) {
    if (!truth || !estimate || !out)
        return fail(BN2MF_EINVAL, "bn2mf_cosine_distance: bad arguments");
    return guarded(
        [&] { *out = bn2mf::cosine_distance_columns(truth->values, estimate->values); });
}

int bn2mf_align(const bn2mf_matrix* truth, const bn2mf_matrix* estimate, int allow_sign,
                int* perm, double* signs, double* objective) {
    if (!truth || !estimate || !perm) return fail(BN2MF_EINVAL, "bn2mf_align: bad arguments");
    return guarded([&] {
        const auto alignment = bn2mf::align(truth->values, estimate->values, allow_sign != 0);
        for (std::size_t t = 0; t < alignment.permutation.size(); ++t) {
            perm[t] = alignment.permutation[t];
            if (signs) signs[t] = alignment.signs[t];
        }
        if (objective) *objective = alignment.objective;
    });
}

int bn2mf_apply_alignment(const bn2mf_matrix* estimate, const int* perm, const double* signs,
                          bn2mf_matrix** out) {
    if (!estimate || !perm || !out)
        return fail(BN2MF_EINVAL, "bn2mf_apply_alignment: bad arguments");
    return guarded([&] {
        const auto k = static_cast<std::size_t>(estimate->values.cols());
        bn2mf::Alignment alignment;
        alignment.permutation.assign(perm, perm + k);
        if (signs)
            alignment.signs.assign(signs, signs + k);
        else
            alignment.signs.assign(k, 1.0);
        bn2mf::Matrix aligned = bn2mf::apply_alignment(estimate->values, alignment);
        *out = wrap(std::move(aligned), estimate->row_ids, estimate->col_ids);
    });
}

int bn2mf_subspace_distance(const bn2mf_matrix* u, const bn2mf_matrix* v, double* out) {
    if (!u || !v || !out) return fail(BN2MF_EINVAL, "bn2mf_subspace_distance: bad arguments");
    return guarded([&] { *out = bn2mf::subspace_distance(u->values, v->values); });
}

int bn2mf_normalize_and_scale(const bn2mf_matrix* scores, const bn2mf_matrix* loadings,
                              bn2mf_matrix** scaled_scores, bn2mf_matrix** normalized_loadings) {
    if (!scores || !loadings || !scaled_scores || !normalized_loadings)
        return fail(BN2MF_EINVAL, "bn2mf_normalize_and_scale: bad arguments");
    return guarded([&] {
        auto [scaled, normalized] =
            bn2mf::normalize_and_scale(scores->values, loadings->values);
        *scaled_scores = wrap(std::move(scaled), scores->row_ids, scores->col_ids);
        *normalized_loadings = wrap(std::move(normalized), loadings->row_ids, loadings->col_ids);
    });
}
