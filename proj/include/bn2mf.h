/* bn2mf — Bayesian non-parametric non-negative matrix factorization.
 *
 * C interface to the shared library. All functions return a status code
 * (BN2MF_OK on success); outputs are written through pointer arguments.
 * Handles are opaque and must be released with the matching *_free call.
 * bn2mf_last_error() returns a thread-local message for the most recent
 * failure on the calling thread.
 */
#ifndef BN2MF_H
#define BN2MF_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum bn2mf_status {
    BN2MF_OK = 0,
    BN2MF_EINVAL = 1,  /* invalid argument or malformed input data */
    BN2MF_EIO = 2,     /* file could not be read or written */
    BN2MF_ENUMERIC = 3 /* numerical failure during optimization */
};

const char* bn2mf_version(void);
const char* bn2mf_last_error(void);

/* ---- labeled matrices ------------------------------------------------- */

typedef struct bn2mf_matrix bn2mf_matrix;

/* values is row-major n*p; row_ids/col_ids may be NULL for r1../c1.. */
int bn2mf_matrix_create(int64_t n, int64_t p, const double* values,
                        const char* const* row_ids, const char* const* col_ids,
                        bn2mf_matrix** out);
int bn2mf_matrix_read_csv(const char* path, bn2mf_matrix** out);
int bn2mf_matrix_write_csv(const bn2mf_matrix* m, const char* path);
int64_t bn2mf_matrix_rows(const bn2mf_matrix* m);
int64_t bn2mf_matrix_cols(const bn2mf_matrix* m);
/* copies into caller storage of size rows*cols, row-major */
int bn2mf_matrix_copy_values(const bn2mf_matrix* m, double* out);
const char* bn2mf_matrix_row_id(const bn2mf_matrix* m, int64_t i);
const char* bn2mf_matrix_col_id(const bn2mf_matrix* m, int64_t j);
int bn2mf_matrix_product(const bn2mf_matrix* a, const bn2mf_matrix* b, bn2mf_matrix** out);
int bn2mf_matrix_transpose(const bn2mf_matrix* m, bn2mf_matrix** out);
void bn2mf_matrix_free(bn2mf_matrix* m);

/* lod may be NULL; entries <= 0 or NaN mean "no detection limit". */
int bn2mf_preprocess(const bn2mf_matrix* x, const double* lod, int scale_sd,
                     bn2mf_matrix** out);

/* ---- model fit --------------------------------------------------------- */

typedef struct bn2mf_hyperparams {
    double alpha_w, beta_w;
    double alpha_h, beta_h;
    double beta_a;
    int k_init; /* 0 = number of data columns */
} bn2mf_hyperparams;

typedef struct bn2mf_fit_config {
    int n_restarts;
    long max_sweeps;
    double rel_tol;
    double t0;
    int anneal_sweeps;
    double prune_rel_threshold;
    uint64_t seed;
    int n_threads;
} bn2mf_fit_config;

void bn2mf_hyperparams_init(bn2mf_hyperparams* hp);
void bn2mf_fit_config_init(bn2mf_fit_config* cfg);

typedef struct bn2mf_result bn2mf_result;

int bn2mf_fit(const bn2mf_matrix* x, const bn2mf_hyperparams* hp,
              const bn2mf_fit_config* cfg, bn2mf_result** out);
int bn2mf_result_rank(const bn2mf_result* r);
double bn2mf_result_elbo(const bn2mf_result* r);
long bn2mf_result_sweeps(const bn2mf_result* r);
int bn2mf_result_restart_index(const bn2mf_result* r);
int bn2mf_result_converged(const bn2mf_result* r);
long bn2mf_result_trace_length(const bn2mf_result* r);
int bn2mf_result_copy_trace(const bn2mf_result* r, double* out);
/* expected scores E[W diag(a)] (N x k) and loadings E[H] (k x P) */
int bn2mf_result_scores(const bn2mf_result* r, bn2mf_matrix** out);
int bn2mf_result_loadings(const bn2mf_result* r, bn2mf_matrix** out);
/* l1-normalized loadings and correspondingly scaled scores */
int bn2mf_result_scaled(const bn2mf_result* r, bn2mf_matrix** scaled_scores,
                        bn2mf_matrix** normalized_loadings);
void bn2mf_result_free(bn2mf_result* r);

/* ---- confidence intervals ---------------------------------------------- */

typedef struct bn2mf_intervals bn2mf_intervals;

enum bn2mf_interval_part {
    BN2MF_INTERVAL_LOWER = 0,
    BN2MF_INTERVAL_MEAN = 1,
    BN2MF_INTERVAL_UPPER = 2,
    BN2MF_INTERVAL_MISSING = 3
};

int bn2mf_variational_ci(const bn2mf_result* r, long n_draws, uint64_t seed, double level,
                         bn2mf_intervals** out);

enum bn2mf_boot_fitter { BN2MF_BOOT_BN2MF = 0, BN2MF_BOOT_NMF_POISSON = 1 };

/* k_for_nmf is the fixed rank of the Poisson-NMF fitter; ignored for the
 * BN2MF fitter. cfg configures every (re)fit. */
int bn2mf_bootstrap_ci(const bn2mf_matrix* x, int fitter, int k_for_nmf,
                       const bn2mf_fit_config* cfg, long n_boot, uint64_t seed, double level,
                       bn2mf_intervals** out);

int64_t bn2mf_intervals_rows(const bn2mf_intervals* ci);
int64_t bn2mf_intervals_cols(const bn2mf_intervals* ci);
long bn2mf_intervals_draws(const bn2mf_intervals* ci);
const char* bn2mf_intervals_warning(const bn2mf_intervals* ci);
int bn2mf_intervals_component(const bn2mf_intervals* ci, int part, bn2mf_matrix** out);
void bn2mf_intervals_free(bn2mf_intervals* ci);

/* truth aligned to interval columns; missing entries (NaN bounds) skipped */
int bn2mf_coverage(const bn2mf_matrix* truth, const bn2mf_matrix* lower,
                   const bn2mf_matrix* upper, double* out);

/* ---- simulation --------------------------------------------------------- */

typedef struct bn2mf_sim_spec {
    int64_t n, p;
    int k;
    int distinct_per_pattern; /* 0..10 */
    double noise_prop;        /* [0, 1] */
    uint64_t seed;
    int per_column_noise; /* 0 = grand sd */
} bn2mf_sim_spec;

void bn2mf_sim_spec_init(bn2mf_sim_spec* spec);

typedef struct bn2mf_sim bn2mf_sim;

enum bn2mf_sim_part {
    BN2MF_SIM_NOISY = 0,
    BN2MF_SIM_CLEAN = 1,
    BN2MF_SIM_SCORES = 2,
    BN2MF_SIM_LOADINGS = 3
};

int bn2mf_simulate(const bn2mf_sim_spec* spec, bn2mf_sim** out);
int bn2mf_sim_component(const bn2mf_sim* sim, int part, bn2mf_matrix** out);
double bn2mf_sim_noise_sigma(const bn2mf_sim* sim);
void bn2mf_sim_free(bn2mf_sim* sim);

/* ---- frequentist baselines ---------------------------------------------- */

typedef struct bn2mf_baseline bn2mf_baseline;

enum bn2mf_baseline_method {
    BN2MF_BASE_NMF_L2 = 0,
    BN2MF_BASE_NMF_POISSON = 1,
    BN2MF_BASE_PCA = 2,
    BN2MF_BASE_FA = 3
};

int bn2mf_nmf(const bn2mf_matrix* x, int method, int k, uint64_t seed, long max_iter,
              double tol, bn2mf_baseline** out);
int bn2mf_pca(const bn2mf_matrix* x, double variance_threshold, bn2mf_baseline** out);
int bn2mf_factor_analysis(const bn2mf_matrix* x, int k, long max_iter, double tol,
                          bn2mf_baseline** out);
int bn2mf_select_by_bic(const bn2mf_matrix* x, int method, const int* k_candidates,
                        int n_candidates, uint64_t seed, bn2mf_baseline** out);
int bn2mf_baseline_rank(const bn2mf_baseline* b);
double bn2mf_baseline_stat(const bn2mf_baseline* b);
int bn2mf_baseline_converged(const bn2mf_baseline* b);
int bn2mf_baseline_scores(const bn2mf_baseline* b, bn2mf_matrix** out);
int bn2mf_baseline_loadings(const bn2mf_baseline* b, bn2mf_matrix** out);
void bn2mf_baseline_free(bn2mf_baseline* b);

/* ---- comparison metrics -------------------------------------------------- */

int bn2mf_relative_error(const bn2mf_matrix* truth, const bn2mf_matrix* estimate, double* out);
/* mean cosine distance over same-index column pairs */
int bn2mf_cosine_distance(const bn2mf_matrix* truth, const bn2mf_matrix* estimate, double* out);
/* exact assignment on cosine similarity; perm has one entry per truth column
 * (the matching estimate column); signs (may be NULL) gets +/-1 */
int bn2mf_align(const bn2mf_matrix* truth, const bn2mf_matrix* estimate, int allow_sign,
                int* perm, double* signs, double* objective);
int bn2mf_apply_alignment(const bn2mf_matrix* estimate, const int* perm, const double* signs,
                          bn2mf_matrix** out);
int bn2mf_subspace_distance(const bn2mf_matrix* u, const bn2mf_matrix* v, double* out);
int bn2mf_normalize_and_scale(const bn2mf_matrix* scores, const bn2mf_matrix* loadings,
                              bn2mf_matrix** scaled_scores, bn2mf_matrix** normalized_loadings);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BN2MF_H */
