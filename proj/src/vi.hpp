#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "model.hpp"

namespace bn2mf {

struct FitConfig {
    int n_restarts = 10;
    long max_sweeps = 100000;
    double rel_tol = 1e-6;
    double t0 = 2.0;
    int anneal_sweeps = 25;
    double prune_rel_threshold = 1e-3;
    std::uint64_t seed = 0;
    // Restart-level parallelism only; results are identical for any value.
    int n_threads = 1;

    void validate() const;
};

struct FactorizationResult {
    Matrix scores;    // N x k_eff, E[W diag(a)] restricted to active components
    Matrix loadings;  // k_eff x P, E[H] restricted to active components
    int k_effective = 0;
    double elbo = 0.0;
    VariationalState state;  // full-width state; state.active marks kept components
    long sweeps_used = 0;
    int restart_index = -1;
    bool converged = false;
    std::vector<std::string> restart_errors;
};

// Shapes perturbed by multiplicative uniform noise in [0.5, 1.5] drawn in a
// fixed order (W row-major, then a, then H row-major); W and H start at their
// prior shapes, the rank weights at unit shape, and all rates at the prior
// rates. Deterministic given seed.
VariationalState init_state(const ExposureMatrix& x, const Hyperparameters& hp,
                            std::uint64_t seed, double t0 = 1.0);

// One full coordinate update of q(W), q(a), q(H) at state.temperature.
// Responsibilities are shared across the three block updates; rates use the
// freshest available means so each block update is exact coordinate ascent.
VariationalState cavi_sweep(const ExposureMatrix& x, VariationalState state,
                            const Hyperparameters& hp);

// Annealed objective at state.temperature: the tight auxiliary-count bound on
// the Poisson expectation plus prior expectations minus T times the Gamma
// entropies. At T = 1 this is the standard ELBO.
double compute_elbo(const ExposureMatrix& x, const VariationalState& state,
                    const Hyperparameters& hp);

// Linear schedule: t0 at sweep 0, exactly 1 from anneal_sweeps onward.
double anneal_temperature(long sweep_index, const FitConfig& cfg);

// Component k is active iff E[a_k] >= prune_rel_threshold * max E[a].
std::pair<int, std::vector<bool>> effective_rank(const VariationalState& state,
                                                 const FitConfig& cfg);

// Multi-restart annealed fit; returns the restart with the largest final
// objective. Deterministic given (x, hp, cfg.seed).
FactorizationResult fit(const ExposureMatrix& x, const Hyperparameters& hp,
                        const FitConfig& cfg);

// Dense responsibilities, one N x P matrix per component; rows/cols with
// x_ij = 0 are zero. Intended for tests and small problems.
std::vector<Matrix> responsibilities(const ExposureMatrix& x, const VariationalState& state);

}  // namespace bn2mf
