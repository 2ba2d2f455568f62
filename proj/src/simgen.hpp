#pragma once

#include <cstdint>
#include <vector>

#include "model.hpp"

namespace bn2mf {

// One simulated dataset design point. The primary grid uses n = 1000, p = 40,
// k = 4, distinct_per_pattern in 0..10 and noise_prop on a 0..1 grid; other
// (n, p, k) combinations tile p/k chemicals per pattern with the distinct
// count scaled from the 0..10 convention.
struct SimSpec {
    Index n = 1000;
    Index p = 40;
    int k = 4;
    int distinct_per_pattern = 10;
    double noise_prop = 0.2;
    std::uint64_t seed = 0;
    enum class NoiseScale { Grand, PerColumn };
    NoiseScale noise_scale = NoiseScale::Grand;

    void validate() const;
    int block_size() const { return static_cast<int>(p) / k; }
    // Chemicals loading on exactly one pattern in each block.
    int distinct_in_block() const;
};

struct SimTruth {
    Matrix scores_true;      // N x K, iid Lognormal(0, 1)
    Matrix loadings_true;    // K x P, each chemical's column sums to one
    Matrix x_clean;          // scores_true * loadings_true
    Matrix x_noisy;          // clean + Gaussian noise, clipped at zero
    double noise_sigma = 0.0;

    ExposureMatrix noisy_exposures() const { return ExposureMatrix::from_values(x_noisy); }
};

// K x P dictionary. Per block of chemicals: the first distinct_in_block()
// load exactly 1 on their own pattern, the rest draw Dirichlet(10, 5) over
// (own pattern, next pattern cyclically) with zeros elsewhere.
Matrix gen_dictionary(const SimSpec& spec);

// N x K iid Lognormal(0, 1) scores.
Matrix gen_scores(Index n, int k, std::uint64_t seed);

// Full dataset: noise sigma is noise_prop times the standard deviation of the
// clean entries (grand by default, per-column optional) and negative sums are
// clipped to zero.
SimTruth gen_dataset(const SimSpec& spec);

// The 11 structures x 11 noise levels of the primary design, seeds derived
// from seed_base per cell.
std::vector<SimSpec> primary_grid(Index n, std::uint64_t seed_base);

}  // namespace bn2mf
