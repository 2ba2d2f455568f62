#include "simgen.hpp"

#include <cmath>

#include "rng.hpp"

namespace bn2mf {

namespace {

// Sub-stream tags so the dictionary, scores, and noise draws stay independent
// of each other while sharing one spec seed.
constexpr std::uint64_t kDictStream = 1;
constexpr std::uint64_t kScoreStream = 2;
constexpr std::uint64_t kNoiseStream = 3;

double grand_sd(const Matrix& m) {
    const double mean = m.mean();
    return std::sqrt((m.array() - mean).square().mean());
}

}  // namespace

void SimSpec::validate() const {
    if (n < 2 || p < 2 || k < 1) throw std::invalid_argument("SimSpec: n, p, k too small");
    if (p % k != 0)
        throw std::invalid_argument("SimSpec: p must divide into k equal pattern blocks");
    if (distinct_per_pattern < 0 || distinct_per_pattern > 10)
        throw std::invalid_argument("SimSpec: distinct_per_pattern must be in 0..10");
    if (!(noise_prop >= 0.0 && noise_prop <= 1.0))
        throw std::invalid_argument("SimSpec: noise_prop must be in [0, 1]");
}

int SimSpec::distinct_in_block() const {
    return static_cast<int>(
        std::llround(static_cast<double>(distinct_per_pattern) * block_size() / 10.0));
}

Matrix gen_dictionary(const SimSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, kDictStream));
    const int k = spec.k;
    const int block = spec.block_size();
    const int n_distinct = spec.distinct_in_block();

    // Structures between fully distinct and fully overlapping move one
    // chemical per block at a time, starting from the front of the block.
    Matrix dict = Matrix::Zero(k, spec.p);
    for (int b = 0; b < k; ++b) {
        for (int c = 0; c < block; ++c) {
            const Index j = static_cast<Index>(b) * block + c;
            if (c >= block - n_distinct || k == 1) {
                dict(b, j) = 1.0;
            } else {
                // Dirichlet(10, 5) over (own, next) via normalized Gammas.
                const double hi = rng.gamma(10.0, 1.0);
                const double md = rng.gamma(5.0, 1.0);
                dict(b, j) = hi / (hi + md);
                dict((b + 1) % k, j) = md / (hi + md);
            }
        }
    }
    return dict;
}

Matrix gen_scores(Index n, int k, std::uint64_t seed) {
    if (n < 1 || k < 1) throw std::invalid_argument("gen_scores: n and k must be positive");
    Rng rng(seed);
    Matrix scores(n, k);
    for (Index i = 0; i < n; ++i)
        for (int c = 0; c < k; ++c) scores(i, c) = rng.lognormal();
    return scores;
}

SimTruth gen_dataset(const SimSpec& spec) {
    spec.validate();
    SimTruth truth;
    truth.loadings_true = gen_dictionary(spec);
    truth.scores_true = gen_scores(spec.n, spec.k, derive_seed(spec.seed, kScoreStream));
    truth.x_clean = truth.scores_true * truth.loadings_true;

    Rng noise_rng(derive_seed(spec.seed, kNoiseStream));
    truth.x_noisy = truth.x_clean;
    if (spec.noise_prop > 0.0) {
        if (spec.noise_scale == SimSpec::NoiseScale::Grand) {
            truth.noise_sigma = spec.noise_prop * grand_sd(truth.x_clean);
            for (Index i = 0; i < spec.n; ++i)
                for (Index j = 0; j < spec.p; ++j)
                    truth.x_noisy(i, j) += truth.noise_sigma * noise_rng.normal();
        } else {
            Vector sigmas(spec.p);
            double ms = 0.0;
            for (Index j = 0; j < spec.p; ++j) {
                const Vector col = truth.x_clean.col(j);
                const double mean = col.mean();
                sigmas(j) = spec.noise_prop * std::sqrt((col.array() - mean).square().mean());
                ms += sigmas(j) * sigmas(j);
            }
            truth.noise_sigma = std::sqrt(ms / static_cast<double>(spec.p));
            for (Index i = 0; i < spec.n; ++i)
                for (Index j = 0; j < spec.p; ++j)
                    truth.x_noisy(i, j) += sigmas(j) * noise_rng.normal();
        }
        truth.x_noisy = truth.x_noisy.cwiseMax(0.0);
    }
    return truth;
}

std::vector<SimSpec> primary_grid(Index n, std::uint64_t seed_base) {
    std::vector<SimSpec> cells;
    cells.reserve(121);
    for (int distinct = 0; distinct <= 10; ++distinct) {
        for (int noise10 = 0; noise10 <= 10; ++noise10) {
            SimSpec spec;
            spec.n = n;
            spec.distinct_per_pattern = distinct;
            spec.noise_prop = static_cast<double>(noise10) / 10.0;
            spec.seed = derive_seed(derive_seed(seed_base, static_cast<std::uint64_t>(distinct)),
                                    static_cast<std::uint64_t>(noise10));
            cells.push_back(spec);
        }
    }
    return cells;
}

}  // namespace bn2mf
