#pragma once

#include <bn2mf.h>

#include <cstdint>
#include <string>
#include <vector>

namespace cli {

struct GridOptions {
    std::string out_dir;
    std::vector<int> structures{10, 0};
    std::vector<double> noises{0.2, 0.5, 1.0};
    int replicates = 20;
    std::int64_t n = 1000;
    std::int64_t p = 40;
    int k_true = 4;
    std::vector<std::string> methods{"bn2mf", "nmf-l2", "nmf-p", "pca", "fa"};
    std::vector<int> k_candidates{3, 4, 5};
    double variance_threshold = 0.80;
    long ci_draws = 1000;
    double ci_level = 0.95;
    int jobs = 1;
    std::uint64_t seed = 0;
    bn2mf_fit_config fit{};
};

// Runs every (structure, noise, replicate) cell: simulate, fit the requested
// methods, score them against the stored truth, and write one JSON report per
// replicate under out_dir/cells. Cells with complete reports are skipped, so
// interrupted runs resume. Individual failures are recorded in the report,
// never aborting the grid. Wall-clock timing goes to out_dir/run.log only.
void run_grid(const GridOptions& opts);

// Aggregates replicate reports into CSV tables: per-metric mean/sd tables,
// the median-coverage grid, and rank-selection rates.
void emit_report(const std::string& grid_dir, const std::string& out_dir);

}  // namespace cli
