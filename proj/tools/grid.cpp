#include "grid.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "cli_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cli {

namespace {

struct Task {
    int structure;
    double noise;
    int replicate;
};

std::string cell_dir_name(int structure, double noise) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "d%02d_n%03d", structure,
                  static_cast<int>(std::lround(noise * 100.0)));
    return buf;
}

std::string rep_file_name(int replicate) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "rep%04d.json", replicate);
    return buf;
}

bool report_complete(const fs::path& file, const std::vector<std::string>& methods) {
    std::ifstream in(file);
    if (!in) return false;
    json doc;
    try {
        in >> doc;
    } catch (...) {
        return false;
    }
    if (!doc.contains("rows") || !doc["rows"].is_array()) return false;
    std::set<std::string> have;
    for (const auto& row : doc["rows"])
        if (row.contains("method")) have.insert(row["method"].get<std::string>());
    for (const auto& m : methods)
        if (!have.count(m)) return false;
    return true;
}

Mat transpose(const bn2mf_matrix* m) {
    Mat t;
    check(bn2mf_matrix_transpose(m, t.out()));
    return t;
}

Mat product(const bn2mf_matrix* a, const bn2mf_matrix* b) {
    Mat p;
    check(bn2mf_matrix_product(a, b, p.out()));
    return p;
}

json metric_block(const bn2mf_matrix* truth, const bn2mf_matrix* estimate, bool aligned_valid,
                  double subspace) {
    json block;
    if (aligned_valid) {
        double rel = 0.0, cos = 0.0;
        check(bn2mf_relative_error(truth, estimate, &rel));
        check(bn2mf_cosine_distance(truth, estimate, &cos));
        block["relative_error"] = rel;
        block["cosine"] = cos;
    } else {
        block["relative_error"] = nullptr;
        block["cosine"] = nullptr;
    }
    block["subspace"] = subspace;
    return block;
}

// Scores the (scores, loadings) solution of one method against the stored
// truth. Column-aligned metrics are only defined when the estimated pattern
// count matches; the subspace metric always is.
json score_solution(const std::string& method, const bn2mf_matrix* scores,
                    const bn2mf_matrix* loadings, const bn2mf_sim* sim, int k_true,
                    bool sign_freedom) {
    Mat clean, scores_true, loadings_true;
    check(bn2mf_sim_component(sim, BN2MF_SIM_CLEAN, clean.out()));
    check(bn2mf_sim_component(sim, BN2MF_SIM_SCORES, scores_true.out()));
    check(bn2mf_sim_component(sim, BN2MF_SIM_LOADINGS, loadings_true.out()));

    const int k = static_cast<int>(bn2mf_matrix_rows(loadings));
    json row;
    row["method"] = method;
    row["k"] = k;

    const Mat x_hat = product(scores, loadings);
    {
        double rel = 0.0, cos = 0.0, sub = 0.0;
        check(bn2mf_relative_error(clean.get(), x_hat.get(), &rel));
        check(bn2mf_cosine_distance(clean.get(), x_hat.get(), &cos));
        check(bn2mf_subspace_distance(clean.get(), x_hat.get(), &sub));
        row["overall"] = {{"relative_error", rel}, {"cosine", cos}, {"subspace", sub}};
    }

    const Mat loadings_true_t = transpose(loadings_true.get());
    const Mat loadings_t = transpose(loadings);
    double scores_sub = 0.0, loadings_sub = 0.0;
    check(bn2mf_subspace_distance(scores_true.get(), scores, &scores_sub));
    check(bn2mf_subspace_distance(loadings_true_t.get(), loadings_t.get(), &loadings_sub));

    if (k == k_true) {
        std::vector<int> perm(static_cast<std::size_t>(k));
        std::vector<double> signs(static_cast<std::size_t>(k));
        double objective = 0.0;
        check(bn2mf_align(loadings_true_t.get(), loadings_t.get(), sign_freedom ? 1 : 0,
                          perm.data(), signs.data(), &objective));
        Mat loadings_aligned_t, scores_aligned;
        check(bn2mf_apply_alignment(loadings_t.get(), perm.data(), signs.data(),
                                    loadings_aligned_t.out()));
        check(bn2mf_apply_alignment(scores, perm.data(), signs.data(), scores_aligned.out()));
        const Mat loadings_aligned = transpose(loadings_aligned_t.get());

        row["scores"] =
            metric_block(scores_true.get(), scores_aligned.get(), true, scores_sub);
        // Cosine over patterns: compare loading rows as vectors.
        double rel = 0.0, cos = 0.0;
        check(bn2mf_relative_error(loadings_true.get(), loadings_aligned.get(), &rel));
        check(bn2mf_cosine_distance(loadings_true_t.get(), loadings_aligned_t.get(), &cos));
        row["loadings"] = {
            {"relative_error", rel}, {"cosine", cos}, {"subspace", loadings_sub}};
    } else {
        row["scores"] = metric_block(nullptr, nullptr, false, scores_sub);
        row["loadings"] = metric_block(nullptr, nullptr, false, loadings_sub);
    }
    return row;
}

// Coverage of the scaled simulated scores by the variational intervals,
// defined only when the estimated pattern count matches the truth.
std::optional<double> bn2mf_coverage_for(const bn2mf_result* fit, const bn2mf_sim* sim,
                                         int k_true, long ci_draws, double level,
                                         std::uint64_t ci_seed) {
    if (bn2mf_result_rank(fit) != k_true) return std::nullopt;
    Intervals ci;
    check(bn2mf_variational_ci(fit, ci_draws, ci_seed, level, ci.out()));

    Mat scores_true, loadings_true;
    check(bn2mf_sim_component(sim, BN2MF_SIM_SCORES, scores_true.out()));
    check(bn2mf_sim_component(sim, BN2MF_SIM_LOADINGS, loadings_true.out()));
    Mat truth_scaled, truth_norm;
    check(bn2mf_normalize_and_scale(scores_true.get(), loadings_true.get(), truth_scaled.out(),
                                    truth_norm.out()));

    Mat est_scaled, est_norm;
    check(bn2mf_result_scaled(fit, est_scaled.out(), est_norm.out()));

    const Mat truth_norm_t = transpose(truth_norm.get());
    const Mat est_norm_t = transpose(est_norm.get());
    std::vector<int> perm(static_cast<std::size_t>(k_true));
    check(bn2mf_align(truth_norm_t.get(), est_norm_t.get(), 0, perm.data(), nullptr, nullptr));

    Mat lower, upper;
    check(bn2mf_intervals_component(ci.get(), BN2MF_INTERVAL_LOWER, lower.out()));
    check(bn2mf_intervals_component(ci.get(), BN2MF_INTERVAL_UPPER, upper.out()));
    Mat lower_aligned, upper_aligned;
    check(bn2mf_apply_alignment(lower.get(), perm.data(), nullptr, lower_aligned.out()));
    check(bn2mf_apply_alignment(upper.get(), perm.data(), nullptr, upper_aligned.out()));

    double cov = 0.0;
    check(bn2mf_coverage(truth_scaled.get(), lower_aligned.get(), upper_aligned.get(), &cov));
    return cov;
}

json run_method(const std::string& method, const GridOptions& opts, const bn2mf_sim* sim,
                const bn2mf_matrix* noisy, std::uint64_t method_seed) {
    if (method == "bn2mf") {
        bn2mf_hyperparams hp;
        bn2mf_hyperparams_init(&hp);
        bn2mf_fit_config cfg = opts.fit;
        cfg.seed = method_seed;
        FitResult fit;
        check(bn2mf_fit(noisy, &hp, &cfg, fit.out()));
        Mat scores, loadings;
        check(bn2mf_result_scores(fit.get(), scores.out()));
        check(bn2mf_result_loadings(fit.get(), loadings.out()));
        json row = score_solution(method, scores.get(), loadings.get(), sim, opts.k_true, false);
        row["elbo"] = bn2mf_result_elbo(fit.get());
        row["sweeps"] = bn2mf_result_sweeps(fit.get());
        row["converged"] = bn2mf_result_converged(fit.get()) != 0;
        const auto cov = bn2mf_coverage_for(fit.get(), sim, opts.k_true, opts.ci_draws,
                                            opts.ci_level, derive_seed(method_seed, 9001));
        row["coverage"] = cov ? json(*cov) : json(nullptr);
        return row;
    }

    Baseline base;
    bool sign_freedom = false;
    if (method == "nmf-l2" || method == "nmf-p") {
        const int m = method == "nmf-l2" ? BN2MF_BASE_NMF_L2 : BN2MF_BASE_NMF_POISSON;
        check(bn2mf_select_by_bic(noisy, m, opts.k_candidates.data(),
                                  static_cast<int>(opts.k_candidates.size()), method_seed,
                                  base.out()));
    } else if (method == "pca") {
        check(bn2mf_pca(noisy, opts.variance_threshold, base.out()));
        sign_freedom = true;
    } else if (method == "fa") {
        check(bn2mf_select_by_bic(noisy, BN2MF_BASE_FA, opts.k_candidates.data(),
                                  static_cast<int>(opts.k_candidates.size()), method_seed,
                                  base.out()));
        sign_freedom = true;
    } else {
        throw CApiError{BN2MF_EINVAL, "unknown method: " + method};
    }
    Mat scores, loadings;
    check(bn2mf_baseline_scores(base.get(), scores.out()));
    check(bn2mf_baseline_loadings(base.get(), loadings.out()));
    json row =
        score_solution(method, scores.get(), loadings.get(), sim, opts.k_true, sign_freedom);
    row["selection_stat"] = bn2mf_baseline_stat(base.get());
    row["converged"] = bn2mf_baseline_converged(base.get()) != 0;
    row["coverage"] = nullptr;
    return row;
}

class LogFile {
  public:
    explicit LogFile(const fs::path& path) : out_(path, std::ios::app) {}
    void line(const std::string& s) {
        const std::lock_guard<std::mutex> lock(mu_);
        out_ << s << '\n';
        out_.flush();
    }

  private:
    std::mutex mu_;
    std::ofstream out_;
};

}  // namespace

void run_grid(const GridOptions& opts) {
    const fs::path out_dir(opts.out_dir);
    const fs::path cells_dir = out_dir / "cells";
    fs::create_directories(cells_dir);
    LogFile log(out_dir / "run.log");

    std::vector<Task> pending;
    for (std::size_t si = 0; si < opts.structures.size(); ++si) {
        for (std::size_t vi = 0; vi < opts.noises.size(); ++vi) {
            const fs::path dir =
                cells_dir / cell_dir_name(opts.structures[si], opts.noises[vi]);
            fs::create_directories(dir);
            for (int r = 0; r < opts.replicates; ++r) {
                const fs::path file = dir / rep_file_name(r);
                if (report_complete(file, opts.methods)) continue;
                pending.push_back({opts.structures[si], opts.noises[vi], r});
            }
        }
    }
    log.line("grid: " + std::to_string(pending.size()) + " replicate(s) to run");

    std::atomic<std::size_t> next{0};
    std::mutex failures_mu;
    std::vector<std::string> failures;

    const auto worker = [&] {
        for (std::size_t idx = next.fetch_add(1); idx < pending.size();
             idx = next.fetch_add(1)) {
            const Task& task = pending[idx];
            const auto started = std::chrono::steady_clock::now();

            const std::uint64_t cell_seed = derive_seed(
                derive_seed(opts.seed, static_cast<std::uint64_t>(task.structure)),
                static_cast<std::uint64_t>(std::lround(task.noise * 100.0)));
            const std::uint64_t dataset_seed =
                derive_seed(cell_seed, static_cast<std::uint64_t>(task.replicate));

            json doc;
            doc["distinct"] = task.structure;
            doc["noise"] = task.noise;
            doc["replicate"] = task.replicate;
            doc["k_true"] = opts.k_true;
            doc["n"] = opts.n;
            doc["p"] = opts.p;
            doc["dataset_seed"] = dataset_seed;
            doc["rows"] = json::array();

            try {
                bn2mf_sim_spec spec;
                bn2mf_sim_spec_init(&spec);
                spec.n = opts.n;
                spec.p = opts.p;
                spec.k = opts.k_true;
                spec.distinct_per_pattern = task.structure;
                spec.noise_prop = task.noise;
                spec.seed = dataset_seed;
                Sim sim;
                check(bn2mf_simulate(&spec, sim.out()));
                Mat noisy;
                check(bn2mf_sim_component(sim.get(), BN2MF_SIM_NOISY, noisy.out()));

                for (std::size_t mi = 0; mi < opts.methods.size(); ++mi) {
                    const std::string& method = opts.methods[mi];
                    const std::uint64_t method_seed =
                        derive_seed(dataset_seed, 100 + static_cast<std::uint64_t>(mi));
                    try {
                        doc["rows"].push_back(
                            run_method(method, opts, sim.get(), noisy.get(), method_seed));
                    } catch (const CApiError& e) {
                        json row;
                        row["method"] = method;
                        row["error"] = e.message;
                        doc["rows"].push_back(row);
                        log.line("error: " + method + " d=" + std::to_string(task.structure) +
                                 " rep=" + std::to_string(task.replicate) + ": " + e.message);
                    }
                }
            } catch (const CApiError& e) {
                doc["error"] = e.message;
                const std::lock_guard<std::mutex> guard(failures_mu);
                failures.push_back(e.message);
            }

            const fs::path dir = cells_dir / cell_dir_name(task.structure, task.noise);
            const fs::path file = dir / rep_file_name(task.replicate);
            const fs::path tmp = file.string() + ".tmp";
            {
                std::ofstream out(tmp);
                out << doc.dump(2) << '\n';
            }
            fs::rename(tmp, file);

            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                    .count();
            char timing[160];
            std::snprintf(timing, sizeof(timing), "cell d=%d noise=%.2f rep=%d done in %.1fs",
                          task.structure, task.noise, task.replicate, elapsed);
            log.line(timing);
        }
    };

    const int jobs = std::max(1, opts.jobs);
    if (jobs == 1 || pending.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const int count = std::min<std::size_t>(jobs, pending.size());
        pool.reserve(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
}

namespace {

struct CellKey {
    std::string method;
    int distinct;
    double noise;
    bool operator<(const CellKey& o) const {
        if (method != o.method) return method < o.method;
        if (distinct != o.distinct) return distinct < o.distinct;
        return noise < o.noise;
    }
};

struct Accumulator {
    // [target][metric] -> samples
    std::map<std::string, std::map<std::string, std::vector<double>>> samples;
    int n_rows = 0;
    int n_correct_k = 0;
};

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

void emit_report(const std::string& grid_dir, const std::string& out_dir) {
    const fs::path cells = fs::path(grid_dir) / "cells";
    if (!fs::is_directory(cells))
        throw CApiError{BN2MF_EIO, "report: no cells directory under " + grid_dir};

    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(cells))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw CApiError{BN2MF_EIO, "report: no replicate reports found"};

    std::map<CellKey, Accumulator> table;
    std::map<std::pair<int, double>, std::vector<double>> coverage_cells;

    for (const auto& file : files) {
        std::ifstream in(file);
        json doc;
        try {
            in >> doc;
        } catch (...) {
            continue;
        }
        if (!doc.contains("rows")) continue;
        const int distinct = doc.value("distinct", -1);
        const double noise = doc.value("noise", -1.0);
        const int k_true = doc.value("k_true", -1);
        for (const auto& row : doc["rows"]) {
            if (!row.contains("method") || row.contains("error")) continue;
            const CellKey key{row["method"].get<std::string>(), distinct, noise};
            Accumulator& acc = table[key];
            ++acc.n_rows;
            if (row.value("k", -1) == k_true) ++acc.n_correct_k;
            for (const char* target : {"overall", "scores", "loadings"}) {
                if (!row.contains(target)) continue;
                for (const char* metric : {"relative_error", "cosine", "subspace"}) {
                    const auto& value = row[target][metric];
                    if (value.is_number())
                        acc.samples[target][metric].push_back(value.get<double>());
                }
            }
            if (key.method == "bn2mf" && row.contains("coverage") &&
                row["coverage"].is_number())
                coverage_cells[{distinct, noise}].push_back(row["coverage"].get<double>());
        }
    }

    fs::create_directories(out_dir);

    for (const char* metric : {"relative_error", "cosine", "subspace"}) {
        std::ofstream out(fs::path(out_dir) / (std::string(metric) + ".csv"));
        out << "method,distinct,noise,overall_mean,overall_sd,scores_mean,scores_sd,"
               "loadings_mean,loadings_sd,n\n";
        for (const auto& [key, acc] : table) {
            out << key.method << ',' << key.distinct << ',' << csv_num(key.noise);
            for (const char* target : {"overall", "scores", "loadings"}) {
                const auto it = acc.samples.find(target);
                if (it == acc.samples.end() || !it->second.count(metric) ||
                    it->second.at(metric).empty()) {
                    out << ",,";
                } else {
                    const auto& v = it->second.at(metric);
                    out << ',' << csv_num(mean_of(v)) << ',' << csv_num(sd_of(v));
                }
            }
            out << ',' << acc.n_rows << '\n';
        }
    }

    {
        std::ofstream out(fs::path(out_dir) / "coverage_grid.csv");
        out << "distinct,noise,n,median_coverage\n";
        for (const auto& [key, values] : coverage_cells)
            out << key.first << ',' << csv_num(key.second) << ',' << values.size() << ','
                << csv_num(median_of(values)) << '\n';
    }

    {
        std::ofstream out(fs::path(out_dir) / "rank_selection.csv");
        out << "method,distinct,noise,n,correct,fraction\n";
        for (const auto& [key, acc] : table)
            out << key.method << ',' << key.distinct << ',' << csv_num(key.noise) << ','
                << acc.n_rows << ',' << acc.n_correct_k << ','
                << csv_num(acc.n_rows > 0
                               ? static_cast<double>(acc.n_correct_k) / acc.n_rows
                               : 0.0)
                << '\n';
    }
}

}  // namespace cli
