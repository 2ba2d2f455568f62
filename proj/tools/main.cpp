#include <CLI11.hpp>
#include <bn2mf.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "cli_util.hpp"
#include "config.hpp"
#include "grid.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using cli::Baseline;
using cli::CApiError;
using cli::check;
using cli::FitResult;
using cli::Intervals;
using cli::Mat;
using cli::Sim;

struct CommonArgs {
    std::uint64_t seed = 0;
    std::string out;
    std::string config;  // consumed before parsing; registered for help only
};

void add_common(CLI::App* sub, CommonArgs& args, bool out_required = true) {
    sub->add_option("--seed", args.seed, "Base seed for all randomness")->capture_default_str();
    auto* out = sub->add_option("--out", args.out, "Output directory");
    if (out_required) out->required();
    sub->add_option("--config", args.config,
                    "Flat key=value file of these options; explicit flags win");
}

void add_fit_flags(CLI::App* sub, bn2mf_fit_config& cfg) {
    sub->add_option("--restarts", cfg.n_restarts, "Independent restarts, best objective kept")
        ->capture_default_str();
    sub->add_option("--max-sweeps", cfg.max_sweeps, "Sweep cap per restart")
        ->capture_default_str();
    sub->add_option("--rel-tol", cfg.rel_tol, "Relative objective change to stop at")
        ->capture_default_str();
    sub->add_option("--t0", cfg.t0, "Starting annealing temperature")->capture_default_str();
    sub->add_option("--anneal-sweeps", cfg.anneal_sweeps,
                    "Sweeps over which the temperature decays to 1")
        ->capture_default_str();
    sub->add_option("--prune-threshold", cfg.prune_rel_threshold,
                    "Relative weight below which a component counts as pruned")
        ->capture_default_str();
    sub->add_option("--threads", cfg.n_threads, "Threads across restarts")
        ->capture_default_str();
}

void add_hyper_flags(CLI::App* sub, bn2mf_hyperparams& hp) {
    sub->add_option("--alpha-w", hp.alpha_w, "Prior shape for scores")->capture_default_str();
    sub->add_option("--beta-w", hp.beta_w, "Prior rate for scores")->capture_default_str();
    sub->add_option("--alpha-h", hp.alpha_h, "Prior shape for loadings")->capture_default_str();
    sub->add_option("--beta-h", hp.beta_h, "Prior rate for loadings")->capture_default_str();
    sub->add_option("--beta-a", hp.beta_a, "Prior rate for pattern weights")
        ->capture_default_str();
    sub->add_option("--k-init", hp.k_init, "Initial component count (0 = column count)")
        ->capture_default_str();
}

void write_json(const fs::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw CApiError{BN2MF_EIO, "cannot write " + path.string()};
    out << doc.dump(2) << '\n';
}

void write_matrix(const bn2mf_matrix* m, const fs::path& path) {
    check(bn2mf_matrix_write_csv(m, path.string().c_str()));
}

Mat load_data(const std::string& path) {
    Mat x;
    check(bn2mf_matrix_read_csv(path.c_str(), x.out()));
    return x;
}

// LOD file: same CSV schema, one row of per-column limits; column ids must
// match the data file's order.
std::vector<double> load_lod(const std::string& path, const bn2mf_matrix* data) {
    Mat lod_mat = load_data(path);
    if (bn2mf_matrix_rows(lod_mat.get()) != 1 ||
        bn2mf_matrix_cols(lod_mat.get()) != bn2mf_matrix_cols(data))
        throw CApiError{BN2MF_EINVAL, "LOD file must have exactly one row matching the data"};
    for (int64_t j = 0; j < bn2mf_matrix_cols(data); ++j) {
        const std::string a = bn2mf_matrix_col_id(lod_mat.get(), j);
        const std::string b = bn2mf_matrix_col_id(data, j);
        if (a != b)
            throw CApiError{BN2MF_EINVAL, "LOD column '" + a + "' does not match data column '" +
                                              b + "'"};
    }
    std::vector<double> lod(static_cast<std::size_t>(bn2mf_matrix_cols(data)));
    check(bn2mf_matrix_copy_values(lod_mat.get(), lod.data()));
    return lod;
}

struct DataFlags {
    std::string data;
    std::string lod;
    bool scale_sd = false;
};

void add_data_flags(CLI::App* sub, DataFlags& flags) {
    sub->add_option("--data", flags.data, "Input CSV (header row of ids, first column of ids)")
        ->required();
    sub->add_option("--lod", flags.lod,
                    "CSV of per-column detection limits; values below are set to LOD/sqrt(2)");
    sub->add_flag("--scale-sd", flags.scale_sd,
                  "Divide each column by its standard deviation (no centering)");
}

Mat load_and_preprocess(const DataFlags& flags) {
    Mat x = load_data(flags.data);
    if (flags.lod.empty() && !flags.scale_sd) return x;
    std::vector<double> lod;
    if (!flags.lod.empty()) lod = load_lod(flags.lod, x.get());
    Mat processed;
    check(bn2mf_preprocess(x.get(), flags.lod.empty() ? nullptr : lod.data(),
                           flags.scale_sd ? 1 : 0, processed.out()));
    return processed;
}

void write_fit_outputs(const fs::path& out_dir, const bn2mf_result* fit) {
    Mat scores, loadings, scaled, normalized;
    check(bn2mf_result_scores(fit, scores.out()));
    check(bn2mf_result_loadings(fit, loadings.out()));
    check(bn2mf_result_scaled(fit, scaled.out(), normalized.out()));
    write_matrix(scores.get(), out_dir / "scores.csv");
    write_matrix(loadings.get(), out_dir / "loadings.csv");
    write_matrix(scaled.get(), out_dir / "scaled_scores.csv");
    write_matrix(normalized.get(), out_dir / "normalized_loadings.csv");

    const long trace_len = bn2mf_result_trace_length(fit);
    std::vector<double> trace(static_cast<std::size_t>(trace_len));
    check(bn2mf_result_copy_trace(fit, trace.data()));
    std::ofstream trace_out(out_dir / "elbo_trace.csv");
    trace_out << "sweep,elbo\n";
    for (long t = 0; t < trace_len; ++t)
        trace_out << (t + 1) << ',' << cli::format_double(trace[static_cast<std::size_t>(t)])
                  << '\n';
}

json fit_report(const bn2mf_result* fit, const CommonArgs& common) {
    json doc;
    doc["version"] = bn2mf_version();
    doc["seed"] = common.seed;
    doc["k_effective"] = bn2mf_result_rank(fit);
    doc["elbo"] = bn2mf_result_elbo(fit);
    doc["sweeps"] = bn2mf_result_sweeps(fit);
    doc["converged"] = bn2mf_result_converged(fit) != 0;
    doc["restart_index"] = bn2mf_result_restart_index(fit);
    return doc;
}

void write_interval_outputs(const fs::path& out_dir, const bn2mf_intervals* ci,
                            const char* prefix) {
    const std::pair<int, const char*> parts[] = {{BN2MF_INTERVAL_LOWER, "lower"},
                                                 {BN2MF_INTERVAL_MEAN, "mean"},
                                                 {BN2MF_INTERVAL_UPPER, "upper"},
                                                 {BN2MF_INTERVAL_MISSING, "missing"}};
    for (const auto& [part, name] : parts) {
        Mat m;
        check(bn2mf_intervals_component(ci, part, m.out()));
        write_matrix(m.get(), out_dir / (std::string(prefix) + "_" + name + ".csv"));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gamma-Poisson matrix factorization with nonparametric rank selection"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.set_version_flag("--version", bn2mf_version());

    // simulate ------------------------------------------------------------
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic dataset with truth");
    CommonArgs sim_common;
    bn2mf_sim_spec sim_spec;
    bn2mf_sim_spec_init(&sim_spec);
    bool sim_per_column = false;
    add_common(sim_cmd, sim_common);
    sim_cmd->add_option("--n", sim_spec.n, "Observations")->capture_default_str();
    sim_cmd->add_option("--p", sim_spec.p, "Features")->capture_default_str();
    sim_cmd->add_option("--k", sim_spec.k, "True pattern count")->capture_default_str();
    sim_cmd->add_option("--distinct", sim_spec.distinct_per_pattern,
                        "Distinct chemicals per pattern on the 0..10 scale")
        ->capture_default_str();
    sim_cmd->add_option("--noise", sim_spec.noise_prop, "Noise sd as a fraction of the clean sd")
        ->capture_default_str();
    sim_cmd->add_flag("--per-column-noise", sim_per_column,
                      "Scale noise per column instead of by the grand sd");

    // fit -------------------------------------------------------------------
    auto* fit_cmd = app.add_subcommand("fit", "Factorize a dataset");
    CommonArgs fit_common;
    DataFlags fit_data;
    bn2mf_hyperparams fit_hp;
    bn2mf_hyperparams_init(&fit_hp);
    bn2mf_fit_config fit_cfg;
    bn2mf_fit_config_init(&fit_cfg);
    add_common(fit_cmd, fit_common);
    add_data_flags(fit_cmd, fit_data);
    add_hyper_flags(fit_cmd, fit_hp);
    add_fit_flags(fit_cmd, fit_cfg);

    // baselines ---------------------------------------------------------------
    auto* base_cmd = app.add_subcommand("baselines", "Run a frequentist comparator");
    CommonArgs base_common;
    DataFlags base_data;
    std::string base_method;
    int base_k = 0;
    std::vector<int> base_k_candidates;
    double base_variance = 0.80;
    long base_max_iter = 5000;
    double base_tol = 1e-6;
    add_common(base_cmd, base_common);
    add_data_flags(base_cmd, base_data);
    base_cmd->add_option("--method", base_method, "One of nmf-l2, nmf-p, pca, fa")->required();
    base_cmd->add_option("--k", base_k, "Fixed rank (NMF and FA)");
    base_cmd->add_option("--k-candidates", base_k_candidates,
                         "Comma-separated ranks to choose among by BIC")
        ->delimiter(',');
    base_cmd->add_option("--variance-threshold", base_variance,
                         "Cumulative explained variance for PCA retention")
        ->capture_default_str();
    base_cmd->add_option("--max-iter", base_max_iter, "Iteration cap")->capture_default_str();
    base_cmd->add_option("--tol", base_tol, "Relative objective tolerance")
        ->capture_default_str();

    // ci ------------------------------------------------------------------------
    auto* ci_cmd = app.add_subcommand("ci", "Fit and draw variational confidence intervals");
    CommonArgs ci_common;
    DataFlags ci_data;
    bn2mf_hyperparams ci_hp;
    bn2mf_hyperparams_init(&ci_hp);
    bn2mf_fit_config ci_cfg;
    bn2mf_fit_config_init(&ci_cfg);
    long ci_draws = 1000;
    double ci_level = 0.95;
    add_common(ci_cmd, ci_common);
    add_data_flags(ci_cmd, ci_data);
    add_hyper_flags(ci_cmd, ci_hp);
    add_fit_flags(ci_cmd, ci_cfg);
    ci_cmd->add_option("--draws", ci_draws, "Draws from the fitted distributions")
        ->capture_default_str();
    ci_cmd->add_option("--level", ci_level, "Interval level")->capture_default_str();

    // bootstrap --------------------------------------------------------------------
    auto* boot_cmd = app.add_subcommand("bootstrap", "Case-resampling bootstrap intervals");
    CommonArgs boot_common;
    DataFlags boot_data;
    std::string boot_fitter = "bn2mf";
    int boot_k = 0;
    long boot_n = 150;
    double boot_level = 0.95;
    bn2mf_fit_config boot_cfg;
    bn2mf_fit_config_init(&boot_cfg);
    add_common(boot_cmd, boot_common);
    add_data_flags(boot_cmd, boot_data);
    boot_cmd->add_option("--fitter", boot_fitter, "bn2mf or nmf-p")->capture_default_str();
    boot_cmd->add_option("--k", boot_k, "Fixed rank for the nmf-p fitter");
    boot_cmd->add_option("--boot", boot_n, "Number of resamples")->capture_default_str();
    boot_cmd->add_option("--level", boot_level, "Interval level")->capture_default_str();
    add_fit_flags(boot_cmd, boot_cfg);

    // grid ---------------------------------------------------------------------------
    auto* grid_cmd = app.add_subcommand("grid", "Run a simulation study grid");
    CommonArgs grid_common;
    cli::GridOptions grid_opts;
    bn2mf_fit_config_init(&grid_opts.fit);
    bool grid_full = false;
    add_common(grid_cmd, grid_common);
    grid_cmd->add_option("--structures", grid_opts.structures,
                         "Distinct-per-pattern levels (0..10)")
        ->delimiter(',')
        ->capture_default_str();
    grid_cmd->add_option("--noise", grid_opts.noises, "Noise proportions")
        ->delimiter(',')
        ->capture_default_str();
    grid_cmd->add_option("--replicates", grid_opts.replicates, "Datasets per cell")
        ->capture_default_str();
    grid_cmd->add_option("--n", grid_opts.n, "Observations")->capture_default_str();
    grid_cmd->add_option("--p", grid_opts.p, "Features")->capture_default_str();
    grid_cmd->add_option("--k-true", grid_opts.k_true, "True pattern count")
        ->capture_default_str();
    grid_cmd->add_option("--methods", grid_opts.methods,
                         "Any of bn2mf, nmf-l2, nmf-p, pca, fa")
        ->delimiter(',')
        ->capture_default_str();
    grid_cmd->add_option("--k-candidates", grid_opts.k_candidates, "BIC candidate ranks")
        ->delimiter(',')
        ->capture_default_str();
    grid_cmd->add_option("--variance-threshold", grid_opts.variance_threshold,
                         "PCA retention threshold")
        ->capture_default_str();
    grid_cmd->add_option("--ci-draws", grid_opts.ci_draws, "Draws for coverage evaluation")
        ->capture_default_str();
    grid_cmd->add_option("--jobs", grid_opts.jobs, "Parallel replicate jobs")
        ->capture_default_str();
    grid_cmd->add_flag("--full", grid_full,
                       "Full-scale study: all 11 structures x 11 noise levels, 100 replicates");
    add_fit_flags(grid_cmd, grid_opts.fit);

    // report --------------------------------------------------------------------------
    auto* report_cmd = app.add_subcommand("report", "Aggregate grid reports into tables");
    CommonArgs report_common;
    std::string report_grid_dir;
    add_common(report_cmd, report_common);
    report_cmd->add_option("--grid-dir", report_grid_dir, "Directory written by grid")
        ->required();

    // Parse with config expansion; paths in config files resolve against the
    // config file's directory.
    const std::set<std::string> path_keys{"data", "out", "lod", "grid-dir"};
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = cli::expand_config(args, path_keys);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    std::vector<std::string> storage(args);
    std::vector<char*> raw;
    raw.push_back(argv[0]);
    for (auto& s : storage) raw.push_back(s.data());
    try {
        app.parse(static_cast<int>(raw.size()), raw.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (sim_cmd->parsed()) {
            sim_spec.seed = sim_common.seed;
            sim_spec.per_column_noise = sim_per_column ? 1 : 0;
            Sim sim;
            check(bn2mf_simulate(&sim_spec, sim.out()));
            const fs::path out_dir(sim_common.out);
            fs::create_directories(out_dir);
            const std::pair<int, const char*> parts[] = {
                {BN2MF_SIM_NOISY, "data.csv"},
                {BN2MF_SIM_CLEAN, "x_clean.csv"},
                {BN2MF_SIM_SCORES, "scores_true.csv"},
                {BN2MF_SIM_LOADINGS, "loadings_true.csv"}};
            for (const auto& [part, name] : parts) {
                Mat m;
                check(bn2mf_sim_component(sim.get(), part, m.out()));
                write_matrix(m.get(), out_dir / name);
            }
            std::ofstream meta(out_dir / "sim_spec.txt");
            meta << "n = " << sim_spec.n << "\np = " << sim_spec.p << "\nk = " << sim_spec.k
                 << "\ndistinct = " << sim_spec.distinct_per_pattern
                 << "\nnoise = " << cli::format_double(sim_spec.noise_prop)
                 << "\nseed = " << sim_spec.seed << "\n# noise_sigma = "
                 << cli::format_double(bn2mf_sim_noise_sigma(sim.get())) << '\n';
        } else if (fit_cmd->parsed()) {
            Mat x = load_and_preprocess(fit_data);
            fit_cfg.seed = fit_common.seed;
            FitResult fit;
            check(bn2mf_fit(x.get(), &fit_hp, &fit_cfg, fit.out()));
            const fs::path out_dir(fit_common.out);
            fs::create_directories(out_dir);
            write_fit_outputs(out_dir, fit.get());
            json doc = fit_report(fit.get(), fit_common);
            doc["command"] = "fit";
            doc["data"] = fit_data.data;
            write_json(out_dir / "report.json", doc);
            std::cout << "k_effective=" << bn2mf_result_rank(fit.get())
                      << " elbo=" << bn2mf_result_elbo(fit.get()) << '\n';
        } else if (base_cmd->parsed()) {
            Mat x = load_and_preprocess(base_data);
            Baseline result;
            if (base_method == "pca") {
                check(bn2mf_pca(x.get(), base_variance, result.out()));
            } else {
                int method = 0;
                if (base_method == "nmf-l2")
                    method = BN2MF_BASE_NMF_L2;
                else if (base_method == "nmf-p")
                    method = BN2MF_BASE_NMF_POISSON;
                else if (base_method == "fa")
                    method = BN2MF_BASE_FA;
                else
                    throw CApiError{BN2MF_EINVAL, "unknown method: " + base_method};
                if (!base_k_candidates.empty()) {
                    check(bn2mf_select_by_bic(x.get(), method, base_k_candidates.data(),
                                              static_cast<int>(base_k_candidates.size()),
                                              base_common.seed, result.out()));
                } else if (base_k > 0) {
                    if (method == BN2MF_BASE_FA)
                        check(bn2mf_factor_analysis(x.get(), base_k, base_max_iter, base_tol,
                                                    result.out()));
                    else
                        check(bn2mf_nmf(x.get(), method, base_k, base_common.seed,
                                        base_max_iter, base_tol, result.out()));
                } else {
                    throw CApiError{BN2MF_EINVAL, "provide --k or --k-candidates"};
                }
            }
            const fs::path out_dir(base_common.out);
            fs::create_directories(out_dir);
            Mat scores, loadings;
            check(bn2mf_baseline_scores(result.get(), scores.out()));
            check(bn2mf_baseline_loadings(result.get(), loadings.out()));
            write_matrix(scores.get(), out_dir / "scores.csv");
            write_matrix(loadings.get(), out_dir / "loadings.csv");
            json doc;
            doc["version"] = bn2mf_version();
            doc["command"] = "baselines";
            doc["method"] = base_method;
            doc["seed"] = base_common.seed;
            doc["k"] = bn2mf_baseline_rank(result.get());
            doc["selection_stat"] = bn2mf_baseline_stat(result.get());
            doc["converged"] = bn2mf_baseline_converged(result.get()) != 0;
            write_json(out_dir / "report.json", doc);
            std::cout << "k=" << bn2mf_baseline_rank(result.get()) << '\n';
        } else if (ci_cmd->parsed()) {
            Mat x = load_and_preprocess(ci_data);
            ci_cfg.seed = ci_common.seed;
            FitResult fit;
            check(bn2mf_fit(x.get(), &ci_hp, &ci_cfg, fit.out()));
            Intervals intervals;
            check(bn2mf_variational_ci(fit.get(), ci_draws,
                                       cli::derive_seed(ci_common.seed, 9001), ci_level,
                                       intervals.out()));
            const fs::path out_dir(ci_common.out);
            fs::create_directories(out_dir);
            write_fit_outputs(out_dir, fit.get());
            write_interval_outputs(out_dir, intervals.get(), "ci");
            json doc = fit_report(fit.get(), ci_common);
            doc["command"] = "ci";
            doc["draws"] = ci_draws;
            doc["level"] = ci_level;
            const char* warning = bn2mf_intervals_warning(intervals.get());
            if (warning && warning[0]) doc["warning"] = warning;
            write_json(out_dir / "report.json", doc);
        } else if (boot_cmd->parsed()) {
            Mat x = load_and_preprocess(boot_data);
            boot_cfg.seed = boot_common.seed;
            int fitter = BN2MF_BOOT_BN2MF;
            if (boot_fitter == "nmf-p")
                fitter = BN2MF_BOOT_NMF_POISSON;
            else if (boot_fitter != "bn2mf")
                throw CApiError{BN2MF_EINVAL, "unknown fitter: " + boot_fitter};
            Intervals intervals;
            check(bn2mf_bootstrap_ci(x.get(), fitter, boot_k, &boot_cfg, boot_n,
                                     boot_common.seed, boot_level, intervals.out()));
            const fs::path out_dir(boot_common.out);
            fs::create_directories(out_dir);
            write_interval_outputs(out_dir, intervals.get(), "boot");
            json doc;
            doc["version"] = bn2mf_version();
            doc["command"] = "bootstrap";
            doc["fitter"] = boot_fitter;
            doc["seed"] = boot_common.seed;
            doc["boot"] = static_cast<long>(bn2mf_intervals_draws(intervals.get()));
            doc["level"] = boot_level;
            const char* warning = bn2mf_intervals_warning(intervals.get());
            if (warning && warning[0]) doc["warning"] = warning;
            write_json(out_dir / "report.json", doc);
        } else if (grid_cmd->parsed()) {
            grid_opts.out_dir = grid_common.out;
            grid_opts.seed = grid_common.seed;
            if (grid_full) {
                grid_opts.structures.clear();
                for (int d = 0; d <= 10; ++d) grid_opts.structures.push_back(d);
                grid_opts.noises.clear();
                for (int v = 0; v <= 10; ++v)
                    grid_opts.noises.push_back(static_cast<double>(v) / 10.0);
                if (grid_cmd->count("--replicates") == 0) grid_opts.replicates = 100;
            }
            cli::run_grid(grid_opts);
        } else if (report_cmd->parsed()) {
            cli::emit_report(report_grid_dir, report_common.out);
        }
    } catch (const CApiError& e) {
        std::cerr << "error: " << e.message << '\n';
        return cli::exit_code_for(e.status);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
