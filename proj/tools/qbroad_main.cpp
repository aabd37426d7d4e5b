// qbroad: spectral simulation of a 2D quantum particle in a correlated
// Gaussian random potential, with kinetic-equation solvers and closed-form
// transport predictions for cross-validation.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "qbroad/experiment.hpp"

namespace {

qbroad::ExperimentConfig load_config(const std::string& config_path,
                                     std::uint64_t seed, bool seed_set,
                                     int realizations, std::string out_dir,
                                     int threads) {
    qbroad::ExperimentConfig cfg = qbroad::parse_config_file(config_path);
    if (seed_set) cfg.master_seed = seed;
    if (realizations > 0) cfg.realizations = realizations;
    if (!out_dir.empty()) cfg.output_dir = std::move(out_dir);
    if (threads > 0) cfg.threads = threads;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"qbroad: disorder-averaged momentum dynamics laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int realizations = 0, threads = 0;

    const auto add_common = [&](CLI::App* cmd, bool config_required) {
        auto* opt = cmd->add_option("--config", config_path, "experiment config file");
        if (config_required) opt->required();
        cmd->add_option("--seed", seed, "override master_seed")
            ->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--realizations", realizations, "override realization count");
        cmd->add_option("--out", out_dir, "override output directory");
        cmd->add_option("--threads", threads, "worker threads over realizations");
    };

    auto* simulate = app.add_subcommand("simulate", "run the wave-equation ensemble");
    add_common(simulate, true);

    auto* kinetic = app.add_subcommand("kinetic", "solve the kinetic equations");
    add_common(kinetic, true);

    auto* predict = app.add_subcommand("predict", "emit closed-form prediction tables");
    double p_eps = 0.0, p_zeta = 0.0, p_kp = 0.0, p_klo = 0.0, p_khi = 0.0;
    int p_points = 200;
    predict->add_option("--epsilon", p_eps, "potential strength")->required();
    predict->add_option("--zeta", p_zeta, "correlation length")->required();
    predict->add_option("--kp", p_kp, "initial wave number")->required();
    predict->add_option("--k-lo", p_klo, "lower edge of the k range");
    predict->add_option("--k-hi", p_khi, "upper edge of the k range");
    predict->add_option("--points", p_points, "number of k samples");
    predict->add_option("--out", out_dir, "output directory")->required();

    auto* compare = app.add_subcommand("compare", "compare runs against predictions");
    std::vector<std::string> run_dirs;
    std::string predictions_csv, baseline_run;
    qbroad::CompareTolerances tol;
    compare->add_option("--runs", run_dirs, "simulate run directories")->required();
    compare->add_option("--predictions", predictions_csv, "prediction CSV from `predict`");
    compare->add_option("--baseline", baseline_run, "baseline run directory");
    compare->add_option("--out", out_dir, "directory for report.csv");
    compare->add_option("--tol-rate", tol.rate, "decay-rate tolerance");
    compare->add_option("--tol-profile", tol.profile, "profile tolerance");
    compare->add_option("--fit-steps", tol.fit_steps, "decay-fit window in steps");
    compare->add_option("--fit-tc-cap", tol.fit_tc_cap,
                        "cap the fit window at this many theoretical t_c (0 = off)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed()) {
            const auto cfg = load_config(config_path, seed, seed_set, realizations,
                                         out_dir, threads);
            const auto outputs = qbroad::run_simulate(cfg);
            std::cout << "run directory: " << outputs.run_dir << "\n";
        } else if (kinetic->parsed()) {
            const auto cfg = load_config(config_path, seed, seed_set, realizations,
                                         out_dir, threads);
            const auto dir = qbroad::run_kinetic(cfg);
            std::cout << "run directory: " << dir << "\n";
        } else if (predict->parsed()) {
            if (p_klo == 0.0) p_klo = std::max(0.5, 0.6 * p_kp);
            if (p_khi == 0.0) p_khi = 1.4 * p_kp;
            std::filesystem::create_directories(out_dir);
            const std::string csv = out_dir + "/predictions.csv";
            qbroad::run_predict(p_eps, p_zeta, p_kp, p_klo, p_khi, p_points, csv);
            std::cout << "predictions: " << csv << "\n";
        } else if (compare->parsed()) {
            std::string report_path;
            if (!out_dir.empty()) {
                std::filesystem::create_directories(out_dir);
                report_path = out_dir + "/report.csv";
            }
            const auto report = qbroad::run_compare(run_dirs, predictions_csv,
                                                    baseline_run, tol, report_path);
            for (const auto& e : report.entries)
                std::printf("%-40s measured=%-14.6g predicted=%-14.6g rel_err=%-10.3g %s\n",
                            e.name.c_str(), e.measured, e.predicted, e.rel_error,
                            e.pass ? "PASS" : "FAIL");
            if (!report.all_pass) return 3;
        }
    } catch (const qbroad::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const qbroad::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const qbroad::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
