#ifndef QBROAD_EXPERIMENT_HPP
#define QBROAD_EXPERIMENT_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qbroad/errors.hpp"
#include "qbroad/observables.hpp"

namespace qbroad {

inline constexpr const char* kCodeVersion = "0.1.0";

/// Flat key = value experiment configuration (see README for the grammar).
/// Round-trips losslessly through serialize/parse.
struct ExperimentConfig {
    // physics + discretization
    double epsilon = 0.0;
    double zeta = 0.0;
    double kp = 0.0;            // integer-valued initial wave number
    int grid_n = 0;
    double tau = 0.0;           // 0 = default 1/kp^2
    long n_steps = 0;
    long record_every = 1;
    int realizations = 1;
    std::uint64_t master_seed = 1;
    std::string output_dir;
    double averaging_fraction = 0.5;
    bool dump_fields = false;

    // kinetic solver selection and knobs
    std::string solver = "memory";  // memory | ring
    int ring_points = 64;
    long kinetic_steps = 200;
    double kinetic_dt = 0.0;        // 0 = auto from the kernel phases
    double track_shell_width = 2.0;

    // execution (not part of the config hash)
    int threads = 1;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

/// Throws ConfigError naming the offending field.
void validate_config(const ExperimentConfig& cfg);

/// FNV-1a hash of the canonical serialization, excluding output_dir and
/// threads; identifies the numerical experiment.
std::uint64_t config_hash(const ExperimentConfig& cfg);
std::string config_hash_hex(const ExperimentConfig& cfg);

struct TimeSeriesRecord {
    double t = 0.0;
    double n_kp = 0.0;
    double norm = 0.0;
};

struct RunOutputs {
    std::string run_dir;
    std::vector<TimeSeriesRecord> timeseries;
    MomentumDistribution distribution; // window-averaged
    RadialProfile profile;
};

/// Runs `realizations` independent evolutions with per-realization seeds
/// derived from master_seed; per-realization partials are written under
/// <output_dir>/realizations and merged in index order, so a crashed run
/// resumes where it stopped and re-runs are bit-identical.
RunOutputs run_simulate(const ExperimentConfig& cfg);

/// Solves the selected kinetic equation (memory | ring) and writes an
/// NDJSON time series of the tracked modes.
std::string run_kinetic(const ExperimentConfig& cfg);

/// Emits the closed-form prediction table over [k_lo, k_hi].
void run_predict(double epsilon, double zeta, double kp, double k_lo,
                 double k_hi, int count, const std::string& csv_path);

struct CompareTolerances {
    double rate = 0.15;           // decay-rate relative error
    double profile = 0.15;        // profile log-deviation
    long fit_steps = 100;         // default decay-fit window length
    double fit_tc_cap = 2.0;      // cap window at this many theory t_c (0 = off)
};

struct CompareEntry {
    std::string name;
    double measured = 0.0;
    double predicted = 0.0;
    double rel_error = 0.0;
    bool pass = false;
};

struct CompareReport {
    std::vector<CompareEntry> entries;
    bool all_pass = true;
};

/// Aligns decay fits and radial profiles of the given run directories
/// against a prediction CSV and/or a baseline run; refuses mismatched
/// parameter or config hashes. Writes report.csv to report_path if given.
CompareReport run_compare(const std::vector<std::string>& run_dirs,
                          const std::string& predictions_csv,
                          const std::string& baseline_run,
                          const CompareTolerances& tol,
                          const std::string& report_path);

/// Prefactor of a linear law through the origin: least squares of
/// measured = C * predicted over scan points.
double fit_prefactor(const std::vector<std::pair<double, double>>& predicted_measured);

} // namespace qbroad

#endif
