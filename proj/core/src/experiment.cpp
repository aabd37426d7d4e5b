#include "qbroad/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "qbroad/kinetic.hpp"
#include "qbroad/propagator.hpp"
#include "qbroad/rng.hpp"
#include "qbroad/theory.hpp"

namespace fs = std::filesystem;

namespace qbroad {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

double parse_double_field(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config field '" + key + "': not a number: " + value);
    }
}

long long parse_int_field(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config field '" + key + "': not an integer: " + value);
    }
}

std::uint64_t parse_uint_field(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config field '" + key + "': not an unsigned integer: " + value);
    }
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.erase(hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: expected 'key = value', got: " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "epsilon") cfg.epsilon = parse_double_field(key, value);
        else if (key == "zeta") cfg.zeta = parse_double_field(key, value);
        else if (key == "kp") cfg.kp = parse_double_field(key, value);
        else if (key == "grid_n") cfg.grid_n = static_cast<int>(parse_int_field(key, value));
        else if (key == "tau") cfg.tau = parse_double_field(key, value);
        else if (key == "n_steps") cfg.n_steps = parse_int_field(key, value);
        else if (key == "record_every") cfg.record_every = parse_int_field(key, value);
        else if (key == "realizations") cfg.realizations = static_cast<int>(parse_int_field(key, value));
        else if (key == "master_seed") cfg.master_seed = parse_uint_field(key, value);
        else if (key == "output_dir") cfg.output_dir = value;
        else if (key == "averaging_fraction") cfg.averaging_fraction = parse_double_field(key, value);
        else if (key == "dump_fields") cfg.dump_fields = parse_int_field(key, value) != 0;
        else if (key == "solver") cfg.solver = value;
        else if (key == "ring_points") cfg.ring_points = static_cast<int>(parse_int_field(key, value));
        else if (key == "kinetic_steps") cfg.kinetic_steps = parse_int_field(key, value);
        else if (key == "kinetic_dt") cfg.kinetic_dt = parse_double_field(key, value);
        else if (key == "track_shell_width") cfg.track_shell_width = parse_double_field(key, value);
        else if (key == "threads") cfg.threads = static_cast<int>(parse_int_field(key, value));
        else throw ConfigError("config: unknown field '" + key + "'");
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "epsilon = " << fmt_double(cfg.epsilon) << "\n"
        << "zeta = " << fmt_double(cfg.zeta) << "\n"
        << "kp = " << fmt_double(cfg.kp) << "\n"
        << "grid_n = " << cfg.grid_n << "\n"
        << "tau = " << fmt_double(cfg.tau) << "\n"
        << "n_steps = " << cfg.n_steps << "\n"
        << "record_every = " << cfg.record_every << "\n"
        << "realizations = " << cfg.realizations << "\n"
        << "master_seed = " << cfg.master_seed << "\n"
        << "output_dir = " << cfg.output_dir << "\n"
        << "averaging_fraction = " << fmt_double(cfg.averaging_fraction) << "\n"
        << "dump_fields = " << (cfg.dump_fields ? 1 : 0) << "\n"
        << "solver = " << cfg.solver << "\n"
        << "ring_points = " << cfg.ring_points << "\n"
        << "kinetic_steps = " << cfg.kinetic_steps << "\n"
        << "kinetic_dt = " << fmt_double(cfg.kinetic_dt) << "\n"
        << "track_shell_width = " << fmt_double(cfg.track_shell_width) << "\n"
        << "threads = " << cfg.threads << "\n";
    return out.str();
}

void validate_config(const ExperimentConfig& cfg) {
    const auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("config field '" + field + "': " + why);
    };
    if (!(cfg.epsilon > 0.0)) fail("epsilon", "must be > 0");
    if (!(cfg.zeta > 0.0)) fail("zeta", "must be > 0");
    if (!(cfg.kp > 0.0)) fail("kp", "must be > 0");
    if (cfg.kp != std::floor(cfg.kp)) fail("kp", "must be integer-valued");
    if (cfg.grid_n < 8) fail("grid_n", "must be >= 8");
    if (cfg.kp > (cfg.grid_n - 1) / 2) fail("kp", "off the lattice for grid_n");
    if (cfg.tau < 0.0) fail("tau", "must be >= 0 (0 selects 1/kp^2)");
    if (cfg.n_steps < 1) fail("n_steps", "must be >= 1");
    if (cfg.record_every < 1) fail("record_every", "must be >= 1");
    if (cfg.realizations < 1) fail("realizations", "must be >= 1");
    if (!(cfg.averaging_fraction > 0.0 && cfg.averaging_fraction <= 1.0))
        fail("averaging_fraction", "must be in (0, 1]");
    if (cfg.solver != "memory" && cfg.solver != "ring")
        fail("solver", "must be 'memory' or 'ring'");
    if (cfg.ring_points < 16) fail("ring_points", "must be >= 16");
    if (cfg.kinetic_steps < 1) fail("kinetic_steps", "must be >= 1");
    if (cfg.kinetic_dt < 0.0) fail("kinetic_dt", "must be >= 0 (0 selects automatic)");
    if (!(cfg.track_shell_width > 0.0)) fail("track_shell_width", "must be > 0");
    if (cfg.threads < 1) fail("threads", "must be >= 1");
    if (cfg.output_dir.empty()) fail("output_dir", "must be set");
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    ExperimentConfig canonical = cfg;
    canonical.output_dir = "";
    canonical.threads = 1;
    if (canonical.tau == 0.0) canonical.tau = default_tau(canonical.kp);
    return fnv1a64(serialize_config(canonical));
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
    return to_hex(config_hash(cfg));
}

// ---------------------------------------------------------------------------
// Manifest and run-directory files
// ---------------------------------------------------------------------------

namespace {

struct Manifest {
    std::string kind;
    std::string code_version;
    std::string hash_hex;
    ExperimentConfig config;
};

void write_manifest(const fs::path& dir, const std::string& kind,
                    const ExperimentConfig& cfg) {
    std::ofstream out(dir / "manifest.txt");
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    out << "# qbroad run manifest\n"
        << "format_version = 1\n"
        << "kind = " << kind << "\n"
        << "code_version = " << kCodeVersion << "\n"
        << "config_hash = " << config_hash_hex(cfg) << "\n"
        << "# --- config ---\n"
        << serialize_config(cfg);
    if (!out) throw IoError("short write to manifest in " + dir.string());
}

Manifest read_manifest(const fs::path& dir) {
    std::ifstream in(dir / "manifest.txt");
    if (!in) throw IoError("cannot read manifest in " + dir.string());
    Manifest m;
    std::string line, config_text;
    while (std::getline(in, line)) {
        const std::string stripped = trim(line);
        if (stripped.rfind("kind = ", 0) == 0) m.kind = stripped.substr(7);
        else if (stripped.rfind("code_version = ", 0) == 0) m.code_version = stripped.substr(15);
        else if (stripped.rfind("config_hash = ", 0) == 0) m.hash_hex = stripped.substr(14);
        else if (stripped.rfind("format_version", 0) == 0) continue;
        else config_text += line + "\n";
    }
    m.config = parse_config_text(config_text);
    if (m.hash_hex != config_hash_hex(m.config))
        throw IoError("manifest in " + dir.string() + " fails its own hash check");
    return m;
}

constexpr std::uint32_t kRealMagic = 0x4C524251u; // "QBRL"
constexpr std::uint32_t kDistMagic = 0x444D4251u; // "QBMD"
constexpr std::uint32_t kRunFormatVersion = 1;

struct RealizationData {
    std::vector<TimeSeriesRecord> records;
    std::vector<double> window_density; // sum over window snapshots
    double window_weight = 0.0;
};

fs::path realization_path(const fs::path& dir, int index) {
    char name[32];
    std::snprintf(name, sizeof name, "real_%05d.bin", index);
    return dir / "realizations" / name;
}

void write_realization(const fs::path& path, std::uint64_t hash, int index,
                       int n, const RealizationData& data) {
    const fs::path tmp = path.string() + ".tmp";
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) throw IoError("cannot write " + tmp.string());
    const std::uint32_t idx = static_cast<std::uint32_t>(index);
    const std::uint32_t nn = static_cast<std::uint32_t>(n);
    const std::uint64_t n_records = data.records.size();
    bool ok = std::fwrite(&kRealMagic, 4, 1, f) == 1 &&
              std::fwrite(&kRunFormatVersion, 4, 1, f) == 1 &&
              std::fwrite(&hash, 8, 1, f) == 1 &&
              std::fwrite(&idx, 4, 1, f) == 1 &&
              std::fwrite(&nn, 4, 1, f) == 1 &&
              std::fwrite(&n_records, 8, 1, f) == 1 &&
              std::fwrite(&data.window_weight, 8, 1, f) == 1;
    for (const auto& r : data.records)
        ok = ok && std::fwrite(&r, sizeof r, 1, f) == 1;
    ok = ok && std::fwrite(data.window_density.data(), sizeof(double),
                           data.window_density.size(), f) ==
                   data.window_density.size();
    ok = std::fclose(f) == 0 && ok;
    if (!ok) throw IoError("short write to " + tmp.string());
    fs::rename(tmp, path);
}

bool read_realization(const fs::path& path, std::uint64_t hash, int index, int n,
                      RealizationData& data) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return false;
    std::uint32_t magic = 0, version = 0, idx = 0, nn = 0;
    std::uint64_t file_hash = 0, n_records = 0;
    bool ok = std::fread(&magic, 4, 1, f) == 1 &&
              std::fread(&version, 4, 1, f) == 1 &&
              std::fread(&file_hash, 8, 1, f) == 1 &&
              std::fread(&idx, 4, 1, f) == 1 &&
              std::fread(&nn, 4, 1, f) == 1 &&
              std::fread(&n_records, 8, 1, f) == 1 &&
              std::fread(&data.window_weight, 8, 1, f) == 1;
    ok = ok && magic == kRealMagic && version == kRunFormatVersion &&
         file_hash == hash && idx == static_cast<std::uint32_t>(index) &&
         nn == static_cast<std::uint32_t>(n);
    if (ok) {
        data.records.resize(n_records);
        for (auto& r : data.records)
            ok = ok && std::fread(&r, sizeof r, 1, f) == 1;
        data.window_density.resize(static_cast<std::size_t>(n) * n);
        ok = ok && std::fread(data.window_density.data(), sizeof(double),
                              data.window_density.size(), f) ==
                       data.window_density.size();
        // reject trailing garbage
        char extra;
        ok = ok && std::fread(&extra, 1, 1, f) == 0;
    }
    std::fclose(f);
    return ok;
}

void write_distribution(const fs::path& path, std::uint64_t hash, int n,
                        const MomentumDistribution& dist) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write " + path.string());
    const std::uint32_t nn = static_cast<std::uint32_t>(n);
    bool ok = std::fwrite(&kDistMagic, 4, 1, f) == 1 &&
              std::fwrite(&kRunFormatVersion, 4, 1, f) == 1 &&
              std::fwrite(&hash, 8, 1, f) == 1 &&
              std::fwrite(&nn, 4, 1, f) == 1 &&
              std::fwrite(&dist.weight, 8, 1, f) == 1 &&
              std::fwrite(dist.density.data(), sizeof(double),
                          dist.density.size(), f) == dist.density.size();
    ok = std::fclose(f) == 0 && ok;
    if (!ok) throw IoError("short write to " + path.string());
}

void write_timeseries(const fs::path& path, const std::string& hash_hex,
                      const ExperimentConfig& cfg,
                      const std::vector<TimeSeriesRecord>& records) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot write " + path.string());
    bool ok = std::fprintf(f,
                           "{\"meta\":{\"config_hash\":\"%s\",\"realizations\":%d,"
                           "\"record_every\":%ld,\"tau\":%.17g}}\n",
                           hash_hex.c_str(), cfg.realizations, cfg.record_every,
                           cfg.tau) > 0;
    for (const auto& r : records)
        ok = ok && std::fprintf(f, "{\"t\":%.17g,\"n_kp\":%.17g,\"norm\":%.17g}\n",
                                r.t, r.n_kp, r.norm) > 0;
    ok = std::fclose(f) == 0 && ok;
    if (!ok) throw IoError("short write to " + path.string());
}

std::vector<TimeSeriesRecord> read_timeseries(const fs::path& path,
                                              std::string& hash_hex) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<TimeSeriesRecord> records;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw IoError("bad NDJSON line in " + path.string());
        if (first && j.contains("meta")) {
            hash_hex = j["meta"].value("config_hash", "");
            first = false;
            continue;
        }
        first = false;
        TimeSeriesRecord r;
        r.t = j.value("t", 0.0);
        r.n_kp = j.value("n_kp", 0.0);
        r.norm = j.value("norm", 0.0);
        records.push_back(r);
    }
    return records;
}

void write_profile_csv(const fs::path& path, const std::string& hash_hex,
                       const RadialProfile& profile) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot write " + path.string());
    bool ok = std::fprintf(f, "# qbroad radial profile\n# config_hash = %s\nk,n_bar\n",
                           hash_hex.c_str()) > 0;
    for (std::size_t j = 0; j < profile.eval_points.size(); ++j)
        ok = ok && std::fprintf(f, "%.17g,%.17g\n", profile.eval_points[j],
                                profile.values[j]) > 0;
    ok = std::fclose(f) == 0 && ok;
    if (!ok) throw IoError("short write to " + path.string());
}

RadialProfile read_profile_csv(const fs::path& path, std::string& hash_hex) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    RadialProfile profile;
    std::string line;
    while (std::getline(in, line)) {
        const std::string stripped = trim(line);
        if (stripped.rfind("# config_hash = ", 0) == 0) {
            hash_hex = stripped.substr(16);
            continue;
        }
        if (stripped.empty() || stripped[0] == '#' || stripped == "k,n_bar")
            continue;
        const auto comma = stripped.find(',');
        if (comma == std::string::npos)
            throw IoError("bad profile row in " + path.string() + ": " + stripped);
        profile.eval_points.push_back(
            parse_double_field("k", stripped.substr(0, comma)));
        profile.values.push_back(
            parse_double_field("n_bar", stripped.substr(comma + 1)));
    }
    return profile;
}

std::vector<double> profile_eval_points(const Grid& grid,
                                        const ExperimentConfig& cfg) {
    const double kp = cfg.kp;
    const double wlo = kp * kp - 16.0 * cfg.epsilon;
    double lo = std::sqrt(std::max(wlo, 0.25));
    double hi = std::sqrt(kp * kp + 16.0 * cfg.epsilon);
    lo = std::min(lo, kp - 3.0);
    hi = std::max(hi, kp + 3.0);
    lo = std::max(lo, 0.5);
    hi = std::min(hi, static_cast<double>(grid.kmax()) - 0.5);
    return peak_eval_points(lo, hi, kp, 300);
}

} // namespace

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

RunOutputs run_simulate(const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    validate_config(cfg);
    if (cfg.tau == 0.0) cfg.tau = default_tau(cfg.kp);

    const Grid grid(cfg.grid_n);
    const CovarianceSpec spec = normalize_spectrum(grid, cfg.zeta);
    const std::uint64_t hash = config_hash(cfg);
    const std::string hash_hex = to_hex(hash);

    const fs::path dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir / "realizations", ec);
    if (ec) throw IoError("cannot create run directory " + dir.string());
    if (cfg.dump_fields) fs::create_directories(dir / "fields", ec);

    if (fs::exists(dir / "manifest.txt")) {
        const Manifest m = read_manifest(dir);
        if (m.hash_hex != hash_hex)
            throw ConfigError("run directory " + dir.string() +
                              " holds a different experiment (config hash " +
                              m.hash_hex + " != " + hash_hex + ")");
    } else {
        write_manifest(dir, "simulate", cfg);
    }

    // Figure out which realizations still need to run (resume support).
    std::vector<int> missing;
    for (int r = 0; r < cfg.realizations; ++r) {
        RealizationData scratch;
        if (!read_realization(realization_path(dir, r), hash, r, cfg.grid_n, scratch))
            missing.push_back(r);
    }

    const std::array<int, 2> kp_mode = {static_cast<int>(cfg.kp), 0};
    const std::size_t kp_site = grid.at_wavevector(kp_mode[0], kp_mode[1]);
    const long window_start =
        cfg.n_steps - static_cast<long>(cfg.averaging_fraction * cfg.n_steps);

    const auto run_one = [&](int r) {
        const std::uint64_t seed = derive_seed(cfg.master_seed, r);
        const PotentialField potential = sample_potential(grid, spec, seed);
        if (cfg.dump_fields) {
            char name[32];
            std::snprintf(name, sizeof name, "field_%05d.bin", r);
            write_field_dump((dir / "fields" / name).string(), grid, spec, potential);
        }
        WaveField field = init_plane_wave(grid, kp_mode);
        EvolveConfig evo{cfg.epsilon, cfg.tau, cfg.n_steps, cfg.record_every};

        RealizationData data;
        data.window_density.assign(grid.size(), 0.0);
        const RecordSink sink = [&](long step, const WaveField& f) {
            TimeSeriesRecord rec;
            rec.t = step * cfg.tau;
            const double n2 = static_cast<double>(grid.n()) * grid.n();
            rec.n_kp = std::norm(f.amplitudes[kp_site]) / n2;
            rec.norm = norm(grid, f);
            data.records.push_back(rec);
            if (step >= window_start) {
                const auto density = momentum_density(grid, f);
                for (std::size_t i = 0; i < density.size(); ++i)
                    data.window_density[i] += density[i];
                data.window_weight += 1.0;
            }
        };
        field = evolve(grid, std::move(field), potential, evo, sink);
        const double drift = std::abs(norm(grid, field) - 1.0);
        if (!(drift <= 1e-6))
            throw NumericError("realization " + std::to_string(r) +
                               ": norm drift " + fmt_double(drift));
        write_realization(realization_path(dir, r), hash, r, cfg.grid_n, data);
    };

    if (!missing.empty()) {
        const int n_workers =
            std::max(1, std::min<int>(cfg.threads, static_cast<int>(missing.size())));
        if (n_workers == 1) {
            for (int r : missing) run_one(r);
        } else {
            std::atomic<std::size_t> next{0};
            std::exception_ptr failure;
            std::mutex failure_mutex;
            std::vector<std::thread> pool;
            for (int w = 0; w < n_workers; ++w)
                pool.emplace_back([&] {
                    while (true) {
                        const std::size_t i = next.fetch_add(1);
                        if (i >= missing.size()) return;
                        try {
                            run_one(missing[i]);
                        } catch (...) {
                            std::lock_guard lock(failure_mutex);
                            if (!failure) failure = std::current_exception();
                            return;
                        }
                    }
                });
            for (auto& t : pool) t.join();
            if (failure) std::rethrow_exception(failure);
        }
    }

    // Deterministic merge in realization-index order.
    RunOutputs out;
    out.run_dir = dir.string();
    out.distribution = make_distribution(grid);
    std::vector<double> ts_n, ts_norm;
    std::vector<double> ts_t;
    for (int r = 0; r < cfg.realizations; ++r) {
        RealizationData data;
        if (!read_realization(realization_path(dir, r), hash, r, cfg.grid_n, data))
            throw IoError("missing or corrupt realization file for index " +
                          std::to_string(r));
        accumulate_density(out.distribution, data.window_density, data.window_weight);
        if (ts_t.empty()) {
            ts_t.resize(data.records.size());
            ts_n.assign(data.records.size(), 0.0);
            ts_norm.assign(data.records.size(), 0.0);
            for (std::size_t i = 0; i < data.records.size(); ++i)
                ts_t[i] = data.records[i].t;
        }
        if (data.records.size() != ts_t.size())
            throw IoError("inconsistent record counts across realizations");
        for (std::size_t i = 0; i < data.records.size(); ++i) {
            ts_n[i] += data.records[i].n_kp;
            ts_norm[i] += data.records[i].norm;
        }
    }
    out.timeseries.resize(ts_t.size());
    for (std::size_t i = 0; i < ts_t.size(); ++i)
        out.timeseries[i] = {ts_t[i], ts_n[i] / cfg.realizations,
                             ts_norm[i] / cfg.realizations};

    write_timeseries(dir / "timeseries.ndjson", hash_hex, cfg, out.timeseries);
    write_distribution(dir / "distribution.bin", hash, cfg.grid_n, out.distribution);
    out.profile = radial_profile(grid, out.distribution,
                                 profile_eval_points(grid, cfg), 0.5);
    write_profile_csv(dir / "profile.csv", hash_hex, out.profile);
    return out;
}

// ---------------------------------------------------------------------------
// kinetic
// ---------------------------------------------------------------------------

std::string run_kinetic(const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    validate_config(cfg);
    if (cfg.tau == 0.0) cfg.tau = default_tau(cfg.kp);

    const fs::path dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create run directory " + dir.string());
    write_manifest(dir, "kinetic", cfg);
    const std::string hash_hex = config_hash_hex(cfg);

    std::FILE* f = nullptr;
    const fs::path out_path = dir / "kinetic.ndjson";

    if (cfg.solver == "ring") {
        const double z2k2 = cfg.zeta * cfg.zeta * cfg.kp * cfg.kp;
        const AngularCovariance cov = [&cfg, z2k2](double theta) {
            return cfg.zeta * cfg.zeta / (2.0 * std::numbers::pi) *
                   std::exp(-z2k2 * (1.0 - std::cos(theta)));
        };
        RingState state;
        state.k = cfg.kp;
        state.density.assign(cfg.ring_points, 0.0);
        // delta at theta=0 with unit angular mass
        state.density[0] = cfg.ring_points / (2.0 * std::numbers::pi);
        double dt = cfg.kinetic_dt;
        if (dt == 0.0) {
            const theory::TheoryParams params{cfg.epsilon, cfg.zeta, cfg.kp};
            dt = theory::diffusive_time(params, cfg.kp).exact / 50.0;
        }
        const auto series = ring_evolve(state, cov, cfg.epsilon, dt, int(cfg.kinetic_steps));

        f = std::fopen(out_path.c_str(), "w");
        if (!f) throw IoError("cannot write " + out_path.string());
        bool ok = std::fprintf(f,
                               "{\"meta\":{\"config_hash\":\"%s\",\"solver\":\"ring\","
                               "\"m_points\":%d,\"k\":%.17g,\"dt\":%.17g}}\n",
                               hash_hex.c_str(), cfg.ring_points, cfg.kp, dt) > 0;
        const double dtheta = 2.0 * std::numbers::pi / cfg.ring_points;
        const double mass0 =
            dtheta * std::accumulate(series.front().density.begin(),
                                     series.front().density.end(), 0.0);
        for (std::size_t s = 0; s < series.size(); ++s) {
            ok = ok && std::fprintf(f, "{\"t\":%.17g,\"n\":[", s * dt) > 0;
            for (int i = 0; i < cfg.ring_points; ++i)
                ok = ok && std::fprintf(f, i ? ",%.17g" : "%.17g",
                                        series[s].density[i]) > 0;
            ok = ok && std::fprintf(f, "]}\n") > 0;
            const double mass =
                dtheta * std::accumulate(series[s].density.begin(),
                                         series[s].density.end(), 0.0);
            if (!(std::abs(mass - mass0) <= 1e-9 * std::abs(mass0))) {
                std::fclose(f);
                throw NumericError("ring solver lost mass");
            }
        }
        ok = std::fclose(f) == 0 && ok;
        if (!ok) throw IoError("short write to " + out_path.string());
        return dir.string();
    }

    // memory solver
    const Grid grid(cfg.grid_n);
    const CovarianceSpec spec = normalize_spectrum(grid, cfg.zeta);
    ModeSet active = active_set_around(grid, spec, cfg.kp);
    const MemoryKernel kernel =
        build_memory_kernel(grid, spec, cfg.epsilon, std::move(active));
    double dt = cfg.kinetic_dt == 0.0 ? kernel.suggested_dt() : cfg.kinetic_dt;
    if (dt > kernel.suggested_dt())
        throw ConfigError("config field 'kinetic_dt': too large to resolve the "
                          "fastest phase (max " + fmt_double(kernel.suggested_dt()) + ")");

    std::vector<double> initial(kernel.active.size(), 0.0);
    const long kp_index = kernel.active.find(static_cast<int>(cfg.kp), 0);
    if (kp_index < 0) throw ConfigError("config field 'kp': not in the active set");
    initial[kp_index] = 1.0;

    const auto series = memory_evolve(initial, kernel, dt, int(cfg.kinetic_steps));

    // Track the initial mode plus the shell around |kp|.
    std::vector<std::size_t> tracked;
    tracked.push_back(kp_index);
    for (std::size_t i = 0; i < kernel.active.size(); ++i) {
        if (static_cast<long>(i) == kp_index) continue;
        const double km = std::sqrt(kernel.active.ksq[i]);
        if (std::abs(km - cfg.kp) <= 0.5 * cfg.track_shell_width)
            tracked.push_back(i);
    }

    f = std::fopen(out_path.c_str(), "w");
    if (!f) throw IoError("cannot write " + out_path.string());
    bool ok = std::fprintf(f,
                           "{\"meta\":{\"config_hash\":\"%s\",\"solver\":\"memory\","
                           "\"dt\":%.17g,\"modes\":[",
                           hash_hex.c_str(), dt) > 0;
    for (std::size_t j = 0; j < tracked.size(); ++j)
        ok = ok && std::fprintf(f, j ? ",[%d,%d]" : "[%d,%d]",
                                kernel.active.modes[tracked[j]][0],
                                kernel.active.modes[tracked[j]][1]) > 0;
    ok = ok && std::fprintf(f, "]}}\n") > 0;

    double mass0 = 0.0;
    for (double v : series.front()) mass0 += v;
    for (std::size_t s = 0; s < series.size(); ++s) {
        ok = ok && std::fprintf(f, "{\"t\":%.17g,\"n\":[", s * dt) > 0;
        for (std::size_t j = 0; j < tracked.size(); ++j)
            ok = ok && std::fprintf(f, j ? ",%.17g" : "%.17g",
                                    series[s][tracked[j]]) > 0;
        ok = ok && std::fprintf(f, "]}\n") > 0;
        double mass = 0.0;
        for (double v : series[s]) mass += v;
        if (!(std::abs(mass - mass0) <= 1e-6 * std::abs(mass0))) {
            std::fclose(f);
            throw NumericError("memory solver lost mass");
        }
    }
    ok = std::fclose(f) == 0 && ok;
    if (!ok) throw IoError("short write to " + out_path.string());
    return dir.string();
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

void run_predict(double epsilon, double zeta, double kp, double k_lo,
                 double k_hi, int count, const std::string& csv_path) {
    const auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("config field '" + field + "': " + why);
    };
    if (!(epsilon > 0.0)) fail("epsilon", "must be > 0");
    if (!(zeta > 0.0)) fail("zeta", "must be > 0");
    if (!(kp > 0.0)) fail("kp", "must be > 0");
    if (!(k_lo > 0.0) || !(k_hi > k_lo)) fail("k_range", "need 0 < k_lo < k_hi");
    if (count < 2) fail("count", "need >= 2 points");

    const theory::TheoryParams params{epsilon, zeta, kp};
    std::FILE* f = std::fopen(csv_path.c_str(), "w");
    if (!f) throw IoError("cannot write " + csv_path);
    bool ok = std::fprintf(f,
                           "# qbroad predictions\n# epsilon = %.17g\n# zeta = %.17g\n"
                           "# kp = %.17g\n"
                           "epsilon,zeta,k,n_asym,n_full,c0,c1,tc_exact,tc_approx,"
                           "td_exact,td_approx,d_exact,d_approx,log_xi_loc\n",
                           epsilon, zeta, kp) > 0;
    for (int i = 0; i < count; ++i) {
        const double k = k_lo + (k_hi - k_lo) * i / (count - 1);
        const double n_asym =
            theory::broadening_profile(k, kp, epsilon, theory::ProfileVariant::asymptotic);
        const double n_full =
            theory::broadening_profile(k, kp, epsilon, theory::ProfileVariant::full);
        const double c0 = theory::cm_coefficient(0, k, zeta);
        const double c1 = theory::cm_coefficient(1, k, zeta);
        const auto tc = theory::collision_time(params, k);
        const auto td = theory::diffusive_time(params, k);
        const auto d = theory::diffusion_constant(params, k);
        const auto xi = theory::localization_length(params, k);
        ok = ok && std::fprintf(f,
                                "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                                "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                                epsilon, zeta, k, n_asym, n_full, c0, c1, tc.exact,
                                tc.approx, td.exact, td.approx, d.exact, d.approx,
                                xi.log_value) > 0;
    }
    ok = std::fclose(f) == 0 && ok;
    if (!ok) throw IoError("short write to " + csv_path);
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

double fit_prefactor(const std::vector<std::pair<double, double>>& pm) {
    double num = 0.0, den = 0.0;
    for (const auto& [predicted, measured] : pm) {
        num += predicted * measured;
        den += predicted * predicted;
    }
    if (den == 0.0) throw ConfigError("fit_prefactor: degenerate scan");
    return num / den;
}

namespace {

struct LoadedRun {
    std::string dir;
    ExperimentConfig config;
    std::string hash_hex;
    std::vector<TimeSeriesRecord> timeseries;
    RadialProfile profile;
};

LoadedRun load_run(const std::string& dir) {
    LoadedRun run;
    run.dir = dir;
    const Manifest m = read_manifest(dir);
    if (m.kind != "simulate")
        throw ConfigError("run directory " + dir + " is not a simulate run");
    run.config = m.config;
    if (run.config.tau == 0.0) run.config.tau = default_tau(run.config.kp);
    run.hash_hex = m.hash_hex;
    std::string ts_hash, profile_hash;
    run.timeseries = read_timeseries(fs::path(dir) / "timeseries.ndjson", ts_hash);
    run.profile = read_profile_csv(fs::path(dir) / "profile.csv", profile_hash);
    if (ts_hash != run.hash_hex || profile_hash != run.hash_hex)
        throw ConfigError("run directory " + dir +
                          ": output files carry a different config hash");
    return run;
}

double fitted_rate(const LoadedRun& run, const CompareTolerances& tol) {
    const theory::TheoryParams params{run.config.epsilon, run.config.zeta,
                                      run.config.kp};
    double window_t = tol.fit_steps * run.config.tau;
    if (tol.fit_tc_cap > 0.0)
        window_t = std::min(window_t,
                            tol.fit_tc_cap * theory::collision_time(params, run.config.kp).approx);
    std::vector<std::pair<double, double>> series;
    for (const auto& r : run.timeseries)
        if (r.t <= window_t) series.emplace_back(r.t, r.n_kp);
    if (series.size() < 3)
        throw ConfigError("run " + run.dir + ": too few samples in the fit window");
    return peak_decay_fit(series, {0, series.size()}).rate;
}

} // namespace

CompareReport run_compare(const std::vector<std::string>& run_dirs,
                          const std::string& predictions_csv,
                          const std::string& baseline_run,
                          const CompareTolerances& tol,
                          const std::string& report_path) {
    if (run_dirs.empty()) throw ConfigError("compare: no run directories given");
    CompareReport report;
    std::vector<LoadedRun> runs;
    runs.reserve(run_dirs.size());
    for (const auto& dir : run_dirs) runs.push_back(load_run(dir));

    const auto push = [&report](const std::string& name, double measured,
                                double predicted, double tolerance) {
        CompareEntry e;
        e.name = name;
        e.measured = measured;
        e.predicted = predicted;
        e.rel_error = predicted != 0.0
                          ? std::abs(measured - predicted) / std::abs(predicted)
                          : std::abs(measured);
        e.pass = e.rel_error <= tolerance;
        report.entries.push_back(e);
        report.all_pass = report.all_pass && e.pass;
    };

    // Decay rates against the closed-form collision rate.
    for (const auto& run : runs) {
        const theory::TheoryParams params{run.config.epsilon, run.config.zeta,
                                          run.config.kp};
        const double measured = fitted_rate(run, tol);
        const double predicted = 1.0 / theory::collision_time(params, run.config.kp).approx;
        push("rate[" + run.dir + "]", measured, predicted, tol.rate);
    }

    // Scan prefactors when several runs vary exactly one parameter.
    {
        std::vector<std::pair<double, double>> eps_scan, zeta_scan;
        std::set<double> eps_values, zeta_values;
        const auto& c0 = runs[0].config;
        for (const auto& run : runs) {
            const auto& c = run.config;
            if (c.kp != c0.kp || c.grid_n != c0.grid_n) continue;
            const theory::TheoryParams params{c.epsilon, c.zeta, c.kp};
            const double predicted =
                1.0 / theory::collision_time(params, c.kp).approx;
            const double measured = fitted_rate(run, tol);
            if (c.zeta == c0.zeta) {
                eps_scan.emplace_back(predicted, measured);
                eps_values.insert(c.epsilon);
            }
            if (c.epsilon == c0.epsilon) {
                zeta_scan.emplace_back(predicted, measured);
                zeta_values.insert(c.zeta);
            }
        }
        if (eps_values.size() >= 3)
            push("prefactor_epsilon_scan", fit_prefactor(eps_scan), 1.0, tol.rate);
        if (zeta_values.size() >= 3)
            push("prefactor_zeta_scan", fit_prefactor(zeta_scan), 1.0, tol.rate);
    }

    // Profile shape against the full-variant prediction.
    if (!predictions_csv.empty()) {
        std::ifstream in(predictions_csv);
        if (!in) throw IoError("cannot read " + predictions_csv);
        double p_eps = 0.0, p_zeta = 0.0, p_kp = 0.0;
        std::string line;
        while (std::getline(in, line)) {
            const std::string s = trim(line);
            if (s.rfind("# epsilon = ", 0) == 0) p_eps = std::stod(s.substr(12));
            if (s.rfind("# zeta = ", 0) == 0) p_zeta = std::stod(s.substr(9));
            if (s.rfind("# kp = ", 0) == 0) p_kp = std::stod(s.substr(7));
        }
        for (const auto& run : runs) {
            const auto close = [](double a, double b) {
                return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b));
            };
            if (!close(run.config.epsilon, p_eps) || !close(run.config.zeta, p_zeta) ||
                !close(run.config.kp, p_kp))
                throw ConfigError("compare: prediction CSV parameters do not match run " +
                                  run.dir);
            // Renormalize the theory curve over the run's eval grid with the
            // same discrete measure, then compare log profiles where the
            // theory is above 1e-3 of its peak.
            const auto& pts = run.profile.eval_points;
            std::vector<double> ref(pts.size());
            for (std::size_t j = 0; j < pts.size(); ++j)
                ref[j] = theory::broadening_profile(pts[j], p_kp, p_eps,
                                                    theory::ProfileVariant::full);
            double total = 0.0;
            for (std::size_t j = 0; j < pts.size(); ++j) {
                const double dx = j + 1 < pts.size() ? pts[j + 1] - pts[j]
                                                     : pts[j] - pts[j - 1];
                total += dx * ref[j];
            }
            for (auto& v : ref) v /= total;
            const double peak = *std::max_element(ref.begin(), ref.end());
            double max_dev = 0.0;
            for (std::size_t j = 0; j < pts.size(); ++j) {
                if (ref[j] < 1e-3 * peak || run.profile.values[j] <= 0.0) continue;
                max_dev = std::max(max_dev,
                                   std::abs(std::log(run.profile.values[j] / ref[j])));
            }
            push("profile[" + run.dir + "]", max_dev, 0.0, tol.profile);
        }
    }

    // Byte-level self comparison against a baseline run.
    if (!baseline_run.empty()) {
        const LoadedRun base = load_run(baseline_run);
        for (const auto& run : runs) {
            if (run.hash_hex != base.hash_hex)
                throw ConfigError("compare: config hash mismatch between " + run.dir +
                                  " and baseline " + baseline_run);
            if (run.profile.eval_points != base.profile.eval_points)
                throw ConfigError("compare: eval grids differ between " + run.dir +
                                  " and baseline " + baseline_run);
            double max_rel = 0.0;
            for (std::size_t j = 0; j < run.profile.values.size(); ++j) {
                const double denom = std::max(std::abs(base.profile.values[j]), 1e-300);
                max_rel = std::max(max_rel,
                                   std::abs(run.profile.values[j] -
                                            base.profile.values[j]) / denom);
            }
            push("baseline[" + run.dir + "]", max_rel, 0.0, tol.profile);
        }
    }

    if (!report_path.empty()) {
        std::FILE* f = std::fopen(report_path.c_str(), "w");
        if (!f) throw IoError("cannot write " + report_path);
        bool ok = std::fprintf(f, "name,measured,predicted,rel_error,pass\n") > 0;
        for (const auto& e : report.entries)
            ok = ok && std::fprintf(f, "%s,%.17g,%.17g,%.17g,%d\n", e.name.c_str(),
                                    e.measured, e.predicted, e.rel_error,
                                    e.pass ? 1 : 0) > 0;
        ok = std::fclose(f) == 0 && ok;
        if (!ok) throw IoError("short write to " + report_path);
    }
    return report;
}

} // namespace qbroad
