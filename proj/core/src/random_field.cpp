#include "qbroad/random_field.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <stdexcept>

#include "qbroad/rng.hpp"
#include "qbroad/spectral.hpp"

namespace qbroad {

namespace {
constexpr std::uint32_t kFieldMagic = 0x51425246u; // "QBRF"
constexpr std::uint32_t kFieldVersion = 1;
} // namespace

CovarianceSpec normalize_spectrum(const Grid& grid, double zeta) {
    if (!(zeta > 0.0))
        throw std::invalid_argument("normalize_spectrum: zeta must be > 0");
    CovarianceSpec spec;
    spec.zeta = zeta;
    spec.spectrum.resize(grid.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double w = std::exp(-0.5 * zeta * zeta * grid.ksq()[i]);
        spec.spectrum[i] = w;
        sum += w;
    }
    spec.norm_const = 1.0 / sum;
    for (auto& w : spec.spectrum) w *= spec.norm_const;
    spec.degenerate = zeta * grid.kmax() < 1.0;
    if (spec.degenerate)
        std::clog << "[qbroad] normalize_spectrum: zeta*kmax = "
                  << zeta * grid.kmax()
                  << " < 1, covariance spectrum is nearly flat\n";
    return spec;
}

PotentialField sample_potential(const Grid& grid, const CovarianceSpec& spec,
                                std::uint64_t seed) {
    if (spec.spectrum.size() != grid.size())
        throw std::invalid_argument("sample_potential: spec/grid size mismatch");
    RandomStream rng(seed);
    std::vector<cdouble> modes(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double x, y;
        rng.gaussian_pair(x, y);
        modes[i] = std::sqrt(spec.spectrum[i]) * cdouble(x, y);
    }
    spectral_transform(grid)->inverse(modes);
    PotentialField field;
    field.source_seed = seed;
    field.values.resize(grid.size());
    const double n2 = static_cast<double>(grid.n()) * grid.n();
    for (std::size_t i = 0; i < grid.size(); ++i)
        field.values[i] = n2 * modes[i].real();
    return field;
}

std::vector<double> empirical_covariance(const Grid& grid,
                                         const std::vector<PotentialField>& fields) {
    if (fields.size() < 2)
        throw std::invalid_argument("empirical_covariance: need >= 2 realizations");
    const double n2 = static_cast<double>(grid.n()) * grid.n();
    std::vector<double> estimate(grid.size(), 0.0);
    std::vector<cdouble> work(grid.size());
    for (const auto& field : fields) {
        if (field.values.size() != grid.size())
            throw std::invalid_argument("empirical_covariance: field size mismatch");
        for (std::size_t i = 0; i < grid.size(); ++i)
            work[i] = field.values[i];
        spectral_transform(grid)->forward(work);
        for (std::size_t i = 0; i < grid.size(); ++i)
            estimate[i] += std::norm(work[i]) / (n2 * n2);
    }
    for (auto& v : estimate) v /= static_cast<double>(fields.size());
    return estimate;
}

double spatial_mean(const PotentialField& field) {
    double s = 0.0;
    for (double v : field.values) s += v;
    return s / static_cast<double>(field.values.size());
}

double spatial_variance(const PotentialField& field) {
    const double mu = spatial_mean(field);
    double s = 0.0;
    for (double v : field.values) s += (v - mu) * (v - mu);
    return s / static_cast<double>(field.values.size());
}

void write_field_dump(const std::string& path, const Grid& grid,
                      const CovarianceSpec& spec, const PotentialField& field) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("write_field_dump: cannot open " + path);
    const std::uint64_t n = grid.n();
    bool ok = std::fwrite(&kFieldMagic, sizeof kFieldMagic, 1, f) == 1 &&
              std::fwrite(&kFieldVersion, sizeof kFieldVersion, 1, f) == 1 &&
              std::fwrite(&n, sizeof n, 1, f) == 1 &&
              std::fwrite(&field.source_seed, sizeof field.source_seed, 1, f) == 1 &&
              std::fwrite(&spec.zeta, sizeof spec.zeta, 1, f) == 1 &&
              std::fwrite(field.values.data(), sizeof(double),
                          field.values.size(), f) == field.values.size();
    ok = std::fclose(f) == 0 && ok;
    if (!ok) throw std::runtime_error("write_field_dump: short write to " + path);
}

PotentialField read_field_dump(const std::string& path, int& n_out,
                               double& zeta_out) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("read_field_dump: cannot open " + path);
    std::uint32_t magic = 0, version = 0;
    std::uint64_t n = 0;
    PotentialField field;
    bool ok = std::fread(&magic, sizeof magic, 1, f) == 1 &&
              std::fread(&version, sizeof version, 1, f) == 1 &&
              std::fread(&n, sizeof n, 1, f) == 1 &&
              std::fread(&field.source_seed, sizeof field.source_seed, 1, f) == 1 &&
              std::fread(&zeta_out, sizeof zeta_out, 1, f) == 1;
    if (ok && (magic != kFieldMagic || version != kFieldVersion)) ok = false;
    if (ok) {
        field.values.resize(n * n);
        ok = std::fread(field.values.data(), sizeof(double), field.values.size(),
                        f) == field.values.size();
    }
    std::fclose(f);
    if (!ok) throw std::runtime_error("read_field_dump: bad or truncated file " + path);
    n_out = static_cast<int>(n);
    return field;
}

} // namespace qbroad
