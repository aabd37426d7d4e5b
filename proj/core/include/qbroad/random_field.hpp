#ifndef QBROAD_RANDOM_FIELD_HPP
#define QBROAD_RANDOM_FIELD_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "qbroad/grid.hpp"

namespace qbroad {

/// Lattice covariance spectrum Chat_k = C * exp(-zeta^2 |k|^2 / 2),
/// normalized so that sum_k Chat_k = 1 (unit field variance).
struct CovarianceSpec {
    double zeta = 0.0;
    double norm_const = 0.0;            // the constant C above
    std::vector<double> spectrum;       // storage order, size N^2
    bool degenerate = false;            // zeta*kmax < 1: spectrum nearly flat
};

/// One realization of the real homogeneous Gaussian potential V(x).
struct PotentialField {
    std::vector<double> values;         // storage order, size N^2
    std::uint64_t source_seed = 0;
};

/// Builds the normalized Gaussian covariance spectrum for the grid.
/// Rejects zeta <= 0; a spectrum flat across the whole lattice
/// (zeta*kmax < 1) is allowed but flagged and logged.
CovarianceSpec normalize_spectrum(const Grid& grid, double zeta);

/// Draws V(x) = N^2 Re F^{-1}[ sqrt(Chat(k)) (X(k) + iY(k)) ] with X, Y
/// i.i.d. standard normal per lattice site, deterministically from seed.
PotentialField sample_potential(const Grid& grid, const CovarianceSpec& spec,
                                std::uint64_t seed);

/// Ensemble estimate of Chat_k: averages |V_k|^2 / N^4 over realizations,
/// where V_k is the forward transform of V. Requires >= 2 realizations.
std::vector<double> empirical_covariance(const Grid& grid,
                                         const std::vector<PotentialField>& fields);

double spatial_mean(const PotentialField& field);
double spatial_variance(const PotentialField& field);

/// Binary field dump (versioned): header {magic, version, N, seed, zeta}
/// followed by N^2 row-major float64 values.
void write_field_dump(const std::string& path, const Grid& grid,
                      const CovarianceSpec& spec, const PotentialField& field);
PotentialField read_field_dump(const std::string& path, int& n_out,
                               double& zeta_out);

} // namespace qbroad

#endif
