#ifndef QBROAD_OBSERVABLES_HPP
#define QBROAD_OBSERVABLES_HPP

#include <complex>
#include <utility>
#include <vector>

#include "qbroad/grid.hpp"
#include "qbroad/propagator.hpp"

namespace qbroad {

/// Mergeable accumulator of momentum occupations over (realization,
/// snapshot) samples. `density` holds the running sum; divide by `weight`
/// for the mean.
struct MomentumDistribution {
    std::vector<double> density;
    double weight = 0.0;

    double mean_at(std::size_t i) const { return density[i] / weight; }
};

MomentumDistribution make_distribution(const Grid& grid);

/// Adds |a_k|^2/N^2 of a momentum-representation field with unit weight.
void accumulate(const Grid& grid, MomentumDistribution& dist,
                const WaveField& field);
void accumulate_density(MomentumDistribution& dist,
                        const std::vector<double>& density, double weight = 1.0);

/// Associative, commutative merge of partial accumulators.
void merge(MomentumDistribution& into, const MomentumDistribution& from);

/// Angle-averaged radial profile evaluated with a Gaussian shell kernel
/// g(x,k) = C(x) exp(-(|k|-x)^2/(2 x0^2))/|k| (k = 0 excluded), then
/// normalized so that sum_j dx_j nbar(x_j) = 1.
struct RadialProfile {
    std::vector<double> eval_points;
    std::vector<double> values;
    double kernel_width = 0.0;
};

RadialProfile radial_profile(const Grid& grid, const MomentumDistribution& dist,
                             const std::vector<double>& eval_points, double x0);

/// Evaluation points clustered quadratically around `center`:
/// x(u) = center + sgn(u) u^2 * span(side) for u uniform in [-1, 1].
std::vector<double> peak_eval_points(double lo, double hi, double center,
                                     int count);

/// Angular Fourier coefficient n_m = sum_{|k| in shell} e^{-i m theta_k} n_k
/// over the annulus |k| in [k_shell - w/2, k_shell + w/2] (>= 8 modes).
std::complex<double> angular_mode(const Grid& grid,
                                  const MomentumDistribution& dist,
                                  double k_shell, double shell_width, int m);
std::vector<std::complex<double>> angular_modes(const Grid& grid,
                                                const MomentumDistribution& dist,
                                                double k_shell, double shell_width,
                                                int m_max);

/// Least-squares fit of log n versus t over [window.first, window.second).
/// Returns the decay rate 1/t_c = -slope together with fit diagnostics.
struct DecayFit {
    double rate = 0.0;
    double intercept = 0.0;
    double residual_norm = 0.0;
    int n_points = 0;
};

DecayFit peak_decay_fit(const std::vector<std::pair<double, double>>& series,
                        std::pair<std::size_t, std::size_t> window);

} // namespace qbroad

#endif
