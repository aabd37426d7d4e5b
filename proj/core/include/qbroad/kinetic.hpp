#ifndef QBROAD_KINETIC_HPP
#define QBROAD_KINETIC_HPP

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include "qbroad/grid.hpp"
#include "qbroad/random_field.hpp"

namespace qbroad {

/// Set of lattice modes (integer wave vectors) kept by the truncated
/// kinetic hierarchy, with their |k|^2 cached.
struct ModeSet {
    std::vector<std::array<int, 2>> modes;
    std::vector<double> ksq;

    std::size_t size() const { return modes.size(); }
    /// Index of a wave vector, or -1 if absent.
    long find(int kx, int ky) const;
};

/// Annulus k_lo <= |k| <= k_hi of lattice modes.
ModeSet annulus_modes(const Grid& grid, double k_lo, double k_hi);

/// Annulus around |kp| padded by the covariance cutoff radius
/// (coupling threshold cutoff_rel relative to the peak) plus `slack`.
ModeSet active_set_around(const Grid& grid, const CovarianceSpec& spec,
                          double kp, double cutoff_rel = 1e-8,
                          double slack = 2.0);

/// Pair couplings 2 eps^2 Chat_{k-q} with phases T_kq = (|k|^2-|q|^2)/2,
/// restricted to a mode set; pairs below the coupling cutoff are dropped.
struct MemoryKernel {
    ModeSet active;
    std::vector<std::uint32_t> pair_a, pair_b;
    std::vector<double> coupling;   // 2 eps^2 Chat_{a-b}, symmetric, >= 0
    std::vector<double> phase;      // T_ab = (|k_a|^2 - |k_b|^2)/2

    double max_abs_phase() const;
    /// Largest stable explicit step, phase_resolution/max|T|.
    double suggested_dt(double phase_resolution = 0.2) const;
};

MemoryKernel build_memory_kernel(const Grid& grid, const CovarianceSpec& spec,
                                 double epsilon, ModeSet active,
                                 double cutoff_rel = 1e-8);

/// Integrates the time-nonlocal hierarchy equation
///   d/dt n_k = sum_q 2 eps^2 C_{k-q} int_0^t cos(T_kq (t-t')) (n_q-n_k) dt'
/// with an explicit midpoint step; the memory integral is a trapezoid over
/// the stored history, maintained as an incrementally updated complex
/// prefix sum per pair. Pairwise antisymmetric fluxes conserve total mass
/// to rounding. Returns n_steps+1 snapshots including the initial one.
/// Requires dt * max|T_kq| <= 0.2.
std::vector<std::vector<double>> memory_evolve(const std::vector<double>& initial,
                                               const MemoryKernel& kernel,
                                               double dt, int n_steps);

/// Density on the momentum ring |k| = const, sampled at M uniform angles
/// theta_i = 2 pi i / M.
struct RingState {
    double k = 0.0;
    std::vector<double> density;
};

using AngularCovariance = std::function<double(double)>; // theta -> C(k,theta)

/// Evolves d/dt n(theta) = 2 pi eps^2 int dtheta' C(k,theta-theta')
/// [n(theta') - n(theta)] by exact exponentiation in angular mode space:
/// n_m(t) = n_m(0) exp(2 pi eps^2 (C_m - C_0) t) with the discrete C_m of
/// the sampled kernel. Returns n_steps+1 states at times j*dt.
std::vector<RingState> ring_evolve(const RingState& state,
                                   const AngularCovariance& cov, double epsilon,
                                   double dt, int n_steps);

/// Discrete angular Fourier coefficients C_m = dtheta sum_j e^{-im theta_j}
/// C(theta_j) of a kernel sampled on the M-point grid, m = 0..M-1.
std::vector<std::complex<double>> ring_kernel_modes(const AngularCovariance& cov,
                                                    int m_points);

/// Piecewise-constant angle trajectory of the ring jump process.
struct Trajectory {
    double initial_angle = 0.0;
    double t_max = 0.0;
    std::vector<double> jump_times;   // strictly increasing, <= t_max
    std::vector<double> jump_angles;  // angle after each jump

    double angle_at(double t) const;
    std::size_t n_jumps() const { return jump_times.size(); }
};

/// Poisson jump process on the circle of radius k: waiting times at rate
/// lambda(k) = 2 pi eps^2 C_0(k), angle increments drawn from
/// C(k,theta)/C_0(k); deterministic given the seed. The initial angle is
/// uniform on [-pi, pi).
Trajectory jump_process_simulate(double k, const AngularCovariance& cov,
                                 double epsilon, double t_max,
                                 std::uint64_t seed, int table_size = 4096);

struct DiffusionEstimate {
    double value = 0.0;
    double stderr_value = 0.0;
    double truncation_time = 0.0;
    int n_trajectories = 0;
};

/// Green-Kubo estimate D = (k^2/2) int_0^T <cos(theta(t)-theta(0))> dt,
/// truncated where the ensemble autocorrelation falls below 1e-3 of its
/// initial value. The per-trajectory integral of the piecewise-constant
/// angle process is computed exactly; the standard error is over
/// trajectories. Requires >= 100 trajectories.
DiffusionEstimate green_kubo_diffusion(
    const std::function<Trajectory(int)>& trajectory_source, int n_trajectories,
    double k);
DiffusionEstimate green_kubo_diffusion(const std::vector<Trajectory>& trajectories,
                                       double k);

} // namespace qbroad

#endif
