#ifndef QBROAD_THEORY_HPP
#define QBROAD_THEORY_HPP

#include <functional>

namespace qbroad::theory {

/// Physical parameters in lattice units. Validity flags are advisory:
/// the closed forms assume long-range correlations (zeta*kp >> 1) and a
/// weak potential (epsilon << kp^2/2).
struct TheoryParams {
    double epsilon = 0.0;
    double zeta = 0.0;
    double kp = 0.0;

    bool long_range_ok() const { return zeta * kp >= 5.0; }
    bool weak_potential_ok() const { return epsilon <= 0.125 * kp * kp; }
};

enum class ProfileVariant { asymptotic, full };

/// Long-time radial momentum density around the initial shell kp:
///   asymptotic: (1/2eps) exp(-|k^2-kp^2|/(2eps))
///   full:       adds the image term exp(-(k^2+kp^2)/(2eps)) so that
///               the integral over k dk measure is exactly 1.
double broadening_profile(double k, double kp, double epsilon,
                          ProfileVariant variant = ProfileVariant::asymptotic);

/// Superposition nbar(k) = int_0^inf dq q nbar(k;q) n0(q) with the
/// full-variant kernel. n0 should be supported at k >> 1/zeta; callers
/// get a validity flag, not a failure, via `support_warning`.
std::function<double(double)> greens_superposition(
    const std::function<double(double)>& n0, double epsilon, double q_lo,
    double q_hi, bool* support_warning = nullptr, double zeta = 0.0);

enum class CmMethod { laplace, quadrature };

/// Angular Fourier coefficient of the on-shell Gaussian ring covariance
///   C_m(k) = (zeta^2/2pi) int_{-pi}^{pi} e^{-im theta}
///            e^{-zeta^2 k^2 (1-cos theta)} dtheta,
/// either by adaptive quadrature (abs tol 1e-10) or by the large-zeta*k
/// Laplace form zeta/(k sqrt(2pi)) exp(-m^2/(2 zeta^2 k^2)).
double cm_coefficient(int m, double k, double zeta,
                      CmMethod method = CmMethod::quadrature);

/// Rescaled polar covariance C1(K,Q) = e^{-(K^2+Q^2)/2} I0(KQ) with an
/// exponentially scaled Bessel evaluation; for KQ > 30 the asymptotic
/// e^{-(Q-K)^2/2}/sqrt(2pi K Q) is used.
double polar_covariance(double K, double Q);

/// Exponentially scaled modified Bessel function e^{-z} I0(z), z >= 0.
double scaled_bessel_i0(double z);

struct TimeScale {
    double exact = 0.0;  // from quadrature C_m
    double approx = 0.0; // from the Laplace closed form
};

/// Collision time: 1/t_c = 2 pi eps^2 C_0(k) ~ sqrt(2pi) zeta eps^2 / k.
TimeScale collision_time(const TheoryParams& params, double k);

/// Direction-memory time: 1/t_d = 2 pi eps^2 (C_0(k) - C_1(k))
///                              ~ sqrt(pi/2) eps^2/(zeta k^3).
TimeScale diffusive_time(const TheoryParams& params, double k);

/// Diffusion constant D = t_d k^2 / 2 ~ zeta k^5/(sqrt(2pi) eps^2).
TimeScale diffusion_constant(const TheoryParams& params, double k);

struct LocalizationLength {
    double log_value = 0.0;   // log xi_loc = log(k t_d) + pi D
    double value = 0.0;       // linear value, +inf if out of double range
    bool representable = false;
};

LocalizationLength localization_length(const TheoryParams& params, double k);

/// First-order angular relaxation coefficient 1/(2 pi eps^2 (C_0 - C_m))
/// for m >= 1, with its small-m and large-m closed-form limits.
struct AngularCorrection {
    double coefficient = 0.0;
    double small_m_limit = 0.0; // 2 k^3 zeta/(sqrt(2pi) eps^2 m^2)
    double large_m_limit = 0.0; // k/(sqrt(2pi) zeta eps^2)
};

AngularCorrection angular_relaxation_correction(int m, double k,
                                                const TheoryParams& params);

/// Adaptive Gauss-Kronrod integral with absolute tolerance 1e-10; throws
/// on non-convergence.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-10);

} // namespace qbroad::theory

#endif
