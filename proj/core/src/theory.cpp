#include "qbroad/theory.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <stdexcept>

namespace qbroad::theory {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kSqrt2Pi = 2.5066282746310005024;
} // namespace

namespace {

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& other) const { return error < other.error; }
};

Panel eval_panel(const std::function<double(double)>& f, double a, double b) {
    Panel p{a, b, 0.0, 0.0};
    p.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, 0, 0.0, &p.error);
    return p;
}

} // namespace

// Globally adaptive: bisect the worst panel until the summed error
// estimate meets the absolute tolerance. Plain recursive schemes stall on
// needle-shaped integrands (their local error estimate stops improving
// before the feature is resolved); the global heap keeps refining where
// the error actually lives.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol) {
    std::priority_queue<Panel> panels;
    const int initial = 8;
    double total_value = 0.0, total_error = 0.0;
    for (int i = 0; i < initial; ++i) {
        const double lo = a + (b - a) * i / initial;
        const double hi = a + (b - a) * (i + 1) / initial;
        Panel p = eval_panel(f, lo, hi);
        total_value += p.value;
        total_error += p.error;
        panels.push(p);
    }
    int budget = 20000;
    while (total_error > 0.5 * abs_tol && budget-- > 0 && !panels.empty()) {
        const Panel worst = panels.top();
        panels.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid == worst.a || mid == worst.b) continue; // cannot split further
        Panel left = eval_panel(f, worst.a, mid);
        Panel right = eval_panel(f, mid, worst.b);
        total_value += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        panels.push(left);
        panels.push(right);
    }
    if (!(total_error <= abs_tol) || !std::isfinite(total_value))
        throw std::runtime_error("theory::integrate: quadrature did not converge");
    return total_value;
}

double broadening_profile(double k, double kp, double epsilon,
                          ProfileVariant variant) {
    if (k < 0.0 || !(kp > 0.0) || !(epsilon > 0.0))
        throw std::invalid_argument("broadening_profile: need k >= 0, kp > 0, epsilon > 0");
    const double w = k * k, wp = kp * kp;
    double value = std::exp(-std::abs(w - wp) / (2.0 * epsilon));
    if (variant == ProfileVariant::full)
        value += std::exp(-(w + wp) / (2.0 * epsilon));
    return value / (2.0 * epsilon);
}

std::function<double(double)> greens_superposition(
    const std::function<double(double)>& n0, double epsilon, double q_lo,
    double q_hi, bool* support_warning, double zeta) {
    if (!(epsilon > 0.0) || !(q_hi > q_lo) || q_lo < 0.0)
        throw std::invalid_argument("greens_superposition: bad arguments");
    if (support_warning)
        *support_warning = zeta > 0.0 && q_lo * zeta < 1.0;
    return [n0, epsilon, q_lo, q_hi](double k) {
        return integrate(
            [&](double q) {
                return q * broadening_profile(k, q, epsilon, ProfileVariant::full) *
                       n0(q);
            },
            q_lo, q_hi, 1e-8);
    };
}

double cm_coefficient(int m, double k, double zeta, CmMethod method) {
    if (m < 0 || !(k > 0.0) || !(zeta > 0.0))
        throw std::invalid_argument("cm_coefficient: need m >= 0, k > 0, zeta > 0");
    const double z = zeta * zeta * k * k;
    if (method == CmMethod::laplace)
        return zeta / (k * kSqrt2Pi) * std::exp(-0.5 * m * m / z);
    // C(k,theta) is even in theta, so the coefficient is real:
    // C_m = (zeta^2/pi) int_0^pi cos(m theta) e^{-z (1 - cos theta)} dtheta.
    return zeta * zeta / kPi *
           integrate(
               [m, z](double theta) {
                   return std::cos(m * theta) *
                          std::exp(-z * (1.0 - std::cos(theta)));
               },
               0.0, kPi);
}

double scaled_bessel_i0(double z) {
    if (z < 0.0) throw std::invalid_argument("scaled_bessel_i0: z must be >= 0");
    if (z <= 30.0) {
        // Power series of I0, scaled afterwards.
        double term = 1.0, sum = 1.0;
        const double q = 0.25 * z * z;
        for (int j = 1; j < 200; ++j) {
            term *= q / (static_cast<double>(j) * j);
            sum += term;
            if (term < sum * 1e-17) break;
        }
        return sum * std::exp(-z);
    }
    return 1.0 / std::sqrt(2.0 * kPi * z);
}

double polar_covariance(double K, double Q) {
    if (K < 0.0 || Q < 0.0)
        throw std::invalid_argument("polar_covariance: need K, Q >= 0");
    // e^{-(K^2+Q^2)/2} I0(KQ) = e^{-(K-Q)^2/2} [e^{-KQ} I0(KQ)]
    return std::exp(-0.5 * (K - Q) * (K - Q)) * scaled_bessel_i0(K * Q);
}

TimeScale collision_time(const TheoryParams& params, double k) {
    const double e2 = params.epsilon * params.epsilon;
    TimeScale rate;
    rate.exact = 2.0 * kPi * e2 * cm_coefficient(0, k, params.zeta);
    rate.approx = kSqrt2Pi * params.zeta * e2 / k;
    return {1.0 / rate.exact, 1.0 / rate.approx};
}

TimeScale diffusive_time(const TheoryParams& params, double k) {
    const double e2 = params.epsilon * params.epsilon;
    const double c0 = cm_coefficient(0, k, params.zeta);
    const double c1 = cm_coefficient(1, k, params.zeta);
    TimeScale rate;
    rate.exact = 2.0 * kPi * e2 * (c0 - c1);
    rate.approx = std::sqrt(kPi / 2.0) * e2 / (params.zeta * k * k * k);
    return {1.0 / rate.exact, 1.0 / rate.approx};
}

TimeScale diffusion_constant(const TheoryParams& params, double k) {
    const TimeScale td = diffusive_time(params, k);
    return {td.exact * k * k / 2.0, td.approx * k * k / 2.0};
}

LocalizationLength localization_length(const TheoryParams& params, double k) {
    const TimeScale td = diffusive_time(params, k);
    const TimeScale d = diffusion_constant(params, k);
    LocalizationLength xi;
    xi.log_value = std::log(k * td.exact) + kPi * d.exact;
    if (xi.log_value < std::log(std::numeric_limits<double>::max())) {
        xi.value = std::exp(xi.log_value);
        xi.representable = true;
    } else {
        xi.value = std::numeric_limits<double>::infinity();
        xi.representable = false;
    }
    return xi;
}

AngularCorrection angular_relaxation_correction(int m, double k,
                                                const TheoryParams& params) {
    if (m < 1)
        throw std::invalid_argument(
            "angular_relaxation_correction: m must be >= 1 (the m=0 channel "
            "is the radial equation)");
    const double e2 = params.epsilon * params.epsilon;
    const double c0 = cm_coefficient(0, k, params.zeta);
    const double cm = cm_coefficient(m, k, params.zeta);
    AngularCorrection out;
    out.coefficient = 1.0 / (2.0 * kPi * e2 * (c0 - cm));
    out.small_m_limit =
        2.0 * k * k * k * params.zeta / (kSqrt2Pi * e2 * m * m);
    out.large_m_limit = k / (kSqrt2Pi * params.zeta * e2);
    return out;
}

} // namespace qbroad::theory
