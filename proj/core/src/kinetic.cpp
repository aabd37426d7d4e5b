#include "qbroad/kinetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "qbroad/rng.hpp"

namespace qbroad {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

long ModeSet::find(int kx, int ky) const {
    for (std::size_t i = 0; i < modes.size(); ++i)
        if (modes[i][0] == kx && modes[i][1] == ky) return static_cast<long>(i);
    return -1;
}

ModeSet annulus_modes(const Grid& grid, double k_lo, double k_hi) {
    ModeSet set;
    for (int kx = grid.kmin(); kx <= grid.kmax(); ++kx)
        for (int ky = grid.kmin(); ky <= grid.kmax(); ++ky) {
            const double k2 = static_cast<double>(kx) * kx +
                              static_cast<double>(ky) * ky;
            const double km = std::sqrt(k2);
            if (km >= k_lo && km <= k_hi) {
                set.modes.push_back({kx, ky});
                set.ksq.push_back(k2);
            }
        }
    return set;
}

ModeSet active_set_around(const Grid& grid, const CovarianceSpec& spec,
                          double kp, double cutoff_rel, double slack) {
    const double r_cut = std::sqrt(-2.0 * std::log(cutoff_rel)) / spec.zeta;
    const double lo = std::max(0.0, kp - r_cut - slack);
    const double hi = std::min(kp + r_cut + slack,
                               static_cast<double>(grid.kmax()));
    return annulus_modes(grid, lo, hi);
}

double MemoryKernel::max_abs_phase() const {
    double m = 0.0;
    for (double t : phase) m = std::max(m, std::abs(t));
    return m;
}

double MemoryKernel::suggested_dt(double phase_resolution) const {
    const double t = max_abs_phase();
    return t > 0.0 ? phase_resolution / t : phase_resolution;
}

MemoryKernel build_memory_kernel(const Grid& grid, const CovarianceSpec& spec,
                                 double epsilon, ModeSet active,
                                 double cutoff_rel) {
    if (active.size() == 0)
        throw std::invalid_argument("build_memory_kernel: empty active set");
    MemoryKernel kernel;
    kernel.active = std::move(active);
    const double chat_max =
        *std::max_element(spec.spectrum.begin(), spec.spectrum.end());
    const double chat_cutoff = cutoff_rel * chat_max;
    const int n = grid.n();
    const auto wrap = [n](int d) {
        d %= n;
        if (d > (n - 1) / 2) d -= n;
        if (d < (n - 1) / 2 + 1 - n) d += n;
        return d;
    };
    const double couple_scale = 2.0 * epsilon * epsilon;
    const std::size_t m = kernel.active.size();
    for (std::size_t i = 0; i < m; ++i) {
        const auto& ka = kernel.active.modes[i];
        for (std::size_t j = i + 1; j < m; ++j) {
            const auto& kb = kernel.active.modes[j];
            // Mode couplings live on the torus: difference wraps mod N.
            const int dx = wrap(ka[0] - kb[0]);
            const int dy = wrap(ka[1] - kb[1]);
            const double chat = spec.spectrum[grid.at_wavevector(dx, dy)];
            if (chat <= chat_cutoff) continue;
            kernel.pair_a.push_back(static_cast<std::uint32_t>(i));
            kernel.pair_b.push_back(static_cast<std::uint32_t>(j));
            kernel.coupling.push_back(couple_scale * chat);
            kernel.phase.push_back(0.5 * (kernel.active.ksq[i] -
                                          kernel.active.ksq[j]));
        }
    }
    return kernel;
}

namespace {

/// Per-pair memory state: Z = trapezoid of e^{-iT t'} (n_b - n_a)(t') over
/// the stored nodes, so the memory integral at a node t is Re(e^{iTt} Z).
struct MemoryWorkspace {
    std::vector<double> z_re, z_im;
    std::vector<double> rot_re, rot_im; // e^{-i T t} at the current node

    explicit MemoryWorkspace(std::size_t n_pairs)
        : z_re(n_pairs, 0.0), z_im(n_pairs, 0.0),
          rot_re(n_pairs, 1.0), rot_im(n_pairs, 0.0) {}
};

void memory_rhs(const MemoryKernel& k, const MemoryWorkspace& w,
                const std::vector<double>& extra_re,
                const std::vector<double>& extra_im, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t np = k.pair_a.size();
    for (std::size_t p = 0; p < np; ++p) {
        // Re(conj(rot) * Z)
        const double zr = w.z_re[p] + extra_re[p];
        const double zi = w.z_im[p] + extra_im[p];
        const double integral = w.rot_re[p] * zr + w.rot_im[p] * zi;
        const double flux = k.coupling[p] * integral;
        out[k.pair_a[p]] += flux;
        out[k.pair_b[p]] -= flux;
    }
}

} // namespace

std::vector<std::vector<double>> memory_evolve(const std::vector<double>& initial,
                                               const MemoryKernel& kernel,
                                               double dt, int n_steps) {
    const std::size_t nm = kernel.active.size();
    if (nm == 0) throw std::invalid_argument("memory_evolve: empty active set");
    if (initial.size() != nm)
        throw std::invalid_argument("memory_evolve: initial size mismatch");
    if (!(dt > 0.0) || n_steps < 0)
        throw std::invalid_argument("memory_evolve: need dt > 0, n_steps >= 0");
    if (dt * kernel.max_abs_phase() > 0.2 + 1e-12)
        throw std::invalid_argument(
            "memory_evolve: dt too large to resolve the fastest phase "
            "(need dt * max|T| <= 0.2)");

    const std::size_t np = kernel.pair_a.size();
    MemoryWorkspace w(np);
    std::vector<double> n_cur = initial;
    std::vector<double> rhs(nm), n_half(nm);
    std::vector<double> f_re(np), f_im(np);          // f at current node
    std::vector<double> half_re(np), half_im(np);    // half-node trapezoid extension
    std::vector<double> rot_next_re(np), rot_next_im(np);
    const std::vector<double> zero(np, 0.0);

    std::vector<std::vector<double>> series;
    series.reserve(n_steps + 1);
    series.push_back(n_cur);

    for (int step = 0; step < n_steps; ++step) {
        const double t = step * dt;

        // f(t_j) and the midpoint rhs ingredients
        for (std::size_t p = 0; p < np; ++p) {
            const double dn = n_cur[kernel.pair_b[p]] - n_cur[kernel.pair_a[p]];
            f_re[p] = w.rot_re[p] * dn;
            f_im[p] = w.rot_im[p] * dn;
        }
        memory_rhs(kernel, w, zero, zero, rhs);
        for (std::size_t i = 0; i < nm; ++i)
            n_half[i] = n_cur[i] + 0.5 * dt * rhs[i];

        // rotors and trapezoid extension to the half node
        const double t_half = t + 0.5 * dt;
        for (std::size_t p = 0; p < np; ++p) {
            const double ph = -kernel.phase[p] * t_half;
            const double c = std::cos(ph), s = std::sin(ph);
            const double dn = n_half[kernel.pair_b[p]] - n_half[kernel.pair_a[p]];
            half_re[p] = 0.25 * dt * (f_re[p] + c * dn);
            half_im[p] = 0.25 * dt * (f_im[p] + s * dn);
            rot_next_re[p] = c; // reused as the half-node rotor below
            rot_next_im[p] = s;
        }
        std::swap(w.rot_re, rot_next_re);
        std::swap(w.rot_im, rot_next_im);
        memory_rhs(kernel, w, half_re, half_im, rhs);
        for (std::size_t i = 0; i < nm; ++i) n_cur[i] += dt * rhs[i];

        // advance the permanent trapezoid state to t_{j+1}
        const double t_next = t + dt;
        for (std::size_t p = 0; p < np; ++p) {
            const double ph = -kernel.phase[p] * t_next;
            const double c = std::cos(ph), s = std::sin(ph);
            const double dn = n_cur[kernel.pair_b[p]] - n_cur[kernel.pair_a[p]];
            w.z_re[p] += 0.5 * dt * (f_re[p] + c * dn);
            w.z_im[p] += 0.5 * dt * (f_im[p] + s * dn);
            w.rot_re[p] = c;
            w.rot_im[p] = s;
        }
        series.push_back(n_cur);
    }
    return series;
}

std::vector<std::complex<double>> ring_kernel_modes(const AngularCovariance& cov,
                                                    int m_points) {
    const double dtheta = kTwoPi / m_points;
    std::vector<double> samples(m_points);
    for (int i = 0; i < m_points; ++i) {
        samples[i] = cov(dtheta * i);
        if (samples[i] < 0.0)
            throw std::invalid_argument("ring kernel: negative covariance value");
    }
    std::vector<std::complex<double>> modes(m_points);
    for (int m = 0; m < m_points; ++m) {
        std::complex<double> sum(0.0, 0.0);
        for (int i = 0; i < m_points; ++i)
            sum += std::polar(samples[i], -kTwoPi * m * i / m_points);
        modes[m] = dtheta * sum;
    }
    return modes;
}

std::vector<RingState> ring_evolve(const RingState& state,
                                   const AngularCovariance& cov, double epsilon,
                                   double dt, int n_steps) {
    const int m_points = static_cast<int>(state.density.size());
    if (m_points < 16)
        throw std::invalid_argument("ring_evolve: need M >= 16 angular points");
    if (!(dt > 0.0) || n_steps < 0)
        throw std::invalid_argument("ring_evolve: need dt > 0, n_steps >= 0");

    const auto cmodes = ring_kernel_modes(cov, m_points);
    const double dtheta = kTwoPi / m_points;

    // DFT of the initial density with the same convention as the kernel.
    std::vector<std::complex<double>> nm(m_points);
    for (int m = 0; m < m_points; ++m) {
        std::complex<double> sum(0.0, 0.0);
        for (int i = 0; i < m_points; ++i)
            sum += std::polar(state.density[i], -kTwoPi * m * i / m_points);
        nm[m] = dtheta * sum;
    }

    const double rate_scale = kTwoPi * epsilon * epsilon;
    std::vector<RingState> series;
    series.reserve(n_steps + 1);
    for (int step = 0; step <= n_steps; ++step) {
        const double t = step * dt;
        RingState out;
        out.k = state.k;
        out.density.resize(m_points);
        std::vector<std::complex<double>> evolved(m_points);
        for (int m = 0; m < m_points; ++m)
            evolved[m] = nm[m] * std::exp(rate_scale * (cmodes[m] - cmodes[0]) * t);
        for (int i = 0; i < m_points; ++i) {
            std::complex<double> sum(0.0, 0.0);
            for (int m = 0; m < m_points; ++m)
                sum += evolved[m] * std::polar(1.0, kTwoPi * m * i / m_points);
            out.density[i] = (sum / kTwoPi).real();
        }
        series.push_back(std::move(out));
    }
    return series;
}

namespace {

/// Inverse-CDF sampler for densities proportional to C(k,theta) on
/// [-pi, pi), piecewise constant over table cells.
struct AngleSampler {
    std::vector<double> cumulative; // cumulative cell masses
    double total = 0.0;
    double cell = 0.0;

    AngleSampler(const AngularCovariance& cov, int table_size) {
        cell = kTwoPi / table_size;
        cumulative.resize(table_size);
        double run = 0.0;
        for (int i = 0; i < table_size; ++i) {
            const double theta = -std::numbers::pi + (i + 0.5) * cell;
            const double value = cov(theta);
            if (value < 0.0)
                throw std::invalid_argument("jump process: negative covariance value");
            run += value * cell;
            cumulative[i] = run;
        }
        total = run;
        if (!(total > 0.0) || !std::isfinite(total))
            throw std::invalid_argument("jump process: kernel is not normalizable");
    }

    /// Mean of the sampled density over the circle, i.e. C_0(k)/(2 pi).
    double c0() const { return total; }

    double sample(double u) const {
        const double target = u * total;
        const auto it =
            std::upper_bound(cumulative.begin(), cumulative.end(), target);
        const std::size_t i =
            std::min(static_cast<std::size_t>(it - cumulative.begin()),
                     cumulative.size() - 1);
        const double prev = i == 0 ? 0.0 : cumulative[i - 1];
        const double mass = cumulative[i] - prev;
        const double frac = mass > 0.0 ? (target - prev) / mass : 0.5;
        return -std::numbers::pi + (i + frac) * cell;
    }
};

double wrap_angle(double theta) {
    theta = std::fmod(theta + std::numbers::pi, kTwoPi);
    if (theta < 0.0) theta += kTwoPi;
    return theta - std::numbers::pi;
}

} // namespace

double Trajectory::angle_at(double t) const {
    const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    if (it == jump_times.begin()) return initial_angle;
    return jump_angles[it - jump_times.begin() - 1];
}

Trajectory jump_process_simulate(double k, const AngularCovariance& cov,
                                 double epsilon, double t_max,
                                 std::uint64_t seed, int table_size) {
    if (!(t_max > 0.0))
        throw std::invalid_argument("jump_process_simulate: t_max must be > 0");
    if (table_size < 16)
        throw std::invalid_argument("jump_process_simulate: table too small");
    (void)k; // the ring radius enters through cov and the caller's D scale
    AngleSampler sampler(cov, table_size);
    const double rate = kTwoPi * epsilon * epsilon * sampler.c0();

    RandomStream rng(seed);
    Trajectory traj;
    traj.t_max = t_max;
    traj.initial_angle = -std::numbers::pi + kTwoPi * rng.uniform();
    double t = 0.0;
    double angle = traj.initial_angle;
    while (true) {
        t += -std::log(rng.uniform_pos()) / rate;
        if (t > t_max) break;
        angle = wrap_angle(angle + sampler.sample(rng.uniform()));
        traj.jump_times.push_back(t);
        traj.jump_angles.push_back(angle);
    }
    return traj;
}

namespace {

double trajectory_cos_integral(const Trajectory& traj, double t_end) {
    const double ref = traj.initial_angle;
    double integral = 0.0;
    double seg_start = 0.0;
    double seg_angle = ref;
    for (std::size_t j = 0; j < traj.jump_times.size(); ++j) {
        const double jt = traj.jump_times[j];
        if (jt >= t_end) break;
        integral += (jt - seg_start) * std::cos(seg_angle - ref);
        seg_start = jt;
        seg_angle = traj.jump_angles[j];
    }
    integral += (t_end - seg_start) * std::cos(seg_angle - ref);
    return integral;
}

} // namespace

DiffusionEstimate green_kubo_diffusion(
    const std::function<Trajectory(int)>& trajectory_source, int n_trajectories,
    double k) {
    if (n_trajectories < 100)
        throw std::invalid_argument("green_kubo_diffusion: need >= 100 trajectories");

    // Pass 1: ensemble autocorrelation on a coarse grid to locate the
    // truncation time where it falls below 1e-3 of its initial value.
    constexpr int kGridPoints = 512;
    constexpr double kCut = 1e-3;
    double t_common = 0.0;
    std::vector<double> vacf(kGridPoints + 1, 0.0);
    for (int i = 0; i < n_trajectories; ++i) {
        const Trajectory traj = trajectory_source(i);
        if (i == 0)
            t_common = traj.t_max;
        else
            t_common = std::min(t_common, traj.t_max);
    }
    const double dt_grid = t_common / kGridPoints;
    for (int i = 0; i < n_trajectories; ++i) {
        const Trajectory traj = trajectory_source(i);
        for (int j = 0; j <= kGridPoints; ++j)
            vacf[j] += std::cos(traj.angle_at(j * dt_grid) - traj.initial_angle);
    }
    for (auto& v : vacf) v /= n_trajectories;
    double t_trunc = t_common;
    for (int j = 0; j <= kGridPoints; ++j)
        if (vacf[j] < kCut * vacf[0]) {
            t_trunc = j * dt_grid;
            break;
        }

    // Pass 2: exact per-trajectory integrals of the step process.
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n_trajectories; ++i) {
        const Trajectory traj = trajectory_source(i);
        const double d_i = 0.5 * k * k * trajectory_cos_integral(traj, t_trunc);
        sum += d_i;
        sumsq += d_i * d_i;
    }
    DiffusionEstimate est;
    est.n_trajectories = n_trajectories;
    est.truncation_time = t_trunc;
    est.value = sum / n_trajectories;
    const double var =
        (sumsq - sum * sum / n_trajectories) / (n_trajectories - 1.0);
    est.stderr_value = std::sqrt(std::max(var, 0.0) / n_trajectories);
    return est;
}

DiffusionEstimate green_kubo_diffusion(const std::vector<Trajectory>& trajectories,
                                       double k) {
    return green_kubo_diffusion(
        [&trajectories](int i) -> Trajectory { return trajectories[i]; },
        static_cast<int>(trajectories.size()), k);
}

} // namespace qbroad
