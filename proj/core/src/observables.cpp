#include "qbroad/observables.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qbroad {

MomentumDistribution make_distribution(const Grid& grid) {
    MomentumDistribution dist;
    dist.density.assign(grid.size(), 0.0);
    return dist;
}

void accumulate(const Grid& grid, MomentumDistribution& dist,
                const WaveField& field) {
    if (field.rep != Representation::momentum)
        throw std::invalid_argument("accumulate: field must be in momentum representation");
    if (dist.density.size() != grid.size())
        throw std::invalid_argument("accumulate: distribution/grid size mismatch");
    const double n2 = static_cast<double>(grid.n()) * grid.n();
    for (std::size_t i = 0; i < dist.density.size(); ++i)
        dist.density[i] += std::norm(field.amplitudes[i]) / n2;
    dist.weight += 1.0;
}

void accumulate_density(MomentumDistribution& dist,
                        const std::vector<double>& density, double weight) {
    if (dist.density.size() != density.size())
        throw std::invalid_argument("accumulate_density: size mismatch");
    for (std::size_t i = 0; i < density.size(); ++i) dist.density[i] += density[i];
    dist.weight += weight;
}

void merge(MomentumDistribution& into, const MomentumDistribution& from) {
    if (into.density.size() != from.density.size())
        throw std::invalid_argument("merge: size mismatch");
    for (std::size_t i = 0; i < into.density.size(); ++i)
        into.density[i] += from.density[i];
    into.weight += from.weight;
}

RadialProfile radial_profile(const Grid& grid, const MomentumDistribution& dist,
                             const std::vector<double>& eval_points, double x0) {
    if (!(x0 > 0.0))
        throw std::invalid_argument("radial_profile: x0 must be > 0");
    if (eval_points.size() < 2 ||
        !std::is_sorted(eval_points.begin(), eval_points.end()) ||
        std::adjacent_find(eval_points.begin(), eval_points.end()) != eval_points.end())
        throw std::invalid_argument("radial_profile: eval_points must be strictly increasing");
    if (dist.weight <= 0.0 ||
        std::all_of(dist.density.begin(), dist.density.end(),
                    [](double v) { return v == 0.0; }))
        throw std::invalid_argument("radial_profile: empty distribution");

    const int n = grid.n();
    RadialProfile profile;
    profile.eval_points = eval_points;
    profile.kernel_width = x0;
    profile.values.resize(eval_points.size());

    // |k| per site, skipping k = 0.
    std::vector<double> kmagv(grid.size());
    for (int ix = 0; ix < n; ++ix)
        for (int iy = 0; iy < n; ++iy) {
            const double kx = grid.wavenumber(ix);
            const double ky = grid.wavenumber(iy);
            kmagv[grid.at(ix, iy)] = std::hypot(kx, ky);
        }

    for (std::size_t j = 0; j < eval_points.size(); ++j) {
        const double x = eval_points[j];
        double wsum = 0.0, value = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double km = kmagv[i];
            if (km == 0.0) continue;
            const double d = (km - x) / x0;
            if (std::abs(d) > 8.0) continue; // kernel support cutoff
            const double w = std::exp(-0.5 * d * d) / km;
            wsum += w;
            value += w * dist.mean_at(i);
        }
        profile.values[j] = wsum > 0.0 ? value / wsum : 0.0;
    }

    // Normalize with forward differences; the last point reuses the
    // previous spacing.
    double total = 0.0;
    for (std::size_t j = 0; j < eval_points.size(); ++j) {
        const double dx = j + 1 < eval_points.size()
                              ? eval_points[j + 1] - eval_points[j]
                              : eval_points[j] - eval_points[j - 1];
        total += dx * profile.values[j];
    }
    if (total <= 0.0)
        throw std::invalid_argument("radial_profile: profile has no mass on eval points");
    for (auto& v : profile.values) v /= total;
    return profile;
}

std::vector<double> peak_eval_points(double lo, double hi, double center,
                                     int count) {
    if (count < 3 || !(lo < center) || !(center < hi))
        throw std::invalid_argument("peak_eval_points: need lo < center < hi, count >= 3");
    std::vector<double> pts(count);
    for (int j = 0; j < count; ++j) {
        const double u = -1.0 + 2.0 * j / (count - 1);
        const double s = (u >= 0.0 ? 1.0 : -1.0) * u * u;
        pts[j] = center + s * (u >= 0.0 ? hi - center : center - lo);
    }
    return pts;
}

namespace {
std::vector<std::size_t> shell_sites(const Grid& grid, double k_shell,
                                     double shell_width) {
    std::vector<std::size_t> sites;
    const double lo = k_shell - 0.5 * shell_width;
    const double hi = k_shell + 0.5 * shell_width;
    for (int ix = 0; ix < grid.n(); ++ix)
        for (int iy = 0; iy < grid.n(); ++iy) {
            const double kx = grid.wavenumber(ix);
            const double ky = grid.wavenumber(iy);
            const double km = std::hypot(kx, ky);
            if (km >= lo && km <= hi) sites.push_back(grid.at(ix, iy));
        }
    return sites;
}
} // namespace

std::complex<double> angular_mode(const Grid& grid,
                                  const MomentumDistribution& dist,
                                  double k_shell, double shell_width, int m) {
    const auto sites = shell_sites(grid, k_shell, shell_width);
    if (sites.size() < 8)
        throw std::invalid_argument("angular_mode: shell contains fewer than 8 modes");
    std::complex<double> sum(0.0, 0.0);
    const int n = grid.n();
    for (std::size_t site : sites) {
        const int ix = static_cast<int>(site) / n;
        const int iy = static_cast<int>(site) % n;
        const double theta = std::atan2(static_cast<double>(grid.wavenumber(iy)),
                                        static_cast<double>(grid.wavenumber(ix)));
        sum += std::polar(1.0, -m * theta) * dist.mean_at(site);
    }
    return sum;
}

std::vector<std::complex<double>> angular_modes(const Grid& grid,
                                                const MomentumDistribution& dist,
                                                double k_shell, double shell_width,
                                                int m_max) {
    std::vector<std::complex<double>> modes;
    modes.reserve(m_max + 1);
    for (int m = 0; m <= m_max; ++m)
        modes.push_back(angular_mode(grid, dist, k_shell, shell_width, m));
    return modes;
}

DecayFit peak_decay_fit(const std::vector<std::pair<double, double>>& series,
                        std::pair<std::size_t, std::size_t> window) {
    const auto [lo, hi] = window;
    if (hi > series.size() || lo >= hi)
        throw std::invalid_argument("peak_decay_fit: bad window");
    const std::size_t count = hi - lo;
    if (count < 3)
        throw std::invalid_argument("peak_decay_fit: need >= 3 samples");

    double st = 0.0, sy = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        if (!(series[i].second > 0.0))
            throw std::invalid_argument("peak_decay_fit: nonpositive density in window");
        st += series[i].first;
        sy += std::log(series[i].second);
    }
    const double tbar = st / count, ybar = sy / count;
    double stt = 0.0, sty = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        const double dt = series[i].first - tbar;
        stt += dt * dt;
        sty += dt * (std::log(series[i].second) - ybar);
    }
    if (stt == 0.0)
        throw std::invalid_argument("peak_decay_fit: degenerate (constant t) window");

    DecayFit fit;
    const double slope = sty / stt;
    fit.rate = -slope;
    fit.intercept = ybar - slope * tbar;
    fit.n_points = static_cast<int>(count);
    double rss = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        const double r = std::log(series[i].second) -
                         (fit.intercept + slope * series[i].first);
        rss += r * r;
    }
    fit.residual_norm = std::sqrt(rss);
    return fit;
}

} // namespace qbroad
