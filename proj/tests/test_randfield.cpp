#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qbroad/random_field.hpp"
#include "qbroad/rng.hpp"
#include "qbroad/spectral.hpp"

using namespace qbroad;

namespace {

/// Independent normalization oracle: plain double loop over the k lattice
/// in long double, in a different traversal order than the implementation.
long double direct_spectrum_sum(int n, double zeta) {
    long double sum = 0.0L;
    const int kmax = (n - 1) / 2;
    const int kmin = kmax + 1 - n;
    for (int ky = kmax; ky >= kmin; --ky)
        for (int kx = kmax; kx >= kmin; --kx)
            sum += expl(-0.5L * (long double)(zeta * zeta) *
                        ((long double)kx * kx + (long double)ky * ky));
    return sum;
}

/// Closed-form lattice two-point function sum_k Chat_k cos(k . d).
double covariance_oracle(const Grid& grid, const CovarianceSpec& spec, int di,
                         int dj) {
    double sum = 0.0;
    for (int ix = 0; ix < grid.n(); ++ix)
        for (int iy = 0; iy < grid.n(); ++iy) {
            const double phase =
                (grid.wavenumber(ix) * di + grid.wavenumber(iy) * dj) * grid.dx();
            sum += spec.spectrum[grid.at(ix, iy)] * std::cos(phase);
        }
    return sum;
}

} // namespace

TEST_CASE("spectrum normalization") {
    const Grid grid(64);

    SUBCASE("rejects zeta <= 0") {
        CHECK_THROWS_AS(normalize_spectrum(grid, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(normalize_spectrum(grid, -1.0), std::invalid_argument);
    }

    SUBCASE("sums to one and is symmetric and nonnegative") {
        const auto spec = normalize_spectrum(grid, 0.4);
        double sum = 0.0;
        for (double v : spec.spectrum) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        for (int ix = 0; ix < grid.n(); ++ix)
            for (int iy = 0; iy < grid.n(); ++iy) {
                const int cx = (grid.n() - ix) % grid.n();
                const int cy = (grid.n() - iy) % grid.n();
                CHECK(spec.spectrum[grid.at(ix, iy)] ==
                      spec.spectrum[grid.at(cx, cy)]);
            }
    }

    SUBCASE("large-zeta limit keeps only k = 0") {
        const auto spec = normalize_spectrum(grid, 50.0);
        CHECK(spec.norm_const == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(spec.spectrum[grid.at_wavevector(0, 0)] ==
              doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("normalization constant against the direct summation oracle") {
        const Grid g256(256);
        const double zeta = 12.0 / 64.0;
        const auto spec = normalize_spectrum(g256, zeta);
        const double expected = static_cast<double>(1.0L / direct_spectrum_sum(256, zeta));
        CHECK(spec.norm_const == doctest::Approx(expected).epsilon(1e-13));
    }

    SUBCASE("continuum limit of the normalization constant") {
        // For zeta*dk << 1 (and negligible lattice truncation) the sum
        // approaches the 2D Gaussian integral, so C -> zeta^2/(2 pi).
        const Grid g256(256);
        const double zeta = 0.05;
        const auto spec = normalize_spectrum(g256, zeta);
        const double continuum = zeta * zeta / (2.0 * std::numbers::pi);
        CHECK(spec.norm_const == doctest::Approx(continuum).epsilon(1e-6));
    }

    SUBCASE("flat spectrum is flagged degenerate") {
        const auto spec = normalize_spectrum(grid, 0.02);
        CHECK(spec.degenerate);
        CHECK_FALSE(normalize_spectrum(grid, 0.5).degenerate);
    }
}

TEST_CASE("single-mode spectrum gives a constant field of unit variance") {
    const Grid grid(32);
    CovarianceSpec spec;
    spec.zeta = 1.0;
    spec.norm_const = 1.0;
    spec.spectrum.assign(grid.size(), 0.0);
    spec.spectrum[grid.at_wavevector(0, 0)] = 1.0;

    double sumsq = 0.0;
    const int realizations = 400;
    for (int r = 0; r < realizations; ++r) {
        const auto field = sample_potential(grid, spec, derive_seed(3, r));
        double lo = field.values[0], hi = field.values[0];
        for (double v : field.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(hi - lo < 1e-12); // constant across space
        sumsq += field.values[0] * field.values[0];
    }
    // X(0) is standard normal: sample second moment within ~3 sigma
    CHECK(std::abs(sumsq / realizations - 1.0) < 0.2);
}

TEST_CASE("ensemble variance is one") {
    const Grid grid(128);
    const auto spec = normalize_spectrum(grid, 12.0 / 32.0);
    double mean_var = 0.0;
    const int realizations = 500;
    for (int r = 0; r < realizations; ++r)
        mean_var += spatial_variance(sample_potential(grid, spec, derive_seed(17, r)));
    mean_var /= realizations;
    CHECK(std::abs(mean_var - 1.0) < 0.05);
}

TEST_CASE("two-point function matches the closed-form lattice covariance") {
    const Grid grid(64);
    const auto spec = normalize_spectrum(grid, 0.75);
    const int realizations = 400;
    const int lags[][2] = {{1, 0}, {0, 3}, {5, 2}, {2, 2}};

    for (const auto& lag : lags) {
        double sum = 0.0, sumsq = 0.0;
        for (int r = 0; r < realizations; ++r) {
            const auto field = sample_potential(grid, spec, derive_seed(29, r));
            double m = 0.0;
            for (int ix = 0; ix < grid.n(); ++ix)
                for (int iy = 0; iy < grid.n(); ++iy) {
                    const int jx = (ix + lag[0]) % grid.n();
                    const int jy = (iy + lag[1]) % grid.n();
                    m += field.values[grid.at(ix, iy)] * field.values[grid.at(jx, jy)];
                }
            m /= static_cast<double>(grid.size());
            sum += m;
            sumsq += m * m;
        }
        const double mean = sum / realizations;
        const double var = (sumsq - sum * sum / realizations) / (realizations - 1.0);
        const double se = std::sqrt(var / realizations);
        const double expected = covariance_oracle(grid, spec, lag[0], lag[1]);
        CHECK(std::abs(mean - expected) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("same seed gives a bit-identical field") {
    const Grid grid(64);
    const auto spec = normalize_spectrum(grid, 0.5);
    const auto a = sample_potential(grid, spec, 123456789);
    const auto b = sample_potential(grid, spec, 123456789);
    CHECK(a.values == b.values);
    const auto c = sample_potential(grid, spec, 123456790);
    CHECK(a.values != c.values);
}

TEST_CASE("empirical covariance") {
    const Grid grid(64);

    SUBCASE("rejects fewer than two realizations") {
        CHECK_THROWS_AS(empirical_covariance(grid, {}), std::invalid_argument);
    }

    SUBCASE("constant field estimates c^2 at k = 0") {
        PotentialField constant;
        constant.values.assign(grid.size(), 2.5);
        const auto est = empirical_covariance(grid, {constant, constant});
        CHECK(est[grid.at_wavevector(0, 0)] == doctest::Approx(6.25).epsilon(1e-12));
        for (std::size_t i = 1; i < est.size(); ++i) CHECK(est[i] < 1e-20);
    }

    SUBCASE("recovers the Gaussian spectrum to 15% on significant modes") {
        const auto spec = normalize_spectrum(grid, 0.75);
        std::vector<PotentialField> fields;
        fields.reserve(500);
        for (int r = 0; r < 500; ++r)
            fields.push_back(sample_potential(grid, spec, derive_seed(41, r)));
        const auto est = empirical_covariance(grid, fields);
        const double peak = spec.spectrum[grid.at_wavevector(0, 0)];
        double max_rel = 0.0;
        for (std::size_t i = 0; i < est.size(); ++i)
            if (spec.spectrum[i] > 0.01 * peak)
                max_rel = std::max(max_rel,
                                   std::abs(est[i] - spec.spectrum[i]) / spec.spectrum[i]);
        CHECK(max_rel < 0.15);
    }

    SUBCASE("estimate depends only on |k| within statistical error") {
        const auto spec = normalize_spectrum(grid, 0.75);
        std::vector<PotentialField> fields;
        for (int r = 0; r < 500; ++r)
            fields.push_back(sample_potential(grid, spec, derive_seed(43, r)));
        const auto est = empirical_covariance(grid, fields);
        const int shell[][2] = {{5, 0}, {0, 5}, {-5, 0}, {0, -5}, {3, 4},
                                {4, 3}, {-3, 4}, {-4, 3}, {3, -4}, {4, -3}};
        double mean = 0.0;
        for (const auto& k : shell) mean += est[grid.at_wavevector(k[0], k[1])];
        mean /= std::size(shell);
        for (const auto& k : shell) {
            const double v = est[grid.at_wavevector(k[0], k[1])];
            CHECK(std::abs(v - mean) / mean < 0.2);
        }
    }
}

TEST_CASE("homogeneity: <V_k V_q> vanishes unless k + q = 0") {
    const Grid grid(32);
    const auto spec = normalize_spectrum(grid, 0.5);
    const int realizations = 400;
    const double n4 = std::pow(static_cast<double>(grid.size()), 2);

    std::vector<std::vector<cdouble>> vhat(realizations);
    for (int r = 0; r < realizations; ++r) {
        const auto field = sample_potential(grid, spec, derive_seed(57, r));
        std::vector<cdouble> work(field.values.begin(), field.values.end());
        spectral_transform(grid)->forward(work);
        vhat[r] = std::move(work);
    }

    // resonant pair k + q = 0: <V_k V_{-k}> = Chat_k, clearly nonzero
    {
        const auto site_k = grid.at_wavevector(2, 1);
        const auto site_q = grid.at_wavevector(-2, -1);
        cdouble mean(0.0, 0.0);
        for (const auto& v : vhat) mean += v[site_k] * v[site_q] / n4;
        mean /= static_cast<double>(realizations);
        const double expected = spec.spectrum[site_k];
        CHECK(std::abs(mean.real() - expected) < 0.2 * expected);
    }

    // non-resonant pairs: consistent with zero at 3 sigma
    RandomStream pick(7);
    int violations = 0;
    const int n_pairs = 200;
    for (int p = 0; p < n_pairs; ++p) {
        const int kx = grid.kmin() + static_cast<int>(pick.uniform() * grid.n());
        const int ky = grid.kmin() + static_cast<int>(pick.uniform() * grid.n());
        const int qx = grid.kmin() + static_cast<int>(pick.uniform() * grid.n());
        const int qy = grid.kmin() + static_cast<int>(pick.uniform() * grid.n());
        if (kx + qx == 0 && ky + qy == 0) continue;
        const auto site_k = grid.at_wavevector(kx, ky);
        const auto site_q = grid.at_wavevector(qx, qy);
        cdouble sum(0.0, 0.0);
        double sumsq_re = 0.0, sumsq_im = 0.0;
        for (const auto& v : vhat) {
            const cdouble prod = v[site_k] * v[site_q] / n4;
            sum += prod;
            sumsq_re += prod.real() * prod.real();
            sumsq_im += prod.imag() * prod.imag();
        }
        const cdouble mean = sum / static_cast<double>(realizations);
        const double se_re = std::sqrt(
            (sumsq_re - realizations * mean.real() * mean.real()) /
            (realizations - 1.0) / realizations);
        const double se_im = std::sqrt(
            (sumsq_im - realizations * mean.imag() * mean.imag()) /
            (realizations - 1.0) / realizations);
        if (std::abs(mean.real()) > 3.0 * se_re + 1e-15 ||
            std::abs(mean.imag()) > 3.0 * se_im + 1e-15)
            ++violations;
    }
    // ~0.5% of pairs may cross 3 sigma by chance
    CHECK(violations <= 3);
}

TEST_CASE("field dump round trip") {
    const Grid grid(32);
    const auto spec = normalize_spectrum(grid, 0.5);
    const auto field = sample_potential(grid, spec, 99);
    const std::string path = "field_dump_test.bin";
    write_field_dump(path, grid, spec, field);
    int n = 0;
    double zeta = 0.0;
    const auto loaded = read_field_dump(path, n, zeta);
    CHECK(n == 32);
    CHECK(zeta == 0.5);
    CHECK(loaded.source_seed == 99);
    CHECK(loaded.values == field.values);
    std::remove(path.c_str());
}
