#ifndef QBROAD_SPECTRAL_HPP
#define QBROAD_SPECTRAL_HPP

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include "qbroad/grid.hpp"

namespace qbroad {

using cdouble = std::complex<double>;

/// 2D discrete Fourier transform pair on an N x N lattice:
///   forward:  fhat(k) = sum_x f(x) exp(-i k.x)          (no prefactor)
///   inverse:  f(x)    = (1/N^2) sum_k fhat(k) exp(+i k.x)
/// Both act in place on arrays in storage order. Instances are immutable
/// after construction and safe to share across threads; execution is
/// reentrant (each call supplies its own buffer).
class SpectralTransform {
public:
    explicit SpectralTransform(const Grid& grid);
    ~SpectralTransform();

    SpectralTransform(const SpectralTransform&) = delete;
    SpectralTransform& operator=(const SpectralTransform&) = delete;
    SpectralTransform(SpectralTransform&&) noexcept;
    SpectralTransform& operator=(SpectralTransform&&) noexcept;

    int n() const { return n_; }

    void forward(std::span<cdouble> field) const;
    void inverse(std::span<cdouble> field) const;

private:
    struct Impl;
    int n_ = 0;
    std::unique_ptr<Impl> impl_;
};

/// Cached shared transform for a grid size (plans are expensive to build).
std::shared_ptr<const SpectralTransform> spectral_transform(const Grid& grid);

} // namespace qbroad

#endif
