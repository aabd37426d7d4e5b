#include "qbroad/spectral.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

namespace qbroad {

namespace {
// FFTW's planner is not thread safe; execution via the new-array API is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
} // namespace

struct SpectralTransform::Impl {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;

    ~Impl() {
        std::lock_guard lock(planner_mutex());
        if (fwd) fftw_destroy_plan(fwd);
        if (bwd) fftw_destroy_plan(bwd);
    }
};

SpectralTransform::SpectralTransform(const Grid& grid)
    : n_(grid.n()), impl_(std::make_unique<Impl>()) {
    std::vector<cdouble> scratch(grid.size());
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    // FFTW_UNALIGNED so plans apply to any caller buffer; FFTW_ESTIMATE
    // keeps planning deterministic run to run.
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    std::lock_guard lock(planner_mutex());
    impl_->fwd = fftw_plan_dft_2d(n_, n_, buf, buf, FFTW_FORWARD, flags);
    impl_->bwd = fftw_plan_dft_2d(n_, n_, buf, buf, FFTW_BACKWARD, flags);
    if (!impl_->fwd || !impl_->bwd)
        throw std::runtime_error("SpectralTransform: FFTW planning failed");
}

SpectralTransform::~SpectralTransform() = default;
SpectralTransform::SpectralTransform(SpectralTransform&&) noexcept = default;
SpectralTransform& SpectralTransform::operator=(SpectralTransform&&) noexcept = default;

void SpectralTransform::forward(std::span<cdouble> field) const {
    if (field.size() != static_cast<std::size_t>(n_) * n_)
        throw std::invalid_argument("SpectralTransform::forward: size mismatch");
    auto* buf = reinterpret_cast<fftw_complex*>(field.data());
    fftw_execute_dft(impl_->fwd, buf, buf);
}

void SpectralTransform::inverse(std::span<cdouble> field) const {
    if (field.size() != static_cast<std::size_t>(n_) * n_)
        throw std::invalid_argument("SpectralTransform::inverse: size mismatch");
    auto* buf = reinterpret_cast<fftw_complex*>(field.data());
    fftw_execute_dft(impl_->bwd, buf, buf);
    const double scale = 1.0 / (static_cast<double>(n_) * n_);
    for (auto& v : field) v *= scale;
}

std::shared_ptr<const SpectralTransform> spectral_transform(const Grid& grid) {
    static std::mutex cache_mutex;
    static std::map<int, std::weak_ptr<const SpectralTransform>> cache;
    std::lock_guard lock(cache_mutex);
    if (auto cached = cache[grid.n()].lock()) return cached;
    auto fresh = std::make_shared<const SpectralTransform>(grid);
    cache[grid.n()] = fresh;
    return fresh;
}

} // namespace qbroad
