#ifndef QBROAD_GRID_HPP
#define QBROAD_GRID_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace qbroad {

/// Periodic N x N spectral lattice in dimensionless units: the spatial
/// domain is 2pi x 2pi, so grid spacing is dx = 2pi/N and wave numbers
/// are integers with dk = 1. Storage order is row-major FFT order
/// (axis index 0..N-1); wavenumber(i) maps a storage index to the
/// integer wave number in [floor(-(N-1)/2), floor((N-1)/2)].
class Grid {
public:
    explicit Grid(int n_points);

    int n() const { return n_; }
    double dx() const { return dx_; }
    std::size_t size() const { return static_cast<std::size_t>(n_) * n_; }

    /// Integer wave number for storage index i in [0, N).
    int wavenumber(int i) const { return i <= (n_ - 1) / 2 ? i : i - n_; }

    /// Storage index of integer wave number k; rejects off-lattice k.
    int index_of(int k) const;

    int kmin() const { return wavenumber((n_ - 1) / 2 + 1); }
    int kmax() const { return (n_ - 1) / 2; }

    bool on_lattice(int kx, int ky) const {
        return kx >= kmin() && kx <= kmax() && ky >= kmin() && ky <= kmax();
    }

    std::size_t at(int ix, int iy) const {
        return static_cast<std::size_t>(ix) * n_ + iy;
    }
    /// Flat storage index of integer wave vector (kx, ky).
    std::size_t at_wavevector(int kx, int ky) const {
        return at(index_of(kx), index_of(ky));
    }

    /// |k|^2 for every lattice site, in storage order.
    const std::vector<double>& ksq() const { return ksq_; }

    /// All N wave numbers per axis in storage order.
    std::vector<int> k_axis() const;

private:
    int n_;
    double dx_;
    std::vector<double> ksq_;
};

/// Euclidean magnitude of the integer wave vector (kx, ky); the vector
/// must lie on the lattice of `grid`.
double kmag(const Grid& grid, const std::array<int, 2>& k);

Grid make_grid(int n_points);

} // namespace qbroad

#endif
