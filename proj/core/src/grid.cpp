#include "qbroad/grid.hpp"

#include <numbers>

namespace qbroad {

Grid::Grid(int n_points) : n_(n_points) {
    if (n_points < 8)
        throw std::invalid_argument("Grid: n_points must be >= 8, got " +
                                    std::to_string(n_points));
    dx_ = 2.0 * std::numbers::pi / n_;
    ksq_.resize(size());
    for (int ix = 0; ix < n_; ++ix) {
        const double kx = wavenumber(ix);
        for (int iy = 0; iy < n_; ++iy) {
            const double ky = wavenumber(iy);
            ksq_[at(ix, iy)] = kx * kx + ky * ky;
        }
    }
}

int Grid::index_of(int k) const {
    if (k < kmin() || k > kmax())
        throw std::out_of_range("Grid: wave number " + std::to_string(k) +
                                " off lattice for N=" + std::to_string(n_));
    return k >= 0 ? k : k + n_;
}

std::vector<int> Grid::k_axis() const {
    std::vector<int> axis(n_);
    for (int i = 0; i < n_; ++i) axis[i] = wavenumber(i);
    return axis;
}

double kmag(const Grid& grid, const std::array<int, 2>& k) {
    if (!grid.on_lattice(k[0], k[1]))
        throw std::out_of_range("kmag: wave vector off lattice");
    return std::hypot(static_cast<double>(k[0]), static_cast<double>(k[1]));
}

Grid make_grid(int n_points) { return Grid(n_points); }

} // namespace qbroad
