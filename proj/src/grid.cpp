#include "lstop/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace lstop {

Grid::Grid(int nx, int ny, double h, std::array<double, 2> origin)
    : nx_(nx), ny_(ny), h_(h), origin_(origin) {
    if (nx < 1 || ny < 1) {
        throw std::invalid_argument("Grid: element counts must be >= 1");
    }
    if (!(h > 0.0)) {
        throw std::invalid_argument("Grid: element size must be positive");
    }
}

std::vector<std::pair<int, double>> Grid::neighbors_within(int node, double radius) const {
    if (node < 0 || node >= node_count()) {
        throw std::out_of_range("Grid::neighbors_within: invalid node index");
    }
    if (!(radius > 0.0)) {
        throw std::invalid_argument("Grid::neighbors_within: radius must be positive");
    }
    const auto ij = node_lattice(node);
    // Lattice window bound per axis, then exact strict distance check.
    const int w = static_cast<int>(std::ceil(radius / h_));
    const int i_lo = std::max(0, ij[0] - w);
    const int i_hi = std::min(nx_, ij[0] + w);
    const int j_lo = std::max(0, ij[1] - w);
    const int j_hi = std::min(ny_, ij[1] + w);

    std::vector<std::pair<int, double>> out;
    out.reserve(static_cast<std::size_t>(i_hi - i_lo + 1) * (j_hi - j_lo + 1));
    for (int j = j_lo; j <= j_hi; ++j) {
        for (int i = i_lo; i <= i_hi; ++i) {
            const double dx = h_ * (i - ij[0]);
            const double dy = h_ * (j - ij[1]);
            const double d = std::hypot(dx, dy);
            if (d < radius) {
                out.emplace_back(node_index(i, j), d);
            }
        }
    }
    return out;
}

}  // namespace lstop
