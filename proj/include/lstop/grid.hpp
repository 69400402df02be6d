#pragma once

#include <array>
#include <utility>
#include <vector>

namespace lstop {

// Structured 2D quadrilateral mesh with uniform element edge length.
// Nodes are numbered row-major with x running fastest:
//   node(i, j) = j * (nx + 1) + i,  0 <= i <= nx, 0 <= j <= ny.
// Elements follow the same convention over (nx, ny) cells.
class Grid {
public:
    Grid(int nx, int ny, double h, std::array<double, 2> origin = {0.0, 0.0});

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double h() const { return h_; }
    const std::array<double, 2>& origin() const { return origin_; }

    int node_count() const { return (nx_ + 1) * (ny_ + 1); }
    int element_count() const { return nx_ * ny_; }

    int node_index(int i, int j) const { return j * (nx_ + 1) + i; }
    std::array<int, 2> node_lattice(int node) const {
        return {node % (nx_ + 1), node / (nx_ + 1)};
    }
    std::array<double, 2> node_coords(int node) const {
        const auto ij = node_lattice(node);
        return {origin_[0] + h_ * ij[0], origin_[1] + h_ * ij[1]};
    }

    int element_index(int i, int j) const { return j * nx_ + i; }
    std::array<int, 2> element_lattice(int e) const { return {e % nx_, e / nx_}; }

    // Corner nodes of element e, counter-clockwise from the lower-left corner.
    std::array<int, 4> element_nodes(int e) const {
        const auto ij = element_lattice(e);
        const int n0 = node_index(ij[0], ij[1]);
        return {n0, n0 + 1, n0 + nx_ + 2, n0 + nx_ + 1};
    }

    double area() const { return nx_ * h_ * ny_ * h_; }
    double boundary_length() const { return 2.0 * (nx_ + ny_) * h_; }

    bool node_on_boundary(int node) const {
        const auto ij = node_lattice(node);
        return ij[0] == 0 || ij[0] == nx_ || ij[1] == 0 || ij[1] == ny_;
    }
    bool element_on_boundary(int e) const {
        const auto ij = element_lattice(e);
        return ij[0] == 0 || ij[0] == nx_ - 1 || ij[1] == 0 || ij[1] == ny_ - 1;
    }

    // All nodes j with |X_i - X_j| < radius (strict), including the node itself,
    // paired with the Euclidean distance.
    std::vector<std::pair<int, double>> neighbors_within(int node, double radius) const;

private:
    int nx_ = 0;
    int ny_ = 0;
    double h_ = 0.0;
    std::array<double, 2> origin_{0.0, 0.0};
};

}  // namespace lstop
