#pragma once

#include <array>

#include <Eigen/Core>

namespace lstop {

/// Precomputed 2x2 Gauss data for the uniform bilinear quadrilateral:
/// shape values, physical shape gradients, and the unit-modulus plane-stress
/// element stiffness split per Gauss point (K_e = sum_g E_g * ke_unit[g]).
struct QuadCache {
    double h = 0.0;
    double nu = 0.0;
    double w = 0.0;  // quadrature weight times Jacobian, h^2/4 per point
    std::array<std::array<double, 4>, 4> N{};                    // [gauss][node]
    std::array<std::array<std::array<double, 2>, 4>, 4> dN{};    // [gauss][node][xy]
    std::array<std::array<double, 2>, 4> dN_center{};            // [node][xy]
    Eigen::Matrix3d D_unit;                                      // plane stress, E = 1
    std::array<Eigen::Matrix<double, 3, 8>, 4> B{};              // [gauss]
    std::array<Eigen::Matrix<double, 8, 8>, 4> ke_unit{};        // [gauss]
};

QuadCache build_quad_cache(double h, double nu);

}  // namespace lstop
