#include "lstop/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace lstop {

QuadCache build_quad_cache(double h, double nu) {
    if (!(h > 0.0)) throw std::invalid_argument("build_quad_cache: h must be positive");
    if (!(nu > 0.0 && nu < 0.5)) throw std::invalid_argument("build_quad_cache: nu outside (0, 0.5)");

    QuadCache qc;
    qc.h = h;
    qc.nu = nu;
    qc.w = h * h / 4.0;

    // Corner signs, counter-clockwise from the lower-left corner.
    constexpr std::array<std::array<double, 2>, 4> corner = {{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
    const double ga = 1.0 / std::sqrt(3.0);
    const std::array<std::array<double, 2>, 4> gp = {{{-ga, -ga}, {ga, -ga}, {ga, ga}, {-ga, ga}}};

    qc.D_unit.setZero();
    qc.D_unit(0, 0) = qc.D_unit(1, 1) = 1.0 / (1.0 - nu * nu);
    qc.D_unit(0, 1) = qc.D_unit(1, 0) = nu / (1.0 - nu * nu);
    qc.D_unit(2, 2) = 0.5 * (1.0 - nu) / (1.0 + nu);

    for (int a = 0; a < 4; ++a) {
        qc.dN_center[a] = {corner[a][0] / (2.0 * h), corner[a][1] / (2.0 * h)};
    }

    for (int g = 0; g < 4; ++g) {
        const double xi = gp[g][0];
        const double eta = gp[g][1];
        Eigen::Matrix<double, 3, 8> B = Eigen::Matrix<double, 3, 8>::Zero();
        for (int a = 0; a < 4; ++a) {
            const double sx = corner[a][0];
            const double sy = corner[a][1];
            qc.N[g][a] = 0.25 * (1.0 + sx * xi) * (1.0 + sy * eta);
            const double dx = sx * (1.0 + sy * eta) / (2.0 * h);
            const double dy = sy * (1.0 + sx * xi) / (2.0 * h);
            qc.dN[g][a] = {dx, dy};
            B(0, 2 * a) = dx;
            B(1, 2 * a + 1) = dy;
            B(2, 2 * a) = dy;
            B(2, 2 * a + 1) = dx;
        }
        qc.B[g] = B;
        qc.ke_unit[g] = qc.w * B.transpose() * qc.D_unit * B;
    }
    return qc;
}

}  // namespace lstop
