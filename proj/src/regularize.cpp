#include "lstop/regularize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace lstop {

void validate(const RegConfig& cfg) {
    if (cfg.w_phi1 < 0 || cfg.w_phi2 < 0 || cfg.w_gphi1 < 0 || cfg.w_gphi2 < 0) {
        throw std::invalid_argument("RegConfig: weights must be nonnegative");
    }
    if (!(cfg.gamma > 0.0)) throw std::invalid_argument("RegConfig: gamma must be positive");
    if (!(cfg.phi_tilde_low < 0.0 && cfg.phi_tilde_up > 0.0)) {
        throw std::invalid_argument("RegConfig: target bounds must straddle zero");
    }
}

namespace {

struct ScalarQuad {
    std::array<std::array<double, 4>, 4> N{};
    std::array<std::array<std::array<double, 2>, 4>, 4> dN{};
    std::array<std::array<double, 2>, 4> dN_center{};
    double w = 0.0;
};

ScalarQuad scalar_quad(double h) {
    constexpr std::array<std::array<double, 2>, 4> corner = {{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
    const double ga = 1.0 / std::sqrt(3.0);
    const std::array<std::array<double, 2>, 4> gp = {{{-ga, -ga}, {ga, -ga}, {ga, ga}, {-ga, ga}}};
    ScalarQuad q;
    q.w = h * h / 4.0;
    for (int a = 0; a < 4; ++a) {
        q.dN_center[a] = {corner[a][0] / (2.0 * h), corner[a][1] / (2.0 * h)};
    }
    for (int g = 0; g < 4; ++g) {
        for (int a = 0; a < 4; ++a) {
            q.N[g][a] = 0.25 * (1.0 + corner[a][0] * gp[g][0]) * (1.0 + corner[a][1] * gp[g][1]);
            q.dN[g][a] = {corner[a][0] * (1.0 + corner[a][1] * gp[g][1]) / (2.0 * h),
                          corner[a][1] * (1.0 + corner[a][0] * gp[g][0]) / (2.0 * h)};
        }
    }
    return q;
}

double shape_at(const Grid& grid, int e, int a, const std::array<double, 2>& x) {
    const auto ij = grid.element_lattice(e);
    const double xi = 2.0 * ((x[0] - grid.origin()[0]) / grid.h() - ij[0]) - 1.0;
    const double eta = 2.0 * ((x[1] - grid.origin()[1]) / grid.h() - ij[1]) - 1.0;
    constexpr std::array<std::array<double, 2>, 4> corner = {{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
    return 0.25 * (1.0 + corner[a][0] * xi) * (1.0 + corner[a][1] * eta);
}

double point_segment_distance(const std::array<double, 2>& p, const Segment2& s) {
    const double vx = s.b[0] - s.a[0];
    const double vy = s.b[1] - s.a[1];
    const double wx = p[0] - s.a[0];
    const double wy = p[1] - s.a[1];
    const double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p[0] - (s.a[0] + t * vx), p[1] - (s.a[1] + t * vy));
}

}  // namespace

NodalField build_target_field(const Grid& grid, const NodalField& phi, double t_heat,
                              const RegConfig& cfg) {
    if (phi.size() != grid.node_count()) {
        throw std::invalid_argument("build_target_field: field size does not match grid");
    }
    const int n = grid.node_count();

    const InterfacePolyline poly = extract_interface(grid, phi);
    if (poly.segments.empty()) {
        const bool any_solid = (phi.array() > 0.0).any();
        return NodalField::Constant(n, any_solid ? cfg.phi_tilde_up : cfg.phi_tilde_low);
    }

    const ScalarQuad q = scalar_quad(grid.h());

    // Consistent mass and Laplacian on the full grid, natural boundary.
    std::vector<Eigen::Triplet<double>> tm, tk;
    tm.reserve(static_cast<std::size_t>(grid.element_count()) * 16);
    tk.reserve(static_cast<std::size_t>(grid.element_count()) * 16);
    for (int e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        for (int g = 0; g < 4; ++g) {
            for (int a = 0; a < 4; ++a) {
                for (int b = 0; b < 4; ++b) {
                    tm.emplace_back(nodes[a], nodes[b], q.w * q.N[g][a] * q.N[g][b]);
                    tk.emplace_back(nodes[a], nodes[b],
                                    q.w * (q.dN[g][a][0] * q.dN[g][b][0] +
                                           q.dN[g][a][1] * q.dN[g][b][1]));
                }
            }
        }
    }
    Eigen::SparseMatrix<double> M(n, n), K(n, n);
    M.setFromTriplets(tm.begin(), tm.end());
    K.setFromTriplets(tk.begin(), tk.end());

    // Interface source: line integrals of the shape functions over the polyline.
    Eigen::VectorXd src = Eigen::VectorXd::Zero(n);
    for (std::size_t si = 0; si < poly.segments.size(); ++si) {
        const Segment2& s = poly.segments[si];
        const int e = poly.elements[si];
        const double len = s.length();
        const auto nodes = grid.element_nodes(e);
        for (int a = 0; a < 4; ++a) {
            src[nodes[a]] += 0.5 * len * (shape_at(grid, e, a, s.a) + shape_at(grid, e, a, s.b));
        }
    }

    Eigen::SparseMatrix<double> A = M + t_heat * K;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> heat(A);
    if (heat.info() != Eigen::Success) {
        const bool any_solid = (phi.array() > 0.0).any();
        return NodalField::Constant(n, any_solid ? cfg.phi_tilde_up : cfg.phi_tilde_low);
    }
    const Eigen::VectorXd u = heat.solve(src);

    // Normalized outward direction per element and the divergence load.
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (int e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        double gx = 0.0, gy = 0.0;
        for (int a = 0; a < 4; ++a) {
            gx += u[nodes[a]] * q.dN_center[a][0];
            gy += u[nodes[a]] * q.dN_center[a][1];
        }
        const double norm = std::hypot(gx, gy);
        if (norm < 1e-300) continue;
        const double xx = -gx / norm;
        const double xy = -gy / norm;
        for (int a = 0; a < 4; ++a) {
            double ix = 0.0, iy = 0.0;
            for (int g = 0; g < 4; ++g) {
                ix += q.w * q.dN[g][a][0];
                iy += q.w * q.dN[g][a][1];
            }
            b[nodes[a]] += xx * ix + xy * iy;
        }
    }

    // Anchor every node of a cut element to its distance to the polyline;
    // segments further than two element rings cannot be the nearest one.
    std::vector<std::vector<int>> elem_segments(static_cast<std::size_t>(grid.element_count()));
    for (std::size_t si = 0; si < poly.segments.size(); ++si) {
        elem_segments[static_cast<std::size_t>(poly.elements[si])].push_back(static_cast<int>(si));
    }
    std::vector<char> anchored(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd anchor_val = Eigen::VectorXd::Zero(n);
    for (std::size_t si = 0; si < poly.segments.size(); ++si) {
        for (int a : grid.element_nodes(poly.elements[si])) {
            anchored[static_cast<std::size_t>(a)] = 1;
        }
    }
    for (int node = 0; node < n; ++node) {
        if (!anchored[static_cast<std::size_t>(node)]) continue;
        const auto ij = grid.node_lattice(node);
        const auto p = grid.node_coords(node);
        double best = std::numeric_limits<double>::infinity();
        for (int ej = ij[1] - 3; ej <= ij[1] + 2; ++ej) {
            for (int ei = ij[0] - 3; ei <= ij[0] + 2; ++ei) {
                if (ei < 0 || ei >= grid.nx() || ej < 0 || ej >= grid.ny()) continue;
                for (int si : elem_segments[static_cast<std::size_t>(grid.element_index(ei, ej))]) {
                    best = std::min(best, point_segment_distance(p, poly.segments[static_cast<std::size_t>(si)]));
                }
            }
        }
        anchor_val[node] = std::isfinite(best) ? best : 0.0;
    }

    // Poisson recovery with the anchored band eliminated strongly.
    std::vector<int> free_of(static_cast<std::size_t>(n), -1);
    std::vector<int> free_nodes;
    for (int i = 0; i < n; ++i) {
        if (!anchored[static_cast<std::size_t>(i)]) {
            free_of[static_cast<std::size_t>(i)] = static_cast<int>(free_nodes.size());
            free_nodes.push_back(i);
        }
    }
    Eigen::VectorXd dist = anchor_val;
    if (!free_nodes.empty()) {
        const int nf = static_cast<int>(free_nodes.size());
        std::vector<Eigen::Triplet<double>> tr;
        Eigen::VectorXd rhs(nf);
        for (int r = 0; r < nf; ++r) rhs[r] = b[free_nodes[static_cast<std::size_t>(r)]];
        for (int col = 0; col < K.outerSize(); ++col) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(K, col); it; ++it) {
                const int fi = free_of[static_cast<std::size_t>(it.row())];
                const int fj = free_of[static_cast<std::size_t>(it.col())];
                if (fi >= 0 && fj >= 0) {
                    tr.emplace_back(fi, fj, it.value());
                } else if (fi >= 0) {
                    rhs[fi] -= it.value() * anchor_val[it.col()];
                }
            }
        }
        Eigen::SparseMatrix<double> Kff(nf, nf);
        Kff.setFromTriplets(tr.begin(), tr.end());
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> poisson(Kff);
        if (poisson.info() != Eigen::Success) {
            const bool any_solid = (phi.array() > 0.0).any();
            return NodalField::Constant(n, any_solid ? cfg.phi_tilde_up : cfg.phi_tilde_low);
        }
        const Eigen::VectorXd df = poisson.solve(rhs);
        for (int r = 0; r < nf; ++r) dist[free_nodes[static_cast<std::size_t>(r)]] = df[r];
    }

    NodalField target(n);
    for (int i = 0; i < n; ++i) {
        const double d = std::max(dist[i], 0.0);
        const double sgn = phi[i] > 0.0 ? 1.0 : (phi[i] < 0.0 ? -1.0 : 0.0);
        target[i] = std::clamp(sgn * d, cfg.phi_tilde_low, cfg.phi_tilde_up);
    }
    return target;
}

double reg_penalty(const Grid& grid, const NodalField& phi, const NodalField& target,
                   const RegConfig& cfg) {
    if (phi.size() != grid.node_count() || target.size() != grid.node_count()) {
        throw std::invalid_argument("reg_penalty: field size mismatch");
    }
    const ScalarQuad q = scalar_quad(grid.h());
    const double vol = grid.area();
    const double val_norm = cfg.phi_bnd * cfg.phi_bnd * vol;
    double penalty = 0.0;
    for (int e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        for (int g = 0; g < 4; ++g) {
            double pg = 0.0, tg = 0.0, gpx = 0.0, gpy = 0.0, gtx = 0.0, gty = 0.0;
            for (int a = 0; a < 4; ++a) {
                pg += q.N[g][a] * phi[nodes[a]];
                tg += q.N[g][a] * target[nodes[a]];
                gpx += q.dN[g][a][0] * phi[nodes[a]];
                gpy += q.dN[g][a][1] * phi[nodes[a]];
                gtx += q.dN[g][a][0] * target[nodes[a]];
                gty += q.dN[g][a][1] * target[nodes[a]];
            }
            const double r = tg / cfg.phi_bnd;
            const double alpha = std::exp(-cfg.gamma * r * r);
            const double w_val = cfg.w_phi1 * alpha + cfg.w_phi2 * (1.0 - alpha);
            const double w_grad = cfg.w_gphi1 * alpha + cfg.w_gphi2 * (1.0 - alpha);
            const double dv = pg - tg;
            const double dgx = gpx - gtx;
            const double dgy = gpy - gty;
            penalty += q.w * w_val * dv * dv / val_norm;
            penalty += q.w * w_grad * (dgx * dgx + dgy * dgy) / vol;
        }
    }
    return penalty;
}

Eigen::VectorXd reg_penalty_gradient(const Grid& grid, const NodalField& phi,
                                     const NodalField& target, const RegConfig& cfg) {
    const ScalarQuad q = scalar_quad(grid.h());
    const double vol = grid.area();
    const double val_norm = cfg.phi_bnd * cfg.phi_bnd * vol;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(grid.node_count());
    for (int e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        for (int g = 0; g < 4; ++g) {
            double pg = 0.0, tg = 0.0, gpx = 0.0, gpy = 0.0, gtx = 0.0, gty = 0.0;
            for (int a = 0; a < 4; ++a) {
                pg += q.N[g][a] * phi[nodes[a]];
                tg += q.N[g][a] * target[nodes[a]];
                gpx += q.dN[g][a][0] * phi[nodes[a]];
                gpy += q.dN[g][a][1] * phi[nodes[a]];
                gtx += q.dN[g][a][0] * target[nodes[a]];
                gty += q.dN[g][a][1] * target[nodes[a]];
            }
            const double r = tg / cfg.phi_bnd;
            const double alpha = std::exp(-cfg.gamma * r * r);
            const double w_val = cfg.w_phi1 * alpha + cfg.w_phi2 * (1.0 - alpha);
            const double w_grad = cfg.w_gphi1 * alpha + cfg.w_gphi2 * (1.0 - alpha);
            const double dv = pg - tg;
            const double dgx = gpx - gtx;
            const double dgy = gpy - gty;
            for (int a = 0; a < 4; ++a) {
                grad[nodes[a]] += q.w * w_val * 2.0 * dv * q.N[g][a] / val_norm;
                grad[nodes[a]] +=
                    q.w * w_grad * 2.0 * (dgx * q.dN[g][a][0] + dgy * q.dN[g][a][1]) / vol;
            }
        }
    }
    return grad;
}

}  // namespace lstop
