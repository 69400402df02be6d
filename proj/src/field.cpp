#include "lstop/field.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace lstop {

double Segment2::length() const {
    return std::hypot(b[0] - a[0], b[1] - a[1]);
}

FilterOperator build_filter(const Grid& grid, double r_f) {
    if (!(r_f > 0.0)) {
        throw std::invalid_argument("build_filter: radius must be positive");
    }
    const int n = grid.node_count();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(n) * 9);
    for (int i = 0; i < n; ++i) {
        const auto nbrs = grid.neighbors_within(i, r_f);
        double wsum = 0.0;
        for (const auto& [j, d] : nbrs) {
            wsum += r_f - d;
        }
        for (const auto& [j, d] : nbrs) {
            trips.emplace_back(i, j, (r_f - d) / wsum);
        }
    }
    FilterOperator op;
    op.radius = r_f;
    op.weights.resize(n, n);
    op.weights.setFromTriplets(trips.begin(), trips.end());
    op.weights.makeCompressed();
    return op;
}

NodalField apply_filter(const FilterOperator& op, const Eigen::VectorXd& s) {
    if (s.size() != op.weights.cols()) {
        throw std::invalid_argument("apply_filter: dimension mismatch");
    }
    return op.weights * s;
}

Eigen::VectorXd apply_filter_transpose(const FilterOperator& op, const Eigen::VectorXd& g) {
    if (g.size() != op.weights.rows()) {
        throw std::invalid_argument("apply_filter_transpose: dimension mismatch");
    }
    return op.weights.transpose() * g;
}

double eval_field(const Grid& grid, const NodalField& f, const std::array<double, 2>& x) {
    if (f.size() != grid.node_count()) {
        throw std::invalid_argument("eval_field: field size does not match grid");
    }
    const double tol = 1e-12 * std::max(1.0, std::max(grid.nx(), grid.ny()) * grid.h());
    const double xl = (x[0] - grid.origin()[0]) / grid.h();
    const double yl = (x[1] - grid.origin()[1]) / grid.h();
    if (xl < -tol || xl > grid.nx() + tol || yl < -tol || yl > grid.ny() + tol) {
        throw std::domain_error("eval_field: point outside grid");
    }
    const int i = std::min(std::max(static_cast<int>(std::floor(xl)), 0), grid.nx() - 1);
    const int j = std::min(std::max(static_cast<int>(std::floor(yl)), 0), grid.ny() - 1);
    const double xi = 2.0 * (xl - i) - 1.0;
    const double eta = 2.0 * (yl - j) - 1.0;
    const auto nodes = grid.element_nodes(grid.element_index(i, j));
    const double N0 = 0.25 * (1.0 - xi) * (1.0 - eta);
    const double N1 = 0.25 * (1.0 + xi) * (1.0 - eta);
    const double N2 = 0.25 * (1.0 + xi) * (1.0 + eta);
    const double N3 = 0.25 * (1.0 - xi) * (1.0 + eta);
    return N0 * f[nodes[0]] + N1 * f[nodes[1]] + N2 * f[nodes[2]] + N3 * f[nodes[3]];
}

double smoothed_heaviside(double phi, double eps) {
    const double t = phi / eps;
    if (t <= -1.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double t2 = t * t;
    return 0.5 + t * (15.0 - t2 * (10.0 - 3.0 * t2)) / 16.0;
}

double smoothed_heaviside_deriv(double phi, double eps) {
    const double t = phi / eps;
    if (t <= -1.0 || t >= 1.0) return 0.0;
    const double m = 1.0 - t * t;
    return 15.0 / 16.0 * m * m / eps;
}

double smoothed_heaviside_deriv2(double phi, double eps) {
    const double t = phi / eps;
    if (t <= -1.0 || t >= 1.0) return 0.0;
    return -15.0 / 4.0 * t * (1.0 - t * t) / (eps * eps);
}

namespace {

std::array<double, 2> edge_crossing(const std::array<double, 2>& xa, double fa,
                                    const std::array<double, 2>& xb, double fb) {
    const double t = fa / (fa - fb);
    return {xa[0] + t * (xb[0] - xa[0]), xa[1] + t * (xb[1] - xa[1])};
}

}  // namespace

InterfacePolyline extract_interface(const Grid& grid, const NodalField& phi) {
    if (phi.size() != grid.node_count()) {
        throw std::invalid_argument("extract_interface: field size does not match grid");
    }
    InterfacePolyline poly;
    for (int e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        std::array<double, 4> f{};
        std::array<std::array<double, 2>, 4> x{};
        std::array<bool, 4> inside{};
        for (int k = 0; k < 4; ++k) {
            f[k] = phi[nodes[k]];
            x[k] = grid.node_coords(nodes[k]);
            inside[k] = f[k] > 0.0;
        }
        // Crossing point on each of the four edges (corner k to corner k+1).
        std::array<std::array<double, 2>, 4> cross{};
        std::array<bool, 4> has_cross{};
        int n_cross = 0;
        for (int k = 0; k < 4; ++k) {
            const int k1 = (k + 1) % 4;
            if (inside[k] != inside[k1]) {
                cross[k] = edge_crossing(x[k], f[k], x[k1], f[k1]);
                has_cross[k] = true;
                ++n_cross;
            }
        }
        if (n_cross == 0) continue;

        auto emit = [&](int ea, int eb) {
            Segment2 s{cross[ea], cross[eb]};
            poly.total_length += s.length();
            poly.segments.push_back(s);
            poly.elements.push_back(e);
        };

        if (n_cross == 2) {
            int first = -1, second = -1;
            for (int k = 0; k < 4; ++k) {
                if (has_cross[k]) (first < 0 ? first : second) = k;
            }
            emit(first, second);
        } else {
            // Saddle: the element-center value decides which diagonal connects.
            const double fc = 0.25 * (f[0] + f[1] + f[2] + f[3]);
            const bool center_in = fc > 0.0;
            for (int k = 0; k < 4; ++k) {
                if (inside[k] != center_in) {
                    emit((k + 3) % 4, k);  // edges flanking the pocket corner
                }
            }
        }
    }
    return poly;
}

}  // namespace lstop
