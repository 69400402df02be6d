#include "lstop/solve.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/IterativeLinearSolvers>

namespace lstop {

namespace {

constexpr double kTinyDen = 1e-30;

inline int dof_of(int node, int axis) { return 2 * node + axis; }

}  // namespace

ComponentInfo connected_components(const Grid& grid, const NodalField& phi,
                                   const BoundaryConditions* bc) {
    if (phi.size() != grid.node_count()) {
        throw std::invalid_argument("connected_components: field size mismatch");
    }
    const int ne = grid.element_count();
    std::vector<char> material(static_cast<std::size_t>(ne));
    for (int e = 0; e < ne; ++e) {
        const auto nodes = grid.element_nodes(e);
        const double center = 0.25 * (phi[nodes[0]] + phi[nodes[1]] + phi[nodes[2]] + phi[nodes[3]]);
        material[static_cast<std::size_t>(e)] = center > 0.0;
    }

    ComponentInfo info;
    info.labels.assign(static_cast<std::size_t>(ne), -1);

    auto flood = [&](bool want_material, std::vector<int>& labels, int& count,
                     std::vector<char>* touches_boundary) {
        std::vector<int> stack;
        for (int seed = 0; seed < ne; ++seed) {
            if (static_cast<bool>(material[static_cast<std::size_t>(seed)]) != want_material) continue;
            if (labels[static_cast<std::size_t>(seed)] >= 0) continue;
            const int id = count++;
            if (touches_boundary) touches_boundary->push_back(0);
            stack.assign(1, seed);
            labels[static_cast<std::size_t>(seed)] = id;
            while (!stack.empty()) {
                const int e = stack.back();
                stack.pop_back();
                if (touches_boundary && grid.element_on_boundary(e)) {
                    (*touches_boundary)[static_cast<std::size_t>(id)] = 1;
                }
                const auto ij = grid.element_lattice(e);
                const std::array<std::array<int, 2>, 4> nb = {
                    {{ij[0] - 1, ij[1]}, {ij[0] + 1, ij[1]}, {ij[0], ij[1] - 1}, {ij[0], ij[1] + 1}}};
                for (const auto& [i, j] : nb) {
                    if (i < 0 || i >= grid.nx() || j < 0 || j >= grid.ny()) continue;
                    const int en = grid.element_index(i, j);
                    if (static_cast<bool>(material[static_cast<std::size_t>(en)]) != want_material) continue;
                    if (labels[static_cast<std::size_t>(en)] >= 0) continue;
                    labels[static_cast<std::size_t>(en)] = id;
                    stack.push_back(en);
                }
            }
        }
    };

    flood(true, info.labels, info.component_count, nullptr);

    std::vector<int> void_labels(static_cast<std::size_t>(ne), -1);
    std::vector<char> void_boundary;
    flood(false, void_labels, info.void_component_count, &void_boundary);
    info.interior_void_count = 0;
    for (char t : void_boundary) {
        if (!t) ++info.interior_void_count;
    }

    info.free_floating.assign(static_cast<std::size_t>(info.component_count), 0);
    if (bc != nullptr && info.component_count > 0) {
        std::vector<char> node_fixed(static_cast<std::size_t>(grid.node_count()), 0);
        for (const auto& fd : bc->fixed) node_fixed[static_cast<std::size_t>(fd.node)] = 1;
        std::vector<char> supported(static_cast<std::size_t>(info.component_count), 0);
        for (int e = 0; e < ne; ++e) {
            const int id = info.labels[static_cast<std::size_t>(e)];
            if (id < 0) continue;
            for (int n : grid.element_nodes(e)) {
                if (node_fixed[static_cast<std::size_t>(n)]) supported[static_cast<std::size_t>(id)] = 1;
            }
        }
        for (int c = 0; c < info.component_count; ++c) {
            info.free_floating[static_cast<std::size_t>(c)] = supported[static_cast<std::size_t>(c)] ? 0 : 1;
        }
    }
    return info;
}

GaussMaterial gauss_material(double phi_g, double rho_t_g, const MaterialModel& mat, double eps) {
    GaussMaterial gm;
    gm.H = smoothed_heaviside(phi_g, eps);
    gm.dH = smoothed_heaviside_deriv(phi_g, eps);
    const double rp = std::max(rho_t_g, 0.0);
    const double em = mat.E0 * std::pow(rp, mat.beta);
    gm.E = mat.E_void + gm.H * (em - mat.E_void);
    gm.dE_dphi = gm.dH * (em - mat.E_void);
    gm.dE_drho = gm.H * mat.E0 * mat.beta * std::pow(rp, mat.beta - 1.0);
    return gm;
}

std::array<double, 4> element_stiffness_scale(const QuadCache& qc,
                                              const std::array<double, 4>& phi_nodes,
                                              const std::array<double, 4>& rho_t_nodes,
                                              const MaterialModel& mat, double eps) {
    std::array<double, 4> e{};
    for (int g = 0; g < 4; ++g) {
        double phi_g = 0.0, rho_g = 0.0;
        for (int a = 0; a < 4; ++a) {
            phi_g += qc.N[g][a] * phi_nodes[a];
            rho_g += qc.N[g][a] * rho_t_nodes[a];
        }
        e[g] = gauss_material(phi_g, rho_g, mat, eps).E;
    }
    return e;
}

FemSystem::FemSystem(const Grid& grid, const QuadCache& qc, const NodalField& phi,
                     const NodalField& rho_tilde, const MaterialModel& mat,
                     const BoundaryConditions& bc, double eps, double gamma_s,
                     LinearSolverKind kind)
    : grid_(&grid), qc_(&qc), phi_(phi), rho_(rho_tilde), mat_(mat), eps_(eps), kind_(kind) {
    if (phi.size() != grid.node_count() || rho_tilde.size() != grid.node_count()) {
        throw std::invalid_argument("FemSystem: field size mismatch");
    }
    ndof_ = 2 * grid.node_count();

    components_ = connected_components(grid, phi, &bc);
    spring_nodes_.assign(static_cast<std::size_t>(grid.node_count()), 0);
    spring_k_ = 0.0;
    bool any_spring = false;
    for (int e = 0; e < grid.element_count(); ++e) {
        const int id = components_.labels[static_cast<std::size_t>(e)];
        if (id < 0 || !components_.free_floating[static_cast<std::size_t>(id)]) continue;
        for (int n : grid.element_nodes(e)) spring_nodes_[static_cast<std::size_t>(n)] = 1;
        any_spring = true;
    }
    if (any_spring && gamma_s > 0.0) {
        spring_k_ = gamma_s * mat.E0 / (grid.h() * grid.h());
    }

    fixed_values_.setZero(ndof_);
    free_of_.assign(static_cast<std::size_t>(ndof_), 0);
    for (const auto& fd : bc.fixed) {
        if (fd.node < 0 || fd.node >= grid.node_count() || fd.axis < 0 || fd.axis > 1) {
            throw std::invalid_argument("FemSystem: invalid fixed DOF");
        }
        free_of_[static_cast<std::size_t>(dof_of(fd.node, fd.axis))] = -1;
        fixed_values_[dof_of(fd.node, fd.axis)] = fd.value;
    }
    free_dofs_.clear();
    for (int d = 0; d < ndof_; ++d) {
        if (free_of_[static_cast<std::size_t>(d)] == 0) {
            free_of_[static_cast<std::size_t>(d)] = static_cast<int>(free_dofs_.size());
            free_dofs_.push_back(d);
        }
    }

    // Traction load; design-independent by construction.
    f_full_.setZero(ndof_);
    for (const auto& te : bc.tractions) {
        const auto xa = grid.node_coords(te.node_a);
        const auto xb = grid.node_coords(te.node_b);
        const double len = std::hypot(xb[0] - xa[0], xb[1] - xa[1]);
        for (int c = 0; c < 2; ++c) {
            f_full_[dof_of(te.node_a, c)] += 0.5 * len * te.traction[c];
            f_full_[dof_of(te.node_b, c)] += 0.5 * len * te.traction[c];
        }
    }

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(grid.element_count()) * 64 + 4 * grid.node_count());
    Eigen::VectorXd corr = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(free_dofs_.size()));
    auto add_entry = [&](int di, int dj, double v) {
        const int fi = free_of_[static_cast<std::size_t>(di)];
        const int fj = free_of_[static_cast<std::size_t>(dj)];
        if (fi >= 0 && fj >= 0) {
            trips.emplace_back(fi, fj, v);
        } else if (fi >= 0) {
            corr[fi] += v * fixed_values_[dj];
        }
    };

    for (int e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        std::array<double, 4> pn{}, rn{};
        for (int a = 0; a < 4; ++a) {
            pn[a] = phi_[nodes[a]];
            rn[a] = rho_[nodes[a]];
        }
        const auto Eg = element_stiffness_scale(qc, pn, rn, mat, eps);
        Eigen::Matrix<double, 8, 8> ke = Eigen::Matrix<double, 8, 8>::Zero();
        for (int g = 0; g < 4; ++g) ke += Eg[g] * qc.ke_unit[g];
        for (int a = 0; a < 4; ++a) {
            for (int ca = 0; ca < 2; ++ca) {
                for (int b = 0; b < 4; ++b) {
                    for (int cb = 0; cb < 2; ++cb) {
                        add_entry(dof_of(nodes[a], ca), dof_of(nodes[b], cb),
                                  ke(2 * a + ca, 2 * b + cb));
                    }
                }
            }
        }
    }
    if (spring_k_ > 0.0) {
        for (int n = 0; n < grid.node_count(); ++n) {
            if (!spring_nodes_[static_cast<std::size_t>(n)]) continue;
            add_entry(dof_of(n, 0), dof_of(n, 0), spring_k_);
            add_entry(dof_of(n, 1), dof_of(n, 1), spring_k_);
        }
    }

    const int nf = static_cast<int>(free_dofs_.size());
    K_red_.resize(nf, nf);
    K_red_.setFromTriplets(trips.begin(), trips.end());
    K_red_.makeCompressed();

    // Fold the prescribed-value correction into the stored load vector.
    for (int r = 0; r < nf; ++r) f_full_[free_dofs_[static_cast<std::size_t>(r)]] -= corr[r];

    if (kind_ == LinearSolverKind::Direct && nf > 0) {
        ldlt_.compute(K_red_);
        if (ldlt_.info() != Eigen::Success) {
            throw std::runtime_error(
                "FemSystem: sparse factorization failed (singular or indefinite system); "
                "check boundary conditions and void modulus");
        }
    }
}

Eigen::VectorXd FemSystem::solve_reduced(const Eigen::VectorXd& rhs) const {
    if (rhs.size() == 0) return rhs;
    if (kind_ == LinearSolverKind::Direct) {
        Eigen::VectorXd x = ldlt_.solve(rhs);
        // One refinement step keeps the relative residual well below tolerance.
        x += ldlt_.solve(rhs - K_red_ * x);
        return x;
    }
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-12);
    cg.setMaxIterations(50 * rhs.size());
    cg.compute(K_red_);
    Eigen::VectorXd x = cg.solve(rhs);
    if (cg.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "FemSystem: conjugate gradient did not converge, residual " << cg.error()
            << " after " << cg.iterations() << " iterations";
        throw std::runtime_error(msg.str());
    }
    return x;
}

ElasticSolution FemSystem::solve_primal() const {
    const int nf = static_cast<int>(free_dofs_.size());
    Eigen::VectorXd rhs(nf);
    for (int r = 0; r < nf; ++r) rhs[r] = f_full_[free_dofs_[static_cast<std::size_t>(r)]];

    ElasticSolution sol;
    sol.components = components_;
    sol.f = f_full_;
    sol.u = fixed_values_;

    const double rhs_norm = rhs.norm();
    if (nf > 0 && rhs_norm > 0.0) {
        const Eigen::VectorXd x = solve_reduced(rhs);
        sol.residual_norm = (K_red_ * x - rhs).norm() / rhs_norm;
        if (!(sol.residual_norm <= 1e-9)) {
            std::ostringstream msg;
            msg << "FemSystem: relative residual " << sol.residual_norm << " exceeds 1e-9";
            throw std::runtime_error(msg.str());
        }
        for (int r = 0; r < nf; ++r) sol.u[free_dofs_[static_cast<std::size_t>(r)]] = x[r];
    }

    sol.strain_energy = 0.5 * sol.f.dot(sol.u);

    double assembled = 0.0;
    for (int e = 0; e < grid_->element_count(); ++e) {
        const auto nodes = grid_->element_nodes(e);
        Eigen::Matrix<double, 8, 1> ue;
        std::array<double, 4> pn{}, rn{};
        for (int a = 0; a < 4; ++a) {
            pn[a] = phi_[nodes[a]];
            rn[a] = rho_[nodes[a]];
            ue[2 * a] = sol.u[dof_of(nodes[a], 0)];
            ue[2 * a + 1] = sol.u[dof_of(nodes[a], 1)];
        }
        const auto Eg = element_stiffness_scale(*qc_, pn, rn, mat_, eps_);
        for (int g = 0; g < 4; ++g) {
            assembled += 0.5 * Eg[g] * ue.dot(qc_->ke_unit[g] * ue);
        }
    }
    if (spring_k_ > 0.0) {
        for (int n = 0; n < grid_->node_count(); ++n) {
            if (!spring_nodes_[static_cast<std::size_t>(n)]) continue;
            assembled += 0.5 * spring_k_ *
                         (sol.u[dof_of(n, 0)] * sol.u[dof_of(n, 0)] +
                          sol.u[dof_of(n, 1)] * sol.u[dof_of(n, 1)]);
        }
    }
    sol.strain_energy_assembled = assembled;
    return sol;
}

Eigen::VectorXd FemSystem::solve_adjoint(const Eigen::VectorXd& rhs_full) const {
    if (rhs_full.size() != ndof_) {
        throw std::invalid_argument("FemSystem::solve_adjoint: rhs size mismatch");
    }
    const int nf = static_cast<int>(free_dofs_.size());
    Eigen::VectorXd rhs(nf);
    for (int r = 0; r < nf; ++r) rhs[r] = rhs_full[free_dofs_[static_cast<std::size_t>(r)]];
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(ndof_);
    if (nf > 0 && rhs.norm() > 0.0) {
        const Eigen::VectorXd x = solve_reduced(rhs);
        for (int r = 0; r < nf; ++r) lambda[free_dofs_[static_cast<std::size_t>(r)]] = x[r];
    }
    return lambda;
}

double mass(const Grid& grid, const QuadCache& qc, const NodalField& phi,
            const NodalField& rho_tilde, const MaterialModel& mat, double eps) {
    double m = 0.0;
    for (int e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        for (int g = 0; g < 4; ++g) {
            double phi_g = 0.0, rho_g = 0.0;
            for (int a = 0; a < 4; ++a) {
                phi_g += qc.N[g][a] * phi[nodes[a]];
                rho_g += qc.N[g][a] * rho_tilde[nodes[a]];
            }
            m += qc.w * mat.theta0 * rho_g * smoothed_heaviside(phi_g, eps);
        }
    }
    return m;
}

NodalGrad mass_gradient(const Grid& grid, const QuadCache& qc, const NodalField& phi,
                        const NodalField& rho_tilde, const MaterialModel& mat, double eps) {
    NodalGrad grad;
    grad.d_phi.setZero(grid.node_count());
    grad.d_rho.setZero(grid.node_count());
    for (int e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        for (int g = 0; g < 4; ++g) {
            double phi_g = 0.0, rho_g = 0.0;
            for (int a = 0; a < 4; ++a) {
                phi_g += qc.N[g][a] * phi[nodes[a]];
                rho_g += qc.N[g][a] * rho_tilde[nodes[a]];
            }
            const double H = smoothed_heaviside(phi_g, eps);
            const double dH = smoothed_heaviside_deriv(phi_g, eps);
            for (int a = 0; a < 4; ++a) {
                grad.d_phi[nodes[a]] += qc.w * mat.theta0 * rho_g * dH * qc.N[g][a];
                grad.d_rho[nodes[a]] += qc.w * mat.theta0 * H * qc.N[g][a];
            }
        }
    }
    return grad;
}

NodalGrad stiffness_product_gradient(const Grid& grid, const QuadCache& qc,
                                     const NodalField& phi, const NodalField& rho_tilde,
                                     const MaterialModel& mat, double eps,
                                     const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    NodalGrad grad;
    grad.d_phi.setZero(grid.node_count());
    grad.d_rho.setZero(grid.node_count());
    for (int e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        Eigen::Matrix<double, 8, 1> ue, ve;
        for (int a = 0; a < 4; ++a) {
            ue[2 * a] = u[dof_of(nodes[a], 0)];
            ue[2 * a + 1] = u[dof_of(nodes[a], 1)];
            ve[2 * a] = v[dof_of(nodes[a], 0)];
            ve[2 * a + 1] = v[dof_of(nodes[a], 1)];
        }
        for (int g = 0; g < 4; ++g) {
            double phi_g = 0.0, rho_g = 0.0;
            for (int a = 0; a < 4; ++a) {
                phi_g += qc.N[g][a] * phi[nodes[a]];
                rho_g += qc.N[g][a] * rho_tilde[nodes[a]];
            }
            const GaussMaterial gm = gauss_material(phi_g, rho_g, mat, eps);
            const double prod = ue.dot(qc.ke_unit[g] * ve);
            for (int a = 0; a < 4; ++a) {
                grad.d_phi[nodes[a]] += prod * gm.dE_dphi * qc.N[g][a];
                grad.d_rho[nodes[a]] += prod * gm.dE_drho * qc.N[g][a];
            }
        }
    }
    return grad;
}

SmoothedStress compute_smoothed_stress(const Grid& grid, const QuadCache& qc,
                                       const NodalField& phi, const NodalField& rho_tilde,
                                       const MaterialModel& mat, double eps,
                                       const Eigen::VectorXd& u) {
    SmoothedStress ss;
    const int n = grid.node_count();
    ss.num.setZero(n);
    ss.den.setZero(n);
    ss.sigma.assign(static_cast<std::size_t>(grid.element_count()), {});
    ss.vm.assign(static_cast<std::size_t>(grid.element_count()), {});
    ss.vm_element.assign(static_cast<std::size_t>(grid.element_count()), 0.0);

    for (int e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        Eigen::Matrix<double, 8, 1> ue;
        for (int a = 0; a < 4; ++a) {
            ue[2 * a] = u[dof_of(nodes[a], 0)];
            ue[2 * a + 1] = u[dof_of(nodes[a], 1)];
        }
        for (int g = 0; g < 4; ++g) {
            double phi_g = 0.0, rho_g = 0.0;
            for (int a = 0; a < 4; ++a) {
                phi_g += qc.N[g][a] * phi[nodes[a]];
                rho_g += qc.N[g][a] * rho_tilde[nodes[a]];
            }
            const GaussMaterial gm = gauss_material(phi_g, rho_g, mat, eps);
            const Eigen::Vector3d sig = gm.E * (qc.D_unit * (qc.B[g] * ue));
            const double s11 = sig[0], s22 = sig[1], s12 = sig[2];
            const double vm =
                std::sqrt(std::max(s11 * s11 - s11 * s22 + s22 * s22 + 3.0 * s12 * s12, 0.0));
            ss.sigma[static_cast<std::size_t>(e)][static_cast<std::size_t>(g)] = {s11, s22, s12};
            ss.vm[static_cast<std::size_t>(e)][static_cast<std::size_t>(g)] = vm;
            ss.vm_element[static_cast<std::size_t>(e)] += 0.25 * vm;
            for (int a = 0; a < 4; ++a) {
                ss.num[nodes[a]] += qc.w * qc.N[g][a] * gm.H * vm;
                ss.den[nodes[a]] += qc.w * qc.N[g][a] * gm.H;
            }
        }
    }
    ss.tau.setZero(n);
    for (int i = 0; i < n; ++i) {
        if (ss.den[i] > kTinyDen) ss.tau[i] = ss.num[i] / ss.den[i];
    }
    return ss;
}

namespace {

inline double overstress(double tau, double sigma_max, double xi_tau) {
    const double d = tau - sigma_max;
    if (d <= 0.0) return 0.0;
    return std::sqrt(d * d + xi_tau * xi_tau) - xi_tau;
}

inline double overstress_deriv(double tau, double sigma_max, double xi_tau) {
    const double d = tau - sigma_max;
    if (d <= 0.0) return 0.0;
    return d / std::sqrt(d * d + xi_tau * xi_tau);
}

}  // namespace

double stress_penalty(const Grid& grid, const QuadCache& qc, const NodalField& phi,
                      const NodalField& rho_tilde, const MaterialModel& mat, double eps,
                      const SmoothedStress& ss, double sigma_max, double xi_tau) {
    double p = 0.0;
    for (int e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        for (int g = 0; g < 4; ++g) {
            double phi_g = 0.0, tau_g = 0.0;
            for (int a = 0; a < 4; ++a) {
                phi_g += qc.N[g][a] * phi[nodes[a]];
                tau_g += qc.N[g][a] * ss.tau[nodes[a]];
            }
            p += qc.w * smoothed_heaviside(phi_g, eps) * overstress(tau_g, sigma_max, xi_tau);
        }
    }
    return p;
}

StressPenaltyParts stress_penalty_with_gradient(const Grid& grid, const QuadCache& qc,
                                                const NodalField& phi,
                                                const NodalField& rho_tilde,
                                                const MaterialModel& mat, double eps,
                                                const Eigen::VectorXd& u,
                                                const SmoothedStress& ss, double sigma_max,
                                                double xi_tau) {
    const int n = grid.node_count();
    StressPenaltyParts out;
    out.d_phi.setZero(n);
    out.d_rho.setZero(n);
    out.dPdu.setZero(2 * n);

    // Pass 1: penalty value, its sensitivity to the nodal smoothed stress, and
    // the direct material-indicator path.
    Eigen::VectorXd dP_dtau = Eigen::VectorXd::Zero(n);
    for (int e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        for (int g = 0; g < 4; ++g) {
            double phi_g = 0.0, tau_g = 0.0;
            for (int a = 0; a < 4; ++a) {
                phi_g += qc.N[g][a] * phi[nodes[a]];
                tau_g += qc.N[g][a] * ss.tau[nodes[a]];
            }
            const double H = smoothed_heaviside(phi_g, eps);
            const double dH = smoothed_heaviside_deriv(phi_g, eps);
            const double val = overstress(tau_g, sigma_max, xi_tau);
            const double dval = overstress_deriv(tau_g, sigma_max, xi_tau);
            out.value += qc.w * H * val;
            for (int a = 0; a < 4; ++a) {
                dP_dtau[nodes[a]] += qc.w * H * dval * qc.N[g][a];
                out.d_phi[nodes[a]] += qc.w * dH * qc.N[g][a] * val;
            }
        }
    }

    // Seeds through the lumped projection tau = num / den.
    Eigen::VectorXd seed_num = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd seed_den = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        if (ss.den[i] > kTinyDen) {
            seed_num[i] = dP_dtau[i] / ss.den[i];
            seed_den[i] = -dP_dtau[i] * ss.num[i] / (ss.den[i] * ss.den[i]);
        }
    }

    // Pass 2: projection integrand paths (material weighting, modulus, state).
    for (int e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        for (int g = 0; g < 4; ++g) {
            double phi_g = 0.0, rho_g = 0.0;
            for (int a = 0; a < 4; ++a) {
                phi_g += qc.N[g][a] * phi[nodes[a]];
                rho_g += qc.N[g][a] * rho_tilde[nodes[a]];
            }
            const GaussMaterial gm = gauss_material(phi_g, rho_g, mat, eps);
            const double vm = ss.vm[static_cast<std::size_t>(e)][static_cast<std::size_t>(g)];
            const auto& sig = ss.sigma[static_cast<std::size_t>(e)][static_cast<std::size_t>(g)];

            double r_vm = 0.0;   // dP / d(vm at this point)
            double sum_num = 0.0, sum_den = 0.0;
            for (int a = 0; a < 4; ++a) {
                r_vm += seed_num[nodes[a]] * qc.w * gm.H * qc.N[g][a];
                sum_num += seed_num[nodes[a]] * qc.N[g][a];
                sum_den += seed_den[nodes[a]] * qc.N[g][a];
            }
            const double h_path = (sum_num * vm + sum_den) * qc.w;
            for (int a = 0; a < 4; ++a) {
                out.d_phi[nodes[a]] += h_path * gm.dH * qc.N[g][a];
            }
            if (vm > kTinyDen && gm.E > 0.0) {
                // Stress scales linearly with the effective modulus.
                const double e_seed = r_vm * vm / gm.E;
                for (int a = 0; a < 4; ++a) {
                    out.d_phi[nodes[a]] += e_seed * gm.dE_dphi * qc.N[g][a];
                    out.d_rho[nodes[a]] += e_seed * gm.dE_drho * qc.N[g][a];
                }
                Eigen::Vector3d dvm;
                dvm << (2.0 * sig[0] - sig[1]), (2.0 * sig[1] - sig[0]), 6.0 * sig[2];
                dvm /= 2.0 * vm;
                const Eigen::Matrix<double, 1, 8> du =
                    r_vm * gm.E * (dvm.transpose() * qc.D_unit * qc.B[g]);
                for (int a = 0; a < 4; ++a) {
                    out.dPdu[dof_of(nodes[a], 0)] += du(0, 2 * a);
                    out.dPdu[dof_of(nodes[a], 1)] += du(0, 2 * a + 1);
                }
            }
        }
    }
    return out;
}

}  // namespace lstop
