#include "lstop/opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace lstop {

double perimeter_exact(const Grid& grid, const NodalField& phi) {
    return extract_interface(grid, phi).total_length / grid.boundary_length();
}

double perimeter_smeared(const Grid& grid, const QuadCache& qc, const NodalField& phi,
                         double eps) {
    double p = 0.0;
    for (int e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        for (int g = 0; g < 4; ++g) {
            double phi_g = 0.0, gx = 0.0, gy = 0.0;
            for (int a = 0; a < 4; ++a) {
                phi_g += qc.N[g][a] * phi[nodes[a]];
                gx += qc.dN[g][a][0] * phi[nodes[a]];
                gy += qc.dN[g][a][1] * phi[nodes[a]];
            }
            p += qc.w * smoothed_heaviside_deriv(phi_g, eps) * std::hypot(gx, gy);
        }
    }
    return p / grid.boundary_length();
}

Eigen::VectorXd perimeter_smeared_gradient(const Grid& grid, const QuadCache& qc,
                                           const NodalField& phi, double eps) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(grid.node_count());
    const double scale = 1.0 / grid.boundary_length();
    for (int e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        for (int g = 0; g < 4; ++g) {
            double phi_g = 0.0, gx = 0.0, gy = 0.0;
            for (int a = 0; a < 4; ++a) {
                phi_g += qc.N[g][a] * phi[nodes[a]];
                gx += qc.dN[g][a][0] * phi[nodes[a]];
                gy += qc.dN[g][a][1] * phi[nodes[a]];
            }
            const double norm = std::hypot(gx, gy);
            const double delta = smoothed_heaviside_deriv(phi_g, eps);
            const double ddelta = smoothed_heaviside_deriv2(phi_g, eps);
            for (int a = 0; a < 4; ++a) {
                double term = ddelta * qc.N[g][a] * norm;
                if (norm > 1e-300) {
                    term += delta * (gx * qc.dN[g][a][0] + gy * qc.dN[g][a][1]) / norm;
                }
                grad[nodes[a]] += qc.w * scale * term;
            }
        }
    }
    return grad;
}

double effective_w2(const ProblemSpec& spec, int d_it) {
    if (d_it > spec.d_c) return spec.w2_final;
    ContinuationSchedule sched;
    sched.initial = spec.w2_init;
    sched.terminal = spec.w2_term;
    sched.eta = spec.w2_eta;
    sched.step = spec.d_st;
    sched.span = spec.d_c;
    sched.direction = ScheduleDirection::Increasing;
    return schedule_value(sched, d_it);
}

namespace {

struct MappedFields {
    NodalField phi, rho;
    std::vector<std::uint8_t> active;
};

MappedFields map_design(const Problem& p, const Eigen::VectorXd& s) {
    const int n = p.grid.node_count();
    MappedFields out;
    if (p.spec.mode == CouplingMode::Sfc) {
        if (s.size() != n) throw std::invalid_argument("evaluate: SFC design size mismatch");
        const NodalField s_hat = apply_filter(p.filter, s);
        out.phi = sfc_phi(s_hat, p.spec.sfc);
        SfcDensity d = sfc_rho(s_hat, p.spec.sfc, out.phi);
        out.rho = std::move(d.rho);
        out.active = std::move(d.active);
    } else {
        if (s.size() != 2 * n) throw std::invalid_argument("evaluate: TFC design size mismatch");
        out.phi = apply_filter(p.filter, s.head(n));
        out.rho = apply_filter(p.filter, s.tail(n));
        out.active.assign(static_cast<std::size_t>(n), 1);
    }
    return out;
}

}  // namespace

EvalResult evaluate(const Problem& problem, const Eigen::VectorXd& s, int d_it, double psi0,
                    const NodalField* frozen_target) {
    const ProblemSpec& spec = problem.spec;
    EvalResult ev;

    MappedFields mf = map_design(problem, s);
    ev.phi = std::move(mf.phi);
    ev.rho = std::move(mf.rho);
    ev.rho_active = std::move(mf.active);

    const double rho_sh = schedule_value(spec.sh_sched, d_it);
    const double rho_th = schedule_value(spec.th_sched, d_it);
    ev.rho_tilde = shift_density(ev.rho, rho_sh);

    ev.target = frozen_target != nullptr
                    ? *frozen_target
                    : build_target_field(problem.grid, ev.phi, spec.t_heat, spec.reg);

    ev.fem = std::make_shared<FemSystem>(problem.grid, problem.qc, ev.phi, ev.rho_tilde,
                                         problem.mat, problem.bc, spec.eps, spec.gamma_s,
                                         problem.solver);
    ev.sol = ev.fem->solve_primal();
    ev.stress = compute_smoothed_stress(problem.grid, problem.qc, ev.phi, ev.rho_tilde,
                                        problem.mat, spec.eps, ev.sol.u);

    const double psi = ev.sol.strain_energy;
    const double m = mass(problem.grid, problem.qc, ev.phi, ev.rho_tilde, problem.mat, spec.eps);
    const InterfacePolyline poly = extract_interface(problem.grid, ev.phi);

    ev.psi0 = psi0 > 0.0 ? psi0 : psi;

    ObjectiveBreakdown& bd = ev.bd;
    bd.iter = d_it;
    bd.rho_sh = rho_sh;
    bd.rho_th = rho_th;
    bd.psi = psi;
    bd.mass_value = m;
    bd.interface_length = poly.total_length;
    bd.p_per_exact = poly.total_length / problem.grid.boundary_length();
    bd.p_per = perimeter_smeared(problem.grid, problem.qc, ev.phi, spec.eps);
    bd.p_reg = reg_penalty(problem.grid, ev.phi, ev.target, spec.reg);
    bd.p_couple = (spec.mode == CouplingMode::Tfc && spec.w4 > 0.0)
                      ? coupling_penalty_integral(problem.grid, ev.phi, ev.rho, rho_th, spec.tfc)
                      : 0.0;
    bd.w2_eff = effective_w2(spec, d_it);

    const double mass_fraction = m / problem.grid.area();
    bd.F = spec.objective == ObjectiveKind::Compliance ? psi / ev.psi0 : mass_fraction;
    bd.psi_aux = spec.objective == ObjectiveKind::MassMin ? psi / ev.psi0 : 0.0;
    bd.g_mass = mass_fraction - spec.gamma_m;
    if (spec.sigma_max > 0.0) {
        bd.g_stress = spec.w_ptau * stress_penalty(problem.grid, problem.qc, ev.phi, ev.rho_tilde,
                                                   problem.mat, spec.eps, ev.stress,
                                                   spec.sigma_max, spec.xi_tau);
    }
    bd.z = spec.w1 * bd.F + bd.w2_eff * bd.p_per + spec.w3 * bd.p_reg + spec.w4 * bd.p_couple +
           spec.w_psi * bd.psi_aux;
    bd.void_components = ev.sol.components.interior_void_count;
    return ev;
}

namespace {

// Pull a (d_phi, d_rho_tilde, d_rho) nodal chain back to design space.
struct DesignChain {
    Eigen::VectorXd total;
    Eigen::VectorXd density_path;
};

DesignChain pull_back(const Problem& p, const EvalResult& ev, const Eigen::VectorXd& d_phi,
                      const Eigen::VectorXd& d_rho_tilde) {
    const int n = p.grid.node_count();
    const double rho_sh = ev.bd.rho_sh;
    Eigen::VectorXd d_rho = (1.0 - rho_sh) * d_rho_tilde;

    DesignChain out;
    if (p.spec.mode == CouplingMode::Sfc) {
        Eigen::VectorXd rho_part = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) {
            if (ev.rho_active[static_cast<std::size_t>(i)]) {
                rho_part[i] = d_rho[i] / (1.0 - p.spec.sfc.phi_sh);
            }
        }
        out.density_path = apply_filter_transpose(p.filter, rho_part);
        out.total =
            apply_filter_transpose(p.filter, (p.spec.sfc.phi_rt * d_phi + rho_part).eval());
    } else {
        out.total.resize(2 * n);
        out.total.head(n) = apply_filter_transpose(p.filter, d_phi);
        out.total.tail(n) = apply_filter_transpose(p.filter, d_rho);
        out.density_path = out.total.tail(n);
    }
    return out;
}

}  // namespace

SensitivityBundle adjoint_gradients(const Problem& problem, const Eigen::VectorXd& s,
                                    const EvalResult& ev) {
    const ProblemSpec& spec = problem.spec;
    const Grid& grid = problem.grid;
    const int n = grid.node_count();

    // Self-adjoint compliance path: dPsi = -1/2 u^T dK u.
    NodalGrad dpsi = stiffness_product_gradient(grid, problem.qc, ev.phi, ev.rho_tilde,
                                                problem.mat, spec.eps, ev.sol.u, ev.sol.u);
    dpsi.d_phi *= -0.5;
    dpsi.d_rho *= -0.5;

    const NodalGrad dmass =
        mass_gradient(grid, problem.qc, ev.phi, ev.rho_tilde, problem.mat, spec.eps);
    const Eigen::VectorXd dper =
        perimeter_smeared_gradient(grid, problem.qc, ev.phi, spec.eps);
    const Eigen::VectorXd dreg = reg_penalty_gradient(grid, ev.phi, ev.target, spec.reg);
    Eigen::VectorXd dcpl = Eigen::VectorXd::Zero(n);
    if (spec.mode == CouplingMode::Tfc && spec.w4 > 0.0) {
        dcpl = coupling_penalty_gradient_phi(grid, ev.phi, ev.rho, ev.bd.rho_th, spec.tfc);
    }

    NodalGrad dstress;
    dstress.d_phi.setZero(n);
    dstress.d_rho.setZero(n);
    if (spec.sigma_max > 0.0) {
        StressPenaltyParts parts =
            stress_penalty_with_gradient(grid, problem.qc, ev.phi, ev.rho_tilde, problem.mat,
                                         spec.eps, ev.sol.u, ev.stress, spec.sigma_max,
                                         spec.xi_tau);
        const Eigen::VectorXd lambda = ev.fem->solve_adjoint(parts.dPdu);
        const NodalGrad ku = stiffness_product_gradient(grid, problem.qc, ev.phi, ev.rho_tilde,
                                                        problem.mat, spec.eps, lambda, ev.sol.u);
        dstress.d_phi = parts.d_phi - ku.d_phi;
        dstress.d_rho = parts.d_rho - ku.d_rho;
    }

    const double area = grid.area();
    Eigen::VectorXd z_phi, z_rho;
    if (spec.objective == ObjectiveKind::Compliance) {
        z_phi = (spec.w1 / ev.psi0) * dpsi.d_phi;
        z_rho = (spec.w1 / ev.psi0) * dpsi.d_rho;
    } else {
        z_phi = (spec.w1 / area) * dmass.d_phi + (spec.w_psi / ev.psi0) * dpsi.d_phi;
        z_rho = (spec.w1 / area) * dmass.d_rho + (spec.w_psi / ev.psi0) * dpsi.d_rho;
    }
    z_phi += ev.bd.w2_eff * dper + spec.w3 * dreg + spec.w4 * dcpl;

    SensitivityBundle out;
    DesignChain zc = pull_back(problem, ev, z_phi, z_rho);
    out.dz = std::move(zc.total);
    out.density_path_norm_z = zc.density_path.norm();

    DesignChain gm = pull_back(problem, ev, (dmass.d_phi / area).eval(),
                               (dmass.d_rho / area).eval());
    out.dg.push_back(std::move(gm.total));
    if (spec.sigma_max > 0.0) {
        DesignChain gs = pull_back(problem, ev, (spec.w_ptau * dstress.d_phi).eval(),
                                   (spec.w_ptau * dstress.d_rho).eval());
        out.dg.push_back(std::move(gs.total));
    }
    return out;
}

double GradCheckReport::max_err() const {
    return std::max(max_err_z, std::max(max_err_mass, max_err_stress));
}

GradCheckReport gradient_check(const Problem& problem, const Eigen::VectorXd& s, int d_it,
                               double psi0, int n_vars, unsigned seed, double step_frac) {
    EvalResult base = evaluate(problem, s, d_it, psi0);
    const SensitivityBundle sens = adjoint_gradients(problem, s, base);
    const bool with_stress = problem.spec.sigma_max > 0.0;

    std::vector<int> candidates;
    for (int i = 0; i < problem.n_vars(); ++i) {
        if (problem.upper[i] > problem.lower[i]) candidates.push_back(i);
    }
    if (candidates.empty()) throw std::runtime_error("gradient_check: no free variables");
    std::mt19937 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);

    const int n_resp = with_stress ? 3 : 2;
    std::vector<std::vector<double>> ad(static_cast<std::size_t>(n_resp)),
        fd(static_cast<std::size_t>(n_resp));
    for (int k = 0; k < n_vars; ++k) {
        const int i = candidates[pick(rng)];
        const double step = step_frac * (problem.upper[i] - problem.lower[i]);
        Eigen::VectorXd sp = s, sm = s;
        sp[i] += step;
        sm[i] -= step;
        const EvalResult ep = evaluate(problem, sp, d_it, base.psi0, &base.target);
        const EvalResult em = evaluate(problem, sm, d_it, base.psi0, &base.target);
        ad[0].push_back(sens.dz[i]);
        fd[0].push_back((ep.bd.z - em.bd.z) / (2.0 * step));
        ad[1].push_back(sens.dg[0][i]);
        fd[1].push_back((ep.bd.g_mass - em.bd.g_mass) / (2.0 * step));
        if (with_stress) {
            ad[2].push_back(sens.dg[1][i]);
            fd[2].push_back((ep.bd.g_stress - em.bd.g_stress) / (2.0 * step));
        }
    }

    auto max_rel_err = [](const std::vector<double>& a, const std::vector<double>& f) {
        double scale = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            scale = std::max({scale, std::abs(a[k]), std::abs(f[k])});
        }
        const double floor = std::max(1e-3 * scale, 1e-300);
        double err = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            err = std::max(err, std::abs(a[k] - f[k]) /
                                    std::max({std::abs(a[k]), std::abs(f[k]), floor}));
        }
        return err;
    };

    GradCheckReport rep;
    rep.n_checked = n_vars;
    rep.max_err_z = max_rel_err(ad[0], fd[0]);
    rep.max_err_mass = max_rel_err(ad[1], fd[1]);
    if (with_stress) rep.max_err_stress = max_rel_err(ad[2], fd[2]);
    return rep;
}

RunResult run_optimization(const Problem& problem, const IterCallback& on_iteration) {
    const ProblemSpec& spec = problem.spec;
    const int m = spec.sigma_max > 0.0 ? 2 : 1;
    MmaSolver mma(problem.n_vars(), m);

    RunResult result;
    Eigen::VectorXd s = problem.initial_design;
    double psi0 = 0.0;
    double z_prev = std::numeric_limits<double>::quiet_NaN();

    for (int d_it = 0; d_it <= spec.d_max; ++d_it) {
        EvalResult ev = evaluate(problem, s, d_it, psi0);
        if (d_it == 0) psi0 = ev.psi0;
        result.history.iterations.push_back(ev.bd);
        result.history.density_grad_norm_z.push_back(std::numeric_limits<double>::quiet_NaN());
        if (on_iteration) on_iteration(d_it, ev, s);

        const bool converged = d_it > spec.d_c && std::isfinite(z_prev) &&
                               std::abs(ev.bd.z - z_prev) <= spec.conv_tol * std::abs(z_prev);
        z_prev = ev.bd.z;
        if (converged || d_it == spec.d_max) {
            result.history.converged = converged;
            result.design = s;
            result.final_eval = std::move(ev);
            break;
        }

        const SensitivityBundle sens = adjoint_gradients(problem, s, ev);
        result.history.density_grad_norm_z.back() = sens.density_path_norm_z;

        Eigen::VectorXd g(m);
        Eigen::MatrixXd dg(m, problem.n_vars());
        g[0] = ev.bd.g_mass - spec.slack;
        dg.row(0) = sens.dg[0].transpose();
        if (m == 2) {
            g[1] = ev.bd.g_stress - spec.slack;
            dg.row(1) = sens.dg[1].transpose();
        }
        s = mma.update(s, ev.bd.z, sens.dz, g, dg, problem.lower, problem.upper);
    }
    return result;
}

}  // namespace lstop
