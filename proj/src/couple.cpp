#include "lstop/couple.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lstop {

void validate(const SfcConfig& cfg) {
    if (!(cfg.phi_sh > 0.0 && cfg.phi_sh < 1.0)) {
        throw std::invalid_argument("SfcConfig: phi_sh outside (0, 1)");
    }
    if (!(cfg.phi_rt > 0.0)) {
        throw std::invalid_argument("SfcConfig: phi_rt must be positive");
    }
}

void validate(const TfcConfig& cfg) {
    if (!(cfg.phi_th < 0.0)) {
        throw std::invalid_argument("TfcConfig: phi_th must be negative");
    }
    if (!(cfg.xi > 0.0)) {
        throw std::invalid_argument("TfcConfig: xi must be positive");
    }
    if (!(cfg.phi_up > cfg.phi_th)) {
        throw std::invalid_argument("TfcConfig: phi_up must exceed phi_th");
    }
}

void validate(const ContinuationSchedule& s) {
    if (s.step < 1 || s.step > s.span) {
        throw std::invalid_argument("ContinuationSchedule: need 0 < step <= span");
    }
    if (!(s.eta >= 1.0)) {
        throw std::invalid_argument("ContinuationSchedule: eta must be >= 1");
    }
}

void validate(const MaterialModel& m) {
    if (!(m.E0 > m.E_void && m.E_void > 0.0)) {
        throw std::invalid_argument("MaterialModel: need E0 > E_void > 0");
    }
    if (!(m.nu > 0.0 && m.nu < 0.5)) {
        throw std::invalid_argument("MaterialModel: nu outside (0, 0.5)");
    }
    if (!(m.beta >= 1.0)) {
        throw std::invalid_argument("MaterialModel: beta must be >= 1");
    }
}

NodalField sfc_phi(const NodalField& s_hat, const SfcConfig& cfg) {
    return cfg.phi_rt * (s_hat.array() - cfg.phi_sh).matrix();
}

SfcDensity sfc_rho(const NodalField& s_hat, const SfcConfig& cfg, const NodalField& phi) {
    if (s_hat.size() != phi.size()) {
        throw std::invalid_argument("sfc_rho: field size mismatch");
    }
    SfcDensity out;
    out.rho.setZero(s_hat.size());
    out.active.assign(static_cast<std::size_t>(s_hat.size()), 0);
    for (Eigen::Index i = 0; i < s_hat.size(); ++i) {
        if (phi[i] >= 0.0) {
            out.active[static_cast<std::size_t>(i)] = 1;
            out.rho[i] = (s_hat[i] - cfg.phi_sh) / (1.0 - cfg.phi_sh);
        }
    }
    return out;
}

double tfc_penalty_point(double phi, double rho, double rho_th, const TfcConfig& cfg) {
    if (rho >= rho_th) return 0.0;
    double t = (phi - cfg.phi_th) / (cfg.phi_up - cfg.phi_th);
    t = std::clamp(t, 0.0, 1.0);
    const double denom = std::sqrt(1.0 + cfg.xi * cfg.xi) - cfg.xi;
    return (std::sqrt(t * t + cfg.xi * cfg.xi) - cfg.xi) / denom;
}

double tfc_penalty_dphi(double phi, double rho, double rho_th, const TfcConfig& cfg) {
    if (rho >= rho_th) return 0.0;
    const double t = (phi - cfg.phi_th) / (cfg.phi_up - cfg.phi_th);
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double denom = std::sqrt(1.0 + cfg.xi * cfg.xi) - cfg.xi;
    return t / std::sqrt(t * t + cfg.xi * cfg.xi) / denom / (cfg.phi_up - cfg.phi_th);
}

namespace {

// sum_g N_a(x_g) = 1 for the symmetric 2x2 rule, so the element integral of
// the bilinear interpolant is (h^2/4) * sum of corner values.
constexpr double kNodalQuadWeight = 0.25;

}  // namespace

double coupling_penalty_integral(const Grid& grid, const NodalField& phi, const NodalField& rho,
                                 double rho_th, const TfcConfig& cfg) {
    if (phi.size() != grid.node_count() || rho.size() != grid.node_count()) {
        throw std::invalid_argument("coupling_penalty_integral: field size mismatch");
    }
    NodalField p(grid.node_count());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        p[i] = tfc_penalty_point(phi[i], rho[i], rho_th, cfg);
    }
    const double cell = grid.h() * grid.h() * kNodalQuadWeight;
    double integral = 0.0;
    for (int e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        integral += cell * (p[nodes[0]] + p[nodes[1]] + p[nodes[2]] + p[nodes[3]]);
    }
    return integral / grid.boundary_length();
}

Eigen::VectorXd coupling_penalty_gradient_phi(const Grid& grid, const NodalField& phi,
                                              const NodalField& rho, double rho_th,
                                              const TfcConfig& cfg) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(grid.node_count());
    const double cell = grid.h() * grid.h() * kNodalQuadWeight;
    for (int e = 0; e < grid.element_count(); ++e) {
        for (int n : grid.element_nodes(e)) {
            grad[n] += cell;
        }
    }
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
        grad[i] *= tfc_penalty_dphi(phi[i], rho[i], rho_th, cfg) / grid.boundary_length();
    }
    return grad;
}

double schedule_value(const ContinuationSchedule& sched, int d_it) {
    if (d_it < 0) throw std::invalid_argument("schedule_value: negative iteration");
    if (d_it > sched.span) {
        return sched.direction == ScheduleDirection::Decreasing ? 0.0 : sched.terminal;
    }
    const int held = (d_it / sched.step) * sched.step;
    const double r = static_cast<double>(held) / sched.span;
    const double v = std::pow(r, sched.eta);
    if (sched.direction == ScheduleDirection::Decreasing) {
        return sched.initial * (1.0 - v);
    }
    return sched.initial + (sched.terminal - sched.initial) * v;
}

NodalField shift_density(const NodalField& rho, double rho_sh) {
    return (rho_sh + (1.0 - rho_sh) * rho.array()).matrix();
}

std::pair<double, double> simp_properties(double rho_tilde, const MaterialModel& mat) {
    const double r = std::max(rho_tilde, 0.0);
    return {mat.E0 * std::pow(r, mat.beta), mat.theta0 * rho_tilde};
}

}  // namespace lstop
