#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lstop/field.hpp"
#include "lstop/grid.hpp"

namespace lstop {

/// Single-field coupling: one abstract variable per node drives both the
/// level-set and the density field through linear maps.
struct SfcConfig {
    double phi_sh = 0.5;  // abstract-field threshold separating solid from void
    double phi_rt = 2.0;  // level-set scaling, length units (typically 4h)
};
void validate(const SfcConfig& cfg);

/// Two-field coupling penalty parameters.
struct TfcConfig {
    double phi_th = -0.625;  // deactivation threshold, strictly negative
    double phi_up = 1.25;    // level-set upper bound
    double xi = 0.5;         // smoothing parameter
};
void validate(const TfcConfig& cfg);

enum class ScheduleDirection { Decreasing, Increasing };

/// Staircase continuation: the value is updated every `step` iterations and
/// held constant in between; past `span` it sits at its terminal value.
struct ContinuationSchedule {
    double initial = 0.0;
    double terminal = 0.0;  // decreasing schedules terminate at 0
    double eta = 2.0;
    int step = 50;
    int span = 400;
    ScheduleDirection direction = ScheduleDirection::Increasing;
};
void validate(const ContinuationSchedule& s);

struct MaterialModel {
    double E0 = 2.0e3;
    double E_void = 2.0e-5;
    double nu = 0.4;
    double theta0 = 1.0;
    double beta = 2.0;
};
void validate(const MaterialModel& m);

NodalField sfc_phi(const NodalField& s_hat, const SfcConfig& cfg);

struct SfcDensity {
    NodalField rho;
    std::vector<std::uint8_t> active;  // 1 where phi >= 0; rho stored as 0 elsewhere
};
SfcDensity sfc_rho(const NodalField& s_hat, const SfcConfig& cfg, const NodalField& phi);

/// Pointwise coupling penalty in [0, 1]; zero for rho >= rho_th, otherwise a
/// smooth ramp in phi from 0 at phi_th to 1 at phi_up. The derivative with
/// respect to rho is identically zero on both sides of rho_th.
double tfc_penalty_point(double phi, double rho, double rho_th, const TfcConfig& cfg);
double tfc_penalty_dphi(double phi, double rho, double rho_th, const TfcConfig& cfg);

/// Volume integral of the bilinear interpolant of the nodal penalty,
/// normalized by the design-domain boundary length.
double coupling_penalty_integral(const Grid& grid, const NodalField& phi, const NodalField& rho,
                                 double rho_th, const TfcConfig& cfg);
Eigen::VectorXd coupling_penalty_gradient_phi(const Grid& grid, const NodalField& phi,
                                              const NodalField& rho, double rho_th,
                                              const TfcConfig& cfg);

double schedule_value(const ContinuationSchedule& sched, int d_it);

/// rho_tilde = rho_sh + (1 - rho_sh) * rho
NodalField shift_density(const NodalField& rho, double rho_sh);

/// SIMP power law: returns (E, theta) for a shifted density, without the void
/// floor (the floor is applied at integration points during assembly).
std::pair<double, double> simp_properties(double rho_tilde, const MaterialModel& mat);

}  // namespace lstop
