#pragma once

#include <string>
#include <vector>

#include "lstop/opt.hpp"

namespace lstop {

/// Flat run description parsed from the INI-style config grammar. Values of
/// -1 (and the positive phi_th placeholder) mean "derive the default from h,
/// mode and companion keys"; resolve_config() materializes them.
struct RunConfig {
    std::string mode = "tfc";      // sfc | tfc
    std::string problem = "ex1";   // ex1 | beam2d | ex1-stress
    std::string solver = "direct";  // direct | cg

    // [grid]
    int nx = 120, ny = 80;
    double h = 0.5;
    double r_f = -1.0;  // default 1.6 h

    // [material]
    double E0 = 2000.0;
    double E_void = -1.0;  // default 1e-8 E0
    double nu = 0.4;
    double theta0 = 1.0;
    double beta = 2.0;
    double rho0 = 0.4;

    // [schedules]
    int d_st = 50, d_c = 400, d_max = 500;
    double rho_sh0 = 0.0;
    double rho_th0 = -1.0;  // default 0.7 rho0
    double eta_sh = 2.0, eta_th = 2.0;

    // [coupling]
    double phi_sh = 0.5;
    double phi_rt = -1.0;  // default 4 h
    double phi_up = -1.0;  // default 2.5 h
    double phi_th = 1.0;   // default 0.25 * phi_low (sentinel: valid values are negative)
    double xi = 0.5;

    // [weights]
    double w1 = 0.93;
    double w2 = 0.01;
    double w2_init = -1.0;   // default w2 (constant weight)
    double w2_eta = 3.0;
    double w2_final = -1.0;  // default 10 w2
    double w3 = 0.05;
    double w4 = 0.01;
    double w_phi1 = 1.0, w_phi2 = 1.0, w_gphi1 = 1.0, w_gphi2 = 1.0;
    double gamma_reg = 36.8;

    // [constraints]
    double gamma_m = 0.40;
    double sigma_max = 0.0;  // 0 disables the stress constraint
    double xi_tau = 0.1;
    double w_ptau = 1.0;
    double w_psi = 0.0;

    // [output]
    std::string out_dir = "out";
    int stride = 25;

    bool operator==(const RunConfig&) const = default;
};

std::vector<std::string> preset_names();
RunConfig preset_config(const std::string& name);

/// Coarsens a preset: h grows by k, element counts and continuation spans
/// shrink by k (with floors so the fixtures stay well posed).
void apply_scale(RunConfig& cfg, int k);

/// Fills every derived default; idempotent.
RunConfig resolve_config(const RunConfig& cfg);

/// Validates a resolved config, naming the offending key. Appends clamp
/// warnings (e.g. rho_th0 >= rho0) when a warning sink is given.
void validate_config(RunConfig& resolved, std::vector<std::string>* warnings = nullptr);

RunConfig parse_config(const std::string& text, RunConfig base = {},
                       std::vector<std::string>* warnings = nullptr);
std::string serialize_config(const RunConfig& cfg);

Problem build_problem(const RunConfig& cfg, std::vector<std::string>* warnings = nullptr);

}  // namespace lstop
