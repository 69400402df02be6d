#pragma once

#include "lstop/field.hpp"
#include "lstop/grid.hpp"

namespace lstop {

struct RegConfig {
    double w_phi1 = 1.0, w_phi2 = 1.0;    // value mismatch weights near / away from interface
    double w_gphi1 = 1.0, w_gphi2 = 1.0;  // gradient mismatch weights near / away
    double gamma = 36.8;                  // locality control of the blending exponential
    double phi_tilde_low = -1.25;         // truncation bounds of the target field
    double phi_tilde_up = 1.25;
    double phi_bnd = 2.5;                 // normalization scale, = phi_tilde_up - phi_tilde_low
};
void validate(const RegConfig& cfg);

/// Truncated signed-distance target built with the heat method: a screened
/// heat solve from the extracted isocontour, gradient normalization, and a
/// Poisson recovery with interface-band nodes anchored to their distance to
/// the polyline. Fields without a sign change fall back to the saturated
/// constant field.
NodalField build_target_field(const Grid& grid, const NodalField& phi, double t_heat,
                              const RegConfig& cfg);

double reg_penalty(const Grid& grid, const NodalField& phi, const NodalField& target,
                   const RegConfig& cfg);
Eigen::VectorXd reg_penalty_gradient(const Grid& grid, const NodalField& phi,
                                     const NodalField& target, const RegConfig& cfg);

}  // namespace lstop
