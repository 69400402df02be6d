#include <cmath>
#include <stdexcept>

#include "lstop/config.hpp"

namespace lstop {

namespace {

struct Fixture {
    BoundaryConditions bc;
    std::vector<std::uint8_t> frozen_nodes;
};

void freeze_patch(const Grid& grid, std::vector<std::uint8_t>& frozen, int i0, int i1, int j0,
                  int j1) {
    for (int j = j0; j < j1; ++j) {
        for (int i = i0; i < i1; ++i) {
            for (int n : grid.element_nodes(grid.element_index(i, j))) {
                frozen[static_cast<std::size_t>(n)] = 1;
            }
        }
    }
}

// Non-design bands keep their physical size under coarsening: two elements at
// the native resolution, at least one element otherwise.
int band_elements(const Grid& grid, double native_width) {
    return std::max(1, static_cast<int>(std::lround(native_width / grid.h())));
}

// Pressure fixture: traction over the whole top edge, clamped patch at the
// bottom-left corner, symmetry plane along the right edge. Solid bands shield
// the load and the support.
Fixture make_ex1(const Grid& grid) {
    Fixture fx;
    fx.frozen_nodes.assign(static_cast<std::size_t>(grid.node_count()), 0);
    const int nx = grid.nx(), ny = grid.ny();
    const int band = band_elements(grid, 1.0);
    for (int i = 0; i < nx; ++i) {
        fx.bc.tractions.push_back({grid.node_index(i, ny), grid.node_index(i + 1, ny), {0.0, -10.0}});
    }
    for (int i = 0; i <= band; ++i) {
        fx.bc.fixed.push_back({grid.node_index(i, 0), 0, 0.0});
        fx.bc.fixed.push_back({grid.node_index(i, 0), 1, 0.0});
    }
    for (int j = 0; j <= ny; ++j) {
        fx.bc.fixed.push_back({grid.node_index(nx, j), 0, 0.0});
    }
    freeze_patch(grid, fx.frozen_nodes, 0, nx, ny - band, ny);  // loaded band
    freeze_patch(grid, fx.frozen_nodes, 0, band, 0, band);      // support patch
    return fx;
}

// Half-beam fixture: symmetry plane at the right edge (beam midspan), load
// band at the top next to the symmetry plane, roller support at the
// bottom-left corner.
Fixture make_beam2d(const Grid& grid) {
    Fixture fx;
    fx.frozen_nodes.assign(static_cast<std::size_t>(grid.node_count()), 0);
    const int nx = grid.nx(), ny = grid.ny();
    const int band = band_elements(grid, 2.0);
    for (int i = nx - band; i < nx; ++i) {
        fx.bc.tractions.push_back({grid.node_index(i, ny), grid.node_index(i + 1, ny), {0.0, -10.0}});
    }
    for (int i = 0; i <= band; ++i) {
        fx.bc.fixed.push_back({grid.node_index(i, 0), 1, 0.0});
    }
    for (int j = 0; j <= ny; ++j) {
        fx.bc.fixed.push_back({grid.node_index(nx, j), 0, 0.0});
    }
    freeze_patch(grid, fx.frozen_nodes, nx - band, nx, ny - band, ny);  // loaded patch
    freeze_patch(grid, fx.frozen_nodes, 0, band, 0, band);              // support patch
    return fx;
}

}  // namespace

Problem build_problem(const RunConfig& input, std::vector<std::string>* warnings) {
    RunConfig cfg = resolve_config(input);
    validate_config(cfg, warnings);

    const bool sfc = cfg.mode == "sfc";

    Problem p{
        .grid = Grid(cfg.nx, cfg.ny, cfg.h),
        .qc = build_quad_cache(cfg.h, cfg.nu),
        .filter = FilterOperator{},
        .mat = MaterialModel{cfg.E0, cfg.E_void, cfg.nu, cfg.theta0, cfg.beta},
        .bc = {},
        .spec = {},
        .solver = cfg.solver == "cg" ? LinearSolverKind::Cg : LinearSolverKind::Direct,
        .initial_design = {},
        .lower = {},
        .upper = {},
    };
    validate(p.mat);
    p.filter = build_filter(p.grid, cfg.r_f);

    ProblemSpec& spec = p.spec;
    spec.mode = sfc ? CouplingMode::Sfc : CouplingMode::Tfc;
    spec.objective =
        cfg.problem == "ex1-stress" ? ObjectiveKind::MassMin : ObjectiveKind::Compliance;
    spec.w1 = cfg.w1;
    spec.w2_init = cfg.w2_init;
    spec.w2_term = cfg.w2;
    spec.w2_eta = cfg.w2_eta;
    spec.w2_final = cfg.w2_final;
    spec.w3 = cfg.w3;
    spec.w4 = sfc ? 0.0 : cfg.w4;
    spec.w_psi = spec.objective == ObjectiveKind::MassMin ? cfg.w_psi : 0.0;
    spec.w_ptau = cfg.w_ptau;
    spec.sigma_max = cfg.problem == "ex1-stress" ? cfg.sigma_max : 0.0;
    spec.xi_tau = cfg.xi_tau;
    spec.gamma_m = cfg.gamma_m;
    spec.d_st = cfg.d_st;
    spec.d_c = cfg.d_c;
    spec.d_max = cfg.d_max;

    spec.sh_sched = {cfg.rho_sh0, 1.0, cfg.eta_sh, cfg.d_st, cfg.d_c, ScheduleDirection::Increasing};
    spec.th_sched = {cfg.rho_th0, 0.0, cfg.eta_th, cfg.d_st, cfg.d_c, ScheduleDirection::Decreasing};
    validate(spec.sh_sched);
    validate(spec.th_sched);

    // Mode-consistent level-set bounds: the SFC map can only reach
    // phi_rt * (1 - phi_sh) from a unit design range.
    spec.phi_up = sfc ? cfg.phi_rt * (1.0 - cfg.phi_sh) : cfg.phi_up;
    spec.phi_low = sfc ? -cfg.phi_rt * cfg.phi_sh : -cfg.phi_up;

    spec.sfc = SfcConfig{cfg.phi_sh, cfg.phi_rt};
    validate(spec.sfc);
    spec.tfc = TfcConfig{cfg.phi_th, spec.phi_up, cfg.xi};
    validate(spec.tfc);

    spec.reg = RegConfig{cfg.w_phi1,    cfg.w_phi2,   cfg.w_gphi1,
                         cfg.w_gphi2,   cfg.gamma_reg, spec.phi_low,
                         spec.phi_up,   spec.phi_up - spec.phi_low};
    validate(spec.reg);
    spec.t_heat = cfg.h * cfg.h;
    spec.eps = cfg.h;

    const Fixture fx = cfg.problem == "beam2d" ? make_beam2d(p.grid) : make_ex1(p.grid);
    p.bc = fx.bc;

    const int n = p.grid.node_count();
    if (sfc) {
        p.initial_design.setConstant(n, cfg.phi_sh + (1.0 - cfg.phi_sh) * cfg.rho0);
        p.lower.setConstant(n, 0.0);
        p.upper.setConstant(n, 1.0);
        for (int i = 0; i < n; ++i) {
            if (fx.frozen_nodes[static_cast<std::size_t>(i)]) {
                p.initial_design[i] = p.lower[i] = p.upper[i] = 1.0;
            }
        }
    } else {
        p.initial_design.resize(2 * n);
        p.lower.resize(2 * n);
        p.upper.resize(2 * n);
        p.initial_design.head(n).setConstant(0.5 * spec.phi_up);
        p.lower.head(n).setConstant(spec.phi_low);
        p.upper.head(n).setConstant(spec.phi_up);
        p.initial_design.tail(n).setConstant(cfg.rho0);
        p.lower.tail(n).setConstant(0.0);
        p.upper.tail(n).setConstant(1.0);
        for (int i = 0; i < n; ++i) {
            if (fx.frozen_nodes[static_cast<std::size_t>(i)]) {
                p.initial_design[i] = p.lower[i] = p.upper[i] = spec.phi_up;
                p.initial_design[n + i] = p.lower[n + i] = p.upper[n + i] = 1.0;
            }
        }
    }
    return p;
}

}  // namespace lstop
