#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "lstop/couple.hpp"
#include "lstop/field.hpp"
#include "lstop/grid.hpp"
#include "lstop/mma.hpp"
#include "lstop/quadrature.hpp"
#include "lstop/regularize.hpp"
#include "lstop/solve.hpp"

namespace lstop {

enum class CouplingMode { Sfc, Tfc };
enum class ObjectiveKind { Compliance, MassMin };

struct ProblemSpec {
    CouplingMode mode = CouplingMode::Tfc;
    ObjectiveKind objective = ObjectiveKind::Compliance;

    // Objective weights: z = w1*F + w2*P_per + w3*P_reg + w4*P_couple (+ w_psi*Psi/Psi0
    // when the quantity of interest is mass). w2 follows its own continuation and
    // jumps to w2_final once the continuation window closes.
    double w1 = 0.93, w3 = 0.05, w4 = 0.01;
    double w2_init = 0.01, w2_term = 0.01, w2_eta = 3.0, w2_final = 0.1;
    double w_psi = 0.0;
    double w_ptau = 0.0;
    double sigma_max = 0.0;  // <= 0 disables the stress constraint
    double xi_tau = 0.1;
    double gamma_m = 0.4;

    ContinuationSchedule sh_sched;  // density shift, increasing to 1
    ContinuationSchedule th_sched;  // density threshold, decreasing to 0
    int d_st = 50, d_c = 400, d_max = 500;
    double conv_tol = 1e-3;
    double slack = 1e-6;  // feasibility slack handed to the optimizer

    SfcConfig sfc;
    TfcConfig tfc;
    RegConfig reg;
    double t_heat = 0.25;
    double eps = 0.5;  // material-indicator half-width, one element length
    double gamma_s = 1e-6;
    double phi_low = -1.25, phi_up = 1.25;
};

/// A fully assembled fixture: mesh, filter, material, loads and the design
/// vector layout (N_s variables for SFC, 2 N_s for TFC, level-set block first).
struct Problem {
    Grid grid;
    QuadCache qc;
    FilterOperator filter;
    MaterialModel mat;
    BoundaryConditions bc;
    ProblemSpec spec;
    LinearSolverKind solver = LinearSolverKind::Direct;

    Eigen::VectorXd initial_design;
    Eigen::VectorXd lower, upper;  // per variable; pinned variables have lower == upper
    int n_vars() const { return static_cast<int>(initial_design.size()); }
};

struct ObjectiveBreakdown {
    int iter = 0;
    double z = 0.0;
    double F = 0.0;            // normalized quantity of interest
    double p_per = 0.0;        // smeared perimeter measure (enters z)
    double p_per_exact = 0.0;  // marching-squares perimeter (diagnostic)
    double p_reg = 0.0;
    double p_couple = 0.0;
    double psi_aux = 0.0;  // normalized strain energy when minimizing mass
    double g_mass = 0.0;
    double g_stress = 0.0;
    double rho_sh = 0.0, rho_th = 0.0;
    double w2_eff = 0.0;
    double psi = 0.0;
    double mass_value = 0.0;
    double interface_length = 0.0;
    int void_components = 0;  // interior void components (holes)
};

struct EvalResult {
    ObjectiveBreakdown bd;
    NodalField phi, rho, rho_tilde;
    std::vector<std::uint8_t> rho_active;
    NodalField target;
    ElasticSolution sol;
    SmoothedStress stress;
    std::shared_ptr<FemSystem> fem;
    double psi0 = 0.0;  // normalization actually used
};

double perimeter_exact(const Grid& grid, const NodalField& phi);
double perimeter_smeared(const Grid& grid, const QuadCache& qc, const NodalField& phi, double eps);
Eigen::VectorXd perimeter_smeared_gradient(const Grid& grid, const QuadCache& qc,
                                           const NodalField& phi, double eps);

double effective_w2(const ProblemSpec& spec, int d_it);

/// Full response pipeline at one design iterate. psi0 <= 0 self-normalizes
/// (iteration 0); frozen_target suppresses the target-field rebuild so
/// finite-difference probes see an iteration-constant regularization.
EvalResult evaluate(const Problem& problem, const Eigen::VectorXd& s, int d_it, double psi0 = 0.0,
                    const NodalField* frozen_target = nullptr);

struct SensitivityBundle {
    Eigen::VectorXd dz;
    std::vector<Eigen::VectorXd> dg;   // mass constraint, then stress when enabled
    double density_path_norm_z = 0.0;  // norm of the density-variable chain of dz
};
SensitivityBundle adjoint_gradients(const Problem& problem, const Eigen::VectorXd& s,
                                    const EvalResult& ev);

struct GradCheckReport {
    double max_err_z = 0.0;
    double max_err_mass = 0.0;
    double max_err_stress = 0.0;
    int n_checked = 0;
    double max_err() const;
};

/// Central finite differences against the adjoint on randomly chosen free
/// variables, with the regularization target and schedules frozen. Errors are
/// relative with a floor of 1e-3 times the gradient's max norm.
GradCheckReport gradient_check(const Problem& problem, const Eigen::VectorXd& s, int d_it,
                               double psi0, int n_vars, unsigned seed, double step_frac = 1e-5);

struct RunHistory {
    std::vector<ObjectiveBreakdown> iterations;
    std::vector<double> density_grad_norm_z;  // NaN where the adjoint did not run
    bool converged = false;
};

struct RunResult {
    RunHistory history;
    Eigen::VectorXd design;
    std::optional<EvalResult> final_eval;
};

using IterCallback = std::function<void(int, const EvalResult&, const Eigen::VectorXd&)>;

/// Outer optimization loop: evaluate, adjoint, MMA update, with continuation
/// schedules advanced by iteration index. Terminates once the continuation
/// window has closed and the objective change drops below conv_tol, or at
/// d_max.
RunResult run_optimization(const Problem& problem, const IterCallback& on_iteration = {});

}  // namespace lstop
