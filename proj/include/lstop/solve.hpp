#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "lstop/couple.hpp"
#include "lstop/field.hpp"
#include "lstop/grid.hpp"
#include "lstop/quadrature.hpp"

namespace lstop {

struct BoundaryConditions {
    struct FixedDof {
        int node = 0;
        int axis = 0;  // 0 = x, 1 = y
        double value = 0.0;
    };
    // Boundary edge between two adjacent nodes carrying a constant traction
    // (force per unit length).
    struct TractionEdge {
        int node_a = 0;
        int node_b = 0;
        std::array<double, 2> traction{0.0, 0.0};
    };
    std::vector<FixedDof> fixed;
    std::vector<TractionEdge> tractions;
};

struct ComponentInfo {
    std::vector<int> labels;  // per element: component id for material, -1 for void
    int component_count = 0;
    std::vector<std::uint8_t> free_floating;  // per component
    int void_component_count = 0;
    int interior_void_count = 0;  // void components not touching the domain boundary
};

/// Material elements (center phi > 0) labeled by edge-adjacency flood fill.
/// With boundary conditions given, a component is flagged free-floating iff
/// none of its nodes carries a fixed DOF.
ComponentInfo connected_components(const Grid& grid, const NodalField& phi,
                                   const BoundaryConditions* bc = nullptr);

struct GaussMaterial {
    double H = 0.0;        // smoothed material indicator
    double dH = 0.0;       // its derivative w.r.t. phi
    double E = 0.0;        // effective modulus
    double dE_dphi = 0.0;  // dE / d(phi at the point)
    double dE_drho = 0.0;  // dE / d(rho_tilde at the point)
};
GaussMaterial gauss_material(double phi_g, double rho_t_g, const MaterialModel& mat, double eps);

/// Effective modulus at the four Gauss points of one element.
std::array<double, 4> element_stiffness_scale(const QuadCache& qc,
                                              const std::array<double, 4>& phi_nodes,
                                              const std::array<double, 4>& rho_t_nodes,
                                              const MaterialModel& mat, double eps);

enum class LinearSolverKind { Direct, Cg };

struct ElasticSolution {
    Eigen::VectorXd u;
    Eigen::VectorXd f;
    double strain_energy = 0.0;            // 0.5 * f . u
    double strain_energy_assembled = 0.0;  // element + spring energy sum
    double residual_norm = 0.0;            // relative residual of the reduced system
    ComponentInfo components;
};

/// Plane-stress system on the ersatz-material grid: assembled once, with
/// strong elimination of fixed DOFs and springs on free-floating components.
/// The factorization is reused for adjoint solves.
class FemSystem {
public:
    FemSystem(const Grid& grid, const QuadCache& qc, const NodalField& phi,
              const NodalField& rho_tilde, const MaterialModel& mat,
              const BoundaryConditions& bc, double eps, double gamma_s,
              LinearSolverKind kind = LinearSolverKind::Direct);

    ElasticSolution solve_primal() const;
    /// Solves K * lambda = rhs with homogeneous values at fixed DOFs.
    Eigen::VectorXd solve_adjoint(const Eigen::VectorXd& rhs_full) const;

    const ComponentInfo& components() const { return components_; }
    double spring_stiffness() const { return spring_k_; }
    const std::vector<std::uint8_t>& spring_nodes() const { return spring_nodes_; }

private:
    Eigen::VectorXd solve_reduced(const Eigen::VectorXd& rhs) const;

    const Grid* grid_;
    const QuadCache* qc_;
    NodalField phi_, rho_;
    MaterialModel mat_;
    double eps_;
    LinearSolverKind kind_;

    int ndof_ = 0;
    std::vector<int> free_of_;    // dof -> reduced index, -1 if fixed
    std::vector<int> free_dofs_;  // reduced index -> dof
    Eigen::VectorXd fixed_values_;
    Eigen::VectorXd f_full_;
    Eigen::SparseMatrix<double> K_red_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    ComponentInfo components_;
    std::vector<std::uint8_t> spring_nodes_;
    double spring_k_ = 0.0;
};

double mass(const Grid& grid, const QuadCache& qc, const NodalField& phi,
            const NodalField& rho_tilde, const MaterialModel& mat, double eps);

struct NodalGrad {
    Eigen::VectorXd d_phi;
    Eigen::VectorXd d_rho;  // w.r.t. the shifted density
};

NodalGrad mass_gradient(const Grid& grid, const QuadCache& qc, const NodalField& phi,
                        const NodalField& rho_tilde, const MaterialModel& mat, double eps);

/// d(u^T K v)/d(phi, rho_tilde); springs do not contribute.
NodalGrad stiffness_product_gradient(const Grid& grid, const QuadCache& qc,
                                     const NodalField& phi, const NodalField& rho_tilde,
                                     const MaterialModel& mat, double eps,
                                     const Eigen::VectorXd& u, const Eigen::VectorXd& v);

struct SmoothedStress {
    Eigen::VectorXd tau;  // nodal smoothed von Mises
    Eigen::VectorXd num, den;
    std::vector<std::array<std::array<double, 3>, 4>> sigma;  // [element][gauss][s11,s22,s12]
    std::vector<std::array<double, 4>> vm;                    // [element][gauss]
    std::vector<double> vm_element;                           // Gauss average per element
};

/// Von Mises at Gauss points with a material-weighted lumped projection to
/// nodes, so void regions do not pollute the material stress field.
SmoothedStress compute_smoothed_stress(const Grid& grid, const QuadCache& qc,
                                       const NodalField& phi, const NodalField& rho_tilde,
                                       const MaterialModel& mat, double eps,
                                       const Eigen::VectorXd& u);

struct StressPenaltyParts {
    double value = 0.0;
    Eigen::VectorXd d_phi;
    Eigen::VectorXd d_rho;
    Eigen::VectorXd dPdu;  // right-hand side for the adjoint solve
};

/// Overstress volume integral and its explicit derivatives. The state path is
/// returned as dPdu; the caller closes the chain with one adjoint solve and
/// stiffness_product_gradient.
StressPenaltyParts stress_penalty_with_gradient(const Grid& grid, const QuadCache& qc,
                                                const NodalField& phi,
                                                const NodalField& rho_tilde,
                                                const MaterialModel& mat, double eps,
                                                const Eigen::VectorXd& u,
                                                const SmoothedStress& ss, double sigma_max,
                                                double xi_tau);

double stress_penalty(const Grid& grid, const QuadCache& qc, const NodalField& phi,
                      const NodalField& rho_tilde, const MaterialModel& mat, double eps,
                      const SmoothedStress& ss, double sigma_max, double xi_tau);

}  // namespace lstop
