#pragma once

#include <Eigen/Core>

namespace lstop {

struct MmaOptions {
    double move = 0.1;          // move limit as a fraction of the bound range
    double asy_init = 0.5;      // initial asymptote distance as a fraction of the range
    double asy_shrink = 0.7;    // contraction on oscillation
    double asy_grow = 1.2;      // expansion on monotone progress
    double constraint_penalty = 1000.0;  // dual multiplier cap (slack-variable weight)
    int max_sweeps = 200;
    int max_bisections = 64;
    double dual_tol = 1e-9;
};

/// Method of moving asymptotes, outer iterations only. The separable convex
/// subproblem is solved in the dual by per-constraint bisection sweeps.
class MmaSolver {
public:
    MmaSolver(int n_vars, int n_constraints, MmaOptions options = {});

    /// One design update. dg is n_constraints x n_vars.
    Eigen::VectorXd update(const Eigen::VectorXd& x, double z, const Eigen::VectorXd& dz,
                           const Eigen::VectorXd& g, const Eigen::MatrixXd& dg,
                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

    const Eigen::VectorXd& asymptote_low() const { return low_; }
    const Eigen::VectorXd& asymptote_upp() const { return upp_; }
    int iteration() const { return iter_; }

private:
    int n_;
    int m_;
    MmaOptions opt_;
    int iter_ = 0;
    Eigen::VectorXd low_, upp_, xold1_, xold2_;
};

}  // namespace lstop
