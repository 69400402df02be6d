#include "lstop/mma.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lstop {

MmaSolver::MmaSolver(int n_vars, int n_constraints, MmaOptions options)
    : n_(n_vars), m_(n_constraints), opt_(options) {
    if (n_vars < 1 || n_constraints < 0) {
        throw std::invalid_argument("MmaSolver: invalid problem size");
    }
}

Eigen::VectorXd MmaSolver::update(const Eigen::VectorXd& x, double z, const Eigen::VectorXd& dz,
                                  const Eigen::VectorXd& g, const Eigen::MatrixXd& dg,
                                  const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
    if (x.size() != n_ || dz.size() != n_ || lower.size() != n_ || upper.size() != n_ ||
        g.size() != m_ || dg.rows() != m_ || dg.cols() != n_) {
        throw std::invalid_argument("MmaSolver::update: dimension mismatch");
    }

    // Degenerate ranges (pinned variables) borrow the dominant range so the
    // asymptotes stay strictly separated.
    double max_range = 0.0;
    for (int i = 0; i < n_; ++i) max_range = std::max(max_range, upper[i] - lower[i]);
    if (max_range <= 0.0) max_range = 1.0;
    Eigen::VectorXd range(n_);
    for (int i = 0; i < n_; ++i) {
        range[i] = std::max(upper[i] - lower[i], 0.01 * max_range);
    }

    if (iter_ < 2) {
        if (iter_ == 0) {
            low_.resize(n_);
            upp_.resize(n_);
        }
        low_ = x - opt_.asy_init * range;
        upp_ = x + opt_.asy_init * range;
    } else {
        for (int i = 0; i < n_; ++i) {
            const double trend = (x[i] - xold1_[i]) * (xold1_[i] - xold2_[i]);
            const double gamma = trend < 0.0 ? opt_.asy_shrink : (trend > 0.0 ? opt_.asy_grow : 1.0);
            low_[i] = x[i] - gamma * (xold1_[i] - low_[i]);
            upp_[i] = x[i] + gamma * (upp_[i] - xold1_[i]);
        }
    }
    for (int i = 0; i < n_; ++i) {
        low_[i] = std::clamp(low_[i], x[i] - 10.0 * range[i], x[i] - 0.01 * range[i]);
        upp_[i] = std::clamp(upp_[i], x[i] + 0.01 * range[i], x[i] + 10.0 * range[i]);
    }

    // Inner box: bounds, asymptote margin, move limit.
    Eigen::VectorXd alpha(n_), beta(n_);
    for (int i = 0; i < n_; ++i) {
        alpha[i] = std::max({lower[i], low_[i] + 0.1 * (x[i] - low_[i]),
                             x[i] - opt_.move * (upper[i] - lower[i])});
        beta[i] = std::min({upper[i], upp_[i] - 0.1 * (upp_[i] - x[i]),
                            x[i] + opt_.move * (upper[i] - lower[i])});
        if (alpha[i] > beta[i]) alpha[i] = beta[i] = std::clamp(x[i], lower[i], upper[i]);
    }

    // Separable approximations around x.
    const double raa = 1e-5;
    Eigen::VectorXd p0(n_), q0(n_);
    Eigen::MatrixXd p(m_, n_), q(m_, n_);
    for (int i = 0; i < n_; ++i) {
        const double du = upp_[i] - x[i];
        const double dl = x[i] - low_[i];
        const double base = raa / range[i];
        p0[i] = du * du * (1.001 * std::max(dz[i], 0.0) + 0.001 * std::max(-dz[i], 0.0) + base);
        q0[i] = dl * dl * (1.001 * std::max(-dz[i], 0.0) + 0.001 * std::max(dz[i], 0.0) + base);
        for (int j = 0; j < m_; ++j) {
            p(j, i) = du * du *
                      (1.001 * std::max(dg(j, i), 0.0) + 0.001 * std::max(-dg(j, i), 0.0) + base);
            q(j, i) = dl * dl *
                      (1.001 * std::max(-dg(j, i), 0.0) + 0.001 * std::max(dg(j, i), 0.0) + base);
        }
    }
    Eigen::VectorXd r(m_);
    for (int j = 0; j < m_; ++j) {
        double s = 0.0;
        for (int i = 0; i < n_; ++i) {
            s += p(j, i) / (upp_[i] - x[i]) + q(j, i) / (x[i] - low_[i]);
        }
        r[j] = g[j] - s;
    }

    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m_);
    Eigen::VectorXd xn(n_);
    auto minimize_x = [&]() {
        for (int i = 0; i < n_; ++i) {
            double P = p0[i], Q = q0[i];
            for (int j = 0; j < m_; ++j) {
                P += lambda[j] * p(j, i);
                Q += lambda[j] * q(j, i);
            }
            const double sp = std::sqrt(P);
            const double sq = std::sqrt(Q);
            xn[i] = std::clamp((low_[i] * sp + upp_[i] * sq) / (sp + sq), alpha[i], beta[i]);
        }
    };
    auto constraint_residual = [&](int j) {
        double s = r[j];
        for (int i = 0; i < n_; ++i) {
            s += p(j, i) / (upp_[i] - xn[i]) + q(j, i) / (xn[i] - low_[i]);
        }
        return s;
    };

    minimize_x();
    bool converged = (m_ == 0);
    for (int sweep = 0; sweep < opt_.max_sweeps && !converged; ++sweep) {
        for (int j = 0; j < m_; ++j) {
            lambda[j] = 0.0;
            minimize_x();
            if (constraint_residual(j) <= 0.0) continue;  // inactive at this sweep
            double lo = 0.0, hi = opt_.constraint_penalty;
            lambda[j] = hi;
            minimize_x();
            if (constraint_residual(j) > 0.0) continue;  // capped by the slack penalty
            for (int b = 0; b < opt_.max_bisections; ++b) {
                lambda[j] = 0.5 * (lo + hi);
                minimize_x();
                (constraint_residual(j) > 0.0 ? lo : hi) = lambda[j];
            }
            lambda[j] = hi;
            minimize_x();
        }
        converged = true;
        for (int j = 0; j < m_; ++j) {
            const double res = constraint_residual(j);
            const bool ok = (lambda[j] <= 0.0 && res <= opt_.dual_tol) ||
                            (lambda[j] >= opt_.constraint_penalty) || std::abs(res) <= opt_.dual_tol;
            if (!ok) converged = false;
        }
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "MmaSolver: dual bisection did not converge; z=" << z << " lambda=[";
        for (int j = 0; j < m_; ++j) msg << lambda[j] << (j + 1 < m_ ? ", " : "");
        msg << "] g=[";
        for (int j = 0; j < m_; ++j) msg << g[j] << (j + 1 < m_ ? ", " : "");
        msg << "]";
        throw std::runtime_error(msg.str());
    }

    xold2_ = iter_ >= 1 ? xold1_ : x;
    xold1_ = x;
    ++iter_;

    for (int i = 0; i < n_; ++i) {
        if (!(low_[i] < xn[i] && xn[i] < upp_[i]) || xn[i] < lower[i] || xn[i] > upper[i]) {
            throw std::runtime_error("MmaSolver: iterate left the trust region");
        }
    }
    return xn;
}

}  // namespace lstop
