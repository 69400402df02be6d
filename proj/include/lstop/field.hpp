#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "lstop/grid.hpp"

namespace lstop {

/// One scalar value per grid node.
using NodalField = Eigen::VectorXd;

/// Nodal design variables with box bounds.
struct DesignVector {
    Eigen::VectorXd values;
    double lower = 0.0;
    double upper = 1.0;
};

/// Row-normalized hat-weight filter. W(i,j) > 0 iff |X_i - X_j| < radius,
/// every row sums to one.
struct FilterOperator {
    Eigen::SparseMatrix<double> weights;
    double radius = 0.0;
};

struct Segment2 {
    std::array<double, 2> a{0.0, 0.0};
    std::array<double, 2> b{0.0, 0.0};
    double length() const;
};

/// Zero-isocontour of a nodal field as element-wise line segments.
struct InterfacePolyline {
    std::vector<Segment2> segments;
    std::vector<int> elements;  // containing element per segment
    double total_length = 0.0;
};

FilterOperator build_filter(const Grid& grid, double r_f);

NodalField apply_filter(const FilterOperator& op, const Eigen::VectorXd& s);
Eigen::VectorXd apply_filter_transpose(const FilterOperator& op, const Eigen::VectorXd& g);

/// Bilinear interpolation of a nodal field at a point inside the grid.
double eval_field(const Grid& grid, const NodalField& f, const std::array<double, 2>& x);

/// C2 polynomial regularization of the unit step: 0 below -eps, 1 above +eps.
double smoothed_heaviside(double phi, double eps);
double smoothed_heaviside_deriv(double phi, double eps);
double smoothed_heaviside_deriv2(double phi, double eps);

/// Marching-squares extraction of the phi = 0 isocontour. Saddle cells are
/// disambiguated by the sign of the element-center bilinear value.
InterfacePolyline extract_interface(const Grid& grid, const NodalField& phi);

}  // namespace lstop
