#pragma once

#include <vector>

#include "equin/group.hpp"

namespace equin {

/// Asymmetric Chamfer distance together with the matching that attains it.
struct SetDistanceReport {
    double value = 0.0;
    /// For each element of A, the index in B of its nearest element.
    std::vector<std::size_t> argmin_index;
};

/// d(A, B) = 1/|A| sum_a min_b d_G(a, b). Ties go to the lowest index in B.
SetDistanceReport chamfer(const GroupSet& a, const GroupSet& b);

/// Mean pairwise dispersion 1/N^2 sum_ij d_G(A_i, A_j), without the lambda
/// weight.
double entropy_reg(const GroupSet& a);

/// Gradient of chamfer(exp(A), exp(B)) w.r.t. the Lie-algebra coordinates
/// of both sets, with the argmin matching held fixed.
struct ChamferGradient {
    double value = 0.0;
    std::vector<Eigen::VectorXd> grad_a;
    std::vector<Eigen::VectorXd> grad_b;
};

ChamferGradient chamfer_gradient(const std::vector<AlgebraVector>& a_coords,
                                 const std::vector<AlgebraVector>& b_coords);

// Matrix-level kernels used by the training losses. Each takes the matrix
// realizations and accumulates dLoss/dMatrix scaled by `weight` into the
// given gradient buffers (same length as the inputs).
namespace kernels {

/// Chamfer over raw matrices; returns the value and writes the matching.
double chamfer(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b,
               std::vector<std::size_t>* argmin = nullptr);

double chamfer_backward(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b,
                        double weight, std::vector<Eigen::MatrixXd>& grad_a,
                        std::vector<Eigen::MatrixXd>& grad_b);

double dispersion(const std::vector<Eigen::MatrixXd>& a);

double dispersion_backward(const std::vector<Eigen::MatrixXd>& a, double weight,
                           std::vector<Eigen::MatrixXd>& grad_a);

}  // namespace kernels

}  // namespace equin
