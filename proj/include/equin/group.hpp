#pragma once

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <vector>

#include "equin/random.hpp"

namespace equin {

/// Atomic block of a matrix group realization.
enum class Factor { SO2, SO3 };

enum class GroupKind { SO2, SO3, Torus, Product };

/// Position of one atomic factor inside the block-diagonal realization
/// and inside the flat parameter / Lie-algebra vectors.
struct FactorLayout {
    Factor factor;
    int matrix_offset;
    int param_offset;
    int algebra_offset;
};

/// A compact matrix Lie group: SO(2), SO(3), a torus SO(2)^T or a product.
///
/// Every group is stored as its list of atomic factors, realized
/// block-diagonally in GL(n). Two specs compare equal when their factor
/// lists match, so `torus(2)` and `product({so2(), so2()})` are
/// interchangeable everywhere.
class GroupSpec {
public:
    static GroupSpec so2();
    static GroupSpec so3();
    static GroupSpec torus(int factors);
    static GroupSpec product(const std::vector<GroupSpec>& parts);

    /// Inverse of `tag()`: "so2", "so3", "torus3", "product(so2,so3)".
    static GroupSpec from_tag(std::string_view tag);

    GroupKind kind() const { return kind_; }
    const std::vector<FactorLayout>& layout() const { return layout_; }
    int factor_count() const { return static_cast<int>(layout_.size()); }
    int matrix_dim() const { return matrix_dim_; }
    int algebra_dim() const { return algebra_dim_; }
    int param_count() const { return param_count_; }

    /// True when every factor is SO(2), i.e. G = SO(2)^T.
    bool is_torus_like() const;
    std::string tag() const;

    friend bool operator==(const GroupSpec& a, const GroupSpec& b);

private:
    GroupSpec(GroupKind kind, std::vector<Factor> factors, std::vector<GroupSpec> parts);

    GroupKind kind_;
    std::vector<GroupSpec> parts_;  // only for Product, used by tag()
    std::vector<FactorLayout> layout_;
    int matrix_dim_ = 0;
    int algebra_dim_ = 0;
    int param_count_ = 0;
};

/// Lie-algebra coordinates: one angle per SO(2) factor, an axis-angle
/// vector per SO(3) factor.
struct AlgebraVector {
    GroupSpec spec;
    Eigen::VectorXd coords;

    AlgebraVector(GroupSpec s, Eigen::VectorXd c);
};

/// An element of a GroupSpec with canonical parameters and its matrix.
///
/// Parameters per factor: SO(2) angle in [0, 2pi); SO(3) unit axis
/// followed by an angle in [0, pi]. The matrix is always rebuilt from the
/// canonical parameters, so the two never drift apart.
class GroupElement {
public:
    /// Canonicalizes `params` (angle wrapping, axis normalization).
    GroupElement(GroupSpec spec, const Eigen::VectorXd& params);

    /// Recovers canonical parameters from a rotation matrix (no branch cut).
    static GroupElement from_matrix(GroupSpec spec, const Eigen::MatrixXd& matrix);

    const GroupSpec& spec() const { return spec_; }
    const Eigen::VectorXd& params() const { return params_; }
    const Eigen::MatrixXd& matrix() const { return matrix_; }

private:
    GroupElement(GroupSpec spec, Eigen::VectorXd params, Eigen::MatrixXd matrix)
        : spec_(std::move(spec)), params_(std::move(params)), matrix_(std::move(matrix)) {}

    GroupSpec spec_;
    Eigen::VectorXd params_;
    Eigen::MatrixXd matrix_;
};

/// An ordered, nonempty multiset of elements of one group.
class GroupSet {
public:
    explicit GroupSet(std::vector<GroupElement> elements);

    const GroupSpec& spec() const { return elements_.front().spec(); }
    std::size_t size() const { return elements_.size(); }
    const GroupElement& operator[](std::size_t i) const { return elements_[i]; }
    const std::vector<GroupElement>& elements() const { return elements_; }
    auto begin() const { return elements_.begin(); }
    auto end() const { return elements_.end(); }

private:
    std::vector<GroupElement> elements_;
};

// Convenience constructors.
GroupElement so2_rotation(double angle);
GroupElement so3_rotation(const Eigen::Vector3d& axis, double angle);
GroupElement torus_element(const std::vector<double>& angles);

GroupElement identity(const GroupSpec& spec);
GroupElement compose(const GroupElement& g, const GroupElement& h);
GroupElement inverse(const GroupElement& g);

/// Exponential map from Lie-algebra coordinates. Closed-form cosine/sine for
/// SO(2) blocks, Rodrigues' formula for SO(3) blocks.
GroupElement exp_map(const GroupSpec& spec, const AlgebraVector& v);

/// Inverse of exp_map on the principal branch. Throws BranchCutError for an
/// SO(3) block whose angle is within 1e-6 of pi.
AlgebraVector log_map(const GroupElement& g);

/// Squared Frobenius distance between the matrix realizations.
double metric_dG(const GroupElement& a, const GroupElement& b);

/// Haar-uniform sample: uniform angles for SO(2) blocks, normalized
/// Gaussian quaternion for SO(3) blocks.
GroupElement sample_haar(const GroupSpec& spec, RandomStream& rng);

/// Elementwise g * a_i, order preserved.
GroupSet left_translate(const GroupElement& g, const GroupSet& set);

// Raw matrix-level helpers shared by the losses and the encoder.
namespace lie {

Eigen::Matrix3d hat(const Eigen::Vector3d& w);
Eigen::Matrix2d so2_matrix(double angle);
Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w);

/// Right Jacobian of the SO(3) exponential: d exp(w + dw) = exp(w) hat(J_r dw).
Eigen::Matrix3d so3_right_jacobian(const Eigen::Vector3d& w);

/// Block-diagonal exp(coords) for `spec`.
Eigen::MatrixXd exp_matrix(const GroupSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& coords);

/// Pulls a gradient dL/dM (w.r.t. the matrix exp(coords)) back to dL/dcoords.
Eigen::VectorXd exp_pullback(const GroupSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& coords,
                             const Eigen::MatrixXd& matrix, const Eigen::MatrixXd& grad_matrix);

/// Squared Frobenius distance of two matrices of equal shape.
inline double frobenius_sq(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).squaredNorm();
}

}  // namespace lie

}  // namespace equin
