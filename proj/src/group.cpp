#include "equin/group.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

#include "equin/error.hpp"

namespace equin {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double angle) {
    double a = std::fmod(angle, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    if (a >= kTwoPi) a = 0.0;
    return a;
}

int matrix_size(Factor f) { return f == Factor::SO2 ? 2 : 3; }
int param_size(Factor f) { return f == Factor::SO2 ? 1 : 4; }
int algebra_size(Factor f) { return f == Factor::SO2 ? 1 : 3; }

void require_finite(const Eigen::VectorXd& v, const char* what) {
    if (!v.allFinite()) throw NumericalError(std::string(what) + ": non-finite input");
}

void require_same_spec(const GroupSpec& a, const GroupSpec& b, const char* what) {
    if (!(a == b)) {
        throw SpecMismatch(std::string(what) + ": spec mismatch (" + a.tag() + " vs " + b.tag() + ")");
    }
}

// Canonical (axis, angle) with angle in [0, pi]; at angle pi the first
// nonzero axis component is positive. Identity uses axis e_z.
void canonical_axis_angle(Eigen::Vector3d& axis, double& angle) {
    const double n = axis.norm();
    if (n < 1e-300 || angle == 0.0) {
        axis = Eigen::Vector3d::UnitZ();
        angle = 0.0;
        return;
    }
    axis /= n;
    if (angle < 0.0) {
        angle = -angle;
        axis = -axis;
    }
    angle = std::fmod(angle, kTwoPi);
    if (angle > std::numbers::pi) {
        angle = kTwoPi - angle;
        axis = -axis;
    }
    if (angle == 0.0) {
        axis = Eigen::Vector3d::UnitZ();
        return;
    }
    if (std::abs(angle - std::numbers::pi) < 1e-12) {
        angle = std::numbers::pi;
        for (int i = 0; i < 3; ++i) {
            if (std::abs(axis(i)) > 1e-12) {
                if (axis(i) < 0.0) axis = -axis;
                break;
            }
        }
    }
}

Eigen::Matrix3d axis_angle_matrix(const Eigen::Vector3d& axis, double angle) {
    const Eigen::Matrix3d k = lie::hat(axis);
    return Eigen::Matrix3d::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

// Robust matrix -> (axis, angle), valid over the whole of SO(3).
void matrix_axis_angle(const Eigen::Matrix3d& r, Eigen::Vector3d& axis, double& angle) {
    const Eigen::Vector3d w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    const double s = 0.5 * w.norm();
    const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
    angle = std::atan2(s, c);
    if (angle < 1e-300) {
        axis = Eigen::Vector3d::UnitZ();
        angle = 0.0;
        return;
    }
    if (angle < std::numbers::pi - 1e-3) {
        axis = w / (2.0 * s);
    } else {
        // Near pi the skew part vanishes; read the axis off the symmetric part.
        const Eigen::Matrix3d sym = 0.5 * (r + r.transpose()) - c * Eigen::Matrix3d::Identity();
        int col = 0;
        sym.diagonal().maxCoeff(&col);
        axis = sym.col(col).normalized();
        if (axis.dot(w) < 0.0) axis = -axis;
    }
    canonical_axis_angle(axis, angle);
}

Eigen::VectorXd canonical_params(const GroupSpec& spec, const Eigen::VectorXd& params) {
    if (params.size() != spec.param_count()) {
        throw ValidationError("GroupElement: expected " + std::to_string(spec.param_count()) +
                              " params for " + spec.tag() + ", got " + std::to_string(params.size()));
    }
    require_finite(params, "GroupElement");
    Eigen::VectorXd out = params;
    for (const auto& f : spec.layout()) {
        if (f.factor == Factor::SO2) {
            out(f.param_offset) = wrap_angle(params(f.param_offset));
        } else {
            Eigen::Vector3d axis = params.segment<3>(f.param_offset);
            double angle = params(f.param_offset + 3);
            canonical_axis_angle(axis, angle);
            out.segment<3>(f.param_offset) = axis;
            out(f.param_offset + 3) = angle;
        }
    }
    return out;
}

Eigen::MatrixXd params_matrix(const GroupSpec& spec, const Eigen::VectorXd& params) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(spec.matrix_dim(), spec.matrix_dim());
    for (const auto& f : spec.layout()) {
        if (f.factor == Factor::SO2) {
            m.block<2, 2>(f.matrix_offset, f.matrix_offset) = lie::so2_matrix(params(f.param_offset));
        } else {
            m.block<3, 3>(f.matrix_offset, f.matrix_offset) =
                axis_angle_matrix(params.segment<3>(f.param_offset), params(f.param_offset + 3));
        }
    }
    return m;
}

}  // namespace

// ---------------------------------------------------------------- GroupSpec

GroupSpec::GroupSpec(GroupKind kind, std::vector<Factor> factors, std::vector<GroupSpec> parts)
    : kind_(kind), parts_(std::move(parts)) {
    for (Factor f : factors) {
        layout_.push_back({f, matrix_dim_, param_count_, algebra_dim_});
        matrix_dim_ += matrix_size(f);
        param_count_ += param_size(f);
        algebra_dim_ += algebra_size(f);
    }
}

GroupSpec GroupSpec::so2() { return GroupSpec(GroupKind::SO2, {Factor::SO2}, {}); }
GroupSpec GroupSpec::so3() { return GroupSpec(GroupKind::SO3, {Factor::SO3}, {}); }

GroupSpec GroupSpec::torus(int factors) {
    if (factors < 1) throw ValidationError("torus: factor count must be positive");
    return GroupSpec(GroupKind::Torus, std::vector<Factor>(static_cast<std::size_t>(factors), Factor::SO2), {});
}

GroupSpec GroupSpec::product(const std::vector<GroupSpec>& parts) {
    if (parts.empty()) throw ValidationError("product: needs at least one factor");
    std::vector<Factor> factors;
    for (const auto& p : parts)
        for (const auto& l : p.layout()) factors.push_back(l.factor);
    return GroupSpec(GroupKind::Product, std::move(factors), parts);
}

bool GroupSpec::is_torus_like() const {
    for (const auto& l : layout_)
        if (l.factor != Factor::SO2) return false;
    return true;
}

std::string GroupSpec::tag() const {
    switch (kind_) {
        case GroupKind::SO2: return "so2";
        case GroupKind::SO3: return "so3";
        case GroupKind::Torus: return "torus" + std::to_string(layout_.size());
        case GroupKind::Product: {
            std::string s = "product(";
            for (std::size_t i = 0; i < parts_.size(); ++i) {
                if (i) s += ",";
                s += parts_[i].tag();
            }
            return s + ")";
        }
    }
    return "?";
}

namespace {

GroupSpec parse_tag(std::string_view& s) {
    auto consume = [&](std::string_view prefix) {
        if (s.substr(0, prefix.size()) == prefix) {
            s.remove_prefix(prefix.size());
            return true;
        }
        return false;
    };
    if (consume("so2")) return GroupSpec::so2();
    if (consume("so3")) return GroupSpec::so3();
    if (consume("torus")) {
        std::size_t n = 0;
        while (n < s.size() && std::isdigit(static_cast<unsigned char>(s[n]))) ++n;
        if (n == 0) throw ValidationError("group tag: torus without factor count");
        const int t = std::stoi(std::string(s.substr(0, n)));
        s.remove_prefix(n);
        return GroupSpec::torus(t);
    }
    if (consume("product(")) {
        std::vector<GroupSpec> parts;
        while (true) {
            parts.push_back(parse_tag(s));
            if (consume(",")) continue;
            if (consume(")")) break;
            throw ValidationError("group tag: malformed product");
        }
        return GroupSpec::product(parts);
    }
    throw ValidationError("group tag: unknown group '" + std::string(s) + "'");
}

}  // namespace

GroupSpec GroupSpec::from_tag(std::string_view tag) {
    std::string_view rest = tag;
    GroupSpec spec = parse_tag(rest);
    if (!rest.empty()) throw ValidationError("group tag: trailing characters in '" + std::string(tag) + "'");
    return spec;
}

bool operator==(const GroupSpec& a, const GroupSpec& b) {
    if (a.layout_.size() != b.layout_.size()) return false;
    for (std::size_t i = 0; i < a.layout_.size(); ++i)
        if (a.layout_[i].factor != b.layout_[i].factor) return false;
    return true;
}

// ------------------------------------------------------------ AlgebraVector

AlgebraVector::AlgebraVector(GroupSpec s, Eigen::VectorXd c) : spec(std::move(s)), coords(std::move(c)) {
    if (coords.size() != spec.algebra_dim()) {
        throw ValidationError("AlgebraVector: expected " + std::to_string(spec.algebra_dim()) +
                              " coordinates for " + spec.tag());
    }
}

// ------------------------------------------------------------- GroupElement

GroupElement::GroupElement(GroupSpec spec, const Eigen::VectorXd& params)
    : spec_(std::move(spec)), params_(canonical_params(spec_, params)),
      matrix_(params_matrix(spec_, params_)) {}

GroupElement GroupElement::from_matrix(GroupSpec spec, const Eigen::MatrixXd& matrix) {
    if (matrix.rows() != spec.matrix_dim() || matrix.cols() != spec.matrix_dim()) {
        throw ValidationError("from_matrix: wrong matrix shape for " + spec.tag());
    }
    if (!matrix.allFinite()) throw NumericalError("from_matrix: non-finite input");
    Eigen::VectorXd params(spec.param_count());
    for (const auto& f : spec.layout()) {
        if (f.factor == Factor::SO2) {
            const auto b = matrix.block<2, 2>(f.matrix_offset, f.matrix_offset);
            params(f.param_offset) = wrap_angle(std::atan2(b(1, 0) - b(0, 1), b(0, 0) + b(1, 1)));
        } else {
            Eigen::Vector3d axis;
            double angle = 0.0;
            matrix_axis_angle(matrix.block<3, 3>(f.matrix_offset, f.matrix_offset), axis, angle);
            params.segment<3>(f.param_offset) = axis;
            params(f.param_offset + 3) = angle;
        }
    }
    Eigen::MatrixXd m = params_matrix(spec, params);
    return GroupElement(std::move(spec), std::move(params), std::move(m));
}

GroupSet::GroupSet(std::vector<GroupElement> elements) : elements_(std::move(elements)) {
    if (elements_.empty()) throw ValidationError("GroupSet: must be nonempty");
    for (const auto& e : elements_) require_same_spec(elements_.front().spec(), e.spec(), "GroupSet");
}

GroupElement so2_rotation(double angle) {
    return GroupElement(GroupSpec::so2(), Eigen::VectorXd::Constant(1, angle));
}

GroupElement so3_rotation(const Eigen::Vector3d& axis, double angle) {
    Eigen::VectorXd p(4);
    p << axis, angle;
    return GroupElement(GroupSpec::so3(), p);
}

GroupElement torus_element(const std::vector<double>& angles) {
    return GroupElement(GroupSpec::torus(static_cast<int>(angles.size())),
                        Eigen::Map<const Eigen::VectorXd>(angles.data(), static_cast<Eigen::Index>(angles.size())));
}

GroupElement identity(const GroupSpec& spec) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(spec.param_count());
    return GroupElement(spec, p);
}

GroupElement compose(const GroupElement& g, const GroupElement& h) {
    require_same_spec(g.spec(), h.spec(), "compose");
    const GroupSpec& spec = g.spec();
    if (spec.is_torus_like()) {
        // Angle addition is exact up to one rounding per factor.
        return GroupElement(spec, g.params() + h.params());
    }
    return GroupElement::from_matrix(spec, g.matrix() * h.matrix());
}

GroupElement inverse(const GroupElement& g) {
    const GroupSpec& spec = g.spec();
    Eigen::VectorXd p = g.params();
    for (const auto& f : spec.layout()) {
        if (f.factor == Factor::SO2) {
            p(f.param_offset) = -p(f.param_offset);
        } else {
            p(f.param_offset + 3) = -p(f.param_offset + 3);
        }
    }
    return GroupElement(spec, p);
}

GroupElement exp_map(const GroupSpec& spec, const AlgebraVector& v) {
    if (!(v.spec == spec)) throw SpecMismatch("exp_map: algebra vector spec mismatch");
    require_finite(v.coords, "exp_map");
    return GroupElement::from_matrix(spec, lie::exp_matrix(spec, v.coords));
}

AlgebraVector log_map(const GroupElement& g) {
    const GroupSpec& spec = g.spec();
    Eigen::VectorXd coords(spec.algebra_dim());
    for (const auto& f : spec.layout()) {
        if (f.factor == Factor::SO2) {
            coords(f.algebra_offset) = g.params()(f.param_offset);
        } else {
            const double angle = g.params()(f.param_offset + 3);
            if (angle >= std::numbers::pi - 1e-6) {
                throw BranchCutError("log_map: SO(3) angle " + std::to_string(angle) + " is at the branch cut");
            }
            coords.segment<3>(f.algebra_offset) = angle * g.params().segment<3>(f.param_offset);
        }
    }
    return AlgebraVector(spec, coords);
}

double metric_dG(const GroupElement& a, const GroupElement& b) {
    require_same_spec(a.spec(), b.spec(), "metric_dG");
    return lie::frobenius_sq(a.matrix(), b.matrix());
}

GroupElement sample_haar(const GroupSpec& spec, RandomStream& rng) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(spec.matrix_dim(), spec.matrix_dim());
    Eigen::VectorXd params(spec.param_count());
    for (const auto& f : spec.layout()) {
        if (f.factor == Factor::SO2) {
            params(f.param_offset) = rng.uniform(0.0, kTwoPi);
        } else {
            Eigen::Vector4d q;
            do {
                for (int i = 0; i < 4; ++i) q(i) = rng.normal();
            } while (q.norm() < 1e-12);
            q.normalize();
            const Eigen::Quaterniond quat(q(0), q(1), q(2), q(3));
            Eigen::Vector3d axis;
            double angle = 0.0;
            matrix_axis_angle(quat.toRotationMatrix(), axis, angle);
            params.segment<3>(f.param_offset) = axis;
            params(f.param_offset + 3) = angle;
        }
    }
    return GroupElement(spec, params);
}

GroupSet left_translate(const GroupElement& g, const GroupSet& set) {
    std::vector<GroupElement> out;
    out.reserve(set.size());
    for (const auto& a : set) out.push_back(compose(g, a));
    return GroupSet(std::move(out));
}

// --------------------------------------------------------------------- lie

namespace lie {

Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
    Eigen::Matrix3d k;
    k << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
    return k;
}

Eigen::Matrix2d so2_matrix(double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    Eigen::Matrix2d m;
    m << c, -s, s, c;
    return m;
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w) {
    const double theta2 = w.squaredNorm();
    const double theta = std::sqrt(theta2);
    const Eigen::Matrix3d k = hat(w);
    double a = 0.0;
    double b = 0.0;
    if (theta < 1e-4) {
        a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / theta2;
    }
    return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

Eigen::Matrix3d so3_right_jacobian(const Eigen::Vector3d& w) {
    const double theta2 = w.squaredNorm();
    const double theta = std::sqrt(theta2);
    const Eigen::Matrix3d k = hat(w);
    double a = 0.0;
    double b = 0.0;
    if (theta < 1e-4) {
        a = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
        b = 1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0;
    } else {
        a = (1.0 - std::cos(theta)) / theta2;
        b = (theta - std::sin(theta)) / (theta2 * theta);
    }
    return Eigen::Matrix3d::Identity() - a * k + b * k * k;
}

Eigen::MatrixXd exp_matrix(const GroupSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& coords) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(spec.matrix_dim(), spec.matrix_dim());
    for (const auto& f : spec.layout()) {
        if (f.factor == Factor::SO2) {
            m.block<2, 2>(f.matrix_offset, f.matrix_offset) = so2_matrix(coords(f.algebra_offset));
        } else {
            m.block<3, 3>(f.matrix_offset, f.matrix_offset) =
                rodrigues(coords.segment<3>(f.algebra_offset));
        }
    }
    return m;
}

Eigen::VectorXd exp_pullback(const GroupSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& coords,
                             const Eigen::MatrixXd& matrix, const Eigen::MatrixXd& grad_matrix) {
    Eigen::VectorXd out(spec.algebra_dim());
    for (const auto& f : spec.layout()) {
        const int o = f.matrix_offset;
        if (f.factor == Factor::SO2) {
            // dR/dtheta = R * [[0,-1],[1,0]]
            const auto r = matrix.block<2, 2>(o, o);
            const auto gm = grad_matrix.block<2, 2>(o, o);
            out(f.algebra_offset) = gm(0, 0) * (-r(1, 0)) + gm(0, 1) * (-r(1, 1)) + gm(1, 0) * r(0, 0) +
                                    gm(1, 1) * r(0, 1);
        } else {
            // dL = <G, R hat(J_r dw)> = (J_r^T vee(R^T G - (R^T G)^T)) . dw
            const Eigen::Matrix3d m = matrix.block<3, 3>(o, o).transpose() * grad_matrix.block<3, 3>(o, o);
            const Eigen::Vector3d v(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
            out.segment<3>(f.algebra_offset) =
                so3_right_jacobian(coords.segment<3>(f.algebra_offset)).transpose() * v;
        }
    }
    return out;
}

}  // namespace lie

}  // namespace equin
