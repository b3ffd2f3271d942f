#include "equin/set_metrics.hpp"

#include <limits>

#include "equin/error.hpp"

namespace equin {

namespace kernels {

double chamfer(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b,
               std::vector<std::size_t>* argmin) {
    if (a.empty() || b.empty()) throw ValidationError("chamfer: empty set");
    if (argmin) argmin->assign(a.size(), 0);
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double d = lie::frobenius_sq(a[i], b[j]);
            if (d < best) {
                best = d;
                best_j = j;
            }
        }
        total += best;
        if (argmin) (*argmin)[i] = best_j;
    }
    return total / static_cast<double>(a.size());
}

double chamfer_backward(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b,
                        double weight, std::vector<Eigen::MatrixXd>& grad_a,
                        std::vector<Eigen::MatrixXd>& grad_b) {
    std::vector<std::size_t> match;
    const double value = chamfer(a, b, &match);
    const double scale = 2.0 * weight / static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Eigen::MatrixXd diff = scale * (a[i] - b[match[i]]);
        grad_a[i] += diff;
        grad_b[match[i]] -= diff;
    }
    return value;
}

double dispersion(const std::vector<Eigen::MatrixXd>& a) {
    if (a.empty()) throw ValidationError("entropy_reg: empty set");
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) total += 2.0 * lie::frobenius_sq(a[i], a[j]);
    const double n = static_cast<double>(a.size());
    return total / (n * n);
}

double dispersion_backward(const std::vector<Eigen::MatrixXd>& a, double weight,
                           std::vector<Eigen::MatrixXd>& grad_a) {
    const double value = dispersion(a);
    const double n = static_cast<double>(a.size());
    // d/dA_i of sum_{k,l} |A_k - A_l|^2 = 4 sum_j (A_i - A_j) = 4 (n A_i - sum_j A_j)
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(a[0].rows(), a[0].cols());
    for (const auto& m : a) sum += m;
    const double scale = 4.0 * weight / (n * n);
    for (std::size_t i = 0; i < a.size(); ++i) grad_a[i] += scale * (n * a[i] - sum);
    return value;
}

}  // namespace kernels

namespace {

std::vector<Eigen::MatrixXd> matrices(const GroupSet& s) {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(s.size());
    for (const auto& e : s) out.push_back(e.matrix());
    return out;
}

}  // namespace

SetDistanceReport chamfer(const GroupSet& a, const GroupSet& b) {
    if (!(a.spec() == b.spec())) throw SpecMismatch("chamfer: spec mismatch");
    SetDistanceReport r;
    r.value = kernels::chamfer(matrices(a), matrices(b), &r.argmin_index);
    return r;
}

double entropy_reg(const GroupSet& a) { return kernels::dispersion(matrices(a)); }

ChamferGradient chamfer_gradient(const std::vector<AlgebraVector>& a_coords,
                                 const std::vector<AlgebraVector>& b_coords) {
    if (a_coords.empty() || b_coords.empty()) throw ValidationError("chamfer_gradient: empty set");
    const GroupSpec& spec = a_coords.front().spec;
    auto realize = [&](const std::vector<AlgebraVector>& coords) {
        std::vector<Eigen::MatrixXd> out;
        for (const auto& v : coords) {
            if (!(v.spec == spec)) throw SpecMismatch("chamfer_gradient: spec mismatch");
            out.push_back(lie::exp_matrix(spec, v.coords));
        }
        return out;
    };
    const auto a = realize(a_coords);
    const auto b = realize(b_coords);
    const int n = spec.matrix_dim();
    std::vector<Eigen::MatrixXd> ga(a.size(), Eigen::MatrixXd::Zero(n, n));
    std::vector<Eigen::MatrixXd> gb(b.size(), Eigen::MatrixXd::Zero(n, n));
    ChamferGradient out;
    out.value = kernels::chamfer_backward(a, b, 1.0, ga, gb);
    for (std::size_t i = 0; i < a.size(); ++i)
        out.grad_a.push_back(lie::exp_pullback(spec, a_coords[i].coords, a[i], ga[i]));
    for (std::size_t j = 0; j < b.size(); ++j)
        out.grad_b.push_back(lie::exp_pullback(spec, b_coords[j].coords, b[j], gb[j]));
    return out;
}

}  // namespace equin
