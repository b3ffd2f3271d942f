#include "equin/finite_subgroup.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "equin/error.hpp"

namespace equin {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSameElement = 1e-9;

bool matrix_less(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double x = a.data()[i];
        const double y = b.data()[i];
        if (std::abs(x - y) > 1e-9) return x < y;
    }
    return false;
}

bool contains(const std::vector<GroupElement>& set, const GroupElement& g) {
    return std::any_of(set.begin(), set.end(),
                       [&](const GroupElement& e) { return metric_dG(e, g) < kSameElement; });
}

}  // namespace

FiniteSubgroupSpec FiniteSubgroupSpec::cyclic(int nu) {
    FiniteSubgroupSpec s{SubgroupKind::Cyclic, nu, 1, GroupSpec::so2()};
    s.validate();
    return s;
}

FiniteSubgroupSpec FiniteSubgroupSpec::cyclic_product(int nu1, int nu2) {
    FiniteSubgroupSpec s{SubgroupKind::CyclicProduct, nu1, nu2, GroupSpec::torus(2)};
    s.validate();
    return s;
}

FiniteSubgroupSpec FiniteSubgroupSpec::tetrahedral() {
    return {SubgroupKind::Tetrahedral, 1, 1, GroupSpec::so3()};
}
FiniteSubgroupSpec FiniteSubgroupSpec::octahedral() {
    return {SubgroupKind::Octahedral, 1, 1, GroupSpec::so3()};
}
FiniteSubgroupSpec FiniteSubgroupSpec::icosahedral() {
    return {SubgroupKind::Icosahedral, 1, 1, GroupSpec::so3()};
}

std::string FiniteSubgroupSpec::tag() const {
    switch (kind) {
        case SubgroupKind::Cyclic: return "cyclic" + std::to_string(nu1);
        case SubgroupKind::CyclicProduct: return "cyclic" + std::to_string(nu1) + "x" + std::to_string(nu2);
        case SubgroupKind::Tetrahedral: return "tetrahedral";
        case SubgroupKind::Octahedral: return "octahedral";
        case SubgroupKind::Icosahedral: return "icosahedral";
    }
    return "?";
}

FiniteSubgroupSpec FiniteSubgroupSpec::from_tag(std::string_view tag) {
    if (tag == "tetrahedral") return tetrahedral();
    if (tag == "octahedral") return octahedral();
    if (tag == "icosahedral") return icosahedral();
    if (tag.substr(0, 6) == "cyclic") {
        const std::string rest(tag.substr(6));
        try {
            const auto x = rest.find('x');
            if (x == std::string::npos) {
                std::size_t used = 0;
                const int nu = std::stoi(rest, &used);
                if (used != rest.size()) throw ValidationError("bad cyclic tag");
                return cyclic(nu);
            }
            std::size_t used1 = 0;
            std::size_t used2 = 0;
            const int a = std::stoi(rest.substr(0, x), &used1);
            const int b = std::stoi(rest.substr(x + 1), &used2);
            if (used1 != x || used2 != rest.size() - x - 1) throw ValidationError("bad cyclic tag");
            return cyclic_product(a, b);
        } catch (const std::logic_error&) {
            // std::stoi failures
        }
    }
    throw ValidationError("unknown stabilizer tag '" + std::string(tag) + "'");
}

int FiniteSubgroupSpec::order() const {
    switch (kind) {
        case SubgroupKind::Cyclic: return nu1;
        case SubgroupKind::CyclicProduct: return nu1 * nu2;
        case SubgroupKind::Tetrahedral: return 12;
        case SubgroupKind::Octahedral: return 24;
        case SubgroupKind::Icosahedral: return 60;
    }
    return 0;
}

void FiniteSubgroupSpec::validate() const {
    switch (kind) {
        case SubgroupKind::Cyclic:
            if (nu1 < 1) throw ValidationError("cyclic subgroup order must be >= 1");
            if (!(ambient == GroupSpec::so2())) throw ValidationError("cyclic subgroup requires ambient so2");
            return;
        case SubgroupKind::CyclicProduct:
            if (nu1 < 1 || nu2 < 1) throw ValidationError("cyclic factor orders must be >= 1");
            if (!(ambient == GroupSpec::torus(2))) {
                throw ValidationError("cyclic product subgroup requires ambient torus2");
            }
            return;
        default:
            if (!(ambient == GroupSpec::so3())) throw ValidationError(tag() + " subgroup requires ambient so3");
    }
}

std::vector<GroupElement> close_under_composition(const std::vector<GroupElement>& generators) {
    if (generators.empty()) throw ValidationError("close_under_composition: no generators");
    std::vector<GroupElement> elements{identity(generators.front().spec())};
    for (const auto& g : generators)
        if (!contains(elements, g)) elements.push_back(g);
    bool grew = true;
    while (grew) {
        grew = false;
        const std::size_t n = elements.size();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                GroupElement p = compose(elements[i], elements[j]);
                if (!contains(elements, p)) {
                    elements.push_back(std::move(p));
                    grew = true;
                }
            }
        }
        if (elements.size() > 10000) throw NumericalError("close_under_composition: group is not finite");
    }
    return elements;
}

GroupSet enumerate_subgroup(const FiniteSubgroupSpec& sub) {
    sub.validate();
    std::vector<GroupElement> elements;
    switch (sub.kind) {
        case SubgroupKind::Cyclic:
            for (int k = 0; k < sub.nu1; ++k) elements.push_back(so2_rotation(kTwoPi * k / sub.nu1));
            break;
        case SubgroupKind::CyclicProduct:
            for (int a = 0; a < sub.nu1; ++a)
                for (int b = 0; b < sub.nu2; ++b)
                    elements.push_back(torus_element({kTwoPi * a / sub.nu1, kTwoPi * b / sub.nu2}));
            break;
        case SubgroupKind::Tetrahedral:
            elements = close_under_composition({so3_rotation(Eigen::Vector3d::UnitZ(), std::numbers::pi),
                                                so3_rotation(Eigen::Vector3d(1, 1, 1), kTwoPi / 3.0)});
            break;
        case SubgroupKind::Octahedral:
            elements = close_under_composition({so3_rotation(Eigen::Vector3d::UnitZ(), std::numbers::pi / 2.0),
                                                so3_rotation(Eigen::Vector3d(1, 1, 1), kTwoPi / 3.0)});
            break;
        case SubgroupKind::Icosahedral: {
            // Five-fold axis through the vertex (0, 1, phi) and three-fold axis
            // through the face centre (1, 1, 1) of the standard icosahedron.
            const double phi = std::numbers::phi;
            elements = close_under_composition({so3_rotation(Eigen::Vector3d(0, 1, phi), kTwoPi / 5.0),
                                                so3_rotation(Eigen::Vector3d(1, 1, 1), kTwoPi / 3.0)});
            break;
        }
    }
    std::sort(elements.begin(), elements.end(),
              [](const GroupElement& a, const GroupElement& b) { return matrix_less(a.matrix(), b.matrix()); });
    if (static_cast<int>(elements.size()) != sub.order()) {
        throw NumericalError("enumerate_subgroup: " + sub.tag() + " produced " + std::to_string(elements.size()) +
                             " elements");
    }
    return GroupSet(std::move(elements));
}

}  // namespace equin
