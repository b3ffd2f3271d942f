#pragma once

#include <string>
#include <string_view>

#include "equin/group.hpp"

namespace equin {

enum class SubgroupKind { Cyclic, CyclicProduct, Tetrahedral, Octahedral, Icosahedral };

/// A finite subgroup of a compact group, used as a ground-truth stabilizer.
///
/// Cyclic(nu) lives in SO(2), CyclicProduct(nu1, nu2) in the 2-torus and
/// the three rotation groups of the Platonic solids in SO(3).
struct FiniteSubgroupSpec {
    SubgroupKind kind;
    int nu1 = 1;
    int nu2 = 1;
    GroupSpec ambient;

    static FiniteSubgroupSpec cyclic(int nu);
    static FiniteSubgroupSpec cyclic_product(int nu1, int nu2);
    static FiniteSubgroupSpec tetrahedral();
    static FiniteSubgroupSpec octahedral();
    static FiniteSubgroupSpec icosahedral();

    /// "cyclic4", "cyclic2x3", "tetrahedral", ...
    std::string tag() const;
    static FiniteSubgroupSpec from_tag(std::string_view tag);

    int order() const;
    void validate() const;

    friend bool operator==(const FiniteSubgroupSpec& a, const FiniteSubgroupSpec& b) {
        return a.kind == b.kind && a.nu1 == b.nu1 && a.nu2 == b.nu2 && a.ambient == b.ambient;
    }
};

/// All elements of the subgroup, closed under compose and inverse, in a
/// deterministic order (lexicographic in the matrix entries; for cyclic
/// groups this is not guaranteed to be angle order, only reproducible).
GroupSet enumerate_subgroup(const FiniteSubgroupSpec& sub);

/// Closure of a generating set under composition (fixed-point iteration).
/// Elements closer than 1e-9 in d_G are identified.
std::vector<GroupElement> close_under_composition(const std::vector<GroupElement>& generators);

}  // namespace equin
