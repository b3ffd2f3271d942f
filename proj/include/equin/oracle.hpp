#pragma once

#include <optional>
#include <string>
#include <vector>

#include "equin/group.hpp"
#include "equin/random.hpp"

namespace equin {

/// A finite group given by its Cayley table: table[a][b] = a * b.
/// The constructor checks closure, associativity, identity and inverses by
/// exhaustion and throws ValidationError on the first violation.
class FiniteGroup {
public:
    explicit FiniteGroup(std::vector<std::vector<int>> table);

    int order() const { return static_cast<int>(table_.size()); }
    int identity() const { return identity_; }
    int compose(int a, int b) const { return table_[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]; }
    int inverse(int a) const { return inverse_[static_cast<std::size_t>(a)]; }
    const std::vector<std::vector<int>>& table() const { return table_; }

private:
    std::vector<std::vector<int>> table_;
    std::vector<int> inverse_;
    int identity_ = 0;
};

FiniteGroup cyclic_group(int n);
/// Symmetries of the regular n-gon, order 2n.
FiniteGroup dihedral_group(int n);
/// Permutations of k letters (k <= 5).
FiniteGroup symmetric_group(int k);
FiniteGroup direct_product(const FiniteGroup& a, const FiniteGroup& b);

/// Smallest subgroup containing the generators, sorted.
std::vector<int> generated_subgroup(const FiniteGroup& group, const std::vector<int>& generators);

/// A finite group acting on points 0..m-1: table[g][x] = g . x.
/// The constructor verifies the identity and compatibility axioms by
/// exhaustion.
class FiniteAction {
public:
    FiniteAction(FiniteGroup group, int points, std::vector<std::vector<int>> table);

    const FiniteGroup& group() const { return group_; }
    int point_count() const { return points_; }
    int act(int g, int x) const { return table_[static_cast<std::size_t>(g)][static_cast<std::size_t>(x)]; }
    const std::vector<std::vector<int>>& table() const { return table_; }

private:
    FiniteGroup group_;
    int points_;
    std::vector<std::vector<int>> table_;
};

/// Left multiplication on the left cosets aH of `subgroup`; coset i is the
/// i-th distinct coset in order of its smallest element.
FiniteAction coset_action(const FiniteGroup& group, const std::vector<int>& subgroup);

/// Disjoint union of actions of the same group (points concatenated).
FiniteAction disjoint_union(const std::vector<FiniteAction>& parts);

/// Random group of order <= 120 acting on a disjoint union of coset spaces of
/// random subgroups (<= 200 points), with the point labels shuffled.
FiniteAction random_finite_action(RandomStream& rng);

/// Sorted orbit {g . x}.
std::vector<int> orbit_of(const FiniteAction& action, int x);
/// Sorted stabilizer {g : g . x = x}; throws if it fails to be a subgroup.
std::vector<int> stabilizer_of(const FiniteAction& action, int x);

struct OrbitStabilizerReport {
    bool passed = true;
    int points_checked = 0;
    std::vector<std::string> violations;
};

/// For every point: |orbit| * |stabilizer| = |G|, and gG_x -> g . x is a
/// well-defined bijection from the left cosets onto the orbit.
OrbitStabilizerReport check_orbit_stabilizer(const FiniteAction& action);

/// For every point x and group element h: stab(h . x) = h stab(x) h^-1.
OrbitStabilizerReport check_stabilizer_conjugacy(const FiniteAction& action);

/// Plain-text grid format:
///
///     group <n>
///     <n rows of n indices: row a, column b holds a*b>
///     points <m>
///     action
///     <n rows of m indices: row g, column x holds g.x>
///
/// Blank lines and text after '#' are ignored. Throws FormatError on
/// malformed input and ValidationError when the tables break the axioms.
FiniteAction parse_finite_action(const std::string& text);
std::string format_finite_action(const FiniteAction& action);

struct CosetContainment {
    bool contained = false;
    /// Index in `predicted` of the translating element h.
    std::optional<std::size_t> witness;
    /// For the best h: max over s in the stabilizer of min_p d_G(h s, p).
    double max_error = 0.0;
};

/// Whether some h in `predicted` has h . stabilizer covered by `predicted`
/// to within `tol` elementwise (one-sided Hausdorff, not a mean).
CosetContainment check_coset_containment(const GroupSet& predicted, const GroupSet& stabilizer, double tol);

}  // namespace equin
