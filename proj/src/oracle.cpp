#include "equin/oracle.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "equin/error.hpp"

namespace equin {

namespace {

std::string point_msg(const char* what, int a, int b) {
    return std::string(what) + " (" + std::to_string(a) + ", " + std::to_string(b) + ")";
}

}  // namespace

FiniteGroup::FiniteGroup(std::vector<std::vector<int>> table) : table_(std::move(table)) {
    const int n = order();
    if (n == 0) throw ValidationError("finite group: empty table");
    for (const auto& row : table_) {
        if (static_cast<int>(row.size()) != n) throw ValidationError("finite group: table is not square");
        for (int v : row)
            if (v < 0 || v >= n) throw ValidationError("finite group: entry out of range");
    }
    identity_ = -1;
    for (int e = 0; e < n && identity_ < 0; ++e) {
        bool ok = true;
        for (int a = 0; a < n && ok; ++a) ok = compose(e, a) == a && compose(a, e) == a;
        if (ok) identity_ = e;
    }
    if (identity_ < 0) throw ValidationError("finite group: no identity element");
    inverse_.assign(static_cast<std::size_t>(n), -1);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (compose(a, b) == identity_ && compose(b, a) == identity_) {
                inverse_[static_cast<std::size_t>(a)] = b;
                break;
            }
        }
        if (inverse_[static_cast<std::size_t>(a)] < 0)
            throw ValidationError("finite group: element " + std::to_string(a) + " has no inverse");
    }
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const int ab = compose(a, b);
            for (int c = 0; c < n; ++c)
                if (compose(ab, c) != compose(a, compose(b, c)))
                    throw ValidationError("finite group: associativity fails at " + std::to_string(a) + ", " +
                                          std::to_string(b) + ", " + std::to_string(c));
        }
}

FiniteGroup cyclic_group(int n) {
    if (n < 1) throw ValidationError("cyclic_group: order must be positive");
    std::vector<std::vector<int>> t(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n)));
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) t[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = (a + b) % n;
    return FiniteGroup(std::move(t));
}

FiniteGroup dihedral_group(int n) {
    if (n < 1) throw ValidationError("dihedral_group: n must be positive");
    // r^i s^j stored at i + n j; s r = r^-1 s.
    const int order = 2 * n;
    std::vector<std::vector<int>> t(static_cast<std::size_t>(order), std::vector<int>(static_cast<std::size_t>(order)));
    for (int a = 0; a < order; ++a)
        for (int b = 0; b < order; ++b) {
            const int i = a % n, j = a / n, k = b % n, l = b / n;
            const int rot = ((i + (j == 0 ? k : -k)) % n + n) % n;
            t[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = rot + n * ((j + l) % 2);
        }
    return FiniteGroup(std::move(t));
}

FiniteGroup symmetric_group(int k) {
    if (k < 1 || k > 5) throw ValidationError("symmetric_group: k must be in [1, 5]");
    std::vector<std::vector<int>> perms;
    std::vector<int> p(static_cast<std::size_t>(k));
    std::iota(p.begin(), p.end(), 0);
    do perms.push_back(p);
    while (std::next_permutation(p.begin(), p.end()));
    std::map<std::vector<int>, int> index;
    for (std::size_t i = 0; i < perms.size(); ++i) index[perms[i]] = static_cast<int>(i);
    const std::size_t n = perms.size();
    std::vector<std::vector<int>> t(n, std::vector<int>(n));
    std::vector<int> q(static_cast<std::size_t>(k));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t i = 0; i < q.size(); ++i) q[i] = perms[a][static_cast<std::size_t>(perms[b][i])];
            t[a][b] = index.at(q);
        }
    return FiniteGroup(std::move(t));
}

FiniteGroup direct_product(const FiniteGroup& a, const FiniteGroup& b) {
    const int na = a.order(), nb = b.order();
    const std::size_t n = static_cast<std::size_t>(na * nb);
    std::vector<std::vector<int>> t(n, std::vector<int>(n));
    for (int x = 0; x < na * nb; ++x)
        for (int y = 0; y < na * nb; ++y)
            t[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)] =
                a.compose(x / nb, y / nb) * nb + b.compose(x % nb, y % nb);
    return FiniteGroup(std::move(t));
}

std::vector<int> generated_subgroup(const FiniteGroup& group, const std::vector<int>& generators) {
    std::vector<char> in(static_cast<std::size_t>(group.order()), 0);
    std::vector<int> members{group.identity()};
    in[static_cast<std::size_t>(group.identity())] = 1;
    for (std::size_t i = 0; i < members.size(); ++i) {
        for (int g : generators) {
            if (g < 0 || g >= group.order()) throw ValidationError("generated_subgroup: generator out of range");
            const int c = group.compose(members[i], g);
            if (!in[static_cast<std::size_t>(c)]) {
                in[static_cast<std::size_t>(c)] = 1;
                members.push_back(c);
            }
        }
    }
    std::sort(members.begin(), members.end());
    return members;
}

FiniteAction::FiniteAction(FiniteGroup group, int points, std::vector<std::vector<int>> table)
    : group_(std::move(group)), points_(points), table_(std::move(table)) {
    if (points_ < 1) throw ValidationError("finite action: need at least one point");
    if (static_cast<int>(table_.size()) != group_.order())
        throw ValidationError("finite action: table needs one row per group element");
    for (const auto& row : table_) {
        if (static_cast<int>(row.size()) != points_) throw ValidationError("finite action: row length != points");
        for (int v : row)
            if (v < 0 || v >= points_) throw ValidationError("finite action: point out of range");
    }
    for (int x = 0; x < points_; ++x)
        if (act(group_.identity(), x) != x) throw ValidationError(point_msg("finite action: identity moves point", x, x));
    for (int g = 0; g < group_.order(); ++g)
        for (int h = 0; h < group_.order(); ++h) {
            const int gh = group_.compose(g, h);
            for (int x = 0; x < points_; ++x)
                if (act(gh, x) != act(g, act(h, x)))
                    throw ValidationError(point_msg("finite action: (gh).x != g.(h.x) for (g, h)", g, h));
        }
}

FiniteAction coset_action(const FiniteGroup& group, const std::vector<int>& subgroup) {
    const int n = group.order();
    std::vector<int> coset_of(static_cast<std::size_t>(n), -1);
    int cosets = 0;
    for (int a = 0; a < n; ++a) {
        if (coset_of[static_cast<std::size_t>(a)] >= 0) continue;
        for (int h : subgroup) coset_of[static_cast<std::size_t>(group.compose(a, h))] = cosets;
        ++cosets;
    }
    std::vector<int> representative(static_cast<std::size_t>(cosets), -1);
    for (int a = n - 1; a >= 0; --a) representative[static_cast<std::size_t>(coset_of[static_cast<std::size_t>(a)])] = a;
    std::vector<std::vector<int>> t(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(cosets)));
    for (int g = 0; g < n; ++g)
        for (int c = 0; c < cosets; ++c)
            t[static_cast<std::size_t>(g)][static_cast<std::size_t>(c)] = coset_of[static_cast<std::size_t>(
                group.compose(g, representative[static_cast<std::size_t>(c)]))];
    return FiniteAction(group, cosets, std::move(t));
}

FiniteAction disjoint_union(const std::vector<FiniteAction>& parts) {
    if (parts.empty()) throw ValidationError("disjoint_union: no parts");
    const FiniteGroup& group = parts.front().group();
    std::vector<std::vector<int>> t(static_cast<std::size_t>(group.order()));
    int offset = 0;
    for (const auto& p : parts) {
        if (p.group().table() != group.table()) throw ValidationError("disjoint_union: groups differ");
        for (int g = 0; g < group.order(); ++g)
            for (int x = 0; x < p.point_count(); ++x) t[static_cast<std::size_t>(g)].push_back(p.act(g, x) + offset);
        offset += p.point_count();
    }
    return FiniteAction(group, offset, std::move(t));
}

FiniteAction random_finite_action(RandomStream& rng) {
    FiniteGroup group = [&] {
        switch (rng.index(5)) {
            case 0: return cyclic_group(1 + static_cast<int>(rng.index(120)));
            case 1: return dihedral_group(1 + static_cast<int>(rng.index(60)));
            case 2: return symmetric_group(3 + static_cast<int>(rng.index(3)));
            case 3: {
                const int m = 2 + static_cast<int>(rng.index(5));  // D_m has order 2m <= 12
                return direct_product(cyclic_group(1 + static_cast<int>(rng.index(static_cast<std::size_t>(60 / m)))),
                                      dihedral_group(m));
            }
            default: return direct_product(cyclic_group(2 + static_cast<int>(rng.index(4))), symmetric_group(3));
        }
    }();
    std::vector<FiniteAction> parts;
    int total = 0;
    const int wanted = 1 + static_cast<int>(rng.index(3));
    for (int attempt = 0; attempt < 20 && static_cast<int>(parts.size()) < wanted; ++attempt) {
        std::vector<int> gens;
        const std::size_t count = rng.index(3);  // 0 gives the trivial subgroup
        for (std::size_t i = 0; i < count; ++i) gens.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(group.order()))));
        FiniteAction part = coset_action(group, generated_subgroup(group, gens));
        if (total + part.point_count() > 200) continue;
        total += part.point_count();
        parts.push_back(std::move(part));
    }
    if (parts.empty()) parts.push_back(coset_action(group, generated_subgroup(group, {0})));
    FiniteAction joined = disjoint_union(parts);

    std::vector<int> relabel(static_cast<std::size_t>(joined.point_count()));
    std::iota(relabel.begin(), relabel.end(), 0);
    std::shuffle(relabel.begin(), relabel.end(), rng.engine());
    std::vector<std::vector<int>> t(joined.table().size(), std::vector<int>(relabel.size()));
    for (std::size_t g = 0; g < t.size(); ++g)
        for (std::size_t x = 0; x < relabel.size(); ++x)
            t[g][static_cast<std::size_t>(relabel[x])] = relabel[static_cast<std::size_t>(joined.table()[g][x])];
    return FiniteAction(joined.group(), joined.point_count(), std::move(t));
}

std::vector<int> orbit_of(const FiniteAction& action, int x) {
    if (x < 0 || x >= action.point_count()) throw ValidationError("orbit_of: point out of range");
    std::vector<int> out;
    for (int g = 0; g < action.group().order(); ++g) out.push_back(action.act(g, x));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<int> stabilizer_of(const FiniteAction& action, int x) {
    if (x < 0 || x >= action.point_count()) throw ValidationError("stabilizer_of: point out of range");
    const FiniteGroup& group = action.group();
    std::vector<int> out;
    for (int g = 0; g < group.order(); ++g)
        if (action.act(g, x) == x) out.push_back(g);
    std::vector<char> in(static_cast<std::size_t>(group.order()), 0);
    for (int g : out) in[static_cast<std::size_t>(g)] = 1;
    for (int a : out) {
        if (!in[static_cast<std::size_t>(group.inverse(a))]) throw NumericalError("stabilizer_of: not closed under inverse");
        for (int b : out)
            if (!in[static_cast<std::size_t>(group.compose(a, b))]) throw NumericalError("stabilizer_of: not closed");
    }
    return out;
}

OrbitStabilizerReport check_orbit_stabilizer(const FiniteAction& action) {
    OrbitStabilizerReport report;
    const FiniteGroup& group = action.group();
    for (int x = 0; x < action.point_count(); ++x) {
        ++report.points_checked;
        const auto orbit = orbit_of(action, x);
        const auto stab = stabilizer_of(action, x);
        if (orbit.size() * stab.size() != static_cast<std::size_t>(group.order())) {
            report.violations.push_back("point " + std::to_string(x) + ": |orbit| * |stabilizer| != |G|");
        }
        // Left cosets gG_x as sorted member lists, each mapped to g . x.
        std::map<std::vector<int>, int> image;
        bool well_defined = true;
        for (int g = 0; g < group.order(); ++g) {
            std::vector<int> coset;
            for (int s : stab) coset.push_back(group.compose(g, s));
            std::sort(coset.begin(), coset.end());
            const int gx = action.act(g, x);
            auto [it, fresh] = image.emplace(std::move(coset), gx);
            if (!fresh && it->second != gx) well_defined = false;
        }
        if (!well_defined) report.violations.push_back("point " + std::to_string(x) + ": coset map not well defined");
        std::vector<int> targets;
        for (const auto& [coset, gx] : image) targets.push_back(gx);
        std::sort(targets.begin(), targets.end());
        if (std::adjacent_find(targets.begin(), targets.end()) != targets.end())
            report.violations.push_back("point " + std::to_string(x) + ": coset map not injective");
        if (targets != orbit) report.violations.push_back("point " + std::to_string(x) + ": coset map not onto the orbit");
    }
    report.passed = report.violations.empty();
    return report;
}

OrbitStabilizerReport check_stabilizer_conjugacy(const FiniteAction& action) {
    OrbitStabilizerReport report;
    const FiniteGroup& group = action.group();
    for (int x = 0; x < action.point_count(); ++x) {
        ++report.points_checked;
        const auto stab = stabilizer_of(action, x);
        for (int h = 0; h < group.order(); ++h) {
            std::vector<int> conj;
            for (int s : stab) conj.push_back(group.compose(group.compose(h, s), group.inverse(h)));
            std::sort(conj.begin(), conj.end());
            if (conj != stabilizer_of(action, action.act(h, x))) {
                report.violations.push_back(point_msg("stabilizer not conjugate at (point, h)", x, h));
            }
        }
    }
    report.passed = report.violations.empty();
    return report;
}

namespace {

class TokenReader {
public:
    explicit TokenReader(const std::string& text) {
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            std::istringstream words(line);
            std::string w;
            while (words >> w) tokens_.push_back(w);
        }
    }

    void expect(const std::string& word) {
        if (next() != word) throw FormatError("finite action text: expected '" + word + "'");
    }

    int integer() {
        const std::string w = next();
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(w, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != w.size() || w.empty()) throw FormatError("finite action text: expected an integer, got '" + w + "'");
        return v;
    }

    bool done() const { return pos_ == tokens_.size(); }

private:
    std::string next() {
        if (done()) throw FormatError("finite action text: unexpected end of input");
        return tokens_[pos_++];
    }
    std::vector<std::string> tokens_;
    std::size_t pos_ = 0;
};

std::vector<std::vector<int>> read_grid(TokenReader& in, int rows, int cols) {
    std::vector<std::vector<int>> g(static_cast<std::size_t>(rows), std::vector<int>(static_cast<std::size_t>(cols)));
    for (auto& row : g)
        for (int& v : row) v = in.integer();
    return g;
}

}  // namespace

FiniteAction parse_finite_action(const std::string& text) {
    TokenReader in(text);
    in.expect("group");
    const int n = in.integer();
    if (n < 1 || n > 100000) throw FormatError("finite action text: bad group order");
    auto table = read_grid(in, n, n);
    in.expect("points");
    const int m = in.integer();
    if (m < 1 || m > 1000000) throw FormatError("finite action text: bad point count");
    in.expect("action");
    auto action = read_grid(in, n, m);
    if (!in.done()) throw FormatError("finite action text: trailing tokens");
    return FiniteAction(FiniteGroup(std::move(table)), m, std::move(action));
}

std::string format_finite_action(const FiniteAction& action) {
    std::ostringstream out;
    auto grid = [&](const std::vector<std::vector<int>>& rows) {
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) out << (i ? " " : "") << row[i];
            out << '\n';
        }
    };
    out << "group " << action.group().order() << '\n';
    grid(action.group().table());
    out << "points " << action.point_count() << '\n' << "action\n";
    grid(action.table());
    return out.str();
}

CosetContainment check_coset_containment(const GroupSet& predicted, const GroupSet& stabilizer, double tol) {
    if (!(predicted.spec() == stabilizer.spec())) throw SpecMismatch("check_coset_containment: spec mismatch");
    CosetContainment best;
    best.max_error = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const Eigen::MatrixXd& h = predicted[i].matrix();
        double worst = 0.0;
        for (const auto& s : stabilizer) {
            const Eigen::MatrixXd hs = h * s.matrix();
            double nearest = std::numeric_limits<double>::infinity();
            for (const auto& p : predicted) nearest = std::min(nearest, lie::frobenius_sq(hs, p.matrix()));
            worst = std::max(worst, nearest);
            if (worst >= best.max_error) break;
        }
        if (worst < best.max_error) {
            best.max_error = worst;
            best.witness = i;
        }
    }
    best.contained = best.max_error < tol;
    if (!best.contained) best.witness.reset();
    return best;
}

}  // namespace equin
