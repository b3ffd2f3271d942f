#include "equin/evaluation.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "equin/error.hpp"
#include "equin/finite_subgroup.hpp"
#include "equin/oracle.hpp"
#include "equin/set_metrics.hpp"

namespace equin {

// ------------------------------------------------------------ representations

EncoderRepresentation::EncoderRepresentation(const Encoder& encoder, std::string tag)
    : encoder_(encoder), tag_(std::move(tag)) {}

Encoding EncoderRepresentation::encode(const Datapoint& point) const {
    const ForwardTape t = encoder_.forward(point.features);
    const GroupSpec& spec = encoder_.config().group;
    const int k = spec.algebra_dim();
    std::vector<GroupElement> heads;
    for (int i = 0; i < encoder_.config().heads; ++i)
        heads.push_back(exp_map(spec, AlgebraVector(spec, t.coords.col(0).segment(i * k, k))));
    return Encoding{GroupSet(std::move(heads)), t.orbit_unit.col(0)};
}

OracleRepresentation::OracleRepresentation(const DatasetSpec& spec) : group_(spec.group()) {
    for (const auto& o : spec.orbits) stabilizers_.push_back(enumerate_subgroup(o.stabilizer));
}

Encoding OracleRepresentation::encode(const Datapoint& point) const {
    const auto id = static_cast<std::size_t>(point.orbit_id);
    if (id >= stabilizers_.size()) throw ValidationError("oracle representation: unknown orbit id");
    Eigen::VectorXd orbit = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(stabilizers_.size()));
    orbit(static_cast<Eigen::Index>(id)) = 1.0;
    return Encoding{left_translate(point.pose, stabilizers_[id]), orbit};
}

ConstantRepresentation::ConstantRepresentation(GroupSpec group, int heads) : group_(std::move(group)), heads_(heads) {
    if (heads_ < 1) throw ValidationError("constant representation: heads must be positive");
}

Encoding ConstantRepresentation::encode(const Datapoint&) const {
    return Encoding{GroupSet(std::vector<GroupElement>(static_cast<std::size_t>(heads_), identity(group_))),
                    Eigen::VectorXd::Unit(3, 0)};
}

std::vector<Encoding> encode_view(const Representation& rep, const EvaluationView& view) {
    std::vector<Encoding> out;
    out.reserve(2 * view.size());
    for (std::size_t i = 0; i < view.size(); ++i) {
        out.push_back(rep.encode(view[i].x));
        out.push_back(rep.encode(view[i].y));
    }
    return out;
}

namespace {

std::vector<Eigen::MatrixXd> matrices(const GroupSet& s) {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(s.size());
    for (const auto& e : s) out.push_back(e.matrix());
    return out;
}

double orbit_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw SpecMismatch("latent distance: orbit dimensions differ");
    return -a.dot(b) / (a.norm() * b.norm());
}

void require_group(const Representation& rep, const EvaluationView& view) {
    if (!(rep.group() == view.spec().group()))
        throw SpecMismatch("evaluation: representation group " + rep.group().tag() + " does not match dataset group " +
                           view.spec().group().tag());
}

// Stabilizer subgroups indexed by orbit id.
std::vector<GroupSet> stabilizers(const DatasetSpec& spec) {
    std::vector<GroupSet> out;
    for (const auto& o : spec.orbits) out.push_back(enumerate_subgroup(o.stabilizer));
    return out;
}

}  // namespace

double latent_distance(const Encoding& a, const Encoding& b) {
    return chamfer(a.group, b.group).value + orbit_distance(a.orbit, b.orbit);
}

// ------------------------------------------------------------------- hit rate

void HitRateConfig::validate() const {
    if (batch_size < 2) throw ValidationError("hit_rate: batch_size must be >= 2");
    if (trials < 1) throw ValidationError("hit_rate: trials must be >= 1");
}

double hit_rate(const Representation& rep, const EvaluationView& view, const HitRateConfig& config) {
    config.validate();
    require_group(rep, view);
    if (view.size() < static_cast<std::size_t>(config.batch_size))
        throw ValidationError("hit_rate: test set smaller than the batch size");
    const auto enc = encode_view(rep, view);
    std::vector<std::vector<Eigen::MatrixXd>> mats;
    mats.reserve(enc.size());
    for (const auto& e : enc) mats.push_back(matrices(e.group));

    RandomStream rng = RandomStream(config.seed).fork(0x686974);
    const std::size_t pool = enc.size();
    std::size_t hits = 0, total = 0;
    std::vector<std::size_t> decoys(static_cast<std::size_t>(config.batch_size - 1));
    for (int trial = 0; trial < config.trials; ++trial) {
        for (std::size_t i = 0; i < view.size(); ++i) {
            const std::size_t positive = 2 * i + 1;
            for (auto& d : decoys) {
                d = rng.index(pool - 1);
                if (d >= positive) ++d;
            }
            const Eigen::MatrixXd& g = view[i].g.matrix();
            std::vector<Eigen::MatrixXd> moved;
            for (const auto& m : mats[2 * i]) moved.push_back(g * m);
            const Eigen::VectorXd& anchor = enc[2 * i].orbit;
            auto dist = [&](std::size_t j) {
                return kernels::chamfer(moved, mats[j]) + orbit_distance(anchor, enc[j].orbit);
            };
            const double target = dist(positive);
            bool hit = true;
            for (std::size_t d : decoys) {
                if (dist(d) <= target) {
                    hit = false;
                    break;
                }
            }
            hits += hit ? 1 : 0;
            ++total;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

// ------------------------------------------------------------------------ PCA

PcaProjection pca_project(const Eigen::MatrixXd& samples, int out_dim) {
    const Eigen::Index dim = samples.rows();
    if (out_dim < 1 || out_dim > dim) throw ValidationError("pca_project: out_dim must be in [1, sample dimension]");
    if (samples.cols() < out_dim) throw ValidationError("pca_project: fewer samples than output dimensions");
    PcaProjection p;
    p.mean = samples.rowwise().mean();
    const Eigen::MatrixXd centered = samples.colwise() - p.mean;
    const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(samples.cols());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericalError("pca_project: eigendecomposition failed");

    const double scale = std::max(1.0, cov.trace());
    std::vector<Eigen::VectorXd> basis;
    p.eigenvalues = Eigen::VectorXd::Zero(out_dim);
    for (Eigen::Index c = dim - 1; c >= 0 && static_cast<int>(basis.size()) < out_dim; --c) {
        const double lambda = eig.eigenvalues()(c);
        if (lambda <= 1e-12 * scale) break;
        p.eigenvalues(static_cast<Eigen::Index>(basis.size())) = lambda;
        basis.push_back(eig.eigenvectors().col(c));
    }
    if (static_cast<int>(basis.size()) < out_dim) {
        p.degenerate = true;
        for (Eigen::Index e = 0; e < dim && static_cast<int>(basis.size()) < out_dim; ++e) {
            Eigen::VectorXd v = Eigen::VectorXd::Unit(dim, e);
            for (const auto& b : basis) v -= b.dot(v) * b;
            if (v.norm() > 1e-6) basis.push_back(v.normalized());
        }
    }
    p.components.resize(out_dim, dim);
    for (int r = 0; r < out_dim; ++r) {
        Eigen::VectorXd v = basis[static_cast<std::size_t>(r)];
        for (Eigen::Index i = 0; i < dim; ++i) {
            if (std::abs(v(i)) > 1e-12) {
                if (v(i) < 0) v = -v;
                break;
            }
        }
        p.components.row(r) = v.transpose();
    }
    return p;
}

// -------------------------------------------------------------- disentanglement

namespace {

// Rotates each 2-row plane t of `z` by angle[t] (a 2T x N matrix).
Eigen::MatrixXd rotate_planes(const Eigen::MatrixXd& z, const std::vector<double>& angle) {
    Eigen::MatrixXd out = z;
    for (std::size_t t = 0; t < angle.size(); ++t) {
        const auto r = static_cast<Eigen::Index>(2 * t);
        out.middleRows(r, 2) = lie::so2_matrix(angle[t]) * z.middleRows(r, 2);
    }
    return out;
}

double point_chamfer(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < a.cols(); ++i)
        total += (b.colwise() - a.col(i)).colwise().squaredNorm().minCoeff();
    return total / static_cast<double>(a.cols());
}

// Back-transformation angles g^-1 for datapoint i under the fitted action.
std::vector<double> inverse_angles(const ProjectedOrbit& orbit, const LatentActionFit& fit, std::size_t i) {
    std::vector<double> a(fit.frequency.size());
    const Eigen::VectorXd& p = orbit.generators[i].params();
    for (std::size_t t = 0; t < a.size(); ++t)
        a[t] = -fit.orientation[t] * fit.frequency[t] * p(static_cast<Eigen::Index>(t));
    return a;
}

std::vector<std::pair<std::size_t, std::size_t>> draw_pairs(std::size_t n, int count, RandomStream& rng) {
    std::vector<std::pair<std::size_t, std::size_t>> out(static_cast<std::size_t>(count));
    for (auto& [i, j] : out) {
        i = rng.index(n);
        j = rng.index(n);
    }
    return out;
}

}  // namespace

LatentActionFit fit_latent_action(const ProjectedOrbit& orbit, int pairs, RandomStream& rng) {
    if (orbit.points.empty()) throw ValidationError("fit_latent_action: empty orbit");
    if (orbit.points.size() != orbit.generators.size())
        throw ValidationError("fit_latent_action: one generator per point required");
    if (pairs < 1) throw ValidationError("fit_latent_action: pairs must be positive");
    const auto planes = static_cast<std::size_t>(orbit.points.front().rows() / 2);
    if (static_cast<std::size_t>(orbit.generators.front().params().size()) != planes)
        throw SpecMismatch("fit_latent_action: one SO(2) angle per latent plane required");
    const auto sample = draw_pairs(orbit.points.size(), pairs, rng);

    LatentActionFit fit;
    fit.frequency.assign(planes, 1);
    fit.orientation.assign(planes, 1);
    fit.phase.assign(planes, 0.0);
    for (std::size_t t = 0; t < planes; ++t) {
        const auto r = static_cast<Eigen::Index>(2 * t);
        // points that do not move along the orbit leave k unidentifiable
        Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(2, orbit.points.front().cols());
        for (const auto& p : orbit.points) mean += p.middleRows(r, 2);
        mean /= static_cast<double>(orbit.points.size());
        double spread = 0.0;
        for (const auto& p : orbit.points) spread += (p.middleRows(r, 2) - mean).squaredNorm();
        if (spread <= 1e-12 * (1.0 + mean.squaredNorm()) * static_cast<double>(orbit.points.size()))
            fit.degenerate = true;
        double best = std::numeric_limits<double>::infinity();
        for (int k = 1; k <= 10; ++k) {
            for (int s : {1, -1}) {
                auto back = [&](std::size_t i) {
                    const double a = -s * k * orbit.generators[i].params()(static_cast<Eigen::Index>(t));
                    return Eigen::MatrixXd(lie::so2_matrix(a) * orbit.points[i].middleRows(r, 2));
                };
                double total = 0.0;
                for (const auto& [i, j] : sample) total += point_chamfer(back(j), back(i));
                if (total < best - 1e-12) {
                    best = total;
                    fit.frequency[t] = k;
                    fit.orientation[t] = s;
                }
            }
        }
    }
    fit.dispersion = latent_dispersion(orbit, fit, pairs, rng);
    return fit;
}

double latent_dispersion(const ProjectedOrbit& orbit, const LatentActionFit& fit, int pairs, RandomStream& rng) {
    if (orbit.points.empty()) throw ValidationError("latent_dispersion: empty orbit");
    std::vector<Eigen::MatrixXd> back;
    back.reserve(orbit.points.size());
    for (std::size_t i = 0; i < orbit.points.size(); ++i)
        back.push_back(rotate_planes(orbit.points[i], inverse_angles(orbit, fit, i)));
    double total = 0.0;
    for (const auto& [i, j] : draw_pairs(orbit.points.size(), pairs, rng)) total += point_chamfer(back[j], back[i]);
    return total / static_cast<double>(pairs);
}

DisentanglementReport disentanglement(const Representation& rep, const EvaluationView& view,
                                      const DisentanglementConfig& config) {
    require_group(rep, view);
    const GroupSpec& spec = rep.group();
    if (!spec.is_torus_like()) throw SpecMismatch("disentanglement: defined only for SO(2)^T, got " + spec.tag());
    const int planes = spec.factor_count();
    RandomStream root = RandomStream(config.seed).fork(0x646973);

    DisentanglementReport report;
    for (std::size_t o = 0; o < view.spec().orbits.size(); ++o) {
        std::vector<const Datapoint*> points;
        for (std::size_t i = 0; i < view.size(); ++i) {
            if (view[i].x.orbit_id != static_cast<int>(o)) continue;
            points.push_back(&view[i].x);
            points.push_back(&view[i].y);
        }
        if (points.empty()) continue;
        const GroupElement x0_inv = inverse(points.front()->pose);
        std::vector<GroupSet> heads;
        ProjectedOrbit orbit;
        for (const Datapoint* p : points) {
            heads.push_back(rep.encode(*p).group);
            orbit.generators.push_back(compose(p->pose, x0_inv));
        }
        const std::size_t n_heads = heads.front().size();
        for (const auto& h : heads)
            if (h.size() != n_heads) throw ValidationError("disentanglement: head count varies within an orbit");

        // Per-factor PCA of the flattened 2x2 blocks of every head.
        for (std::size_t i = 0; i < heads.size(); ++i) orbit.points.emplace_back(2 * planes, n_heads);
        bool degenerate = false;
        for (int t = 0; t < planes; ++t) {
            const int off = spec.layout()[static_cast<std::size_t>(t)].matrix_offset;
            Eigen::MatrixXd blocks(4, static_cast<Eigen::Index>(heads.size() * n_heads));
            Eigen::Index col = 0;
            for (const auto& h : heads)
                for (const auto& e : h) blocks.col(col++) = e.matrix().block(off, off, 2, 2).reshaped();
            const PcaProjection pca = pca_project(blocks, 2);
            degenerate = degenerate || pca.degenerate;
            col = 0;
            for (auto& z : orbit.points)
                for (std::size_t n = 0; n < n_heads; ++n)
                    z.block(2 * t, static_cast<Eigen::Index>(n), 2, 1) = pca.components * blocks.col(col++);
        }
        RandomStream fit_rng = root.fork(2 * o);
        LatentActionFit fit = fit_latent_action(orbit, config.fit_pairs, fit_rng);
        fit.degenerate = fit.degenerate || degenerate;
        RandomStream eval_rng = root.fork(2 * o + 1);
        fit.dispersion = latent_dispersion(orbit, fit, config.pairs, eval_rng);
        report.per_orbit.push_back(fit.dispersion);
        report.fits.push_back(std::move(fit));
    }
    if (report.per_orbit.empty()) throw ValidationError("disentanglement: no test datapoints");
    report.value = std::accumulate(report.per_orbit.begin(), report.per_orbit.end(), 0.0) /
                   static_cast<double>(report.per_orbit.size());
    return report;
}

double entropy_diagnostic(const Representation& rep, const EvaluationView& view) {
    require_group(rep, view);
    if (view.size() == 0) throw ValidationError("entropy_diagnostic: empty test set");
    double total = 0.0;
    for (std::size_t i = 0; i < view.size(); ++i)
        total += entropy_reg(rep.encode(view[i].x).group) + entropy_reg(rep.encode(view[i].y).group);
    return total / static_cast<double>(2 * view.size());
}

// ------------------------------------------------------------ head clustering

std::vector<std::vector<std::size_t>> cluster_heads(const GroupSet& heads, double threshold) {
    const std::size_t n = heads.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (metric_dG(heads[i], heads[j]) < threshold) {
                const std::size_t a = find(i), b = find(j);
                parent[std::max(a, b)] = std::min(a, b);
            }
    std::vector<std::vector<std::size_t>> clusters;
    std::vector<int> slot(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = find(i);
        if (slot[r] < 0) {
            slot[r] = static_cast<int>(clusters.size());
            clusters.emplace_back();
        }
        clusters[static_cast<std::size_t>(slot[r])].push_back(i);
    }
    return clusters;
}

GroupElement project_to_group(const GroupSpec& spec, const Eigen::MatrixXd& matrix) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(spec.matrix_dim(), spec.matrix_dim());
    for (const auto& f : spec.layout()) {
        const int d = f.factor == Factor::SO2 ? 2 : 3;
        const Eigen::MatrixXd block = matrix.block(f.matrix_offset, f.matrix_offset, d, d);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(block, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::MatrixXd fix = Eigen::MatrixXd::Identity(d, d);
        fix(d - 1, d - 1) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
        out.block(f.matrix_offset, f.matrix_offset, d, d) = svd.matrixU() * fix * svd.matrixV().transpose();
    }
    return GroupElement::from_matrix(spec, out);
}

GroupSet cluster_centroids(const GroupSet& heads, const std::vector<std::vector<std::size_t>>& clusters) {
    std::vector<GroupElement> out;
    for (const auto& c : clusters) {
        Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(heads.spec().matrix_dim(), heads.spec().matrix_dim());
        for (std::size_t i : c) mean += heads[i].matrix();
        out.push_back(project_to_group(heads.spec(), mean / static_cast<double>(c.size())));
    }
    return GroupSet(std::move(out));
}

bool recovers_stabilizer(const GroupSet& heads, const GroupSet& stabilizer) {
    const auto clusters = cluster_heads(heads);
    if (clusters.size() != stabilizer.size()) return false;
    const GroupSet centroids = cluster_centroids(heads, clusters);
    const GroupSet coset = left_translate(centroids[0], stabilizer);
    return std::max(chamfer(centroids, coset).value, chamfer(coset, centroids).value) < kClusterThreshold;
}

double cluster_count_fraction(const Representation& rep, const EvaluationView& view, int count) {
    require_group(rep, view);
    if (view.size() == 0) throw ValidationError("cluster_count_fraction: empty test set");
    std::size_t ok = 0;
    for (std::size_t i = 0; i < view.size(); ++i)
        ok += cluster_heads(rep.encode(view[i].x).group).size() == static_cast<std::size_t>(count) ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(view.size());
}

double stabilizer_recovery(const Representation& rep, const EvaluationView& view) {
    require_group(rep, view);
    if (view.size() == 0) throw ValidationError("stabilizer_recovery: empty test set");
    const auto stabs = stabilizers(view.spec());
    std::size_t ok = 0;
    for (std::size_t i = 0; i < view.size(); ++i) {
        const Datapoint& x = view[i].x;
        ok += recovers_stabilizer(rep.encode(x).group, stabs[static_cast<std::size_t>(x.orbit_id)]) ? 1 : 0;
    }
    return static_cast<double>(ok) / static_cast<double>(view.size());
}

double coset_containment_rate(const Representation& rep, const EvaluationView& view, double tol) {
    require_group(rep, view);
    if (view.size() == 0) throw ValidationError("coset_containment_rate: empty test set");
    const auto stabs = stabilizers(view.spec());
    std::size_t ok = 0;
    for (std::size_t i = 0; i < view.size(); ++i) {
        const Datapoint& x = view[i].x;
        ok += check_coset_containment(rep.encode(x).group, stabs[static_cast<std::size_t>(x.orbit_id)], tol).contained
                  ? 1
                  : 0;
    }
    return static_cast<double>(ok) / static_cast<double>(view.size());
}

// ------------------------------------------------------------------- reports

std::string metrics_csv_header() {
    return "dataset,model,N,lambda,seed,hit_rate,disentanglement,entropy,stabilizer_recovery";
}

std::string metrics_csv_line(const MetricsRow& r) {
    auto num = [](double v) {
        if (std::isnan(v)) return std::string("nan");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return std::string(buf);
    };
    std::ostringstream out;
    out << r.dataset << ',' << r.model << ',' << r.heads << ',' << num(r.lambda) << ',' << r.seed << ','
        << num(r.hit_rate) << ',' << num(r.disentanglement) << ',' << num(r.entropy) << ','
        << num(r.stabilizer_recovery);
    return out.str();
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    out << "# equin metrics v" << kMetricsCsvVersion << '\n' << metrics_csv_header() << '\n';
    for (const auto& r : rows) out << metrics_csv_line(r) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

void export_embeddings(const Representation& rep, const EvaluationView& view, const std::filesystem::path& path) {
    require_group(rep, view);
    std::ofstream out = open_output(path);
    out.precision(10);
    const int k = rep.group().param_count();
    bool header = false;
    for (std::size_t i = 0; i < view.size(); ++i) {
        const Encoding e = rep.encode(view[i].x);
        if (!header) {
            out << "index,orbit_id,head";
            for (int p = 0; p < k; ++p) out << ",g_p" << p;
            for (Eigen::Index d = 0; d < e.orbit.size(); ++d) out << ",o" << d;
            out << '\n';
            header = true;
        }
        for (std::size_t h = 0; h < e.group.size(); ++h) {
            out << i << ',' << view[i].x.orbit_id << ',' << h;
            for (int p = 0; p < k; ++p) out << ',' << e.group[h].params()(p);
            for (Eigen::Index d = 0; d < e.orbit.size(); ++d) out << ',' << e.orbit(d);
            out << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace equin
