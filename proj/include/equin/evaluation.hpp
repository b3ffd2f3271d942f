#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "equin/dataset.hpp"
#include "equin/encoder.hpp"
#include "equin/group.hpp"

namespace equin {

/// The pair (phi_G(x), phi_O(x)) of one datapoint.
struct Encoding {
    GroupSet group;
    Eigen::VectorXd orbit;  // unit vector
};

/// Anything that maps datapoints to latent codes. Metrics only see this
/// interface, so trained encoders and analytic references score alike.
class Representation {
public:
    virtual ~Representation() = default;
    virtual std::string tag() const = 0;
    virtual const GroupSpec& group() const = 0;
    virtual Encoding encode(const Datapoint& point) const = 0;
};

/// A trained encoder; reads the features only.
class EncoderRepresentation final : public Representation {
public:
    explicit EncoderRepresentation(const Encoder& encoder, std::string tag = "equin");
    std::string tag() const override { return tag_; }
    const GroupSpec& group() const override { return encoder_.config().group; }
    Encoding encode(const Datapoint& point) const override;

private:
    const Encoder& encoder_;
    std::string tag_;
};

/// Ground-truth reference: phi_G(x) is the exact coset pose * G_O and
/// phi_O(x) the basis vector of the orbit id. Reads the pose.
class OracleRepresentation final : public Representation {
public:
    explicit OracleRepresentation(const DatasetSpec& spec);
    std::string tag() const override { return "oracle"; }
    const GroupSpec& group() const override { return group_; }
    Encoding encode(const Datapoint& point) const override;

private:
    GroupSpec group_;
    std::vector<GroupSet> stabilizers_;  // indexed by orbit id
};

/// Maps everything to `heads` copies of the identity and one orbit vector.
class ConstantRepresentation final : public Representation {
public:
    ConstantRepresentation(GroupSpec group, int heads);
    std::string tag() const override { return "constant"; }
    const GroupSpec& group() const override { return group_; }
    Encoding encode(const Datapoint& point) const override;

private:
    GroupSpec group_;
    int heads_;
};

/// Encodings of every test datapoint: entry 2i is x of triplet i, 2i+1 is y.
std::vector<Encoding> encode_view(const Representation& rep, const EvaluationView& view);

/// Training latent metric: chamfer(a.group, b.group) + d_O(a.orbit, b.orbit),
/// d_O = -cosine.
double latent_distance(const Encoding& a, const Encoding& b);

struct HitRateConfig {
    int batch_size = 20;
    /// Independent decoy draws per triplet; the reported rate is their mean.
    int trials = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Fraction of test triplets whose target y is strictly nearer to g.phi(x)
/// than each of batch_size - 1 decoys drawn with replacement from the other
/// test datapoints. Ties count as misses.
double hit_rate(const Representation& rep, const EvaluationView& view, const HitRateConfig& config = {});

/// PCA projection onto `out_dim` components.
struct PcaProjection {
    Eigen::MatrixXd components;  // out_dim x dim, orthonormal rows
    Eigen::VectorXd mean;
    Eigen::VectorXd eigenvalues;  // descending, length out_dim (padding has 0)
    /// Fewer than out_dim components with nonzero variance; the basis was
    /// completed with standard basis vectors.
    bool degenerate = false;
};

/// Columns of `samples` are observations. Eigenvectors of the sample
/// covariance in descending eigenvalue order, sign fixed so the first
/// nonzero coordinate is positive.
PcaProjection pca_project(const Eigen::MatrixXd& samples, int out_dim);

/// Per SO(2)-factor fitted latent action z -> R(orientation * k * angle) z.
struct LatentActionFit {
    std::vector<int> frequency;    // k in [1, 10]
    std::vector<int> orientation;  // +1 or -1 (undoes a PCA reflection)
    std::vector<double> phase;     // always 0: a common phase cancels in the dispersion
    double dispersion = 0.0;
    bool degenerate = false;
};

/// One orbit in the projected latent space: points[i] holds the projected
/// heads (2T x N) of datapoint i, generated from x0 by poses[i].
struct ProjectedOrbit {
    std::vector<Eigen::MatrixXd> points;
    std::vector<GroupElement> generators;
};

/// Grid search over k in {1..10} and orientation; each factor is fitted on
/// its own plane, minimizing the dispersion over `pairs` random pairs.
LatentActionFit fit_latent_action(const ProjectedOrbit& orbit, int pairs, RandomStream& rng);

/// Monte Carlo estimate of E[chamfer(h^-1 . z', g^-1 . z)] under the fitted
/// action, squared Euclidean point distance.
double latent_dispersion(const ProjectedOrbit& orbit, const LatentActionFit& fit, int pairs, RandomStream& rng);

struct DisentanglementConfig {
    int pairs = 10000;
    int fit_pairs = 2000;
    std::uint64_t seed = 0;
};

struct DisentanglementReport {
    double value = 0.0;  // mean over orbits
    std::vector<double> per_orbit;
    std::vector<LatentActionFit> fits;
};

/// Symmetry-based disentanglement for G = SO(2)^T; throws SpecMismatch for
/// groups with an SO(3) factor.
DisentanglementReport disentanglement(const Representation& rep, const EvaluationView& view,
                                      const DisentanglementConfig& config = {});

/// Mean entropy_reg(phi_G(x)) over all test datapoints (lambda excluded).
double entropy_diagnostic(const Representation& rep, const EvaluationView& view);

inline constexpr double kClusterThreshold = 0.1;

/// Single-linkage clusters of the heads under d_G < threshold; each cluster
/// lists head indices in increasing order, clusters ordered by first head.
std::vector<std::vector<std::size_t>> cluster_heads(const GroupSet& heads, double threshold = kClusterThreshold);

/// Cluster means projected back onto the group (per-block SVD).
GroupSet cluster_centroids(const GroupSet& heads, const std::vector<std::vector<std::size_t>>& clusters);

/// Nearest group element to an arbitrary matrix, block by block.
GroupElement project_to_group(const GroupSpec& spec, const Eigen::MatrixXd& matrix);

/// Fraction of test x whose head-cluster count equals `count`.
double cluster_count_fraction(const Representation& rep, const EvaluationView& view, int count);

/// Whether the heads of one datapoint recover its stabilizer: the cluster
/// count equals |G_x| and the centroids lie within 0.1 (two-sided chamfer)
/// of the coset C[0] G_x.
bool recovers_stabilizer(const GroupSet& heads, const GroupSet& stabilizer);

/// Fraction of test x for which `recovers_stabilizer` holds.
double stabilizer_recovery(const Representation& rep, const EvaluationView& view);

/// Fraction of test x whose heads contain a translate of the stabilizer.
double coset_containment_rate(const Representation& rep, const EvaluationView& view, double tol);

struct MetricsRow {
    std::string dataset;
    std::string model;
    int heads = 0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    double hit_rate = 0.0;
    /// NaN when the group has an SO(3) factor.
    double disentanglement = 0.0;
    double entropy = 0.0;
    double stabilizer_recovery = 0.0;
};

inline constexpr int kMetricsCsvVersion = 1;

std::string metrics_csv_header();
std::string metrics_csv_line(const MetricsRow& row);
/// Writes header + rows (creates parent directories).
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);

/// One line per (test x, head): index, orbit_id, head, group params, phi_O.
void export_embeddings(const Representation& rep, const EvaluationView& view, const std::filesystem::path& path);

}  // namespace equin
