#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "equin/finite_subgroup.hpp"
#include "equin/group.hpp"
#include "equin/random.hpp"

namespace equin {

enum class DatasetName { RotatingArrows, ColoredArrows, DoubleArrows, ModelNetLike, Solids };

/// "rotating-arrows", "colored-arrows", "double-arrows", "modelnet-like", "solids".
std::string dataset_name_tag(DatasetName name);
DatasetName dataset_name_from_tag(const std::string& tag);

/// One orbit of a synthetic action: a group, the exact stabilizer of the
/// canonical point, and the parameters of the fixed feature embedding.
struct OrbitSpec {
    GroupSpec group;
    FiniteSubgroupSpec stabilizer;
    int orbit_id = 0;
    int feature_dim = 32;
    std::uint64_t embed_seed = 0;
    /// Width of the one-hot orbit tag (number of orbits in the dataset).
    int tag_width = 1;

    void validate() const;
};

struct Datapoint {
    Eigen::VectorXd features;
    int orbit_id = 0;
    /// Ground-truth coset representative; evaluation only.
    GroupElement pose;
};

/// (x, g, y) with y = g . x.
struct Triplet {
    Datapoint x;
    GroupElement g;
    Datapoint y;
    bool test = false;
};

struct DatasetSpec {
    DatasetName name = DatasetName::RotatingArrows;
    std::vector<OrbitSpec> orbits;
    int triplets_per_orbit = 2500;
    double noise_sigma = 0.01;
    std::uint64_t seed = 0;

    const GroupSpec& group() const { return orbits.front().group; }
    int feature_dim() const { return orbits.front().feature_dim; }
    void validate() const;
};

/// Preset reproducing one of the five dataset families (orbit table,
/// stabilizers and triplets per orbit).
DatasetSpec dataset_preset(DatasetName name, std::uint64_t seed, int feature_dim = 32, double noise_sigma = 0.01);

/// Keeps only the orbits whose stabilizer tag is listed, re-numbering ids and
/// the one-hot width. Used for single-orbit experiments.
DatasetSpec restrict_orbits(const DatasetSpec& spec, const std::vector<std::string>& stabilizer_tags);

/// Fixed random feature map of one orbit. Exactly invariant (up to
/// floating-point rounding) under pose -> pose * h for h in the stabilizer
/// and injective on the cosets.
class OrbitEmbedder {
public:
    explicit OrbitEmbedder(const OrbitSpec& spec);

    const OrbitSpec& spec() const { return spec_; }
    /// Noise-free features of the datapoint with the given pose.
    Eigen::VectorXd embed(const GroupElement& pose) const;

private:
    Eigen::VectorXd base_features(const GroupElement& pose) const;

    OrbitSpec spec_;
    std::vector<Eigen::MatrixXd> stabilizer_;  // SO(3) case only
    Eigen::MatrixXd so3_weights_;              // D0 x 9
    Eigen::MatrixXd affine_;                   // D x (base + tag)
    Eigen::VectorXd offset_;                   // D
};

/// embed(spec, pose) with optional additive Gaussian noise.
Eigen::VectorXd embed(const OrbitSpec& spec, const GroupElement& pose, double noise_sigma = 0.0,
                      RandomStream* rng = nullptr);

Triplet sample_triplet(const DatasetSpec& spec, const OrbitEmbedder& orbit, RandomStream& rng);
Triplet sample_triplet(const DatasetSpec& spec, const OrbitSpec& orbit, RandomStream& rng);

class Dataset;

/// Trainer-facing view: features and symmetries only. Poses and orbit ids
/// are not reachable from here.
class TrainingView {
public:
    struct Sample {
        const Eigen::VectorXd& x;
        const GroupElement& g;
        const Eigen::VectorXd& y;
    };

    std::size_t size() const { return indices_.size(); }
    Sample operator[](std::size_t i) const;
    const GroupSpec& group() const;
    int feature_dim() const;

private:
    friend class Dataset;
    TrainingView(const Dataset* data, std::vector<std::size_t> indices)
        : data_(data), indices_(std::move(indices)) {}
    const Dataset* data_;
    std::vector<std::size_t> indices_;
};

/// Evaluation view with full ground truth.
class EvaluationView {
public:
    std::size_t size() const { return indices_.size(); }
    const Triplet& operator[](std::size_t i) const;
    const DatasetSpec& spec() const;
    const OrbitSpec& orbit(int orbit_id) const;

private:
    friend class Dataset;
    EvaluationView(const Dataset* data, std::vector<std::size_t> indices)
        : data_(data), indices_(std::move(indices)) {}
    const Dataset* data_;
    std::vector<std::size_t> indices_;
};

enum class Split { Train, Test, All };

class Dataset {
public:
    Dataset(DatasetSpec spec, std::vector<Triplet> triplets);

    const DatasetSpec& spec() const { return spec_; }
    const std::vector<Triplet>& triplets() const { return triplets_; }
    std::size_t size() const { return triplets_.size(); }

    TrainingView training_view(Split split = Split::Train) const;
    EvaluationView evaluation_view(Split split = Split::Test) const;

private:
    std::vector<std::size_t> indices(Split split) const;
    DatasetSpec spec_;
    std::vector<Triplet> triplets_;
};

/// Samples every orbit (independent sub-seeded stream per orbit); the last
/// 10% of each orbit's triplets form the test split.
Dataset generate_dataset(const DatasetSpec& spec);

inline constexpr std::uint32_t kDatasetVersion = 1;

/// Binary little-endian dataset file with trailing CRC32.
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);
/// CRC32 stored at the end of a dataset or checkpoint file.
std::uint32_t file_crc(const std::filesystem::path& path);

/// Plain-text export, one triplet per line (column order in the header row).
void export_dataset_csv(const Dataset& data, const std::filesystem::path& path);

/// Human-readable orbit table and counts.
std::string dataset_summary(const Dataset& data);

}  // namespace equin
