#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "equin/dataset.hpp"
#include "equin/encoder.hpp"
#include "equin/evaluation.hpp"
#include "equin/training.hpp"

namespace equin {

struct DatasetSection {
    std::string preset = "rotating-arrows";
    std::uint64_t seed = 0;
    int feature_dim = 32;
    double noise_sigma = 0.01;
    /// 0 keeps the preset's count.
    int triplets_per_orbit = 0;
    /// Stabilizer tags to keep (empty = every orbit of the preset).
    std::vector<std::string> stabilizers;

    DatasetSpec build() const;
};

struct EncoderSection {
    int heads = 5;
    std::vector<int> trunk_layers{64, 64};
    Activation activation = Activation::Tanh;
    int orbit_dim = 3;
    std::uint64_t init_seed = 0;
    bool shared_trunk = false;

    EncoderConfig build(const GroupSpec& group, int input_dim) const;
};

struct SweepSection {
    std::vector<int> heads;
    std::vector<double> lambdas;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
};

/// Everything a command needs, loaded from one JSON document. Every section
/// is optional; unknown keys anywhere are rejected.
struct RunConfig {
    DatasetSection dataset;
    EncoderSection encoder;
    TrainConfig train;
    /// Save a checkpoint every K epochs (0 = final checkpoint only).
    int checkpoint_every = 0;
    HitRateConfig hit_rate;
    DisentanglementConfig disentanglement;
    SweepSection sweep;
    std::string output_dir = "run";

    void validate() const;
    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);
};

}  // namespace equin
