#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "equin/group.hpp"

namespace equin {

enum class Activation { Tanh, Relu };

struct EncoderConfig {
    int input_dim = 32;
    std::vector<int> trunk_layers{64, 64};
    Activation activation = Activation::Tanh;
    /// Number of group heads N (size of the output GroupSet).
    int heads = 5;
    GroupSpec group = GroupSpec::so2();
    int orbit_dim = 3;
    std::uint64_t init_seed = 0;
    /// When true the orbit head reads the group trunk instead of its own.
    bool shared_trunk = false;

    void validate() const;
    std::string to_json() const;
    static EncoderConfig from_json(const std::string& text);
};

/// Offsets of one dense layer inside the flat parameter vector.
struct DenseLayout {
    Eigen::Index weight = 0;  // rows x cols, column-major
    Eigen::Index bias = 0;
    int rows = 0;
    int cols = 0;
};

/// Parameter layout: group trunk, group heads, orbit trunk, orbit head.
struct EncoderLayout {
    std::vector<DenseLayout> group_trunk;
    DenseLayout group_head;
    std::vector<DenseLayout> orbit_trunk;  // empty when the trunk is shared
    DenseLayout orbit_head;
    Eigen::Index size = 0;

    explicit EncoderLayout(const EncoderConfig& config);
};

/// Cached activations of a batched forward pass (one column per input).
struct ForwardTape {
    Eigen::MatrixXd inputs;
    std::vector<Eigen::MatrixXd> group_hidden;  // post-activation, per trunk layer
    std::vector<Eigen::MatrixXd> orbit_hidden;
    Eigen::MatrixXd coords;      // (N * algebra_dim) x B
    Eigen::MatrixXd orbit_raw;   // orbit_dim x B
    Eigen::VectorXd orbit_norm;  // B
    Eigen::MatrixXd orbit_unit;  // orbit_dim x B
};

/// The pair (phi_G, phi_O): a feed-forward trunk with N heads whose
/// Lie-algebra outputs go through exp_map, and an orbit head normalized to
/// the unit sphere.
class Encoder {
public:
    Encoder(EncoderConfig config, Eigen::VectorXd params);

    /// Xavier-uniform weights, zero biases, group-head biases ~ N(0, 0.5^2).
    static Encoder init(const EncoderConfig& config);

    const EncoderConfig& config() const { return config_; }
    const EncoderLayout& layout() const { return layout_; }
    const Eigen::VectorXd& params() const { return params_; }
    Eigen::VectorXd& mutable_params() { return params_; }

    /// Lie-algebra coordinates of head `i` are rows [i*k, (i+1)*k) of `coords`.
    ForwardTape forward(const Eigen::MatrixXd& inputs) const;

    /// Reverse pass: given dL/dcoords and dL/d(orbit_unit), returns dL/dparams.
    Eigen::VectorXd backward(const ForwardTape& tape, const Eigen::MatrixXd& grad_coords,
                             const Eigen::MatrixXd& grad_orbit_unit) const;

    GroupSet encode_G(const Eigen::VectorXd& x) const;
    Eigen::VectorXd encode_O(const Eigen::VectorXd& x) const;

    /// Group matrices of every head for column `col` of a tape.
    std::vector<Eigen::MatrixXd> head_matrices(const ForwardTape& tape, Eigen::Index col) const;

private:
    EncoderConfig config_;
    EncoderLayout layout_;
    Eigen::VectorXd params_;
};

Encoder init_encoder(const EncoderConfig& config);
GroupSet encode_G(const Encoder& encoder, const Eigen::VectorXd& x);
Eigen::VectorXd encode_O(const Encoder& encoder, const Eigen::VectorXd& x);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary checkpoint: magic "EQCK", version, config JSON, step count,
/// parameter vector, CRC32.
void save_checkpoint(const Encoder& encoder, std::uint64_t step, const std::filesystem::path& path);

struct Checkpoint {
    Encoder encoder;
    std::uint64_t step = 0;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace equin
