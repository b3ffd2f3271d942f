#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "equin/dataset.hpp"
#include "equin/encoder.hpp"
#include "equin/random.hpp"

namespace equin {

struct TrainConfig {
    int epochs = 50;
    int batch_size = 16;
    double learning_rate = 1e-4;
    double weight_decay = 1e-2;
    /// Weight of the dispersion ("discrete entropy") regularizer.
    double lambda = 1.0;
    /// Negatives per anchor for the contrastive loss; 0 uses every other
    /// in-batch datapoint.
    int infonce_negatives = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochMetrics {
    double equivariance = 0.0;
    double entropy = 0.0;  // lambda-weighted
    double infonce = 0.0;
    double total = 0.0;
};

struct TrainReport {
    std::vector<EpochMetrics> epochs;
    double wall_seconds = 0.0;
    std::uint64_t steps = 0;
};

struct TrainResult {
    TrainReport report;
    Encoder encoder;
};

using Sample = TrainingView::Sample;

/// L_G = chamfer(g . phi_G(x), phi_G(y)).
double loss_equivariance(const Encoder& encoder, const Sample& triplet);

/// lambda * entropy_reg(phi_G(x)).
double loss_entropy(const Encoder& encoder, const Eigen::VectorXd& x, double lambda);

/// Contrastive loss averaged over the anchors x of a batch; positives are
/// the matching y, negatives the x and y of every other triplet.
double loss_infonce(const Encoder& encoder, std::span<const Sample> batch);

namespace kernels {

/// -a.p + log mean_n exp(a.n) for unit vectors (d_O = -cosine).
double infonce_anchor(const Eigen::VectorXd& anchor, const Eigen::VectorXd& positive,
                      const std::vector<Eigen::VectorXd>& negatives);

}  // namespace kernels

struct BatchEvaluation {
    EpochMetrics loss;        // batch means
    Eigen::VectorXd gradient; // d(total)/d(params)
};

/// Mean over the batch of L_G + lambda * (E(x) + E(y)) / 2 + L_O, and its
/// exact gradient (argmin matchings held fixed). `rng` is used only when
/// `negatives` > 0.
BatchEvaluation evaluate_batch(const Encoder& encoder, std::span<const Sample> batch, double lambda,
                               int negatives = 0, RandomStream* rng = nullptr);

/// Moment estimates of the decoupled-weight-decay Adam optimizer.
struct AdamWState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    std::uint64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One AdamW update in place:
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p
void adamw_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamWState& state,
                const TrainConfig& config);

/// Called after every epoch with (epoch index, metrics, current encoder).
using EpochCallback = std::function<void(int, const EpochMetrics&, const Encoder&)>;

/// Full training loop over the train split; single-threaded and
/// deterministic given the dataset, the encoder seed and `config.seed`.
TrainResult train(const TrainingView& data, const EncoderConfig& encoder_config, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace equin
