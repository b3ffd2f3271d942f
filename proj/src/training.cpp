#include "equin/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "equin/error.hpp"
#include "equin/set_metrics.hpp"

namespace equin {

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("train: epochs must be positive");
    if (batch_size < 2) throw ValidationError("train: batch_size must be >= 2 (contrastive loss needs negatives)");
    if (!(learning_rate > 0.0)) throw ValidationError("train: learning_rate must be positive");
    if (!(weight_decay >= 0.0)) throw ValidationError("train: weight_decay must be nonnegative");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("train: lambda must be >= 0");
    if (infonce_negatives < 0) throw ValidationError("train: infonce_negatives must be >= 0");
}

namespace kernels {

double infonce_anchor(const Eigen::VectorXd& anchor, const Eigen::VectorXd& positive,
                      const std::vector<Eigen::VectorXd>& negatives) {
    if (negatives.empty()) throw ValidationError("infonce: no negatives");
    double m = -std::numeric_limits<double>::infinity();
    std::vector<double> s;
    for (const auto& n : negatives) {
        s.push_back(anchor.dot(n));
        m = std::max(m, s.back());
    }
    double acc = 0.0;
    for (double v : s) acc += std::exp(v - m);
    return -anchor.dot(positive) + m + std::log(acc / static_cast<double>(s.size()));
}

}  // namespace kernels

namespace {

Eigen::MatrixXd stack_inputs(std::span<const Sample> batch) {
    const auto b = static_cast<Eigen::Index>(batch.size());
    const Eigen::Index d = batch.front().x.size();
    Eigen::MatrixXd in(d, 2 * b);
    for (Eigen::Index i = 0; i < b; ++i) {
        in.col(i) = batch[static_cast<std::size_t>(i)].x;
        in.col(b + i) = batch[static_cast<std::size_t>(i)].y;
    }
    return in;
}

// Indices of the negatives of anchor `b` among 2B stacked datapoints.
std::vector<Eigen::Index> negatives_of(Eigen::Index b, Eigen::Index batch, int limit, RandomStream* rng) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < 2 * batch; ++j)
        if (j != b && j != batch + b) idx.push_back(j);
    if (limit > 0 && static_cast<std::size_t>(limit) < idx.size()) {
        if (!rng) throw ValidationError("infonce: sampling negatives requires a random stream");
        std::shuffle(idx.begin(), idx.end(), rng->engine());
        idx.resize(static_cast<std::size_t>(limit));
        std::sort(idx.begin(), idx.end());
    }
    return idx;
}

}  // namespace

BatchEvaluation evaluate_batch(const Encoder& encoder, std::span<const Sample> batch, double lambda, int negatives,
                               RandomStream* rng) {
    if (batch.size() < 2) throw ValidationError("infonce: batch must contain at least 2 triplets");
    const EncoderConfig& cfg = encoder.config();
    const GroupSpec& group = cfg.group;
    const int n = group.matrix_dim();
    const int k = group.algebra_dim();
    const auto b = static_cast<Eigen::Index>(batch.size());
    const double inv_b = 1.0 / static_cast<double>(b);

    const ForwardTape tape = encoder.forward(stack_inputs(batch));
    Eigen::MatrixXd grad_coords = Eigen::MatrixXd::Zero(tape.coords.rows(), tape.coords.cols());
    Eigen::MatrixXd grad_unit = Eigen::MatrixXd::Zero(tape.orbit_unit.rows(), tape.orbit_unit.cols());

    BatchEvaluation out;
    const std::size_t heads = static_cast<std::size_t>(cfg.heads);
    std::vector<Eigen::MatrixXd> gx_grad(heads), y_grad(heads), x_grad(heads);
    for (Eigen::Index i = 0; i < b; ++i) {
        const Eigen::MatrixXd& g = batch[static_cast<std::size_t>(i)].g.matrix();
        const auto x = encoder.head_matrices(tape, i);
        const auto y = encoder.head_matrices(tape, b + i);
        std::vector<Eigen::MatrixXd> gx(heads);
        for (std::size_t h = 0; h < heads; ++h) {
            gx[h] = g * x[h];
            gx_grad[h].setZero(n, n);
            y_grad[h].setZero(n, n);
            x_grad[h].setZero(n, n);
        }
        out.loss.equivariance += inv_b * kernels::chamfer_backward(gx, y, inv_b, gx_grad, y_grad);
        const double w = 0.5 * lambda * inv_b;
        out.loss.entropy += w * kernels::dispersion_backward(x, w, x_grad);
        out.loss.entropy += w * kernels::dispersion_backward(y, w, y_grad);
        for (std::size_t h = 0; h < heads; ++h) {
            x_grad[h] += g.transpose() * gx_grad[h];
            const auto off = static_cast<Eigen::Index>(h) * k;
            grad_coords.col(i).segment(off, k) =
                lie::exp_pullback(group, tape.coords.col(i).segment(off, k), x[h], x_grad[h]);
            grad_coords.col(b + i).segment(off, k) =
                lie::exp_pullback(group, tape.coords.col(b + i).segment(off, k), y[h], y_grad[h]);
        }
    }

    // Contrastive term: e^{-d_O(a, n)} = e^{a.n}.
    const Eigen::MatrixXd& u = tape.orbit_unit;
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto neg = negatives_of(i, b, negatives, rng);
        Eigen::VectorXd s(static_cast<Eigen::Index>(neg.size()));
        for (std::size_t j = 0; j < neg.size(); ++j) s(static_cast<Eigen::Index>(j)) = u.col(i).dot(u.col(neg[j]));
        const double m = s.maxCoeff();
        const Eigen::VectorXd e = (s.array() - m).exp().matrix();
        const double z = e.sum();
        const double value = -u.col(i).dot(u.col(b + i)) + m + std::log(z / static_cast<double>(neg.size()));
        out.loss.infonce += inv_b * value;
        grad_unit.col(i) -= inv_b * u.col(b + i);
        grad_unit.col(b + i) -= inv_b * u.col(i);
        for (std::size_t j = 0; j < neg.size(); ++j) {
            const double p = e(static_cast<Eigen::Index>(j)) / z;
            grad_unit.col(i) += inv_b * p * u.col(neg[j]);
            grad_unit.col(neg[j]) += inv_b * p * u.col(i);
        }
    }
    out.loss.total = out.loss.equivariance + out.loss.entropy + out.loss.infonce;
    if (!std::isfinite(out.loss.total)) throw NumericalError("evaluate_batch: non-finite loss");
    out.gradient = encoder.backward(tape, grad_coords, grad_unit);
    return out;
}

double loss_equivariance(const Encoder& encoder, const Sample& triplet) {
    const GroupSet x = encoder.encode_G(triplet.x);
    const GroupSet y = encoder.encode_G(triplet.y);
    return chamfer(left_translate(triplet.g, x), y).value;
}

double loss_entropy(const Encoder& encoder, const Eigen::VectorXd& x, double lambda) {
    return lambda * entropy_reg(encoder.encode_G(x));
}

double loss_infonce(const Encoder& encoder, std::span<const Sample> batch) {
    if (batch.size() < 2) throw ValidationError("infonce: batch must contain at least 2 triplets");
    const auto b = static_cast<Eigen::Index>(batch.size());
    const ForwardTape tape = encoder.forward(stack_inputs(batch));
    double total = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        std::vector<Eigen::VectorXd> neg;
        for (Eigen::Index j : negatives_of(i, b, 0, nullptr)) neg.push_back(tape.orbit_unit.col(j));
        total += kernels::infonce_anchor(tape.orbit_unit.col(i), tape.orbit_unit.col(b + i), neg);
    }
    return total / static_cast<double>(b);
}

void adamw_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamWState& s, const TrainConfig& config) {
    if (grads.size() != params.size()) throw ValidationError("adamw: gradient/parameter size mismatch");
    if (!grads.allFinite()) throw NumericalError("adamw: non-finite gradient");
    if (s.m.size() != params.size()) {
        s.m = Eigen::VectorXd::Zero(params.size());
        s.v = Eigen::VectorXd::Zero(params.size());
        s.t = 0;
    }
    ++s.t;
    s.m = s.beta1 * s.m + (1.0 - s.beta1) * grads;
    s.v = s.beta2 * s.v + (1.0 - s.beta2) * grads.cwiseAbs2();
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
    const double lr = config.learning_rate;
    params.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps) +
                      lr * config.weight_decay * params.array();
}

TrainResult train(const TrainingView& data, const EncoderConfig& encoder_config, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    config.validate();
    if (data.size() < 2) throw ValidationError("train: dataset needs at least 2 training triplets");
    if (!(data.group() == encoder_config.group)) throw SpecMismatch("train: encoder group does not match the dataset");
    if (data.feature_dim() != encoder_config.input_dim) {
        throw ValidationError("train: encoder input_dim does not match the dataset feature dimension");
    }
    const auto start = std::chrono::steady_clock::now();
    Encoder encoder = Encoder::init(encoder_config);
    AdamWState state;
    RandomStream shuffle_rng = RandomStream(config.seed).fork(1);
    RandomStream negative_rng = RandomStream(config.seed).fork(2);

    TrainReport report;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    const auto batch = static_cast<std::size_t>(config.batch_size);
    std::vector<Sample> samples;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
        EpochMetrics sum;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += batch) {
            const std::size_t end = std::min(order.size(), begin + batch);
            if (end - begin < 2) break;  // a lone leftover triplet has no negatives
            samples.clear();
            for (std::size_t i = begin; i < end; ++i) samples.push_back(data[order[i]]);
            const BatchEvaluation ev =
                evaluate_batch(encoder, samples, config.lambda, config.infonce_negatives, &negative_rng);
            adamw_step(encoder.mutable_params(), ev.gradient, state, config);
            sum.equivariance += ev.loss.equivariance;
            sum.entropy += ev.loss.entropy;
            sum.infonce += ev.loss.infonce;
            sum.total += ev.loss.total;
            ++batches;
        }
        const double inv = 1.0 / static_cast<double>(batches);
        EpochMetrics mean{sum.equivariance * inv, sum.entropy * inv, sum.infonce * inv, sum.total * inv};
        if (!std::isfinite(mean.total)) throw NumericalError("train: non-finite loss in epoch " + std::to_string(epoch));
        report.epochs.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean, encoder);
    }
    report.steps = state.t;
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return TrainResult{std::move(report), std::move(encoder)};
}

}  // namespace equin
