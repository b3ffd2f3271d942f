#include "equin/encoder.hpp"

#include <cmath>

#include <json.hpp>

#include "equin/binary_io.hpp"
#include "equin/error.hpp"
#include "equin/random.hpp"

namespace equin {

namespace {

using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
using MatrixMap = Eigen::Map<Eigen::MatrixXd>;

DenseLayout dense(Eigen::Index& cursor, int rows, int cols) {
    DenseLayout d;
    d.rows = rows;
    d.cols = cols;
    d.weight = cursor;
    cursor += static_cast<Eigen::Index>(rows) * cols;
    d.bias = cursor;
    cursor += rows;
    return d;
}

ConstMatrixMap weight(const Eigen::VectorXd& p, const DenseLayout& d) {
    return ConstMatrixMap(p.data() + d.weight, d.rows, d.cols);
}
auto bias(const Eigen::VectorXd& p, const DenseLayout& d) { return p.segment(d.bias, d.rows); }

Eigen::MatrixXd affine(const Eigen::VectorXd& p, const DenseLayout& d, const Eigen::MatrixXd& in) {
    Eigen::MatrixXd out = weight(p, d) * in;
    out.colwise() += bias(p, d);
    return out;
}

void activate(Eigen::MatrixXd& z, Activation a) {
    if (a == Activation::Tanh) {
        z = z.array().tanh().matrix();
    } else {
        z = z.cwiseMax(0.0);
    }
}

// dL/dz from dL/dh and h = act(z).
Eigen::MatrixXd activation_backward(const Eigen::MatrixXd& grad_h, const Eigen::MatrixXd& h, Activation a) {
    if (a == Activation::Tanh) return (grad_h.array() * (1.0 - h.array().square())).matrix();
    return (grad_h.array() * (h.array() > 0.0).cast<double>()).matrix();
}

// Backprop through one dense layer; accumulates parameter grads, returns dL/din.
Eigen::MatrixXd dense_backward(const Eigen::VectorXd& p, const DenseLayout& d, const Eigen::MatrixXd& in,
                               const Eigen::MatrixXd& grad_out, Eigen::VectorXd& grad) {
    MatrixMap(grad.data() + d.weight, d.rows, d.cols) += grad_out * in.transpose();
    grad.segment(d.bias, d.rows) += grad_out.rowwise().sum();
    return weight(p, d).transpose() * grad_out;
}

std::vector<Eigen::MatrixXd> run_trunk(const Eigen::VectorXd& p, const std::vector<DenseLayout>& layers,
                                       const Eigen::MatrixXd& inputs, Activation a) {
    std::vector<Eigen::MatrixXd> hidden;
    hidden.reserve(layers.size());
    for (const auto& layer : layers) {
        Eigen::MatrixXd z = affine(p, layer, hidden.empty() ? inputs : hidden.back());
        activate(z, a);
        hidden.push_back(std::move(z));
    }
    return hidden;
}

void trunk_backward(const Eigen::VectorXd& p, const std::vector<DenseLayout>& layers,
                    const Eigen::MatrixXd& inputs, const std::vector<Eigen::MatrixXd>& hidden,
                    Eigen::MatrixXd grad_h, Activation a, Eigen::VectorXd& grad) {
    for (std::size_t l = layers.size(); l-- > 0;) {
        const Eigen::MatrixXd grad_z = activation_backward(grad_h, hidden[l], a);
        grad_h = dense_backward(p, layers[l], l == 0 ? inputs : hidden[l - 1], grad_z, grad);
    }
}

const char* activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

}  // namespace

void EncoderConfig::validate() const {
    if (input_dim < 1) throw ValidationError("encoder: input_dim must be positive");
    for (int w : trunk_layers)
        if (w < 1) throw ValidationError("encoder: trunk widths must be positive");
    if (heads < 1) throw ValidationError("encoder: N (heads) must be >= 1");
    if (orbit_dim < 2) throw ValidationError("encoder: orbit_dim must be >= 2");
    if (shared_trunk && trunk_layers.empty()) throw ValidationError("encoder: shared trunk needs trunk layers");
}

std::string EncoderConfig::to_json() const {
    nlohmann::json j;
    j["input_dim"] = input_dim;
    j["trunk_layers"] = trunk_layers;
    j["activation"] = activation_name(activation);
    j["heads"] = heads;
    j["group"] = group.tag();
    j["orbit_dim"] = orbit_dim;
    j["init_seed"] = init_seed;
    j["shared_trunk"] = shared_trunk;
    return j.dump();
}

EncoderConfig EncoderConfig::from_json(const std::string& text) {
    EncoderConfig c;
    try {
        const auto j = nlohmann::json::parse(text);
        c.input_dim = j.at("input_dim").get<int>();
        c.trunk_layers = j.at("trunk_layers").get<std::vector<int>>();
        const auto act = j.at("activation").get<std::string>();
        if (act == "tanh") {
            c.activation = Activation::Tanh;
        } else if (act == "relu") {
            c.activation = Activation::Relu;
        } else {
            throw ValidationError("encoder: unknown activation '" + act + "'");
        }
        c.heads = j.at("heads").get<int>();
        c.group = GroupSpec::from_tag(j.at("group").get<std::string>());
        c.orbit_dim = j.at("orbit_dim").get<int>();
        c.init_seed = j.at("init_seed").get<std::uint64_t>();
        c.shared_trunk = j.at("shared_trunk").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("encoder config: ") + e.what());
    }
    c.validate();
    return c;
}

EncoderLayout::EncoderLayout(const EncoderConfig& config) {
    config.validate();
    Eigen::Index cursor = 0;
    int in = config.input_dim;
    for (int w : config.trunk_layers) {
        group_trunk.push_back(dense(cursor, w, in));
        in = w;
    }
    group_head = dense(cursor, config.heads * config.group.algebra_dim(), in);
    int orbit_in = in;
    if (!config.shared_trunk) {
        orbit_in = config.input_dim;
        for (int w : config.trunk_layers) {
            orbit_trunk.push_back(dense(cursor, w, orbit_in));
            orbit_in = w;
        }
    }
    orbit_head = dense(cursor, config.orbit_dim, orbit_in);
    size = cursor;
}

Encoder::Encoder(EncoderConfig config, Eigen::VectorXd params)
    : config_(std::move(config)), layout_(config_), params_(std::move(params)) {
    if (params_.size() != layout_.size) {
        throw ValidationError("encoder: parameter vector has " + std::to_string(params_.size()) + " entries, layout needs " +
                              std::to_string(layout_.size));
    }
    if (!params_.allFinite()) throw NumericalError("encoder: non-finite parameters");
}

Encoder Encoder::init(const EncoderConfig& config) {
    const EncoderLayout layout(config);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(layout.size);
    RandomStream rng(config.init_seed);
    auto xavier = [&](const DenseLayout& d) {
        const double bound = std::sqrt(6.0 / (d.rows + d.cols));
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d.rows) * d.cols; ++i)
            p(d.weight + i) = rng.uniform(-bound, bound);
    };
    for (const auto& d : layout.group_trunk) xavier(d);
    xavier(layout.group_head);
    for (const auto& d : layout.orbit_trunk) xavier(d);
    xavier(layout.orbit_head);
    for (int i = 0; i < layout.group_head.rows; ++i) p(layout.group_head.bias + i) = rng.normal(0.0, 0.5);
    return Encoder(config, std::move(p));
}

ForwardTape Encoder::forward(const Eigen::MatrixXd& inputs) const {
    if (inputs.rows() != config_.input_dim) {
        throw ValidationError("encoder: input has dimension " + std::to_string(inputs.rows()) + ", expected " +
                              std::to_string(config_.input_dim));
    }
    ForwardTape t;
    t.inputs = inputs;
    t.group_hidden = run_trunk(params_, layout_.group_trunk, inputs, config_.activation);
    const Eigen::MatrixXd& group_top = t.group_hidden.empty() ? inputs : t.group_hidden.back();
    t.coords = affine(params_, layout_.group_head, group_top);
    if (!t.coords.allFinite()) throw NumericalError("encode_G: non-finite head output");

    if (!config_.shared_trunk) t.orbit_hidden = run_trunk(params_, layout_.orbit_trunk, inputs, config_.activation);
    const Eigen::MatrixXd& orbit_top =
        config_.shared_trunk ? group_top : (t.orbit_hidden.empty() ? inputs : t.orbit_hidden.back());
    t.orbit_raw = affine(params_, layout_.orbit_head, orbit_top);
    t.orbit_norm = t.orbit_raw.colwise().norm().transpose();
    if (!t.orbit_raw.allFinite()) throw NumericalError("encode_O: non-finite raw output");
    if ((t.orbit_norm.array() < 1e-8).any()) throw NumericalError("encode_O: degenerate near-zero raw output");
    t.orbit_unit = t.orbit_raw.array().rowwise() / t.orbit_norm.transpose().array();
    return t;
}

Eigen::VectorXd Encoder::backward(const ForwardTape& t, const Eigen::MatrixXd& grad_coords,
                                  const Eigen::MatrixXd& grad_orbit_unit) const {
    if (!grad_coords.allFinite()) throw NumericalError("backward: non-finite gradient at the group heads");
    if (!grad_orbit_unit.allFinite()) throw NumericalError("backward: non-finite gradient at the orbit head");
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());

    // Normalization: u = r/|r|  =>  dL/dr = (g - u (u.g)) / |r|
    const Eigen::RowVectorXd along = (t.orbit_unit.array() * grad_orbit_unit.array()).colwise().sum();
    Eigen::MatrixXd grad_raw = grad_orbit_unit - t.orbit_unit * along.asDiagonal();
    grad_raw = grad_raw.array().rowwise() / t.orbit_norm.transpose().array();

    const Eigen::MatrixXd& group_top = t.group_hidden.empty() ? t.inputs : t.group_hidden.back();
    Eigen::MatrixXd grad_group_top = dense_backward(params_, layout_.group_head, group_top, grad_coords, grad);
    if (config_.shared_trunk) {
        grad_group_top += dense_backward(params_, layout_.orbit_head, group_top, grad_raw, grad);
    } else {
        const Eigen::MatrixXd& orbit_top = t.orbit_hidden.empty() ? t.inputs : t.orbit_hidden.back();
        Eigen::MatrixXd grad_orbit_top = dense_backward(params_, layout_.orbit_head, orbit_top, grad_raw, grad);
        trunk_backward(params_, layout_.orbit_trunk, t.inputs, t.orbit_hidden, std::move(grad_orbit_top),
                       config_.activation, grad);
    }
    trunk_backward(params_, layout_.group_trunk, t.inputs, t.group_hidden, std::move(grad_group_top),
                   config_.activation, grad);
    if (!grad.allFinite()) throw NumericalError("backward: non-finite parameter gradient");
    return grad;
}

std::vector<Eigen::MatrixXd> Encoder::head_matrices(const ForwardTape& tape, Eigen::Index col) const {
    const int k = config_.group.algebra_dim();
    std::vector<Eigen::MatrixXd> out;
    out.reserve(static_cast<std::size_t>(config_.heads));
    for (int i = 0; i < config_.heads; ++i)
        out.push_back(lie::exp_matrix(config_.group, tape.coords.col(col).segment(i * k, k)));
    return out;
}

GroupSet Encoder::encode_G(const Eigen::VectorXd& x) const {
    if (x.size() != config_.input_dim) {
        throw ValidationError("encoder: input has dimension " + std::to_string(x.size()) + ", expected " +
                              std::to_string(config_.input_dim));
    }
    // group path only, so a degenerate orbit head does not affect phi_G
    const auto hidden = run_trunk(params_, layout_.group_trunk, x, config_.activation);
    const Eigen::MatrixXd coords = affine(params_, layout_.group_head, hidden.empty() ? Eigen::MatrixXd(x) : hidden.back());
    if (!coords.allFinite()) throw NumericalError("encode_G: non-finite head output");
    const int k = config_.group.algebra_dim();
    std::vector<GroupElement> out;
    for (int i = 0; i < config_.heads; ++i) {
        out.push_back(exp_map(config_.group, AlgebraVector(config_.group, coords.col(0).segment(i * k, k))));
    }
    return GroupSet(std::move(out));
}

Eigen::VectorXd Encoder::encode_O(const Eigen::VectorXd& x) const { return forward(x).orbit_unit.col(0); }

Encoder init_encoder(const EncoderConfig& config) { return Encoder::init(config); }
GroupSet encode_G(const Encoder& encoder, const Eigen::VectorXd& x) { return encoder.encode_G(x); }
Eigen::VectorXd encode_O(const Encoder& encoder, const Eigen::VectorXd& x) { return encoder.encode_O(x); }

// --------------------------------------------------------------- checkpoint

namespace {
constexpr char kCheckpointMagic[4] = {'E', 'Q', 'C', 'K'};
}

void save_checkpoint(const Encoder& encoder, std::uint64_t step, const std::filesystem::path& path) {
    io::ByteWriter w;
    w.put_bytes(std::string_view(kCheckpointMagic, 4));
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put_string(encoder.config().to_json());
    w.put<std::uint64_t>(step);
    w.put<std::uint64_t>(static_cast<std::uint64_t>(encoder.params().size()));
    w.put_doubles(std::span<const double>(encoder.params().data(), static_cast<std::size_t>(encoder.params().size())));
    w.seal();
    io::write_file(path, w.bytes());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    io::ByteReader head(bytes);
    if (bytes.size() < 8 || head.get_bytes(4) != std::string_view(kCheckpointMagic, 4)) {
        throw FormatError("'" + path.string() + "' is not a checkpoint (bad magic)");
    }
    const auto version = head.get<std::uint32_t>();
    if (version != kCheckpointVersion) throw VersionError("unsupported checkpoint version " + std::to_string(version));
    io::ByteReader r(io::verify_sealed(bytes));
    r.get_bytes(8);
    EncoderConfig config;
    try {
        config = EncoderConfig::from_json(r.get_string());
    } catch (const ValidationError& e) {
        throw FormatError(std::string("malformed checkpoint header: ") + e.what());
    }
    const auto step = r.get<std::uint64_t>();
    const auto n = r.get<std::uint64_t>();
    if (n != r.remaining() / sizeof(double) || r.remaining() % sizeof(double) != 0) {
        throw FormatError("checkpoint parameter block has the wrong length");
    }
    Eigen::VectorXd params(static_cast<Eigen::Index>(n));
    r.get_doubles(std::span<double>(params.data(), n));
    try {
        return Checkpoint{Encoder(std::move(config), std::move(params)), step};
    } catch (const ValidationError& e) {
        throw FormatError(std::string("checkpoint does not match its config: ") + e.what());
    }
}

}  // namespace equin
