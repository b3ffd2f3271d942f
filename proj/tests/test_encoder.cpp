#include <cmath>
#include <filesystem>
#include <string>

#include <doctest.h>
#include <Eigen/Dense>

#include "equin/binary_io.hpp"
#include "equin/encoder.hpp"
#include "equin/error.hpp"
#include "equin/set_metrics.hpp"
#include "test_support.hpp"

using namespace equin;
using equin::testing::numeric_gradient;
using equin::testing::random_coords;
using equin::testing::relative_error;
namespace fs = std::filesystem;

namespace {

EncoderConfig small_config(const GroupSpec& group, int heads, std::uint64_t seed = 1) {
    EncoderConfig c;
    c.input_dim = 6;
    c.trunk_layers = {8, 5};
    c.heads = heads;
    c.group = group;
    c.init_seed = seed;
    return c;
}

Eigen::MatrixXd weight(const Eigen::VectorXd& p, const DenseLayout& l) {
    return Eigen::Map<const Eigen::MatrixXd>(p.data() + l.weight, l.rows, l.cols);
}

Eigen::VectorXd bias(const Eigen::VectorXd& p, const DenseLayout& l) { return p.segment(l.bias, l.rows); }

Eigen::VectorXd activate(const Eigen::VectorXd& v, Activation a) {
    return a == Activation::Tanh ? Eigen::VectorXd(v.array().tanh()) : Eigen::VectorXd(v.cwiseMax(0.0));
}

// Straight-line forward pass written against the documented layout.
Eigen::VectorXd reference_coords(const Encoder& e, const Eigen::VectorXd& x) {
    const auto& p = e.params();
    Eigen::VectorXd h = x;
    for (const auto& l : e.layout().group_trunk) h = activate(weight(p, l) * h + bias(p, l), e.config().activation);
    return weight(p, e.layout().group_head) * h + bias(p, e.layout().group_head);
}

Eigen::VectorXd reference_orbit(const Encoder& e, const Eigen::VectorXd& x) {
    const auto& p = e.params();
    Eigen::VectorXd h = x;
    const auto& trunk = e.config().shared_trunk ? e.layout().group_trunk : e.layout().orbit_trunk;
    for (const auto& l : trunk) h = activate(weight(p, l) * h + bias(p, l), e.config().activation);
    const Eigen::VectorXd raw = weight(p, e.layout().orbit_head) * h + bias(p, e.layout().orbit_head);
    return raw / raw.norm();
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("initialization is deterministic in the seed") {
    const auto a = Encoder::init(small_config(GroupSpec::so2(), 3, 4));
    const auto b = Encoder::init(small_config(GroupSpec::so2(), 3, 4));
    const auto c = Encoder::init(small_config(GroupSpec::so2(), 3, 5));
    CHECK(a.params() == b.params());
    CHECK(a.params() != c.params());
}

TEST_CASE("initial weights respect the Xavier bound") {
    const auto e = Encoder::init(small_config(GroupSpec::so3(), 4));
    for (const auto& l : e.layout().group_trunk) {
        const double bound = std::sqrt(6.0 / (l.rows + l.cols));
        CHECK(weight(e.params(), l).cwiseAbs().maxCoeff() <= bound);
        CHECK(bias(e.params(), l).isZero());
    }
}

TEST_CASE("initial heads are spread out") {
    RandomStream rng(2);
    for (int heads : {2, 5}) {
        const auto e = Encoder::init(small_config(GroupSpec::so2(), heads));
        for (int i = 0; i < 10; ++i) CHECK(entropy_reg(e.encode_G(random_coords(6, rng))) > 0.0);
    }
}

TEST_CASE("forward pass matches a hand-written reference") {
    RandomStream rng(3);
    for (auto act : {Activation::Tanh, Activation::Relu}) {
        for (bool shared : {false, true}) {
            auto cfg = small_config(GroupSpec::product({GroupSpec::so2(), GroupSpec::so3()}), 3);
            cfg.activation = act;
            cfg.shared_trunk = shared;
            const auto e = Encoder::init(cfg);
            for (int i = 0; i < 5; ++i) {
                const Eigen::VectorXd x = random_coords(6, rng);
                const Eigen::VectorXd coords = reference_coords(e, x);
                const GroupSet set = e.encode_G(x);
                REQUIRE(set.size() == 3);
                const int k = cfg.group.algebra_dim();
                for (int h = 0; h < 3; ++h) {
                    const auto expected = exp_map(cfg.group, AlgebraVector(cfg.group, coords.segment(h * k, k)));
                    CHECK(metric_dG(set[static_cast<std::size_t>(h)], expected) < 1e-20);
                }
                CHECK((e.encode_O(x) - reference_orbit(e, x)).norm() < 1e-12);
            }
        }
    }
}

TEST_CASE("outputs lie on the group and the sphere") {
    RandomStream rng(4);
    const auto e = Encoder::init(small_config(GroupSpec::so3(), 4));
    for (int i = 0; i < 20; ++i) {
        const Eigen::VectorXd x = random_coords(6, rng, 3.0);
        for (const auto& g : e.encode_G(x)) {
            CHECK((g.matrix().transpose() * g.matrix() - Eigen::Matrix3d::Identity()).norm() < 1e-10);
            CHECK(g.matrix().determinant() == doctest::Approx(1.0));
        }
        CHECK(e.encode_O(x).norm() == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(e.encode_O(x) == e.encode_O(x));
    }
}

TEST_CASE("defaults") {
    EncoderConfig c;
    CHECK(c.orbit_dim == 3);
    CHECK(EncoderLayout(c).size < 50000);
    c.heads = 1;
    const auto baseline = Encoder::init(c);
    CHECK(baseline.encode_G(Eigen::VectorXd::Ones(32)).size() == 1);
    c.heads = 24;
    c.group = GroupSpec::so3();
    CHECK(EncoderLayout(c).size < 50000);
}

TEST_CASE("invalid inputs") {
    auto cfg = small_config(GroupSpec::so2(), 0);
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = small_config(GroupSpec::so2(), 2);
    cfg.orbit_dim = 1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    const auto e = Encoder::init(small_config(GroupSpec::so2(), 2));
    CHECK_THROWS_AS(e.encode_G(Eigen::VectorXd::Zero(5)), ValidationError);

    // all-zero orbit head: raw output vanishes
    Encoder dead = e;
    const auto& oh = dead.layout().orbit_head;
    dead.mutable_params().segment(oh.weight, oh.rows * oh.cols).setZero();
    dead.mutable_params().segment(oh.bias, oh.rows).setZero();
    CHECK_THROWS_AS(dead.encode_O(Eigen::VectorXd::Ones(6)), NumericalError);
}

TEST_CASE("backward matches finite differences on a tiny encoder") {
    EncoderConfig cfg;
    cfg.input_dim = 2;
    cfg.trunk_layers = {4};
    cfg.heads = 1;
    cfg.group = GroupSpec::so2();
    cfg.init_seed = 9;
    const Encoder base = Encoder::init(cfg);
    RandomStream rng(5);
    const Eigen::VectorXd x = random_coords(2, rng);
    const Eigen::MatrixXd target = so2_rotation(0.4).matrix();
    const Eigen::Vector3d dir = random_coords(3, rng);

    // L = ||exp(head(x)) - T||^2 + dir . phi_O(x)
    auto loss = [&](const Eigen::VectorXd& p) {
        const Encoder e(cfg, p);
        return (e.encode_G(x)[0].matrix() - target).squaredNorm() + dir.dot(e.encode_O(x));
    };
    const ForwardTape tape = base.forward(x);
    const Eigen::MatrixXd m = base.head_matrices(tape, 0)[0];
    Eigen::MatrixXd gc(1, 1);
    gc.col(0) = lie::exp_pullback(cfg.group, tape.coords.col(0), m, 2.0 * (m - target));
    const Eigen::VectorXd analytic = base.backward(tape, gc, dir);
    CHECK(relative_error(analytic, numeric_gradient(loss, base.params())) < 1e-4);
}

TEST_CASE("normalization gradient is orthogonal to the output direction") {
    const auto e = Encoder::init(small_config(GroupSpec::so2(), 2));
    RandomStream rng(6);
    const ForwardTape tape = e.forward(random_coords(6, rng));
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(tape.coords.rows(), 1);
    // A loss along u itself has no component tangent to the sphere.
    CHECK(e.backward(tape, zero, tape.orbit_unit).norm() < 1e-12);
}

TEST_CASE("checkpoint round trip and corruption") {
    const fs::path dir = fs::temp_directory_path() / "equin_test_encoder";
    fs::create_directories(dir);
    const auto e = Encoder::init(small_config(GroupSpec::torus(2), 3, 7));
    save_checkpoint(e, 123, dir / "a.eqck");
    const Checkpoint back = load_checkpoint(dir / "a.eqck");
    CHECK(back.step == 123);
    CHECK(back.encoder.params() == e.params());
    CHECK(back.encoder.config().group == GroupSpec::torus(2));
    CHECK(back.encoder.config().heads == 3);
    CHECK(back.encoder.config().trunk_layers == std::vector<int>{8, 5});

    std::string bytes = io::read_file(dir / "a.eqck");
    bytes[bytes.size() - 10] ^= 0x01;
    io::write_file(dir / "b.eqck", bytes);
    CHECK_THROWS_AS(load_checkpoint(dir / "b.eqck"), ChecksumError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.eqck"), IoError);
}

TEST_CASE("config json round trip") {
    auto cfg = small_config(GroupSpec::so3(), 7, 42);
    cfg.activation = Activation::Relu;
    cfg.shared_trunk = true;
    const auto back = EncoderConfig::from_json(cfg.to_json());
    CHECK(back.heads == 7);
    CHECK(back.group == GroupSpec::so3());
    CHECK(back.activation == Activation::Relu);
    CHECK(back.shared_trunk);
    CHECK(back.init_seed == 42);
}

}  // TEST_SUITE
