#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <doctest.h>
#include <Eigen/Dense>

#include "equin/error.hpp"
#include "equin/evaluation.hpp"
#include "equin/set_metrics.hpp"
#include "test_support.hpp"

using namespace equin;
using equin::testing::random_coords;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

Dataset small_dataset(DatasetName name, std::vector<std::string> stabs = {}, int per_orbit = 200) {
    DatasetSpec spec = dataset_preset(name, 3);
    if (!stabs.empty()) spec = restrict_orbits(spec, stabs);
    spec.triplets_per_orbit = per_orbit;
    return generate_dataset(spec);
}

DisentanglementConfig quick() {
    DisentanglementConfig c;
    c.pairs = 2000;
    c.fit_pairs = 500;
    return c;
}

// Reverses the head order of another representation.
class Reversed final : public Representation {
public:
    explicit Reversed(const Representation& inner) : inner_(inner) {}
    std::string tag() const override { return "reversed"; }
    const GroupSpec& group() const override { return inner_.group(); }
    Encoding encode(const Datapoint& p) const override {
        Encoding e = inner_.encode(p);
        std::vector<GroupElement> r(e.group.elements().rbegin(), e.group.elements().rend());
        return Encoding{GroupSet(r), e.orbit};
    }

private:
    const Representation& inner_;
};

ProjectedOrbit planted_orbit(int k, int sign, int heads, int count, RandomStream& rng) {
    ProjectedOrbit o;
    for (int i = 0; i < count; ++i) {
        const double theta = rng.uniform(0.0, 2 * kPi);
        Eigen::MatrixXd pts(2, heads);
        for (int h = 0; h < heads; ++h) {
            const double a = k * theta + 2 * kPi * h / heads;
            pts.col(h) << std::cos(a), sign * std::sin(a);
        }
        o.points.push_back(pts);
        o.generators.push_back(so2_rotation(theta));
    }
    return o;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("pca recovers an embedded plane") {
    RandomStream rng(1);
    Eigen::MatrixXd basis = Eigen::MatrixXd::Random(4, 2);
    const Eigen::Vector4d offset(1, -2, 0.5, 3);
    Eigen::MatrixXd x(4, 200);
    for (int i = 0; i < 200; ++i) x.col(i) = offset + basis * random_coords(2, rng);
    const auto p = pca_project(x, 2);
    CHECK_FALSE(p.degenerate);
    CHECK((p.components * p.components.transpose() - Eigen::Matrix2d::Identity()).norm() < 1e-10);
    const Eigen::MatrixXd centered = x.colwise() - p.mean;
    CHECK((p.components.transpose() * (p.components * centered) - centered).norm() < 1e-8);
    for (int r = 0; r < 2; ++r) {
        for (int i = 0; i < 4; ++i) {
            if (std::abs(p.components(r, i)) > 1e-12) {
                CHECK(p.components(r, i) > 0.0);
                break;
            }
        }
    }
}

TEST_CASE("pca eigenvalues match the singular values of the centered data") {
    RandomStream rng(2);
    Eigen::MatrixXd x(5, 300);
    for (int i = 0; i < 300; ++i) x.col(i) = Eigen::Vector<double, 5>(3, 2, 1, 0.5, 0.1).asDiagonal() * random_coords(5, rng);
    const auto p = pca_project(x, 3);
    const Eigen::MatrixXd centered = x.colwise() - x.rowwise().mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU);
    for (int i = 0; i < 3; ++i) {
        CHECK(p.eigenvalues(i) == doctest::Approx(svd.singularValues()(i) * svd.singularValues()(i) / 300.0));
        CHECK(std::abs(std::abs(p.components.row(i).dot(svd.matrixU().col(i)))) == doctest::Approx(1.0));
    }
}

TEST_CASE("pca on an isotropic cloud explains its share of the variance") {
    RandomStream rng(3);
    Eigen::MatrixXd x(6, 20000);
    for (int i = 0; i < x.cols(); ++i) x.col(i) = random_coords(6, rng);
    const auto p = pca_project(x, 2);
    const Eigen::MatrixXd centered = x.colwise() - p.mean;
    const double total = centered.squaredNorm() / static_cast<double>(x.cols());
    CHECK(std::abs(p.eigenvalues.sum() / total - 2.0 / 6.0) < 0.03);
}

TEST_CASE("pca on duplicate points is flagged degenerate") {
    const Eigen::MatrixXd x = Eigen::Vector3d(1, 2, 3).replicate(1, 10);
    const auto p = pca_project(x, 2);
    CHECK(p.degenerate);
    CHECK(p.eigenvalues.isZero());
    CHECK((p.components * p.components.transpose() - Eigen::Matrix2d::Identity()).norm() < 1e-10);
    CHECK_THROWS_AS(pca_project(x, 4), ValidationError);
}

TEST_CASE("latent action fit recovers planted frequencies") {
    RandomStream rng(4);
    for (int k = 1; k <= 5; ++k) {
        for (int sign : {1, -1}) {
            const auto orbit = planted_orbit(k, sign, 3, 60, rng);
            RandomStream fit_rng(k);
            const auto fit = fit_latent_action(orbit, 500, fit_rng);
            REQUIRE(fit.frequency.size() == 1);
            CHECK(fit.frequency[0] == k);
            CHECK(fit.orientation[0] == sign);
            CHECK(fit.dispersion < 1e-20);
            CHECK_FALSE(fit.degenerate);
            RandomStream eval_rng(99);
            CHECK(latent_dispersion(orbit, fit, 500, eval_rng) < 1e-20);
        }
    }
}

TEST_CASE("latent action fit on constant embeddings") {
    RandomStream rng(5);
    ProjectedOrbit o;
    for (int i = 0; i < 30; ++i) {
        o.points.push_back(Eigen::Vector2d(0.6, 0.8));
        o.generators.push_back(so2_rotation(rng.uniform(0.0, 2 * kPi)));
    }
    const auto fit = fit_latent_action(o, 500, rng);
    CHECK(fit.degenerate);
    CHECK(fit.dispersion > 0.5);
    CHECK(fit.frequency[0] >= 1);
    CHECK(fit.frequency[0] <= 10);
    CHECK_THROWS_AS(fit_latent_action(ProjectedOrbit{}, 10, rng), ValidationError);
}

TEST_CASE("oracle representation scores perfectly") {
    const Dataset data = small_dataset(DatasetName::RotatingArrows);
    const OracleRepresentation oracle(data.spec());
    const auto view = data.evaluation_view();
    CHECK(hit_rate(oracle, view) == 1.0);
    CHECK(disentanglement(oracle, view, quick()).value < 0.02);
    CHECK(stabilizer_recovery(oracle, view) == 1.0);
    CHECK(coset_containment_rate(oracle, view, 0.1) == 1.0);
}

TEST_CASE("constant representation scores poorly") {
    const Dataset data = small_dataset(DatasetName::RotatingArrows);
    const ConstantRepresentation constant(GroupSpec::so2(), 5);
    const auto view = data.evaluation_view();
    CHECK(hit_rate(constant, view) == 0.0);
    CHECK(disentanglement(constant, view, quick()).value > 1.0);
    CHECK(entropy_diagnostic(constant, view) == 0.0);
    CHECK(cluster_count_fraction(constant, view, 1) == 1.0);

    const Dataset two = small_dataset(DatasetName::RotatingArrows, {"cyclic2"});
    CHECK(stabilizer_recovery(constant, two.evaluation_view()) == 0.0);
}

TEST_CASE("entropy of the exact two-element coset") {
    const Dataset two = small_dataset(DatasetName::RotatingArrows, {"cyclic2"});
    const OracleRepresentation oracle(two.spec());
    CHECK(entropy_diagnostic(oracle, two.evaluation_view()) == doctest::Approx(4.0));
}

TEST_CASE("oracle on the torus") {
    const Dataset data = small_dataset(DatasetName::DoubleArrows, {}, 100);
    const OracleRepresentation oracle(data.spec());
    const auto view = data.evaluation_view();
    CHECK(hit_rate(oracle, view) == 1.0);
    CHECK(stabilizer_recovery(oracle, view) == 1.0);
    CHECK(disentanglement(oracle, view, quick()).value < 0.02);
}

TEST_CASE("disentanglement is invariant under reordering the heads") {
    const Dataset data = small_dataset(DatasetName::RotatingArrows, {"cyclic3", "cyclic4"});
    EncoderConfig ec;
    ec.input_dim = data.spec().feature_dim();
    ec.heads = 4;
    ec.init_seed = 3;
    const Encoder enc = Encoder::init(ec);
    const EncoderRepresentation rep(enc);
    const Reversed rev(rep);
    const auto view = data.evaluation_view();
    CHECK(disentanglement(rep, view, quick()).value ==
          doctest::Approx(disentanglement(rev, view, quick()).value).epsilon(1e-9));
    CHECK(hit_rate(rep, view) == hit_rate(rev, view));
}

TEST_CASE("metrics are deterministic") {
    const Dataset data = small_dataset(DatasetName::RotatingArrows, {"cyclic2", "cyclic5"});
    EncoderConfig ec;
    ec.input_dim = data.spec().feature_dim();
    ec.heads = 3;
    const Encoder enc = Encoder::init(ec);
    const EncoderRepresentation rep(enc);
    const auto view = data.evaluation_view();
    CHECK(hit_rate(rep, view) == hit_rate(rep, view));
    CHECK(disentanglement(rep, view, quick()).value == disentanglement(rep, view, quick()).value);
}

TEST_CASE("metric preconditions") {
    const Dataset solids = small_dataset(DatasetName::Solids, {"tetrahedral"}, 200);
    const OracleRepresentation oracle(solids.spec());
    CHECK_THROWS_AS(disentanglement(oracle, solids.evaluation_view()), SpecMismatch);
    CHECK(hit_rate(oracle, solids.evaluation_view()) == 1.0);

    const Dataset tiny = small_dataset(DatasetName::RotatingArrows, {"cyclic1"}, 100);
    HitRateConfig big;
    big.batch_size = 50;
    CHECK_THROWS_AS(hit_rate(oracle, tiny.evaluation_view()), SpecMismatch);
    CHECK_THROWS_AS(hit_rate(OracleRepresentation(tiny.spec()), tiny.evaluation_view(), big), ValidationError);
    big.batch_size = 1;
    CHECK_THROWS_AS(big.validate(), ValidationError);
}

TEST_CASE("head clustering") {
    const GroupSet heads({so2_rotation(0.0), so2_rotation(kPi), so2_rotation(0.01), so2_rotation(kPi + 0.02),
                          so2_rotation(kPi / 2)});
    const auto clusters = cluster_heads(heads);
    REQUIRE(clusters.size() == 3);
    CHECK(clusters[0] == std::vector<std::size_t>{0, 2});
    CHECK(clusters[1] == std::vector<std::size_t>{1, 3});
    CHECK(clusters[2] == std::vector<std::size_t>{4});
    const auto c = cluster_centroids(heads, clusters);
    CHECK(c[0].params()(0) == doctest::Approx(0.005).epsilon(1e-6));

    // single linkage chains close neighbours
    const GroupSet chain({so2_rotation(0.0), so2_rotation(0.2), so2_rotation(0.4)});
    CHECK(cluster_heads(chain).size() == 1);
}

TEST_CASE("projection onto the group") {
    RandomStream rng(6);
    const auto spec = GroupSpec::product({GroupSpec::so2(), GroupSpec::so3()});
    const auto g = sample_haar(spec, rng);
    Eigen::MatrixXd noisy = g.matrix();
    for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy(i) += 1e-3 * rng.normal();
    CHECK(metric_dG(project_to_group(spec, noisy), g) < 1e-4);
    CHECK(metric_dG(project_to_group(spec, 0.5 * g.matrix()), g) < 1e-20);
}

TEST_CASE("stabilizer recovery on single datapoints") {
    const GroupSet c3 = enumerate_subgroup(FiniteSubgroupSpec::cyclic(3));
    const GroupSet coset = left_translate(so2_rotation(0.9), c3);
    CHECK(recovers_stabilizer(coset, c3));
    // repeated heads still recover it
    std::vector<GroupElement> doubled(coset.begin(), coset.end());
    doubled.push_back(coset[1]);
    CHECK(recovers_stabilizer(GroupSet(doubled), c3));
    CHECK_FALSE(recovers_stabilizer(GroupSet({so2_rotation(0.9)}), c3));
    const GroupSet wrong({so2_rotation(0.0), so2_rotation(1.0), so2_rotation(2.0)});
    CHECK_FALSE(recovers_stabilizer(wrong, c3));
}

TEST_CASE("metrics csv contract") {
    CHECK(metrics_csv_header() == "dataset,model,N,lambda,seed,hit_rate,disentanglement,entropy,stabilizer_recovery");
    MetricsRow row{"rotating-arrows", "equin5", 5, 1.0, 2, 0.875, 0.0125, 3.5, 0.9};
    CHECK(metrics_csv_line(row) == "rotating-arrows,equin5,5,1,2,0.875,0.0125,3.5,0.9");
    row.disentanglement = std::numeric_limits<double>::quiet_NaN();
    CHECK(metrics_csv_line(row).find(",nan,") != std::string::npos);

    const fs::path dir = fs::temp_directory_path() / "equin_test_evaluation";
    write_metrics_csv({row, row}, dir / "m.csv");
    std::ifstream in(dir / "m.csv");
    std::string first, second;
    std::getline(in, first);
    std::getline(in, second);
    CHECK(first == "# equin metrics v1");
    CHECK(second == metrics_csv_header());
}

TEST_CASE("embedding export") {
    const Dataset data = small_dataset(DatasetName::RotatingArrows, {"cyclic2"}, 100);
    const OracleRepresentation oracle(data.spec());
    const fs::path path = fs::temp_directory_path() / "equin_test_evaluation" / "emb.csv";
    export_embeddings(oracle, data.evaluation_view(), path);
    std::ifstream in(path);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 1 + data.evaluation_view().size() * 2);
}

}  // TEST_SUITE
