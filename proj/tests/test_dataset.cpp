#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include <doctest.h>

#include "equin/binary_io.hpp"
#include "equin/dataset.hpp"
#include "equin/error.hpp"
#include "equin/set_metrics.hpp"

using namespace equin;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

OrbitSpec so2_orbit(int nu, int dim = 32) {
    return OrbitSpec{GroupSpec::so2(), FiniteSubgroupSpec::cyclic(nu), 0, dim, 17, 1};
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "equin_test_dataset";
    fs::create_directories(dir);
    return dir / name;
}

DatasetSpec small_spec(std::uint64_t seed, double noise = 0.01) {
    DatasetSpec spec = dataset_preset(DatasetName::RotatingArrows, seed, 32, noise);
    spec.triplets_per_orbit = 40;
    return spec;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("presets follow the orbit tables") {
    const auto arrows = dataset_preset(DatasetName::RotatingArrows, 0);
    CHECK(arrows.orbits.size() == 5);
    CHECK(arrows.triplets_per_orbit == 2500);
    for (int i = 0; i < 5; ++i) CHECK(arrows.orbits[static_cast<std::size_t>(i)].stabilizer.order() == i + 1);

    const auto colored = dataset_preset(DatasetName::ColoredArrows, 0);
    CHECK(colored.orbits.size() == 25);
    CHECK(colored.triplets_per_orbit == 2000);

    const auto dbl = dataset_preset(DatasetName::DoubleArrows, 0);
    REQUIRE(dbl.orbits.size() == 2);
    CHECK(dbl.group() == GroupSpec::torus(2));
    CHECK(dbl.orbits[0].stabilizer == FiniteSubgroupSpec::cyclic_product(2, 3));
    CHECK(dbl.orbits[1].stabilizer == FiniteSubgroupSpec::cyclic_product(3, 5));

    const auto mn = dataset_preset(DatasetName::ModelNetLike, 0);
    REQUIRE(mn.orbits.size() == 5);
    std::vector<int> orders;
    for (const auto& o : mn.orbits) orders.push_back(o.stabilizer.order());
    CHECK(orders == std::vector<int>{4, 4, 4, 1, 1});

    const auto solids = dataset_preset(DatasetName::Solids, 0);
    REQUIRE(solids.orbits.size() == 3);
    CHECK(solids.triplets_per_orbit == 7500);
    CHECK(solids.orbits[2].stabilizer.order() == 60);
}

TEST_CASE("preset tags round trip") {
    for (auto n : {DatasetName::RotatingArrows, DatasetName::ColoredArrows, DatasetName::DoubleArrows,
                   DatasetName::ModelNetLike, DatasetName::Solids}) {
        CHECK(dataset_name_from_tag(dataset_name_tag(n)) == n);
    }
    CHECK_THROWS_AS(dataset_name_from_tag("mnist"), ValidationError);
}

TEST_CASE("restricting orbits renumbers them") {
    const auto r = restrict_orbits(dataset_preset(DatasetName::RotatingArrows, 0), {"cyclic3"});
    REQUIRE(r.orbits.size() == 1);
    CHECK(r.orbits[0].orbit_id == 0);
    CHECK(r.orbits[0].tag_width == 1);
    CHECK(r.orbits[0].stabilizer.order() == 3);
    CHECK_THROWS_AS(restrict_orbits(dataset_preset(DatasetName::RotatingArrows, 0), {"cyclic7"}), ValidationError);
}

TEST_CASE("embedding examples") {
    const auto free = so2_orbit(1);
    CHECK((embed(free, so2_rotation(0.0)) - embed(free, so2_rotation(kPi))).norm() > 1e-3);

    const auto c4 = so2_orbit(4);
    const double theta = 0.83;
    CHECK((embed(c4, so2_rotation(theta)) - embed(c4, so2_rotation(theta + kPi / 2))).cwiseAbs().maxCoeff() < 1e-12);

    CHECK_THROWS_AS(embed(c4, identity(GroupSpec::so3())), SpecMismatch);
}

TEST_CASE("stabilizer invariance holds for every orbit kind") {
    RandomStream rng(1);
    std::vector<OrbitSpec> orbits;
    for (const auto& spec : {dataset_preset(DatasetName::RotatingArrows, 3), dataset_preset(DatasetName::DoubleArrows, 3),
                             dataset_preset(DatasetName::Solids, 3)}) {
        orbits.insert(orbits.end(), spec.orbits.begin(), spec.orbits.end());
    }
    for (const auto& orbit : orbits) {
        const OrbitEmbedder e(orbit);
        const auto stab = enumerate_subgroup(orbit.stabilizer);
        for (int trial = 0; trial < 5; ++trial) {
            const auto p = sample_haar(orbit.group, rng);
            const Eigen::VectorXd base = e.embed(p);
            for (const auto& h : stab) CHECK((e.embed(compose(p, h)) - base).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("tetrahedral orbit separates a non-stabilizing rotation") {
    const auto spec = dataset_preset(DatasetName::Solids, 5);
    const OrbitEmbedder e(spec.orbits[0]);
    const auto stab = enumerate_subgroup(spec.orbits[0].stabilizer);
    REQUIRE(stab.size() == 12);
    RandomStream rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = sample_haar(GroupSpec::so3(), rng);
        const auto r = sample_haar(GroupSpec::so3(), rng);
        CHECK((e.embed(compose(p, r)) - e.embed(p)).norm() >= 1e-3);
    }
}

TEST_CASE("embedding is injective on the cosets") {
    RandomStream rng(7);
    for (const auto& orbit : dataset_preset(DatasetName::RotatingArrows, 1).orbits) {
        const OrbitEmbedder e(orbit);
        const auto stab = enumerate_subgroup(orbit.stabilizer);
        for (int i = 0; i < 200; ++i) {
            const auto p = sample_haar(orbit.group, rng);
            const auto q = sample_haar(orbit.group, rng);
            // cosets p H compared through the two-sided chamfer
            std::vector<GroupElement> rp, rq;
            for (const auto& h : stab) rp.push_back(compose(p, h)), rq.push_back(compose(q, h));
            const double gap = std::max(chamfer(GroupSet(rp), GroupSet(rq)).value, chamfer(GroupSet(rq), GroupSet(rp)).value);
            if (gap > 1e-2) CHECK((e.embed(p) - e.embed(q)).norm() > 1e-4);
        }
    }
}

TEST_CASE("sample_triplet examples") {
    auto spec = small_spec(2, 0.0);
    spec.orbits = {so2_orbit(2)};
    const OrbitEmbedder e(spec.orbits[0]);
    RandomStream rng(3);
    for (int i = 0; i < 20; ++i) {
        const Triplet t = sample_triplet(spec, e, rng);
        CHECK(metric_dG(t.y.pose, compose(t.g, t.x.pose)) < 1e-20);
        CHECK((t.y.features - e.embed(t.y.pose)).norm() < 1e-12);
        CHECK((e.embed(compose(identity(GroupSpec::so2()), t.x.pose)) - t.x.features).norm() < 1e-12);
        CHECK((e.embed(compose(so2_rotation(kPi), t.x.pose)) - t.x.features).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(t.x.orbit_id == t.y.orbit_id);
    }
}

TEST_CASE("sampled symmetries are Haar distributed") {
    auto spec = small_spec(2, 0.0);
    spec.orbits = {so2_orbit(1)};
    const OrbitEmbedder e(spec.orbits[0]);
    RandomStream rng(4);
    const int n = 10000;
    std::vector<double> u;
    for (int i = 0; i < n; ++i) u.push_back(sample_triplet(spec, e, rng).g.params()(0) / (2 * kPi));
    std::sort(u.begin(), u.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        ks = std::max(ks, std::abs(u[static_cast<std::size_t>(i)] - static_cast<double>(i) / n));
        ks = std::max(ks, std::abs(u[static_cast<std::size_t>(i)] - static_cast<double>(i + 1) / n));
    }
    // Kolmogorov critical value at the 1% level.
    CHECK(ks < 1.628 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("generation counts, split and determinism") {
    const auto spec = small_spec(9);
    const Dataset a = generate_dataset(spec);
    const Dataset b = generate_dataset(spec);
    CHECK(a.size() == 5 * 40);
    CHECK(a.evaluation_view().size() == 5 * 4);
    CHECK(a.training_view().size() == 5 * 36);
    CHECK(a.training_view(Split::All).size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.triplets()[i].x.features == b.triplets()[i].x.features);
        CHECK(a.triplets()[i].g.params() == b.triplets()[i].g.params());
    }
    const Dataset c = generate_dataset(small_spec(10));
    CHECK(a.triplets()[0].x.features != c.triplets()[0].x.features);
}

TEST_CASE("noise-free datasets re-embed from the stored poses") {
    const Dataset d = generate_dataset(small_spec(1, 0.0));
    for (const auto& t : d.triplets()) {
        const auto& orbit = d.spec().orbits[static_cast<std::size_t>(t.x.orbit_id)];
        CHECK((embed(orbit, t.x.pose) - t.x.features).norm() < 1e-12);
        CHECK((embed(orbit, t.y.pose) - t.y.features).norm() < 1e-12);
    }
}

TEST_CASE("file round trip is exact and byte identical") {
    const auto spec = small_spec(5);
    const Dataset d = generate_dataset(spec);
    save_dataset(d, scratch("a.eqin"));
    save_dataset(generate_dataset(spec), scratch("b.eqin"));
    CHECK(io::read_file(scratch("a.eqin")) == io::read_file(scratch("b.eqin")));
    CHECK(file_crc(scratch("a.eqin")) == file_crc(scratch("b.eqin")));

    const Dataset back = load_dataset(scratch("a.eqin"));
    REQUIRE(back.size() == d.size());
    CHECK(back.spec().orbits.size() == d.spec().orbits.size());
    CHECK(back.spec().noise_sigma == d.spec().noise_sigma);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const Triplet& p = d.triplets()[i];
        const Triplet& q = back.triplets()[i];
        CHECK(p.x.features == q.x.features);
        CHECK(p.y.features == q.y.features);
        CHECK(p.g.params() == q.g.params());
        CHECK(p.x.pose.params() == q.x.pose.params());
        CHECK(p.test == q.test);
        CHECK(p.x.orbit_id == q.x.orbit_id);
    }
}

TEST_CASE("corrupt files are rejected") {
    save_dataset(generate_dataset(small_spec(6)), scratch("c.eqin"));
    const std::string bytes = io::read_file(scratch("c.eqin"));

    io::write_file(scratch("trunc.eqin"), std::string_view(bytes).substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_dataset(scratch("trunc.eqin")), FormatError);

    std::string flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x10;
    io::write_file(scratch("flip.eqin"), flipped);
    CHECK_THROWS_AS(load_dataset(scratch("flip.eqin")), ChecksumError);

    std::string versioned = bytes;
    versioned[4] = 9;
    io::write_file(scratch("ver.eqin"), versioned);
    CHECK_THROWS_AS(load_dataset(scratch("ver.eqin")), VersionError);

    std::string magic = bytes;
    magic[0] = 'X';
    io::write_file(scratch("magic.eqin"), magic);
    CHECK_THROWS_AS(load_dataset(scratch("magic.eqin")), FormatError);

    CHECK_THROWS_AS(load_dataset(scratch("missing.eqin")), IoError);
}

TEST_CASE("csv export has one line per triplet") {
    const Dataset d = generate_dataset(small_spec(7));
    export_dataset_csv(d, scratch("d.csv"));
    std::ifstream in(scratch("d.csv"));
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == d.size() + 1);
    CHECK(dataset_summary(d).find("cyclic5") != std::string::npos);
}

TEST_CASE("crc32 reference value") {
    // Standard check value of CRC-32/ISO-HDLC.
    CHECK(io::crc32("123456789") == 0xCBF43926u);
}

}  // TEST_SUITE
