#include "equin/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "equin/binary_io.hpp"
#include "equin/error.hpp"

namespace equin {

namespace {

// Width of the hidden invariant layer used for SO(3) orbits.
constexpr int kSo3BaseWidth = 32;

int base_width(const GroupSpec& group) {
    return group.is_torus_like() ? 2 * group.factor_count() : kSo3BaseWidth;
}

std::vector<int> cyclic_orders(const FiniteSubgroupSpec& sub) {
    switch (sub.kind) {
        case SubgroupKind::Cyclic: return {sub.nu1};
        case SubgroupKind::CyclicProduct: return {sub.nu1, sub.nu2};
        default: return {};
    }
}

}  // namespace

std::string dataset_name_tag(DatasetName name) {
    switch (name) {
        case DatasetName::RotatingArrows: return "rotating-arrows";
        case DatasetName::ColoredArrows: return "colored-arrows";
        case DatasetName::DoubleArrows: return "double-arrows";
        case DatasetName::ModelNetLike: return "modelnet-like";
        case DatasetName::Solids: return "solids";
    }
    return "?";
}

DatasetName dataset_name_from_tag(const std::string& tag) {
    for (auto n : {DatasetName::RotatingArrows, DatasetName::ColoredArrows, DatasetName::DoubleArrows,
                   DatasetName::ModelNetLike, DatasetName::Solids}) {
        if (dataset_name_tag(n) == tag) return n;
    }
    throw ValidationError("unknown dataset preset '" + tag + "'");
}

void OrbitSpec::validate() const {
    stabilizer.validate();
    if (!(stabilizer.ambient == group)) {
        throw ValidationError("orbit " + std::to_string(orbit_id) + ": stabilizer " + stabilizer.tag() +
                              " does not live in " + group.tag());
    }
    if (feature_dim < 2 * group.algebra_dim()) {
        throw ValidationError("orbit " + std::to_string(orbit_id) + ": feature_dim must be >= " +
                              std::to_string(2 * group.algebra_dim()));
    }
    if (tag_width < 1 || orbit_id < 0 || orbit_id >= tag_width) {
        throw ValidationError("orbit " + std::to_string(orbit_id) + ": orbit id outside the tag width");
    }
}

void DatasetSpec::validate() const {
    if (orbits.empty()) throw ValidationError("dataset: no orbits");
    if (triplets_per_orbit < 1) throw ValidationError("dataset: triplets_per_orbit must be positive");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw ValidationError("dataset: noise_sigma must be a finite nonnegative number");
    }
    for (std::size_t i = 0; i < orbits.size(); ++i) {
        const auto& o = orbits[i];
        o.validate();
        if (!(o.group == orbits.front().group)) throw ValidationError("dataset: orbits act by different groups");
        if (o.feature_dim != orbits.front().feature_dim) throw ValidationError("dataset: mixed feature_dim");
        if (o.orbit_id != static_cast<int>(i)) throw ValidationError("dataset: orbit ids must be 0..K-1 in order");
        if (o.tag_width != static_cast<int>(orbits.size())) throw ValidationError("dataset: tag width mismatch");
    }
}

DatasetSpec dataset_preset(DatasetName name, std::uint64_t seed, int feature_dim, double noise_sigma) {
    DatasetSpec spec;
    spec.name = name;
    spec.seed = seed;
    spec.noise_sigma = noise_sigma;
    std::vector<std::pair<GroupSpec, FiniteSubgroupSpec>> table;
    switch (name) {
        case DatasetName::RotatingArrows:
            for (int nu = 1; nu <= 5; ++nu) table.emplace_back(GroupSpec::so2(), FiniteSubgroupSpec::cyclic(nu));
            spec.triplets_per_orbit = 2500;
            break;
        case DatasetName::ColoredArrows:
            for (int color = 0; color < 5; ++color)
                for (int nu = 1; nu <= 5; ++nu) table.emplace_back(GroupSpec::so2(), FiniteSubgroupSpec::cyclic(nu));
            spec.triplets_per_orbit = 2000;
            break;
        case DatasetName::DoubleArrows:
            table.emplace_back(GroupSpec::torus(2), FiniteSubgroupSpec::cyclic_product(2, 3));
            table.emplace_back(GroupSpec::torus(2), FiniteSubgroupSpec::cyclic_product(3, 5));
            spec.triplets_per_orbit = 2000;
            break;
        case DatasetName::ModelNetLike:
            for (int nu : {4, 4, 4, 1, 1}) table.emplace_back(GroupSpec::so2(), FiniteSubgroupSpec::cyclic(nu));
            spec.triplets_per_orbit = 2500;
            break;
        case DatasetName::Solids:
            table.emplace_back(GroupSpec::so3(), FiniteSubgroupSpec::tetrahedral());
            table.emplace_back(GroupSpec::so3(), FiniteSubgroupSpec::octahedral());
            table.emplace_back(GroupSpec::so3(), FiniteSubgroupSpec::icosahedral());
            spec.triplets_per_orbit = 7500;
            break;
    }
    const int width = static_cast<int>(table.size());
    for (int i = 0; i < width; ++i) {
        spec.orbits.push_back(OrbitSpec{table[static_cast<std::size_t>(i)].first,
                                        table[static_cast<std::size_t>(i)].second, i, feature_dim, seed, width});
    }
    spec.validate();
    return spec;
}

DatasetSpec restrict_orbits(const DatasetSpec& spec, const std::vector<std::string>& stabilizer_tags) {
    DatasetSpec out = spec;
    out.orbits.clear();
    for (const auto& o : spec.orbits) {
        for (const auto& t : stabilizer_tags) {
            if (o.stabilizer.tag() == t) {
                out.orbits.push_back(o);
                break;
            }
        }
    }
    if (out.orbits.empty()) throw ValidationError("restrict_orbits: no orbit matches the requested stabilizers");
    const int width = static_cast<int>(out.orbits.size());
    for (int i = 0; i < width; ++i) {
        out.orbits[static_cast<std::size_t>(i)].orbit_id = i;
        out.orbits[static_cast<std::size_t>(i)].tag_width = width;
    }
    out.validate();
    return out;
}

// ------------------------------------------------------------ OrbitEmbedder

OrbitEmbedder::OrbitEmbedder(const OrbitSpec& spec) : spec_(spec) {
    spec_.validate();
    // The random maps depend only on (embed_seed, widths) so orbits of one
    // dataset share them and differ through the orbit tag.
    RandomStream rng = RandomStream(spec_.embed_seed).fork(0x656d626564ull);
    const int base = base_width(spec_.group);
    if (!spec_.group.is_torus_like()) {
        for (const auto& h : enumerate_subgroup(spec_.stabilizer)) stabilizer_.push_back(h.matrix());
        so3_weights_.resize(kSo3BaseWidth, 9);
        for (Eigen::Index i = 0; i < so3_weights_.size(); ++i) so3_weights_.data()[i] = rng.normal();
    }
    const int in = base + spec_.tag_width;
    affine_.resize(spec_.feature_dim, in);
    for (Eigen::Index i = 0; i < affine_.size(); ++i) affine_.data()[i] = rng.normal();
    offset_.resize(spec_.feature_dim);
    for (Eigen::Index i = 0; i < offset_.size(); ++i) offset_(i) = rng.normal(0.0, 0.1);
}

Eigen::VectorXd OrbitEmbedder::base_features(const GroupElement& pose) const {
    if (!(pose.spec() == spec_.group)) throw SpecMismatch("embed: pose does not belong to the orbit's group");
    if (spec_.group.is_torus_like()) {
        const auto orders = cyclic_orders(spec_.stabilizer);
        Eigen::VectorXd f(2 * spec_.group.factor_count());
        for (int t = 0; t < spec_.group.factor_count(); ++t) {
            const double nu = orders[static_cast<std::size_t>(t)];
            const double theta = pose.params()(spec_.group.layout()[static_cast<std::size_t>(t)].param_offset);
            f(2 * t) = std::cos(nu * theta);
            f(2 * t + 1) = std::sin(nu * theta);
        }
        return f;
    }
    // Mean over the stabilizer of a random tanh layer on vec(pose * h).
    Eigen::VectorXd f = Eigen::VectorXd::Zero(kSo3BaseWidth);
    const Eigen::Matrix3d p = pose.matrix();
    for (const auto& h : stabilizer_) {
        const Eigen::Matrix3d ph = p * h;
        const Eigen::Map<const Eigen::Matrix<double, 9, 1>> flat(ph.data());
        f += (so3_weights_ * flat).array().tanh().matrix();
    }
    return f / static_cast<double>(stabilizer_.size());
}

Eigen::VectorXd OrbitEmbedder::embed(const GroupElement& pose) const {
    const Eigen::VectorXd base = base_features(pose);
    Eigen::VectorXd in = Eigen::VectorXd::Zero(base.size() + spec_.tag_width);
    in.head(base.size()) = base;
    in(base.size() + spec_.orbit_id) = 1.0;
    return affine_ * in + offset_;
}

Eigen::VectorXd embed(const OrbitSpec& spec, const GroupElement& pose, double noise_sigma, RandomStream* rng) {
    Eigen::VectorXd f = OrbitEmbedder(spec).embed(pose);
    if (noise_sigma > 0.0) {
        if (!rng) throw ValidationError("embed: noise requested without a random stream");
        for (Eigen::Index i = 0; i < f.size(); ++i) f(i) += rng->normal(0.0, noise_sigma);
    }
    return f;
}

Triplet sample_triplet(const DatasetSpec& spec, const OrbitEmbedder& orbit, RandomStream& rng) {
    const GroupSpec& group = orbit.spec().group;
    GroupElement x_pose = sample_haar(group, rng);
    GroupElement g = sample_haar(group, rng);
    GroupElement y_pose = compose(g, x_pose);
    auto noisy = [&](const GroupElement& pose) {
        Eigen::VectorXd f = orbit.embed(pose);
        if (spec.noise_sigma > 0.0)
            for (Eigen::Index i = 0; i < f.size(); ++i) f(i) += rng.normal(0.0, spec.noise_sigma);
        return f;
    };
    Eigen::VectorXd xf = noisy(x_pose);
    Eigen::VectorXd yf = noisy(y_pose);
    const int id = orbit.spec().orbit_id;
    return Triplet{Datapoint{std::move(xf), id, std::move(x_pose)}, std::move(g),
                   Datapoint{std::move(yf), id, std::move(y_pose)}, false};
}

Triplet sample_triplet(const DatasetSpec& spec, const OrbitSpec& orbit, RandomStream& rng) {
    return sample_triplet(spec, OrbitEmbedder(orbit), rng);
}

// ------------------------------------------------------------------ Dataset

Dataset::Dataset(DatasetSpec spec, std::vector<Triplet> triplets)
    : spec_(std::move(spec)), triplets_(std::move(triplets)) {
    spec_.validate();
    for (const auto& t : triplets_) {
        if (t.x.orbit_id < 0 || t.x.orbit_id >= static_cast<int>(spec_.orbits.size()) || t.x.orbit_id != t.y.orbit_id) {
            throw ValidationError("dataset: triplet with invalid orbit id");
        }
        if (t.x.features.size() != spec_.feature_dim() || t.y.features.size() != spec_.feature_dim()) {
            throw ValidationError("dataset: feature length mismatch");
        }
    }
}

std::vector<std::size_t> Dataset::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < triplets_.size(); ++i) {
        if (split == Split::All || (split == Split::Test) == triplets_[i].test) out.push_back(i);
    }
    return out;
}

TrainingView Dataset::training_view(Split split) const { return TrainingView(this, indices(split)); }
EvaluationView Dataset::evaluation_view(Split split) const { return EvaluationView(this, indices(split)); }

TrainingView::Sample TrainingView::operator[](std::size_t i) const {
    const Triplet& t = data_->triplets()[indices_[i]];
    return Sample{t.x.features, t.g, t.y.features};
}
const GroupSpec& TrainingView::group() const { return data_->spec().group(); }
int TrainingView::feature_dim() const { return data_->spec().feature_dim(); }

const Triplet& EvaluationView::operator[](std::size_t i) const { return data_->triplets()[indices_[i]]; }
const DatasetSpec& EvaluationView::spec() const { return data_->spec(); }
const OrbitSpec& EvaluationView::orbit(int orbit_id) const {
    return data_->spec().orbits.at(static_cast<std::size_t>(orbit_id));
}

Dataset generate_dataset(const DatasetSpec& spec) {
    spec.validate();
    std::vector<Triplet> triplets;
    triplets.reserve(spec.orbits.size() * static_cast<std::size_t>(spec.triplets_per_orbit));
    const RandomStream root(spec.seed);
    const int n_test = spec.triplets_per_orbit / 10;
    for (std::size_t o = 0; o < spec.orbits.size(); ++o) {
        RandomStream rng = root.fork(o + 1);
        const OrbitEmbedder embedder(spec.orbits[o]);
        for (int i = 0; i < spec.triplets_per_orbit; ++i) {
            Triplet t = sample_triplet(spec, embedder, rng);
            t.test = i >= spec.triplets_per_orbit - n_test;
            triplets.push_back(std::move(t));
        }
    }
    return Dataset(spec, std::move(triplets));
}

// ---------------------------------------------------------------------- I/O

namespace {

constexpr char kMagic[4] = {'E', 'Q', 'I', 'N'};

void put_vector(io::ByteWriter& w, const Eigen::VectorXd& v) {
    w.put_doubles(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

Eigen::VectorXd get_vector(io::ByteReader& r, int n) {
    Eigen::VectorXd v(n);
    r.get_doubles(std::span<double>(v.data(), static_cast<std::size_t>(n)));
    return v;
}

}  // namespace

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    const DatasetSpec& spec = data.spec();
    io::ByteWriter w;
    w.put_bytes(std::string_view(kMagic, 4));
    w.put<std::uint32_t>(kDatasetVersion);
    w.put_string(dataset_name_tag(spec.name));
    w.put<std::uint64_t>(spec.seed);
    w.put<double>(spec.noise_sigma);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.triplets_per_orbit));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.orbits.size()));
    for (const auto& o : spec.orbits) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(o.orbit_id));
        w.put_string(o.group.tag());
        w.put_string(o.stabilizer.tag());
        w.put<std::uint32_t>(static_cast<std::uint32_t>(o.stabilizer.order()));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(o.feature_dim));
        w.put<std::uint64_t>(o.embed_seed);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(o.tag_width));
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.group().param_count()));
    w.put<std::uint64_t>(data.size());
    for (const auto& t : data.triplets()) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.x.orbit_id));
        put_vector(w, t.x.features);
        put_vector(w, t.g.params());
        put_vector(w, t.y.features);
        put_vector(w, t.x.pose.params());
        put_vector(w, t.y.pose.params());
        w.put<std::uint8_t>(t.test ? 1 : 0);
    }
    w.seal();
    io::write_file(path, w.bytes());
}

Dataset load_dataset(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    io::ByteReader head(bytes);
    if (bytes.size() < 8 || head.get_bytes(4) != std::string_view(kMagic, 4)) {
        throw FormatError("'" + path.string() + "' is not a dataset file (bad magic)");
    }
    const auto version = head.get<std::uint32_t>();
    if (version != kDatasetVersion) {
        throw VersionError("dataset version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kDatasetVersion) + ")");
    }
    io::ByteReader r(io::verify_sealed(bytes));
    r.get_bytes(8);

    DatasetSpec spec;
    try {
        spec.name = dataset_name_from_tag(r.get_string());
        spec.seed = r.get<std::uint64_t>();
        spec.noise_sigma = r.get<double>();
        spec.triplets_per_orbit = static_cast<int>(r.get<std::uint32_t>());
        const auto n_orbits = r.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < n_orbits; ++i) {
            const auto id = static_cast<int>(r.get<std::uint32_t>());
            GroupSpec group = GroupSpec::from_tag(r.get_string());
            FiniteSubgroupSpec stab = FiniteSubgroupSpec::from_tag(r.get_string());
            const auto order = static_cast<int>(r.get<std::uint32_t>());
            if (order != stab.order()) throw FormatError("orbit table: stabilizer order mismatch");
            const auto dim = static_cast<int>(r.get<std::uint32_t>());
            const auto embed_seed = r.get<std::uint64_t>();
            const auto width = static_cast<int>(r.get<std::uint32_t>());
            spec.orbits.push_back(OrbitSpec{std::move(group), std::move(stab), id, dim, embed_seed, width});
        }
        spec.validate();
    } catch (const ValidationError& e) {
        throw FormatError(std::string("malformed dataset header: ") + e.what());
    }
    const int k = static_cast<int>(r.get<std::uint32_t>());
    if (k != spec.group().param_count()) throw FormatError("malformed dataset header: parameter count mismatch");
    const auto count = r.get<std::uint64_t>();
    const int d = spec.feature_dim();
    const std::size_t record = 4 + 8 * (2 * static_cast<std::size_t>(d) + 3 * static_cast<std::size_t>(k)) + 1;
    if (count > r.remaining() / record || r.remaining() != count * record) {
        throw FormatError("dataset body length does not match the record count");
    }
    const GroupSpec group = spec.group();
    std::vector<Triplet> triplets;
    triplets.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto id = static_cast<int>(r.get<std::uint32_t>());
        Eigen::VectorXd xf = get_vector(r, d);
        GroupElement g(group, get_vector(r, k));
        Eigen::VectorXd yf = get_vector(r, d);
        GroupElement xp(group, get_vector(r, k));
        GroupElement yp(group, get_vector(r, k));
        const bool test = r.get<std::uint8_t>() != 0;
        triplets.push_back(Triplet{Datapoint{std::move(xf), id, std::move(xp)}, std::move(g),
                                   Datapoint{std::move(yf), id, std::move(yp)}, test});
    }
    try {
        return Dataset(std::move(spec), std::move(triplets));
    } catch (const ValidationError& e) {
        throw FormatError(std::string("malformed dataset body: ") + e.what());
    }
}

std::uint32_t file_crc(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    if (bytes.size() < 4) throw FormatError("file too short");
    std::uint32_t crc = 0;
    std::memcpy(&crc, bytes.data() + bytes.size() - 4, 4);
    return crc;
}

void export_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    const int d = data.spec().feature_dim();
    const int k = data.spec().group().param_count();
    out << "index,orbit_id,split";
    auto cols = [&](const char* prefix, int n) {
        for (int i = 0; i < n; ++i) out << ',' << prefix << i;
    };
    cols("x_f", d);
    cols("g_p", k);
    cols("y_f", d);
    cols("x_pose_p", k);
    cols("y_pose_p", k);
    out << '\n' << std::setprecision(17);
    auto vals = [&](const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << v(i);
    };
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Triplet& t = data.triplets()[i];
        out << i << ',' << t.x.orbit_id << ',' << (t.test ? "test" : "train");
        vals(t.x.features);
        vals(t.g.params());
        vals(t.y.features);
        vals(t.x.pose.params());
        vals(t.y.pose.params());
        out << '\n';
    }
    if (!out) throw IoError("write failure on '" + path.string() + "'");
}

std::string dataset_summary(const Dataset& data) {
    const DatasetSpec& spec = data.spec();
    std::ostringstream s;
    s << "dataset: " << dataset_name_tag(spec.name) << "\n"
      << "group: " << spec.group().tag() << "\n"
      << "seed: " << spec.seed << "\n"
      << "feature_dim: " << spec.feature_dim() << "\n"
      << "noise_sigma: " << spec.noise_sigma << "\n"
      << "orbits: " << spec.orbits.size() << "\n"
      << "  id  stabilizer      order  triplets  test\n";
    for (const auto& o : spec.orbits) {
        std::size_t n = 0;
        std::size_t n_test = 0;
        for (const auto& t : data.triplets()) {
            if (t.x.orbit_id == o.orbit_id) {
                ++n;
                n_test += t.test ? 1 : 0;
            }
        }
        s << "  " << std::setw(2) << o.orbit_id << "  " << std::left << std::setw(14) << o.stabilizer.tag()
          << std::right << std::setw(7) << o.stabilizer.order() << std::setw(10) << n << std::setw(6) << n_test
          << "\n";
    }
    s << "triplets: " << data.size() << "\n";
    return s.str();
}

}  // namespace equin
