#include "equin/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "equin/error.hpp"

namespace equin {

using nlohmann::json;

DatasetSpec DatasetSection::build() const {
    DatasetSpec spec = dataset_preset(dataset_name_from_tag(preset), seed, feature_dim, noise_sigma);
    if (!stabilizers.empty()) spec = restrict_orbits(spec, stabilizers);
    if (triplets_per_orbit > 0) spec.triplets_per_orbit = triplets_per_orbit;
    spec.validate();
    return spec;
}

EncoderConfig EncoderSection::build(const GroupSpec& group, int input_dim) const {
    EncoderConfig c;
    c.input_dim = input_dim;
    c.trunk_layers = trunk_layers;
    c.activation = activation;
    c.heads = heads;
    c.group = group;
    c.orbit_dim = orbit_dim;
    c.init_seed = init_seed;
    c.shared_trunk = shared_trunk;
    c.validate();
    return c;
}

void RunConfig::validate() const {
    if (dataset.feature_dim < 1) throw ValidationError("config: dataset.feature_dim must be positive");
    if (!(dataset.noise_sigma >= 0.0)) throw ValidationError("config: dataset.noise_sigma must be >= 0");
    if (dataset.triplets_per_orbit < 0) throw ValidationError("config: dataset.triplets_per_orbit must be >= 0");
    dataset_name_from_tag(dataset.preset);
    for (const auto& s : dataset.stabilizers) FiniteSubgroupSpec::from_tag(s);
    encoder.build(GroupSpec::so2(), dataset.feature_dim);
    train.validate();
    if (checkpoint_every < 0) throw ValidationError("config: checkpoint_every must be >= 0");
    hit_rate.validate();
    if (disentanglement.pairs < 1 || disentanglement.fit_pairs < 1)
        throw ValidationError("config: disentanglement pair counts must be positive");
    for (int n : sweep.heads)
        if (n < 1) throw ValidationError("config: sweep.heads entries must be >= 1");
    for (double l : sweep.lambdas)
        if (!(l >= 0.0)) throw ValidationError("config: sweep.lambda entries must be >= 0");
    if (output_dir.empty()) throw ValidationError("config: output_dir must not be empty");
}

namespace {

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ValidationError("config: '" + where + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
            throw ValidationError("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::string activation_tag(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation activation_from_tag(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    throw ValidationError("config: unknown activation '" + s + "'");
}

}  // namespace

RunConfig RunConfig::from_json(const std::string& text) {
    RunConfig c;
    try {
        const json root = json::parse(text);
        only_keys(root, "", {"dataset", "encoder", "train", "checkpoint_every", "eval", "sweep", "output_dir"});
        if (root.contains("dataset")) {
            const json& d = root["dataset"];
            only_keys(d, "dataset",
                      {"preset", "seed", "feature_dim", "noise_sigma", "triplets_per_orbit", "stabilizers"});
            read(d, "preset", c.dataset.preset);
            read(d, "seed", c.dataset.seed);
            read(d, "feature_dim", c.dataset.feature_dim);
            read(d, "noise_sigma", c.dataset.noise_sigma);
            read(d, "triplets_per_orbit", c.dataset.triplets_per_orbit);
            read(d, "stabilizers", c.dataset.stabilizers);
        }
        if (root.contains("encoder")) {
            const json& e = root["encoder"];
            only_keys(e, "encoder", {"heads", "trunk_layers", "activation", "orbit_dim", "init_seed", "shared_trunk"});
            read(e, "heads", c.encoder.heads);
            read(e, "trunk_layers", c.encoder.trunk_layers);
            if (e.contains("activation")) c.encoder.activation = activation_from_tag(e["activation"].get<std::string>());
            read(e, "orbit_dim", c.encoder.orbit_dim);
            read(e, "init_seed", c.encoder.init_seed);
            read(e, "shared_trunk", c.encoder.shared_trunk);
        }
        if (root.contains("train")) {
            const json& t = root["train"];
            only_keys(t, "train",
                      {"epochs", "batch_size", "learning_rate", "weight_decay", "lambda", "infonce_negatives",
                       "seed"});
            read(t, "epochs", c.train.epochs);
            read(t, "batch_size", c.train.batch_size);
            read(t, "learning_rate", c.train.learning_rate);
            read(t, "weight_decay", c.train.weight_decay);
            read(t, "lambda", c.train.lambda);
            read(t, "infonce_negatives", c.train.infonce_negatives);
            read(t, "seed", c.train.seed);
        }
        read(root, "checkpoint_every", c.checkpoint_every);
        if (root.contains("eval")) {
            const json& e = root["eval"];
            only_keys(e, "eval", {"hit_rate", "disentanglement"});
            if (e.contains("hit_rate")) {
                const json& h = e["hit_rate"];
                only_keys(h, "eval.hit_rate", {"batch_size", "trials", "seed"});
                read(h, "batch_size", c.hit_rate.batch_size);
                read(h, "trials", c.hit_rate.trials);
                read(h, "seed", c.hit_rate.seed);
            }
            if (e.contains("disentanglement")) {
                const json& d = e["disentanglement"];
                only_keys(d, "eval.disentanglement", {"pairs", "fit_pairs", "seed"});
                read(d, "pairs", c.disentanglement.pairs);
                read(d, "fit_pairs", c.disentanglement.fit_pairs);
                read(d, "seed", c.disentanglement.seed);
            }
        }
        if (root.contains("sweep")) {
            const json& s = root["sweep"];
            only_keys(s, "sweep", {"heads", "lambda", "seeds"});
            read(s, "heads", c.sweep.heads);
            read(s, "lambda", c.sweep.lambdas);
            read(s, "seeds", c.sweep.seeds);
        }
        read(root, "output_dir", c.output_dir);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

std::string RunConfig::to_json() const {
    json j;
    j["dataset"] = {{"preset", dataset.preset},
                    {"seed", dataset.seed},
                    {"feature_dim", dataset.feature_dim},
                    {"noise_sigma", dataset.noise_sigma},
                    {"triplets_per_orbit", dataset.triplets_per_orbit},
                    {"stabilizers", dataset.stabilizers}};
    j["encoder"] = {{"heads", encoder.heads},
                    {"trunk_layers", encoder.trunk_layers},
                    {"activation", activation_tag(encoder.activation)},
                    {"orbit_dim", encoder.orbit_dim},
                    {"init_seed", encoder.init_seed},
                    {"shared_trunk", encoder.shared_trunk}};
    j["train"] = {{"epochs", train.epochs},
                  {"batch_size", train.batch_size},
                  {"learning_rate", train.learning_rate},
                  {"weight_decay", train.weight_decay},
                  {"lambda", train.lambda},
                  {"infonce_negatives", train.infonce_negatives},
                  {"seed", train.seed}};
    j["checkpoint_every"] = checkpoint_every;
    j["eval"] = {{"hit_rate", {{"batch_size", hit_rate.batch_size}, {"trials", hit_rate.trials}, {"seed", hit_rate.seed}}},
                 {"disentanglement",
                  {{"pairs", disentanglement.pairs},
                   {"fit_pairs", disentanglement.fit_pairs},
                   {"seed", disentanglement.seed}}}};
    j["sweep"] = {{"heads", sweep.heads}, {"lambda", sweep.lambdas}, {"seeds", sweep.seeds}};
    j["output_dir"] = output_dir;
    return j.dump(2);
}

}  // namespace equin
