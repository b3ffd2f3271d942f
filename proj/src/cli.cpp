#include "equin/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "equin/error.hpp"

namespace equin::cli {

int exit_code(const std::exception& e) {
    if (dynamic_cast<const NumericalError*>(&e)) return kNumerical;
    if (dynamic_cast<const IoError*>(&e)) return kIo;
    return kValidation;
}

namespace {

std::ofstream open_text(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string());
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::string epoch_line(int epoch, const EpochMetrics& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%.8g,%.8g,%.8g,%.8g", epoch + 1, m.equivariance, m.entropy, m.infonce, m.total);
    return buf;
}

std::string model_tag(int heads) { return heads == 1 ? "baseline" : "equin" + std::to_string(heads); }

// Options shared by commands that may start from a config file.
struct Common {
    std::string config_path;
    RunConfig config;

    void load() {
        if (!config_path.empty()) config = RunConfig::load(config_path);
    }
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace

TrainResult train_to_directory(const Dataset& data, const RunConfig& config, const std::filesystem::path& dir,
                               std::ostream& log) {
    config.validate();
    const EncoderConfig enc = config.encoder.build(data.spec().group(), data.spec().feature_dim());
    {
        std::ofstream snapshot = open_text(dir / "config.json");
        snapshot << config.to_json() << '\n';
    }
    std::ofstream metrics = open_text(dir / "metrics.csv");
    metrics << "epoch,L_G,entropy,L_O,total\n";
    const auto steps_per_epoch = static_cast<std::uint64_t>(data.training_view().size() /
                                                            static_cast<std::size_t>(config.train.batch_size));
    auto on_epoch = [&](int epoch, const EpochMetrics& m, const Encoder& encoder) {
        const std::string line = epoch_line(epoch, m);
        metrics << line << '\n' << std::flush;
        log << "epoch " << line << '\n';
        if (config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof name, "epoch_%04d.eqck", epoch + 1);
            save_checkpoint(encoder, steps_per_epoch * static_cast<std::uint64_t>(epoch + 1), dir / "checkpoints" / name);
        }
    };
    TrainResult result = train(data.training_view(), enc, config.train, on_epoch);
    save_checkpoint(result.encoder, result.report.steps, dir / "final.eqck");
    if (!metrics) throw IoError("write failed: " + (dir / "metrics.csv").string());
    return result;
}

MetricsRow evaluate_metrics(const Representation& rep, const Dataset& data, const RunConfig& config, int heads) {
    const EvaluationView view = data.evaluation_view();
    MetricsRow row;
    row.dataset = dataset_name_tag(data.spec().name);
    row.model = rep.tag();
    row.heads = heads;
    row.lambda = config.train.lambda;
    row.seed = config.train.seed;
    row.hit_rate = hit_rate(rep, view, config.hit_rate);
    row.disentanglement = rep.group().is_torus_like() ? disentanglement(rep, view, config.disentanglement).value
                                                      : std::numeric_limits<double>::quiet_NaN();
    row.entropy = entropy_diagnostic(rep, view);
    row.stabilizer_recovery = stabilizer_recovery(rep, view);
    return row;
}

namespace {

int cmd_generate(Common& common, const std::optional<std::string>& preset, const std::optional<std::uint64_t>& seed,
                 const std::optional<std::string>& stabilizers, const std::optional<int>& per_orbit,
                 const std::optional<double>& noise, const std::string& out_path, const std::string& csv_path,
                 std::ostream& out) {
    common.load();
    RunConfig& c = common.config;
    if (preset) c.dataset.preset = *preset;
    if (seed) c.dataset.seed = *seed;
    if (stabilizers) c.dataset.stabilizers = split_list(*stabilizers);
    if (per_orbit) c.dataset.triplets_per_orbit = *per_orbit;
    if (noise) c.dataset.noise_sigma = *noise;
    c.validate();
    const Dataset data = generate_dataset(c.dataset.build());
    save_dataset(data, out_path);
    const std::string summary = dataset_summary(data);
    {
        std::ofstream s = open_text(out_path + ".summary.txt");
        s << summary;
    }
    if (!csv_path.empty()) export_dataset_csv(data, csv_path);
    char crc[16];
    std::snprintf(crc, sizeof crc, "%08x", file_crc(out_path));
    out << summary << "wrote " << out_path << " (crc32 " << crc << ")\n";
    return kSuccess;
}

int cmd_train(Common& common, const std::string& data_path, const std::optional<int>& heads,
              const std::optional<double>& lambda, const std::optional<int>& epochs, const std::optional<double>& lr,
              const std::optional<int>& batch, const std::optional<std::uint64_t>& seed,
              const std::optional<int>& checkpoint_every, const std::string& out_dir, std::ostream& out) {
    common.load();
    RunConfig& c = common.config;
    if (heads) c.encoder.heads = *heads;
    if (lambda) c.train.lambda = *lambda;
    if (epochs) c.train.epochs = *epochs;
    if (lr) c.train.learning_rate = *lr;
    if (batch) c.train.batch_size = *batch;
    if (seed) {
        c.train.seed = *seed;
        c.encoder.init_seed = *seed;
    }
    if (checkpoint_every) c.checkpoint_every = *checkpoint_every;
    if (!out_dir.empty()) c.output_dir = out_dir;
    c.validate();
    const Dataset data = load_dataset(data_path);
    const TrainResult r = train_to_directory(data, c, c.output_dir, out);
    char buf[128];
    std::snprintf(buf, sizeof buf, "trained %llu steps in %.1f s; final L_G %.4f\n",
                  static_cast<unsigned long long>(r.report.steps), r.report.wall_seconds,
                  r.report.epochs.back().equivariance);
    out << buf << "run directory: " << c.output_dir << '\n';
    return kSuccess;
}

int cmd_eval(Common& common, const std::string& data_path, const std::string& checkpoint, const std::string& reference,
             const std::optional<int>& heads, const std::string& metrics_path, const std::string& embeddings_path,
             std::ostream& out) {
    if (common.config_path.empty() && !checkpoint.empty()) {
        // A checkpoint inside a run directory brings its own config snapshot.
        std::filesystem::path dir = std::filesystem::path(checkpoint).parent_path();
        if (dir.filename() == "checkpoints") dir = dir.parent_path();
        if (std::filesystem::exists(dir / "config.json")) common.config_path = (dir / "config.json").string();
    }
    common.load();
    if (checkpoint.empty() == reference.empty())
        throw ValidationError("eval: give exactly one of --checkpoint and --reference");
    const Dataset data = load_dataset(data_path);
    std::optional<Checkpoint> ckpt;
    std::unique_ptr<Representation> rep;
    int n = heads.value_or(common.config.encoder.heads);
    if (!checkpoint.empty()) {
        if (!std::filesystem::exists(checkpoint)) throw ValidationError("eval: checkpoint not found: " + checkpoint);
        ckpt = load_checkpoint(checkpoint);
        const EncoderConfig& ec = ckpt->encoder.config();
        if (!(ec.group == data.spec().group()))
            throw SpecMismatch("eval: checkpoint group " + ec.group.tag() + " does not match dataset group " +
                               data.spec().group().tag());
        if (ec.input_dim != data.spec().feature_dim())
            throw ValidationError("eval: checkpoint input_dim does not match the dataset feature dimension");
        n = ec.heads;
        rep = std::make_unique<EncoderRepresentation>(ckpt->encoder, model_tag(n));
    } else if (reference == "oracle") {
        rep = std::make_unique<OracleRepresentation>(data.spec());
        n = 0;
        for (const auto& o : data.spec().orbits) n = std::max(n, o.stabilizer.order());
    } else if (reference == "constant") {
        rep = std::make_unique<ConstantRepresentation>(data.spec().group(), n);
    } else {
        throw ValidationError("eval: unknown reference '" + reference + "' (oracle, constant)");
    }
    const MetricsRow row = evaluate_metrics(*rep, data, common.config, n);
    out << metrics_csv_header() << '\n' << metrics_csv_line(row) << '\n';
    if (!metrics_path.empty()) write_metrics_csv({row}, metrics_path);
    if (!embeddings_path.empty()) export_embeddings(*rep, data.evaluation_view(), embeddings_path);
    return kSuccess;
}

int cmd_sweep(Common& common, const std::string& data_path, const std::string& out_dir, std::ostream& out,
              std::ostream& err) {
    common.load();
    RunConfig& c = common.config;
    if (!out_dir.empty()) c.output_dir = out_dir;
    if ((c.sweep.heads.empty() && c.sweep.lambdas.empty()) || c.sweep.seeds.empty())
        throw ValidationError("sweep: empty grid (set sweep.heads and/or sweep.lambda, and sweep.seeds)");
    const std::vector<int> heads = c.sweep.heads.empty() ? std::vector<int>{c.encoder.heads} : c.sweep.heads;
    const std::vector<double> lambdas =
        c.sweep.lambdas.empty() ? std::vector<double>{c.train.lambda} : c.sweep.lambdas;
    const Dataset data = data_path.empty() ? generate_dataset(c.dataset.build()) : load_dataset(data_path);
    const std::filesystem::path root = c.output_dir;

    std::ofstream table = open_text(root / "sweep.csv");
    table << "# equin metrics v" << kMetricsCsvVersion << '\n' << metrics_csv_header() << ",status\n";
    int failures = 0, cells = 0, first_failure = kSuccess;
    for (int n : heads) {
        for (double lambda : lambdas) {
            for (std::uint64_t seed : c.sweep.seeds) {
                ++cells;
                RunConfig cell = c;
                cell.encoder.heads = n;
                cell.train.lambda = lambda;
                cell.train.seed = seed;
                cell.encoder.init_seed = seed;
                char name[96];
                std::snprintf(name, sizeof name, "N%d_lambda%g_seed%llu", n, lambda, static_cast<unsigned long long>(seed));
                cell.output_dir = (root / name).string();
                MetricsRow row;
                row.dataset = dataset_name_tag(data.spec().name);
                row.model = model_tag(n);
                row.heads = n;
                row.lambda = lambda;
                row.seed = seed;
                std::string status = "ok";
                try {
                    std::ostringstream quiet;
                    const TrainResult r = train_to_directory(data, cell, cell.output_dir, quiet);
                    EncoderRepresentation rep(r.encoder, model_tag(n));
                    row = evaluate_metrics(rep, data, cell, n);
                } catch (const Error& e) {
                    ++failures;
                    if (first_failure == kSuccess) first_failure = exit_code(e);
                    const double nan = std::numeric_limits<double>::quiet_NaN();
                    row.hit_rate = row.disentanglement = row.entropy = row.stabilizer_recovery = nan;
                    status = "failed";
                    err << "cell " << name << " failed: " << e.what() << '\n';
                }
                table << metrics_csv_line(row) << ',' << status << '\n' << std::flush;
                out << name << ": " << metrics_csv_line(row) << " [" << status << "]\n";
            }
        }
    }
    out << cells - failures << "/" << cells << " cells succeeded; table: " << (root / "sweep.csv").string() << '\n';
    return failures == cells ? first_failure : kSuccess;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"equin: equivariant representation learning for non-free group actions"};
    app.require_subcommand(1);
    Common common;

    auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
    std::optional<std::string> preset, stabilizers;
    std::optional<std::uint64_t> gen_seed;
    std::optional<int> per_orbit;
    std::optional<double> noise;
    std::string gen_out, csv_path;
    gen->add_option("--config", common.config_path, "Run configuration (JSON)");
    gen->add_option("--preset", preset, "rotating-arrows, colored-arrows, double-arrows, modelnet-like, solids");
    gen->add_option("--seed", gen_seed, "Dataset seed");
    gen->add_option("--stabilizers", stabilizers, "Comma-separated stabilizer tags to keep, e.g. cyclic2");
    gen->add_option("--triplets-per-orbit", per_orbit, "Override the preset's triplet count");
    gen->add_option("--noise", noise, "Feature noise standard deviation");
    gen->add_option("--out", gen_out, "Output dataset file")->required();
    gen->add_option("--csv", csv_path, "Also export the triplets as CSV");

    auto* tr = app.add_subcommand("train", "Train an encoder");
    std::string train_data, train_out;
    std::optional<int> train_heads, epochs, batch, checkpoint_every;
    std::optional<double> train_lambda, lr;
    std::optional<std::uint64_t> train_seed;
    tr->add_option("--config", common.config_path, "Run configuration (JSON)");
    tr->add_option("--data", train_data, "Dataset file")->required();
    tr->add_option("--N", train_heads, "Number of group heads");
    tr->add_option("--lambda", train_lambda, "Entropy weight");
    tr->add_option("--epochs", epochs, "Training epochs");
    tr->add_option("--lr", lr, "Learning rate");
    tr->add_option("--batch-size", batch, "Triplets per batch");
    tr->add_option("--seed", train_seed, "Seed for initialization and shuffling");
    tr->add_option("--checkpoint-every", checkpoint_every, "Checkpoint every K epochs");
    tr->add_option("--out", train_out, "Run directory");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint or a reference encoder");
    std::string eval_data, checkpoint, reference, metrics_path, embeddings_path;
    std::optional<int> eval_heads;
    ev->add_option("--config", common.config_path, "Run configuration (JSON) for metric settings");
    ev->add_option("--data", eval_data, "Dataset file")->required();
    ev->add_option("--checkpoint", checkpoint, "Checkpoint file");
    ev->add_option("--reference", reference, "oracle or constant instead of a checkpoint");
    ev->add_option("--N", eval_heads, "Heads of the constant reference");
    ev->add_option("--out", metrics_path, "Metrics CSV");
    ev->add_option("--embeddings", embeddings_path, "Embedding export CSV");

    auto* sw = app.add_subcommand("sweep", "Train and evaluate a grid over N, lambda and seeds");
    std::string sweep_data, sweep_out;
    sw->add_option("--config", common.config_path, "Run configuration with a sweep section")->required();
    sw->add_option("--data", sweep_data, "Dataset file (default: generate from the config)");
    sw->add_option("--out", sweep_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kValidation;
    }
    try {
        if (*gen) return cmd_generate(common, preset, gen_seed, stabilizers, per_orbit, noise, gen_out, csv_path, out);
        if (*tr)
            return cmd_train(common, train_data, train_heads, train_lambda, epochs, lr, batch, train_seed,
                             checkpoint_every, train_out, out);
        if (*ev) return cmd_eval(common, eval_data, checkpoint, reference, eval_heads, metrics_path, embeddings_path, out);
        if (*sw) return cmd_sweep(common, sweep_data, sweep_out, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e);
    }
    return kValidation;
}

}  // namespace equin::cli
