#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "equin/binary_io.hpp"
#include "equin/cli.hpp"
#include "equin/error.hpp"
#include "equin/run_config.hpp"

using namespace equin;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run_cli(std::initializer_list<std::string> args) {
    std::vector<std::string> owned{"equin"};
    owned.insert(owned.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : owned) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path workdir() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "equin_test_cli";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

void write_text(const std::string& p, const std::string& text) {
    std::ofstream(p) << text;
}

std::size_t count_lines(const std::string& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

// A two-orbit dataset small enough for quick training runs.
std::string small_data() {
    static const std::string p = [] {
        const std::string f = path("small.eqin");
        const auto r = run_cli({"generate", "--preset", "rotating-arrows", "--stabilizers", "cyclic1,cyclic2",
                                "--triplets-per-orbit", "120", "--seed", "3", "--out", f});
        REQUIRE(r.code == 0);
        return f;
    }();
    return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("generate is reproducible") {
    const auto a = run_cli({"generate", "--preset", "rotating-arrows", "--seed", "7", "--out", path("a.eqin")});
    const auto b = run_cli({"generate", "--preset", "rotating-arrows", "--seed", "7", "--out", path("b.eqin")});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(file_crc(path("a.eqin")) == file_crc(path("b.eqin")));
    CHECK(io::read_file(path("a.eqin")) == io::read_file(path("b.eqin")));
    CHECK(load_dataset(path("a.eqin")).size() == 12500);
    CHECK(fs::exists(path("a.eqin") + ".summary.txt"));
    CHECK(a.out.find("crc32") != std::string::npos);
}

TEST_CASE("generate solids has three orbits of 7500") {
    const auto r = run_cli({"generate", "--preset", "solids", "--out", path("solids.eqin")});
    REQUIRE(r.code == 0);
    CHECK(load_dataset(path("solids.eqin")).size() == 22500);
}

TEST_CASE("generate error codes") {
    CHECK(run_cli({"generate", "--preset", "mnist", "--out", path("x.eqin")}).code == cli::kValidation);
    CHECK(run_cli({"generate", "--stabilizers", "cyclic9", "--out", path("x.eqin")}).code == cli::kValidation);
    CHECK(run_cli({"generate"}).code == cli::kValidation);
    CHECK(run_cli({"generate", "--out", "/proc/definitely/not/here.eqin"}).code == cli::kIo);
    CHECK(run_cli({"frobnicate"}).code == cli::kValidation);
    CHECK(run_cli({"--help"}).code == cli::kSuccess);
}

TEST_CASE("train writes a run directory and eval reads it") {
    const std::string run = path("run1");
    const auto t = run_cli({"train", "--data", small_data(), "--N", "2", "--epochs", "2", "--lr", "1e-3",
                            "--checkpoint-every", "1", "--out", run});
    REQUIRE(t.code == 0);
    CHECK(fs::exists(run + "/config.json"));
    CHECK(fs::exists(run + "/final.eqck"));
    CHECK(fs::exists(run + "/checkpoints/epoch_0001.eqck"));
    CHECK(fs::exists(run + "/checkpoints/epoch_0002.eqck"));
    CHECK(count_lines(run + "/metrics.csv") == 3);
    std::ifstream m(run + "/metrics.csv");
    std::string header;
    std::getline(m, header);
    CHECK(header == "epoch,L_G,entropy,L_O,total");

    const RunConfig snapshot = RunConfig::load(run + "/config.json");
    CHECK(snapshot.encoder.heads == 2);
    CHECK(snapshot.train.epochs == 2);

    const auto e = run_cli({"eval", "--data", small_data(), "--checkpoint", run + "/final.eqck", "--out",
                            path("m.csv"), "--embeddings", path("emb.csv")});
    REQUIRE(e.code == 0);
    CHECK(e.out.find("rotating-arrows,equin2,2,1,0,") != std::string::npos);
    CHECK(count_lines(path("m.csv")) == 3);
    CHECK(fs::exists(path("emb.csv")));

    // identical configuration, identical parameters
    const auto t2 = run_cli({"train", "--data", small_data(), "--N", "2", "--epochs", "2", "--lr", "1e-3", "--out",
                             path("run2")});
    REQUIRE(t2.code == 0);
    CHECK(load_checkpoint(run + "/final.eqck").encoder.params() ==
          load_checkpoint(path("run2") + "/final.eqck").encoder.params());
}

TEST_CASE("eval references") {
    const auto oracle = run_cli({"eval", "--data", small_data(), "--reference", "oracle"});
    REQUIRE(oracle.code == 0);
    CHECK(oracle.out.find("rotating-arrows,oracle,2,1,0,1,") != std::string::npos);
    const auto constant = run_cli({"eval", "--data", small_data(), "--reference", "constant", "--N", "3"});
    REQUIRE(constant.code == 0);
    CHECK(constant.out.find(",constant,3,") != std::string::npos);
}

TEST_CASE("eval error codes") {
    CHECK(run_cli({"eval", "--data", small_data(), "--checkpoint", path("nope.eqck")}).code == cli::kValidation);
    CHECK(run_cli({"eval", "--data", small_data()}).code == cli::kValidation);
    CHECK(run_cli({"eval", "--data", small_data(), "--reference", "psychic"}).code == cli::kValidation);
    CHECK(run_cli({"eval", "--data", path("missing.eqin"), "--reference", "oracle"}).code == cli::kIo);
    // checkpoint trained on SO(2) against an SO(3) dataset
    const auto solids = run_cli({"generate", "--preset", "solids", "--stabilizers", "tetrahedral",
                                 "--triplets-per-orbit", "50", "--out", path("tet.eqin")});
    REQUIRE(solids.code == 0);
    const auto t = run_cli({"train", "--data", small_data(), "--N", "1", "--epochs", "1", "--out", path("run3")});
    REQUIRE(t.code == 0);
    CHECK(run_cli({"eval", "--data", path("tet.eqin"), "--checkpoint", path("run3") + "/final.eqck"}).code ==
          cli::kValidation);
}

TEST_CASE("train error codes") {
    CHECK(run_cli({"train", "--data", path("missing.eqin")}).code == cli::kIo);
    CHECK(run_cli({"train", "--data", small_data(), "--N", "0"}).code == cli::kValidation);
    CHECK(run_cli({"train", "--data", small_data(), "--lambda", "-1"}).code == cli::kValidation);
    std::string corrupt = io::read_file(small_data());
    corrupt[100] ^= 0x7f;
    io::write_file(path("corrupt.eqin"), corrupt);
    CHECK(run_cli({"train", "--data", path("corrupt.eqin")}).code == cli::kIo);
    const auto blowup = run_cli({"train", "--data", small_data(), "--N", "2", "--epochs", "1", "--lambda", "1e308",
                                 "--out", path("run4")});
    CHECK(blowup.code == cli::kNumerical);
}

TEST_CASE("config files") {
    write_text(path("bad.json"), R"({"train": {"epochs": 2, "learning_rat": 0.1}})");
    CHECK(run_cli({"train", "--config", path("bad.json"), "--data", small_data()}).code == cli::kValidation);
    write_text(path("broken.json"), "{ not json");
    CHECK(run_cli({"train", "--config", path("broken.json"), "--data", small_data()}).code == cli::kValidation);
    CHECK(run_cli({"train", "--config", path("absent.json"), "--data", small_data()}).code == cli::kIo);

    RunConfig c;
    c.encoder.heads = 7;
    c.train.lambda = 0.25;
    c.dataset.stabilizers = {"cyclic3"};
    c.sweep.heads = {1, 2};
    c.hit_rate.trials = 3;
    const RunConfig back = RunConfig::from_json(c.to_json());
    CHECK(back.encoder.heads == 7);
    CHECK(back.train.lambda == 0.25);
    CHECK(back.dataset.stabilizers == std::vector<std::string>{"cyclic3"});
    CHECK(back.sweep.heads == std::vector<int>{1, 2});
    CHECK(back.hit_rate.trials == 3);
    CHECK(back.to_json() == c.to_json());
    CHECK_THROWS_AS(RunConfig::from_json(R"({"eval": {"hit_rate": {"size": 3}}})"), ValidationError);
    CHECK_THROWS_AS(RunConfig::from_json(R"({"encoder": {"activation": "gelu"}})"), ValidationError);
}

TEST_CASE("sweep") {
    write_text(path("empty.json"), R"({"sweep": {"heads": [], "lambda": []}})");
    CHECK(run_cli({"sweep", "--config", path("empty.json"), "--data", small_data()}).code == cli::kValidation);

    write_text(path("grid.json"), R"({
        "train": {"epochs": 1, "learning_rate": 0.001},
        "sweep": {"heads": [2, 3], "lambda": [1.0, 1e308], "seeds": [0]}
    })");
    const auto r = run_cli({"sweep", "--config", path("grid.json"), "--data", small_data(), "--out", path("sweep")});
    CHECK(r.code == 0);
    CHECK(count_lines(path("sweep") + "/sweep.csv") == 2 + 4);
    CHECK(r.out.find("2/4 cells succeeded") != std::string::npos);
    CHECK(fs::exists(path("sweep") + "/N3_lambda1_seed0/final.eqck"));
    std::ifstream in(path("sweep") + "/sweep.csv");
    std::string line;
    int failed = 0;
    while (std::getline(in, line))
        if (line.ends_with(",failed")) ++failed;
    CHECK(failed == 2);
}

TEST_CASE("exit code mapping") {
    CHECK(cli::exit_code(ValidationError("x")) == 2);
    CHECK(cli::exit_code(SpecMismatch("x")) == 2);
    CHECK(cli::exit_code(IoError("x")) == 3);
    CHECK(cli::exit_code(ChecksumError("x")) == 3);
    CHECK(cli::exit_code(NumericalError("x")) == 4);
}

}  // TEST_SUITE
