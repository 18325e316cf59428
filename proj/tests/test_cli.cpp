#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "amc/cli.hpp"
#include "amc/dataset.hpp"
#include "amc/modulation.hpp"
#include "amc/report.hpp"

using namespace amc;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result amc_run(std::vector<std::string> args) {
    args.insert(args.begin(), "amc");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> v;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) v.push_back(l);
    return v;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// One small dataset and model shared by every case; records are 2x128 so
// a training epoch takes seconds.
struct Fixture {
    fs::path dir;
    fs::path data, model;
    Result gen, train;

    Fixture() {
        dir = fs::temp_directory_path() / ("amc_test_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir);
        data = dir / "desk.hiq";
        model = dir / "m.ckpt";
        gen = amc_run({"generate", "--desk-scale", "--n-samples", "128", "--seed", "5", "--out", data.string()});
        train = amc_run({"train", "--dataset", data.string(), "--epochs", "1", "--batch", "64", "--seed", "3", "--out",
                         model.string(), "--quiet"});
    }
    ~Fixture() { fs::remove_all(dir); }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

}  // namespace

TEST_CASE("generate desk scale") {
    auto& f = fixture();
    REQUIRE(f.gen.code == 0);
    CHECK(f.gen.out.find("records: 5200") != std::string::npos);
    CHECK(f.gen.out.find("cells: 2600, records per cell: 2") != std::string::npos);
    CHECK(f.gen.out.find("snr levels: 20") != std::string::npos);
    CHECK(data::read_container_header(f.data).count == 5200);
    CHECK(data::has_split_files(f.data));
    const auto m = data::read_manifest(data::manifest_path(f.data));
    CHECK(m.record_count == 5200);

    // Same seed again: identical manifest and file hash.
    const auto again = f.dir / "again.hiq";
    const auto r = amc_run({"generate", "--desk-scale", "--n-samples", "128", "--seed", "5", "--out", again.string()});
    REQUIRE(r.code == 0);
    CHECK(slurp(data::manifest_path(again)) == slurp(data::manifest_path(f.data)));
    CHECK(data::file_hash(again) == data::file_hash(f.data));
}

TEST_CASE("config file values and flag overrides") {
    auto& f = fixture();
    const auto cfg = f.dir / "gen.conf";
    std::ofstream(cfg) << "# desk run\nsignals_per_cell = 1\nn_samples = 16\nseed = 9\nno_splits = true\n";
    const auto p = f.dir / "cfg.hiq";
    auto r = amc_run({"generate", "--config", cfg.string(), "--out", p.string()});
    REQUIRE(r.code == 0);
    CHECK(data::read_container_header(p).count == 2600);
    CHECK(data::read_container_header(p).samples_per_record == 16);
    CHECK_FALSE(data::has_split_files(p));

    r = amc_run({"generate", "--config", cfg.string(), "--n-samples", "32", "--out", p.string()});
    REQUIRE(r.code == 0);
    CHECK(data::read_container_header(p).samples_per_record == 32);

    r = amc_run({"generate", "--config", (f.dir / "missing.conf").string(), "--out", p.string()});
    CHECK(r.code == 3);
}

TEST_CASE("train defaults and usage errors") {
    auto& f = fixture();
    REQUIRE(f.train.code == 0);
    CHECK(f.train.out.find("adam: lr 0.0001,") != std::string::npos);
    CHECK(f.train.out.find("5 classes (family)") != std::string::npos);
    CHECK(fs::exists(f.model));
    const auto hist = lines_of(slurp(f.model.string() + ".history.csv"));
    CHECK(hist.size() == 2);

    auto r = amc_run({"train", "--out", (f.dir / "x.ckpt").string(), "--seed", "1"});
    CHECK(r.code == 2);
    CHECK(r.err.find("--dataset") != std::string::npos);
    CHECK(r.err.find("Usage") != std::string::npos);

    r = amc_run({"train", "--dataset", (f.dir / "none.hiq").string(), "--out", (f.dir / "x.ckpt").string(), "--seed",
                 "1"});
    CHECK(r.code == 2);

    r = amc_run({"train", "--dataset", f.data.string(), "--out", (f.dir / "x.ckpt").string()});
    CHECK(r.code == 2);

    r = amc_run({"train", "--dataset", f.data.string(), "--out", (f.dir / "x.ckpt").string(), "--seed", "1",
                 "--labels", "bogus"});
    CHECK(r.code == 2);

    r = amc_run({"frobnicate"});
    CHECK(r.code == 2);
}

TEST_CASE("eval writes 20 SNR rows") {
    auto& f = fixture();
    REQUIRE(f.train.code == 0);
    const auto rep = f.dir / "report.txt";
    auto r = amc_run({"eval", "--model", f.model.string(), "--dataset", f.data.string(), "--report", rep.string(),
                      "--split", "all"});
    REQUIRE(r.code == 0);
    const auto out = lines_of(r.out);
    REQUIRE(out.size() >= 22);
    CHECK(out[0] == "snr_db,accuracy");
    CHECK(out[1].starts_with("-20,"));
    CHECK(out[20].starts_with("18,"));
    CHECK(out[21].starts_with("overall,"));

    const auto report = eval::load_report(rep);
    CHECK(report.accuracy().size() == 20);
    CHECK(report.overall().total() == 5200);
    CHECK(report.header.at("label_mode") == "family");
    CHECK(report.header.at("dataset_hash") == data::file_hash(f.data));

    const auto rep2 = f.dir / "report2.txt";
    r = amc_run({"eval", "--model", f.model.string(), "--dataset", f.data.string(), "--report", rep2.string(),
                 "--format", "structured-text"});
    REQUIRE(r.code == 0);
    const auto test_only = eval::load_report(rep2);
    CHECK(test_only.header.at("split") == "test");
    CHECK(test_only.overall().total() == data::read_split_files(f.data).test.size());
}

TEST_CASE("geometry mismatch exits 5") {
    auto& f = fixture();
    REQUIRE(f.train.code == 0);
    std::vector<data::IQRecord> wide;
    for (std::uint64_t i = 0; i < 3; ++i)
        wide.push_back(data::synthesize_record(dsp::Variant::QPSK, 10, channel::ChannelKind::Ideal, 1, 1024, i));
    const auto p = f.dir / "wide.hiq";
    data::save_container(wide, p);
    auto r = amc_run({"eval", "--model", f.model.string(), "--dataset", p.string(), "--report",
                      (f.dir / "w.txt").string()});
    CHECK(r.code == 5);
    CHECK(r.err.find("2x128") != std::string::npos);
    r = amc_run({"classify", "--model", f.model.string(), "--input", p.string()});
    CHECK(r.code == 5);
}

TEST_CASE("classify") {
    auto& f = fixture();
    REQUIRE(f.train.code == 0);
    const auto one = f.dir / "one.hiq";
    data::save_container(std::vector{data::synthesize_record(dsp::Variant::PSK8, 14, channel::ChannelKind::Rayleigh,
                                                             6, 128, 77)},
                         one);
    const auto a = amc_run({"classify", "--model", f.model.string(), "--input", one.string()});
    REQUIRE(a.code == 0);
    const auto rows = lines_of(a.out);
    REQUIRE(rows.size() == 1);
    std::vector<std::string> fields;
    std::istringstream in(rows[0]);
    for (std::string s; std::getline(in, s, ',');) fields.push_back(s);
    REQUIRE(fields.size() == 2 + 5);
    CHECK(fields[0] == "0");
    double sum = 0.0;
    for (std::size_t i = 2; i < fields.size(); ++i) sum += std::stod(fields[i]);
    CHECK(std::abs(sum - 1.0) < 1e-6);

    const auto b = amc_run({"classify", "--model", f.model.string(), "--input", one.string()});
    CHECK(a.out == b.out);
}

TEST_CASE("corrupt inputs exit 3") {
    auto& f = fixture();
    const auto bad = f.dir / "bad.hiq";
    std::ofstream(bad) << "not a container at all";
    auto r = amc_run({"classify", "--model", f.model.string(), "--input", bad.string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("offset") != std::string::npos);
    r = amc_run({"inspect", "--model", bad.string()});
    CHECK(r.code == 3);
    r = amc_run({"inspect", "--dataset", (f.dir / "absent.hiq").string()});
    CHECK(r.code == 3);
}

TEST_CASE("inspect and rc-taps") {
    auto& f = fixture();
    REQUIRE(f.train.code == 0);
    auto r = amc_run({"inspect", "--dataset", f.data.string(), "--model", f.model.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("records: 5200") != std::string::npos);
    CHECK(r.out.find("Dense2") != std::string::npos);

    r = amc_run({"rc-taps", "--rolloff", "0.5", "--oversampling", "4", "--span", "3"});
    REQUIRE(r.code == 0);
    const auto taps = lines_of(r.out);
    CHECK(taps.size() == 2 * 3 * 4 + 1);
    CHECK(std::stod(taps[12]) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(std::stod(taps[8])) < 1e-12);
}
