#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "acvmlr/binomial.hpp"
#include "acvmlr/cli.hpp"
#include "acvmlr/dataset_io.hpp"
#include "acvmlr/report.hpp"
#include "helpers.hpp"

using namespace acvmlr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir()
    {
        static int counter = 0;
        path = fs::temp_directory_path() / ("acvmlr_cli_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Outcome {
    int code;
    std::string out, err;
};

Outcome run(const std::vector<std::string>& args)
{
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream(path) << text;
}

std::string read_text(const std::string& path)
{
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Dataset labelled_dataset(int m, int n, int l, std::uint64_t seed, double signal)
{
    Dataset d = testing::random_dataset(m, n, l, seed);
    for (int mu = 0; mu < m; ++mu) d.features(mu, d.labels[mu] % n) += signal;
    return d;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("spec parsing")
{
    const auto s = cli::parse_synth_spec(
        R"({"n_features": 20, "n_classes": 4, "alpha": 3, "variant": {"type": "amplified", "classes": [3, 4]}})");
    CHECK(s.n_samples() == 60);
    const auto& a = std::get<datagen::Amplified>(s.variant);
    CHECK(a.classes == std::vector<int>{2, 3});
    CHECK(a.omega == 100.0);
    CHECK(std::holds_alternative<datagen::CommonComponents>(
        cli::parse_synth_spec(R"({"variant": "common_components"})").variant));

    for (const char* bad : {"{", "[]", R"({"n_feature": 3})", R"({"n_features": "x"})", R"({"n_classes": 1})",
                            R"({"variant": "wild"})", R"({"variant": {"type": "plain", "corr": 1}})",
                            R"({"variant": {"type": "amplified", "classes": [0]}})"})
        CHECK_THROWS_AS(cli::parse_synth_spec(bad), ParseError);
}

TEST_CASE("usage errors")
{
    CHECK(run({}).code == cli::kExitBadInput);
    CHECK(run({"frobnicate"}).code == cli::kExitBadInput);
    CHECK(run({"sweep"}).code == cli::kExitBadInput);
    CHECK(run({"--help"}).code == cli::kExitOk);
    CHECK(run({"sweep", "--data", "/nonexistent.csv"}).code == cli::kExitBadInput);
}

TEST_CASE("generate")
{
    TempDir dir;
    write_text(dir / "bad.json", R"({"n_features": 10, "n_clases": 2})");
    const auto bad = run({"generate", "--spec", dir / "bad.json", "--out", dir / "x.csv"});
    CHECK(bad.code == cli::kExitBadInput);
    CHECK(bad.err.find("n_clases") != std::string::npos);

    write_text(dir / "spec.json", R"({"n_features": 12, "n_classes": 2, "alpha": 2, "seed": 5})");
    REQUIRE(run({"generate", "--spec", dir / "spec.json", "--out", dir / "a.csv"}).code == 0);
    REQUIRE(run({"generate", "--spec", dir / "spec.json", "--out", dir / "b.csv"}).code == 0);
    CHECK(read_text(dir / "a.csv") == read_text(dir / "b.csv"));
    CHECK(read_text(dir / "a.csv.weights.csv") == read_text(dir / "b.csv.weights.csv"));

    REQUIRE(run({"generate", "--spec", dir / "spec.json", "--out", dir / "a.svm", "--weights", dir / "w.csv"}).code ==
            0);
    const Dataset from_csv = io::read_dataset(dir / "a.csv", io::Format::csv);
    const Dataset from_svm = io::read_dataset(dir / "a.svm", io::Format::libsvm);
    CHECK(from_csv.features == from_svm.features);
    CHECK(from_csv.labels == from_svm.labels);
    CHECK(from_csv.n_samples() == 24);

    std::ifstream wf(dir / "w.csv");
    const Matrix w0 = io::read_matrix(wf);
    CHECK(w0.rows() == 2);
    CHECK(w0.cols() == 12);

    // The L = 2 file feeds the binomial path directly.
    const auto y = binomial::code_binary_labels(from_csv.labels);
    CHECK(y == from_csv.labels);
    const auto r = binomial::acv_logit(from_csv, {Vector::Zero(12)}, 0.0);
    CHECK(r.looe == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("sweep edge cases")
{
    TempDir dir;
    const Dataset d = labelled_dataset(30, 5, 3, 11, 1.0);
    io::write_dataset(dir / "d.csv", d, io::Format::csv);

    const auto huge = run({"sweep", "--data", dir / "d.csv", "--lambdas", "1e6", "--out", dir / "h.json"});
    REQUIRE(huge.code == 0);
    const CvReport h = report::load(dir / "h.json");
    REQUIRE(h.records.size() == 1);
    const auto& rec = h.records[0];
    CHECK(rec.active_set_size == 0);
    CHECK(rec.training_error == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(*rec.eps_acv == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(*rec.eps_saacv == doctest::Approx(std::log(3.0)).epsilon(1e-12));

    write_text(dir / "junk.csv", "label,x1\n1,2\n2,oops\n");
    CHECK(run({"sweep", "--data", dir / "junk.csv"}).code == cli::kExitBadInput);
    CHECK(run({"sweep", "--data", dir / "d.csv", "--estimators", "acv,magic"}).code == cli::kExitBadInput);
    CHECK(run({"sweep", "--data", dir / "d.csv", "--kfold", "1"}).code == cli::kExitBadInput);
    CHECK(run({"sweep", "--data", dir / "d.csv", "--eta", "1.5"}).code == cli::kExitBadInput);

    const auto stuck = run({"sweep", "--data", dir / "d.csv", "--lambdas", "0.01,0.001", "--max-iter", "1",
                            "--out", dir / "s.json"});
    CHECK(stuck.code == cli::kExitNoConvergence);
    const CvReport s = report::load(dir / "s.json");
    for (const auto& r : s.records) CHECK(r.status == "not_converged");
}

TEST_CASE("report command")
{
    TempDir dir;
    const Dataset d = labelled_dataset(30, 5, 3, 12, 1.0);
    io::write_dataset(dir / "d.csv", d, io::Format::csv);
    REQUIRE(run({"sweep", "--data", dir / "d.csv", "--n-lambda", "4", "--out", dir / "r.json"}).code == 0);

    const auto table = run({"report", "--in", dir / "r.json"});
    CHECK(table.code == 0);
    CHECK(table.out.find("argmin acv") != std::string::npos);

    const auto csv = run({"report", "--in", dir / "r.json", "--format", "csv"});
    CHECK(csv.code == 0);
    std::istringstream cin(csv.out);
    const auto rows = report::read_csv(cin);
    CHECK(rows.size() == 4);

    const auto json = run({"report", "--in", dir / "r.json", "--format", "json"});
    CHECK(json.out == read_text(dir / "r.json"));

    std::string text = read_text(dir / "r.json");
    text.replace(text.find("\"schema_version\": 1"), 19, "\"schema_version\": 7");
    write_text(dir / "future.json", text);
    const auto mismatch = run({"report", "--in", dir / "future.json"});
    CHECK(mismatch.code == cli::kExitBadInput);
    CHECK(mismatch.err.find("schema version") != std::string::npos);
    CHECK(run({"report", "--in", dir / "missing.json"}).code == cli::kExitBadInput);
}

TEST_CASE("timing-free reports are reproducible")
{
    TempDir dir;
    const Dataset d = labelled_dataset(40, 6, 3, 13, 1.0);
    io::write_dataset(dir / "d.csv", d, io::Format::csv);
    const std::vector<std::string> base = {"sweep", "--data", dir / "d.csv", "--n-lambda", "5",
                                           "--estimators", "acv,saacv,literal:4", "--no-timings"};
    auto first = base, second = base;
    first.insert(first.end(), {"--out", dir / "a.json"});
    second.insert(second.end(), {"--out", dir / "b.json", "--workers", "2"});
    REQUIRE(run(first).code == 0);
    REQUIRE(run(second).code == 0);
    CHECK(read_text(dir / "a.json") == read_text(dir / "b.json"));
}

TEST_CASE("end to end against literal LOO")
{
    TempDir dir;
    write_text(dir / "spec.json", R"({"n_features": 10, "n_classes": 3, "alpha": 4, "sigma_xi2": 0.1, "seed": 1})");
    REQUIRE(run({"generate", "--spec", dir / "spec.json", "--out", dir / "d.svm"}).code == 0);
    // Moderate lambda: the first decade below lambda_max.
    const auto r = run({"sweep", "--data", dir / "d.svm", "--n-lambda", "6", "--decades", "1", "--estimators",
                        "acv,literal:40", "--out", dir / "r.json"});
    REQUIRE(r.code == 0);
    const CvReport rep = report::load(dir / "r.json");
    CHECK(rep.provenance.literal_k == 40);
    int checked = 0;
    for (const auto& rec : rep.records) {
        if (!rec.converged() || rec.active_set_size == 0) continue;
        REQUIRE(rec.ned_acv.has_value());
        CHECK(std::abs(*rec.ned_acv) <= 0.1);
        ++checked;
    }
    CHECK(checked >= 4);
}

} // TEST_SUITE
