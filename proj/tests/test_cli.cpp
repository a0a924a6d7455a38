#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "cann/network.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = CANN_CLI_PATH;

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = kCli + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_cli(const std::string& args) {
    static int counter = 0;
    return run_cli(args, fs::temp_directory_path() /
                             ("cann_cli_out_" + std::to_string(counter++) + ".log"));
}

/// Writes a small synthetic dataset and returns its directory.
fs::path make_data(const std::string& tag, const std::string& extra = "") {
    const fs::path dir = testutil::temp_dir("cli_" + tag);
    REQUIRE(run_cli("synth --out-dir " + (dir / "data").string() +
                    " --instances 60 --noise-features 3 --seed 5" + extra) == 0);
    return dir / "data";
}

std::string common_flags(const fs::path& data_dir) {
    return " --data " + (data_dir / "data.csv").string() + " --schema " +
           (data_dir / "schema.json").string();
}

json read_json(const fs::path& p) {
    return json::parse(testutil::read_file(p));
}

} // namespace

TEST_CASE("synth writes byte-identical files on re-run") {
    const fs::path dir = testutil::temp_dir("cli_synth");
    const std::string flags =
        " --instances 40 --noise-features 2 --seed 11 --noise 0.25";
    REQUIRE(run_cli("synth --out-dir " + (dir / "a").string() + flags) == 0);
    REQUIRE(run_cli("synth --out-dir " + (dir / "b").string() + flags) == 0);
    CHECK(testutil::read_file(dir / "a" / "data.csv") ==
          testutil::read_file(dir / "b" / "data.csv"));
    CHECK(testutil::read_file(dir / "a" / "schema.json") ==
          testutil::read_file(dir / "b" / "schema.json"));
    CHECK(fs::exists(dir / "a" / "manifest.json"));
}

TEST_CASE("importance command writes a summary file deterministically") {
    const fs::path data = make_data("imp");
    const fs::path out1 = data / "imp1.json";
    const fs::path out2 = data / "imp2.json";
    REQUIRE(run_cli("importance" + common_flags(data) + " --out " + out1.string()) == 0);
    REQUIRE(run_cli("importance" + common_flags(data) + " --out " + out2.string()) == 0);
    CHECK(testutil::read_file(out1) == testutil::read_file(out2));

    const json j = read_json(out1);
    CHECK(j["scope"] == "full");
    CHECK(j["values"].size() == 4 * 2); // (signal + 3 noise) x 2 outputs

    // train scope needs its split parameters
    CHECK(run_cli("importance" + common_flags(data) + " --out " +
                  (data / "imp3.json").string() + " --scope train") != 0);
    CHECK_FALSE(fs::exists(data / "imp3.json"));
    CHECK(run_cli("importance" + common_flags(data) + " --out " +
                  (data / "imp4.json").string() +
                  " --scope train --seed 1 --train-fraction 0.5") == 0);
}

TEST_CASE("train command enforces its importance contract") {
    const fs::path data = make_data("train");
    const fs::path imp = data / "imp.json";
    REQUIRE(run_cli("importance" + common_flags(data) + " --out " + imp.string()) == 0);

    const std::string train_flags =
        common_flags(data) + " --epochs 5 --alpha 0.4 --hidden 4 --seed 3";

    // cann with p < 1 needs the importance file
    CHECK(run_cli("train" + train_flags + " --method cann --p 0.5 --out " +
                  (data / "m0.json").string()) != 0);

    // plain ignores --importance (with a warning) and still succeeds
    CHECK(run_cli("train" + train_flags + " --method plain --importance " + imp.string() +
                  " --out " + (data / "m1.json").string()) == 0);

    // cann with p = 1 runs without a file and matches plain weights
    REQUIRE(run_cli("train" + train_flags + " --method cann --p 1.0 --out " +
                    (data / "m2.json").string()) == 0);
    const cann::Network plain = cann::load_network_json(data / "m1.json");
    const cann::Network cann_p1 = cann::load_network_json(data / "m2.json");
    CHECK(testutil::bitwise_equal(plain, cann_p1));

    // its training log still carries the correlation-error diagnostic
    const std::string log = testutil::read_file(data / "m2.log.csv");
    CHECK(log.find("epoch,data_error,correlation_error,blended_error,train_accuracy") !=
          std::string::npos);
    const std::string second_line = log.substr(log.find('\n') + 1);
    const auto first_comma = second_line.find(',');
    const auto second_comma = second_line.find(',', first_comma + 1);
    const auto third_comma = second_line.find(',', second_comma + 1);
    CHECK(third_comma > second_comma + 1); // non-empty correlation_error column

    // full cann run with the file
    CHECK(run_cli("train" + train_flags + " --method cann --p 0.5 --importance " +
                  imp.string() + " --out " + (data / "m3.json").string()) == 0);
}

TEST_CASE("train refuses an importance file from another dataset") {
    const fs::path data_a = make_data("fp_a");
    const fs::path data_b = make_data("fp_b", " --noise 0.9");
    const fs::path imp_a = data_a / "imp.json";
    REQUIRE(run_cli("importance" + common_flags(data_a) + " --out " + imp_a.string()) == 0);

    CHECK(run_cli("train" + common_flags(data_b) +
                  " --epochs 2 --method cann --p 0.5 --importance " + imp_a.string() +
                  " --out " + (data_b / "m.json").string()) != 0);
    CHECK_FALSE(fs::exists(data_b / "m.json"));
}

TEST_CASE("bench produces deterministic paired reports") {
    const fs::path data = make_data("bench");
    const std::string flags = common_flags(data) +
                              " --trials 3 --fraction 0.5 --epochs 5 --hidden 4 --seed 2" +
                              " --importance-scope full --jobs 2";

    REQUIRE(run_cli("bench" + flags + " --out-dir " + (data / "r1").string()) == 0);
    REQUIRE(run_cli("bench" + flags + " --out-dir " + (data / "r2").string()) == 0);

    for (const std::string name :
         {"plain.report.json", "plain.trials.csv", "cann.report.json", "cann.trials.csv"}) {
        CHECK(testutil::read_file(data / "r1" / name) ==
              testutil::read_file(data / "r2" / name));
    }
    const json report = read_json(data / "r1" / "cann.report.json");
    CHECK(report["n_trials"] == 3);
    CHECK(report["accuracies"].size() == 3);

    // same directory, same flags: idempotent re-run succeeds
    CHECK(run_cli("bench" + flags + " --out-dir " + (data / "r1").string()) == 0);

    // changed flags against the existing manifest: refused without --force
    const std::string changed = common_flags(data) +
                                " --trials 2 --fraction 0.5 --epochs 5 --hidden 4 --seed 2" +
                                " --importance-scope full";
    CHECK(run_cli("bench" + changed + " --out-dir " + (data / "r1").string()) != 0);
    CHECK(run_cli("bench" + changed + " --force --out-dir " + (data / "r1").string()) == 0);
}

TEST_CASE("bench supports chi-squared selection for the plain baseline") {
    const fs::path data = make_data("bench_sel");
    const std::string flags = common_flags(data) +
                              " --trials 2 --fraction 0.5 --epochs 4 --hidden 4 --seed 2" +
                              " --importance-scope train --keep-fraction 0.5";
    REQUIRE(run_cli("bench" + flags + " --out-dir " + (data / "r").string()) == 0);
    CHECK(fs::exists(data / "r" / "plain.report.json"));
}

TEST_CASE("curve emits one row per method and fraction") {
    const fs::path data = make_data("curve");
    const fs::path out = data / "curve.csv";
    const std::string flags = common_flags(data) +
                              " --trials 2 --epochs 4 --hidden 4 --seed 2" +
                              " --importance-scope full --fractions 0.2,0.5";
    REQUIRE(run_cli("curve" + flags + " --out " + out.string()) == 0);

    const std::string csv = testutil::read_file(out);
    CHECK(csv.find("method,train_fraction,mean_accuracy,stddev_accuracy") == 0);
    std::size_t rows = 0;
    for (char c : csv) rows += c == '\n' ? 1 : 0;
    CHECK(rows == 1 + 2 * 2);

    REQUIRE(run_cli("curve" + flags + " --out " + (data / "curve2.csv").string()) == 0);
    CHECK(testutil::read_file(data / "curve2.csv") == csv);
}

TEST_CASE("export-dataset writes the encoded matrices") {
    const fs::path data = make_data("export");
    const fs::path out = data / "ds.json";
    REQUIRE(run_cli("export-dataset" + common_flags(data) + " --out " + out.string()) == 0);
    const json j = read_json(out);
    CHECK(j["n_instances"] == 60);
    CHECK(j["n_features"] == 4);
    CHECK(j["features"].size() == 60);
}

TEST_CASE("unknown flags and missing files exit nonzero") {
    CHECK(run_cli("bogus-subcommand") != 0);
    CHECK(run_cli("train --data /nope.csv --schema /nope.json --out /tmp/x.json") != 0);
}
