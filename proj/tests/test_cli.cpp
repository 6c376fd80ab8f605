#include "dyncontract/cli.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

#ifndef DYNCONTRACT_DATA_DIR
#error "DYNCONTRACT_DATA_DIR must be defined"
#endif

namespace {

const std::string data_dir = DYNCONTRACT_DATA_DIR;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dyncontract_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "dyncontract");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return dyncontract::cli::main(int(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

}  // namespace

TEST_CASE("static-solve reports the static value") {
    const fs::path out = scratch("static");
    REQUIRE(invoke({"static-solve", "--input", data_dir + "/appendix_d.json", "--out", out.string()}) == 0);
    CHECK(load(out / "static.json")["value"].get<double>() == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(fs::exists(out / "envelope.csv"));
    const json s = load(out / "summary.json");
    CHECK(s["status"] == "ok");
    CHECK(s["command"] == "static-solve");
}

TEST_CASE("dynamic commands write their artifacts") {
    const std::string game = data_dir + "/kg_binary.json";
    const fs::path out = scratch("dynamic");
    const std::vector<std::string> common{"--input", game, "--out", out.string(), "--belief-grid", "6",
                                          "--promise-grid", "24"};
    auto with = [&](std::string cmd, std::vector<std::string> extra = {}) {
        std::vector<std::string> a{std::move(cmd)};
        a.insert(a.end(), common.begin(), common.end());
        a.insert(a.end(), extra.begin(), extra.end());
        return invoke(a);
    };
    CHECK(with("dynamic-solve") == 0);
    CHECK(fs::exists(out / "surface.csv"));
    CHECK(fs::exists(out / "policy.json"));
    CHECK(fs::exists(out / "convergence.csv"));
    CHECK(with("analyze") == 0);
    CHECK(load(out / "analysis.json").contains("feasibly_optimal"));
    CHECK(with("ergodic-bound") == 0);
    CHECK(load(out / "ergodic.json").contains("gamma"));
    CHECK(with("verify-backloading") == 0);
    CHECK(load(out / "backloading.json")["passed"] == true);
    CHECK(with("playout", {"--horizon", "30", "--seed", "5"}) == 0);
    CHECK(fs::exists(out / "history.csv"));
}

TEST_CASE("iteration budget exhaustion exits with status 3") {
    const fs::path out = scratch("budget");
    CHECK(invoke({"dynamic-solve", "--input", data_dir + "/kg_binary.json", "--out", out.string(), "--max-iter",
                  "0"}) == 3);
    CHECK(load(out / "summary.json")["status"] != "ok");
}

TEST_CASE("bad input exits with status 2") {
    const fs::path out = scratch("bad");
    std::ofstream(out / "broken.json") << "{\"states\": [\"a\"";
    CHECK(invoke({"static-solve", "--input", (out / "broken.json").string(), "--out", out.string()}) == 2);
    CHECK(invoke({"no-such-command"}) == 2);
    CHECK(invoke({"static-solve", "--input", data_dir + "/appendix_d.json", "--tol", "abc"}) == 2);
}

TEST_CASE("loyalty command and byte-identical reruns") {
    const fs::path a = scratch("loyalty_a"), b = scratch("loyalty_b");
    const std::vector<std::string> args{"loyalty", "--input", data_dir + "/figure1_rides.json", "--seed", "9",
                                        "--horizon", "50"};
    auto run_into = [&](const fs::path& out) {
        std::vector<std::string> x = args;
        x.insert(x.end(), {"--out", out.string()});
        return invoke(x);
    };
    REQUIRE(run_into(a) == 0);
    REQUIRE(run_into(b) == 0);
    std::istringstream frontier(slurp(a / "frontier.csv"));
    std::string line;
    int rows = 0;
    std::getline(frontier, line);
    while (std::getline(frontier, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);
    for (const char* f : {"frontier.csv", "schedule.json", "history.csv", "summary.json"})
        CHECK(slurp(a / f) == slurp(b / f));
}

TEST_CASE("config hash is stable") {
    CHECK(dyncontract::cli::fnv1a("") == 14695981039346656037ULL);
    CHECK(dyncontract::cli::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}
