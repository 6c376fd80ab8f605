#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dyncontract::cli {

struct RunManifest {
    std::string command;
    std::string input;
    std::string out = ".";
    std::optional<std::size_t> belief_grid;
    std::optional<std::size_t> promise_grid;
    std::optional<double> tolerance;
    std::optional<int> max_iterations;
    std::uint64_t seed = 0;
    std::optional<double> delta;
    std::optional<double> k;
    int horizon = 200;
    // loyalty only
    std::optional<std::size_t> n;
    std::vector<double> c;
    std::vector<double> mu0;
};

enum ExitCode : int { ok = 0, failure = 1, parse_error = 2, no_convergence = 3, invariant_failure = 4 };

/// Parses argv; throws InvalidInput on bad flags.
RunManifest parse_arguments(int argc, const char* const* argv);

/// Runs one command, writes its artifacts and summary.json under manifest.out.
int run(const RunManifest& manifest);

/// Parses and runs; maps parse problems to exit status 2.
int main(int argc, const char* const* argv);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace dyncontract::cli
