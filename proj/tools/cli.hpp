// co2occ command-line entry points.
//
// Exit statuses: 0 success, 1 I/O error, 2 validation error (including bad
// command-line usage), 3 numerical failure.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace co2occ::cli {

enum ExitCode : int { kOk = 0, kIo = 1, kValidation = 2, kNumerical = 3 };

struct SimulateArgs {
    std::optional<std::string> config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

struct FitArgs {
    std::string trace;
    std::optional<std::string> config;
    std::string out;
    std::optional<std::string> init_model;  ///< start from a saved model instead of physics
    std::optional<double> ambient;
    std::optional<std::string> report;      ///< plain-text summary
    std::optional<std::string> loglik_csv;
    std::optional<std::string> json_report;
};

struct DecodeArgs {
    std::string model;
    std::string trace;
    std::string out;
    std::optional<double> ambient;
};

struct ScoreArgs {
    std::string decoded;
    std::string trace;
    std::optional<int> max_occupancy;
    std::optional<std::string> json_report;
};

struct SweepArgs {
    std::optional<std::string> config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
};

int cmd_simulate(const SimulateArgs& args, std::ostream& log);
int cmd_fit(const FitArgs& args, std::ostream& log);
int cmd_decode(const DecodeArgs& args, std::ostream& log);
int cmd_score(const ScoreArgs& args, std::ostream& out, std::ostream& log);
int cmd_sweep(const SweepArgs& args, std::ostream& log);

/// Parses argv and dispatches to a subcommand.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& log);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log);

}  // namespace co2occ::cli
