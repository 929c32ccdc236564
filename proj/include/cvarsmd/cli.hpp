#pragma once

// Command-line front end: simulate | optimize | frontier | calibrate | compare.
// Each command reads one JSON config, writes CSV/JSON artifacts into an output
// directory and a manifest.json carrying the config hash and master seed.
// Wall-clock measurements only ever go to *timing* files.

#include "cvarsmd/error.hpp"
#include "cvarsmd/frontier.hpp"
#include "cvarsmd/optim.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cvarsmd {

enum ExitCode : int { Ok = 0, Internal = 1, ConfigInvalid = 2, Infeasible = 3 };

/// Maps an error category onto a process exit code.
int exit_code_for(ErrorCode code) noexcept;

nlohmann::json model_to_json(const PortfolioModel& model);
/// `path` prefixes field names in error messages.
PortfolioModel model_from_json(const nlohmann::json& j, const std::string& path = "model");

struct ExperimentConfig {
    nlohmann::json source;          ///< effective document echoed into outputs
    std::optional<PortfolioModel> model;
    RiskConfig risk;
    std::optional<StepSchedule> schedule;
    std::optional<LambdaGrid> grid;
    InitialPoint init;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = ".";
    std::uint64_t thin_every = 0;
    std::size_t replications = 1;
    double theta_max = 1e6;
    std::size_t batch_size = 10;    ///< mcmd batch in compare, and default for optimize --method mcmd
    std::uint64_t simulate_samples = 0;
    int simulate_steps = 1;
};

/// Parses and validates a config document. `base_dir` resolves relative
/// model_path entries. Errors: Config naming the offending field path.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".");

/// FNV-1a of the compact dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

/// Entry point shared by the executable and the tests; args excludes argv[0].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace cvarsmd
