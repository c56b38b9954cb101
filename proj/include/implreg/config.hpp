#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "implreg/data.hpp"
#include "implreg/losses.hpp"
#include "implreg/oracle.hpp"

namespace implreg {

enum class Command { PathExperiment, GridExperiment, Bounds, Rademacher };

std::string to_string(Command command);
Command parse_command(const std::string& name);

/// Invalid configuration; the message names the offending field.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& field, const std::string& problem);
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct ExperimentConfig {
    Command command = Command::PathExperiment;

    LossKind loss = LossKind::LogisticRegression;
    std::optional<double> label_bound;  ///< squared loss b; defaults to max |y| of each sample

    std::size_t d = 100;
    std::optional<LabelKind> labels;  ///< defaults to Sign for classification losses
    double noise_sd = 1.0;
    std::optional<double> kappa_cap;

    std::size_t n_train = 2000;
    std::optional<std::size_t> n_test;  ///< defaults to n_train / 3

    std::vector<double> gammas;
    std::vector<int> Ts;
    int repetitions = 20;
    double delta = 0.05;
    std::uint64_t seed = 1;

    OracleMode oracle = OracleMode::GaussianQuadrature;
    std::size_t oracle_samples = 20000;  ///< Monte Carlo holdout size
    int quadrature_nodes = 128;

    // rademacher command
    std::string function_class = "both";  ///< scalar, gradient or both
    std::string sign_method = "both";     ///< exhaustive, monte_carlo or both
    long sign_draws = 2000;
    std::optional<double> radius;  ///< defaults to max{1, 3 |w*|}

    // execution only; not part of the resolved config
    int jobs = 1;
    std::filesystem::path output_dir;

    std::size_t test_size() const { return n_test.value_or(n_train / 3); }
    LabelKind label_kind() const;
    SyntheticModel model() const;
    int max_T() const;

    /// Throws ConfigError naming the first invalid field.
    void validate() const;
};

/// Defaults for a command: desk scale, or the full reference setup.
ExperimentConfig default_config(Command command, bool full_scale = false);

/// About `count` log-spaced stopping times in [1, max_T], always containing
/// the values in `required` that lie in range. Sorted and unique.
std::vector<int> log_spaced_times(int max_T, int count, const std::vector<int>& required);

/// Overrides fields present in a TOML file. Unknown keys are errors.
void apply_toml(ExperimentConfig& config, const std::filesystem::path& file);

/// Resolved configuration without execution-only fields.
nlohmann::ordered_json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::ordered_json& j);

/// IMPLREG_OUTPUT_DIR when set, otherwise "results".
std::filesystem::path default_output_dir();

inline constexpr const char* kOutputDirEnv = "IMPLREG_OUTPUT_DIR";

}  // namespace implreg
