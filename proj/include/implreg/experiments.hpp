#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "implreg/analysis.hpp"
#include "implreg/config.hpp"
#include "implreg/oracle.hpp"

namespace implreg {

inline constexpr int kManifestSchemaVersion = 1;

std::string code_version();

/// Seed of repetition r, independent across r.
std::uint64_t repetition_seed(std::uint64_t base, int repetition);

/// Runs body(i) for i in [0, count) on `jobs` threads. Work items must be
/// independent; the first exception by index is rethrown.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body);

/// Population oracle for the configured loss and model.
PopulationOracle make_oracle(const ExperimentConfig& config);

/// Loss with the constants of one training sample: kappa from the data,
/// R = max{1, 3 |w*|}, and b = max |y| unless configured.
LossModel sample_loss(const ExperimentConfig& config, const Dataset& data, const Vector& w_star);

/// Step sizes above 1/(kappa^2 M) for some repetition.
struct PreconditionFlag {
    double gamma = 0.0;
    double gamma_limit = 0.0;  ///< smallest 1/(kappa^2 M) over repetitions
    bool violated = false;
};

struct PathCurve {
    std::vector<double> mean_dist;  ///< t = 1..T
    std::vector<double> sd_dist;
    double radius = 0.0;
    double threshold = 0.0;  ///< 2R/3
    std::vector<PreconditionFlag> flags;
};

PathCurve path_curve(const ExperimentConfig& config);

struct GridCell {
    double gamma = 0.0;
    int T = 0;
    double mean_excess = 0.0;  ///< oracle excess risk of the averaged iterate
    double sd = 0.0;
    double mean_test_excess = 0.0;  ///< test-sample estimate of the same quantity
    double sd_test = 0.0;
};

struct GridResult {
    std::vector<GridCell> cells;  ///< ordered by (gamma, T)
    std::vector<PreconditionFlag> flags;
    const GridCell& at(double gamma, int T) const;
};

GridResult grid_cells(const ExperimentConfig& config);

struct BoundRun {
    std::uint64_t seed = 0;
    BoundReport report;
};

/// One report per repetition at the scheduled gamma T, T = max of the T grid.
std::vector<BoundRun> bound_runs(const ExperimentConfig& config);

struct RademacherRecord {
    std::string function_class;
    std::size_t n = 0;
    double radius = 0.0;
    std::string method;
    double value = 0.0;
    double std_error = 0.0;
    double bound = 0.0;
};

std::vector<RademacherRecord> rademacher_records(const ExperimentConfig& config);

struct RunResult {
    std::filesystem::path output_dir;
    std::vector<std::string> files;  ///< relative to output_dir, manifest included
    std::vector<std::string> warnings;
};

/// Runs the configured command and writes its CSV/JSON/SVG files,
/// manifest.json and timing.txt into the output directory.
RunResult run_command(const ExperimentConfig& config);

/// Config stored in a manifest written by run_command.
ExperimentConfig config_from_manifest(const std::filesystem::path& manifest);

}  // namespace implreg
