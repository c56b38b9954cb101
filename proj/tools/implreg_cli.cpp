#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "implreg/checks.hpp"
#include "implreg/config.hpp"
#include "implreg/experiments.hpp"

namespace {

using namespace implreg;

struct Overrides {
    std::string config_file;
    std::string manifest;
    bool full_scale = false;
    std::string output_dir;
    std::optional<int> jobs;
    std::optional<std::uint64_t> seed;
    std::optional<int> repetitions;
    std::optional<std::size_t> n_train, n_test, d;
    std::vector<double> gammas;
    std::vector<int> Ts;
    std::optional<std::string> loss, oracle, labels;
    std::optional<double> delta, label_bound;
    std::optional<std::size_t> oracle_samples;
    // rademacher
    std::optional<std::string> function_class, sign_method;
    std::optional<long> draws;
    std::optional<double> radius;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_file, "TOML experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--manifest", o.manifest, "re-run the config recorded in a manifest.json")
        ->check(CLI::ExistingFile);
    cmd->add_flag("--full-scale", o.full_scale, "full reference setup instead of desk-scale defaults");
    cmd->add_option("-o,--output-dir", o.output_dir,
                    fmt::format("output directory (default ${}/<command> or results/<command>)", kOutputDirEnv));
    cmd->add_option("-j,--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", o.seed, "base seed");
    cmd->add_option("--repetitions", o.repetitions, "repetitions per cell");
    cmd->add_option("--n-train", o.n_train, "training sample size");
    cmd->add_option("--n-test", o.n_test, "test sample size (default n_train / 3)");
    cmd->add_option("--d", o.d, "dimension");
    cmd->add_option("--gamma", o.gammas, "step size(s)")->delimiter(',');
    cmd->add_option("--T", o.Ts, "stopping time(s)")->delimiter(',');
    cmd->add_option("--loss", o.loss, "squared, logistic_regression, logistic_classification, exponential");
    cmd->add_option("--labels", o.labels, "regression or sign");
    cmd->add_option("--label-bound", o.label_bound, "label bound b for the squared loss constants");
    cmd->add_option("--oracle", o.oracle, "analytic_squared, gaussian_quadrature or monte_carlo");
    cmd->add_option("--oracle-samples", o.oracle_samples, "Monte Carlo oracle holdout size");
    cmd->add_option("--delta", o.delta, "confidence level");
}

ExperimentConfig resolve(Command command, const Overrides& o) {
    ExperimentConfig c;
    if (!o.manifest.empty()) {
        c = config_from_manifest(o.manifest);
        if (c.command != command)
            throw std::invalid_argument(
                fmt::format("manifest is for '{}', not '{}'", to_string(c.command), to_string(command)));
    } else {
        c = default_config(command, o.full_scale);
        if (!o.config_file.empty()) apply_toml(c, o.config_file);
        if (o.seed) c.seed = *o.seed;
        if (o.repetitions) c.repetitions = *o.repetitions;
        if (o.n_train) c.n_train = *o.n_train;
        if (o.n_test) c.n_test = *o.n_test;
        if (o.d) c.d = *o.d;
        if (!o.gammas.empty()) c.gammas = o.gammas;
        if (!o.Ts.empty()) c.Ts = o.Ts;
        if (o.loss) c.loss = parse_loss_kind(*o.loss);
        if (o.labels) c.labels = parse_label_kind(*o.labels);
        if (o.label_bound) c.label_bound = *o.label_bound;
        if (o.oracle) c.oracle = parse_oracle_mode(*o.oracle);
        if (o.oracle_samples) c.oracle_samples = *o.oracle_samples;
        if (o.delta) c.delta = *o.delta;
        if (o.function_class) c.function_class = *o.function_class;
        if (o.sign_method) c.sign_method = *o.sign_method;
        if (o.draws) c.sign_draws = *o.draws;
        if (o.radius) c.radius = *o.radius;
    }
    if (!o.output_dir.empty()) c.output_dir = o.output_dir;
    if (o.jobs) c.jobs = *o.jobs;
    c.validate();
    return c;
}

int execute(Command command, const Overrides& o) {
    const ExperimentConfig config = resolve(command, o);
    const RunResult result = run_command(config);
    for (const auto& w : result.warnings) std::cerr << "WARNING: " << w << '\n';
    std::cout << "wrote " << result.output_dir.string() << '\n';
    for (const auto& f : result.files) std::cout << "  " << f << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Batch gradient descent with implicit regularization: experiments and checks"};
    app.require_subcommand(1);

    Overrides o;
    struct Entry {
        Command command;
        const char* help;
        CLI::App* app;
    };
    std::vector<Entry> entries = {
        {Command::PathExperiment, "distance of the gradient path to w* over t", nullptr},
        {Command::GridExperiment, "excess risk of the averaged iterate over a (gamma, T) grid", nullptr},
        {Command::Bounds, "measured excess risk and noise against the theoretical bounds", nullptr},
        {Command::Rademacher, "Rademacher complexity estimates and their closed-form bounds", nullptr},
    };
    for (auto& e : entries) {
        e.app = app.add_subcommand(to_string(e.command), e.help);
        add_common(e.app, o);
    }
    CLI::App* rad = entries[3].app;
    rad->add_option("--class", o.function_class, "scalar, gradient or both");
    rad->add_option("--method", o.sign_method, "exhaustive, monte_carlo or both");
    rad->add_option("--draws", o.draws, "Monte Carlo sign draws");
    rad->add_option("--radius", o.radius, "ball radius R (default max{1, 3|w*|})");

    CLI::App* verify = app.add_subcommand("verify", "run the property suite and print a pass/fail table");
    VerifyOptions verify_options;
    verify->add_option("--seed", verify_options.seed, "base seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed()) {
            const auto results = run_verify_suite(verify_options);
            std::cout << format_table(results);
            for (const auto& r : results)
                if (!r.passed) return 1;
            return 0;
        }
        for (const auto& e : entries)
            if (e.app->parsed()) return execute(e.command, o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
