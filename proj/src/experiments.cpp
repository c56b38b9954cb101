#include "implreg/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "implreg/concentration.hpp"
#include "implreg/engine.hpp"
#include "implreg/rng.hpp"
#include "implreg/svg.hpp"

#ifndef IMPLREG_VERSION
#define IMPLREG_VERSION "0.0.0"
#endif

namespace implreg {

std::string code_version() { return "implreg " IMPLREG_VERSION; }

std::uint64_t repetition_seed(std::uint64_t base, int repetition) {
    return derive_seed(base, "repetition", static_cast<std::uint64_t>(repetition));
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body) {
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < std::min(workers, count); ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

namespace {

struct Moments {
    double mean = 0.0;
    double sd = 0.0;
};

Moments moments(const std::vector<double>& xs) {
    Moments m;
    if (xs.empty()) return m;
    for (double x : xs) m.mean += x;
    m.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - m.mean) * (x - m.mean);
        m.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return m;
}

// The oracle only needs the loss shape; its constants come from the model.
LossModel reference_loss(const ExperimentConfig& config) {
    const SyntheticModel model = config.model();
    return LossModel(config.loss, 1.0, path_radius(model.w_star), config.label_bound.value_or(1.0));
}

Dataset training_sample(const ExperimentConfig& config, int repetition) {
    return sample(config.model(), config.n_train, repetition_seed(config.seed, repetition));
}

Dataset test_sample(const ExperimentConfig& config, int repetition) {
    return sample(config.model(), config.test_size(),
                  derive_seed(repetition_seed(config.seed, repetition), "test"));
}

std::vector<PreconditionFlag> flag_gammas(const std::vector<double>& gammas,
                                          const std::vector<double>& limits) {
    const double limit = limits.empty() ? 0.0 : *std::min_element(limits.begin(), limits.end());
    std::vector<PreconditionFlag> flags;
    for (double g : gammas) flags.push_back({g, limit, g > limit});
    return flags;
}

}  // namespace

PopulationOracle make_oracle(const ExperimentConfig& config) {
    const SyntheticModel model = config.model();
    const LossModel loss = reference_loss(config);
    switch (config.oracle) {
        case OracleMode::AnalyticSquared: return PopulationOracle::analytic_squared(model, loss);
        case OracleMode::GaussianQuadrature:
            return PopulationOracle::gaussian_quadrature(model, loss, config.quadrature_nodes);
        case OracleMode::MonteCarlo:
            return PopulationOracle::monte_carlo(model, loss, config.oracle_samples, config.seed);
    }
    throw std::logic_error("unhandled oracle mode");
}

LossModel sample_loss(const ExperimentConfig& config, const Dataset& data, const Vector& w_star) {
    return LossModel(config.loss, data.kappa, path_radius(w_star),
                     config.label_bound.value_or(data.label_bound()));
}

PathCurve path_curve(const ExperimentConfig& config) {
    config.validate();
    const PopulationOracle oracle = make_oracle(config);
    const Vector& w_star = oracle.w_star();
    const int T = config.max_T();
    const auto reps = static_cast<std::size_t>(config.repetitions);
    std::vector<std::vector<double>> dists(reps);
    std::vector<double> limits(reps);
    DescentConfig descent{config.gammas.front(), T, std::nullopt};

    parallel_for(reps, config.jobs, [&](std::size_t r) {
        const Dataset data = training_sample(config, static_cast<int>(r));
        const LossModel loss = sample_loss(config, data, w_star);
        limits[r] = 1.0 / (data.kappa * data.kappa * loss.smoothness());
        auto& out = dists[r];
        out.reserve(static_cast<std::size_t>(T));
        run_streaming(loss, data, descent,
                      [&](int, const Vector& v, const Vector&) { out.push_back((v - w_star).norm()); });
    });

    PathCurve curve;
    curve.radius = path_radius(w_star);
    curve.threshold = 2.0 * curve.radius / 3.0;
    std::vector<double> column(reps);
    for (std::size_t t = 0; t < static_cast<std::size_t>(T); ++t) {
        for (std::size_t r = 0; r < reps; ++r) column[r] = dists[r][t];
        const Moments m = moments(column);
        curve.mean_dist.push_back(m.mean);
        curve.sd_dist.push_back(m.sd);
    }
    curve.flags = flag_gammas(config.gammas, limits);
    return curve;
}

const GridCell& GridResult::at(double gamma, int T) const {
    for (const auto& c : cells)
        if (c.gamma == gamma && c.T == T) return c;
    throw std::out_of_range(fmt::format("no grid cell for gamma = {}, T = {}", gamma, T));
}

GridResult grid_cells(const ExperimentConfig& config) {
    config.validate();
    const PopulationOracle oracle = make_oracle(config);
    const Vector& w_star = oracle.w_star();
    std::vector<int> Ts = config.Ts;
    std::sort(Ts.begin(), Ts.end());
    Ts.erase(std::unique(Ts.begin(), Ts.end()), Ts.end());
    const int T_max = Ts.back();
    const std::size_t G = config.gammas.size(), K = Ts.size();
    const auto reps = static_cast<std::size_t>(config.repetitions);

    // excess[r][g * K + k], test[r][g * K + k]
    std::vector<std::vector<double>> excess(reps, std::vector<double>(G * K));
    std::vector<std::vector<double>> test(reps, std::vector<double>(G * K));
    std::vector<double> limits(reps);

    parallel_for(reps, config.jobs, [&](std::size_t r) {
        const Dataset data = training_sample(config, static_cast<int>(r));
        const Dataset held_out = test_sample(config, static_cast<int>(r));
        const LossModel loss = sample_loss(config, data, w_star);
        limits[r] = 1.0 / (data.kappa * data.kappa * loss.smoothness());
        const double test_at_w_star = empirical_risk(loss, held_out, w_star);
        for (std::size_t g = 0; g < G; ++g) {
            std::size_t k = 0;
            run_streaming(loss, data, DescentConfig{config.gammas[g], T_max, std::nullopt},
                          [&](int t, const Vector&, const Vector& average) {
                              if (k >= K || t != Ts[k]) return;
                              excess[r][g * K + k] = oracle.excess_risk(average).value;
                              test[r][g * K + k] = empirical_risk(loss, held_out, average) - test_at_w_star;
                              ++k;
                          });
        }
    });

    GridResult result;
    std::vector<double> a(reps), b(reps);
    for (std::size_t g = 0; g < G; ++g) {
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t r = 0; r < reps; ++r) {
                a[r] = excess[r][g * K + k];
                b[r] = test[r][g * K + k];
            }
            const Moments ma = moments(a), mb = moments(b);
            result.cells.push_back({config.gammas[g], Ts[k], ma.mean, ma.sd, mb.mean, mb.sd});
        }
    }
    result.flags = flag_gammas(config.gammas, limits);
    return result;
}

std::vector<BoundRun> bound_runs(const ExperimentConfig& config) {
    config.validate();
    const PopulationOracle oracle = make_oracle(config);
    const Vector& w_star = oracle.w_star();
    const int T = config.max_T();
    const double log_term = std::log(4.0 / config.delta);
    const auto reps = static_cast<std::size_t>(config.repetitions);
    std::vector<BoundRun> runs(reps);

    parallel_for(reps, config.jobs, [&](std::size_t r) {
        const std::uint64_t seed = repetition_seed(config.seed, static_cast<int>(r));
        const Dataset data = sample(config.model(), config.n_train, seed);
        const LossModel loss = sample_loss(config, data, w_star);
        const double kappa = data.kappa, L = loss.lipschitz(), M = loss.smoothness();
        const std::size_t n = data.n();

        BoundReport report;
        report.radius = path_radius(w_star);
        report.gamma_T_schedule = schedule_gamma_T_log(n, kappa, L, M, log_term);
        report.T = T;
        // The schedule meets the sample-size condition with equality; step
        // down to the nearest products that satisfy it in floating point.
        double gamma = report.gamma_T_schedule / T;
        for (int k = 0; k < 64 && !sample_size_condition_log(n, gamma * T, kappa, L, M, log_term); ++k)
            gamma = std::nextafter(gamma, 0.0);
        report.gamma = gamma;
        report.n_condition_ok = sample_size_condition_log(n, gamma * T, kappa, L, M, log_term);
        report.bounds = excess_risk_bounds_log(n, gamma * T, std::log(static_cast<double>(T)), log_term,
                                            w_star.squaredNorm(), kappa, L, M);
        report.concentration = concentration_bound_log(kappa, L, M, report.radius, n, log_term);

        const DescentPath path = run(loss, data, DescentConfig{gamma, T, std::nullopt});
        report.measured.excess_avg = oracle.excess_risk(averaged_iterate(path)).value;
        report.measured.excess_last = oracle.excess_risk(last_iterate(path)).value;
        ProbeSet probes;
        probes.seed = derive_seed(seed, "noise-probes");
        probes.extra = path.iterates;
        report.measured.sup_noise = empirical_sup_noise(loss, data, oracle, report.radius, probes);
        report.measured.path = check_bounded_path(path, w_star, report.radius);
        runs[r] = {seed, report};
    });
    return runs;
}

std::vector<RademacherRecord> rademacher_records(const ExperimentConfig& config) {
    config.validate();
    const SyntheticModel model = config.model();
    const Dataset data = sample(model, config.n_train, derive_seed(config.seed, "rademacher"));
    const double radius = config.radius.value_or(path_radius(model.w_star));
    const LossModel loss(config.loss, data.kappa, radius,
                         config.label_bound.value_or(data.label_bound()));
    const RademacherBounds bounds =
        rademacher_bounds(data.kappa, loss.lipschitz(), loss.smoothness(), radius, data.n());

    std::vector<SignMethod> methods;
    if (config.sign_method != "monte_carlo") methods.push_back(SignMethod::exhaustive());
    if (config.sign_method != "exhaustive")
        methods.push_back(SignMethod::monte_carlo(config.sign_draws, derive_seed(config.seed, "signs")));

    std::vector<RademacherRecord> records;
    for (const char* cls : {"scalar", "gradient"}) {
        if (config.function_class != "both" && config.function_class != cls) continue;
        for (const auto& method : methods) {
            const bool scalar = std::string(cls) == "scalar";
            const RademacherEstimate est = scalar ? rademacher_scalar(data, radius, method)
                                                  : rademacher_gradient(loss, data, radius, method);
            records.push_back({cls, data.n(), radius,
                               method.kind == SignMethod::Kind::Exhaustive ? "exhaustive" : "monte_carlo",
                               est.value, est.std_error, scalar ? bounds.scalar : bounds.gradient});
        }
    }
    return records;
}

namespace {

class OutputWriter {
public:
    explicit OutputWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw std::runtime_error(fmt::format("cannot write {}", (dir_ / name).string()));
        out << content;
        files_.push_back(name);
    }

    const std::vector<std::string>& files() const { return files_; }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

nlohmann::ordered_json flags_json(const std::vector<PreconditionFlag>& flags) {
    auto out = nlohmann::ordered_json::array();
    for (const auto& f : flags)
        out.push_back({{"gamma", f.gamma}, {"gamma_limit", f.gamma_limit}, {"violated", f.violated}});
    return out;
}

std::vector<std::string> flag_warnings(const std::vector<PreconditionFlag>& flags) {
    std::vector<std::string> out;
    for (const auto& f : flags)
        if (f.violated)
            out.push_back(fmt::format("gamma = {} exceeds 1/(kappa^2 M) = {:.4g}; step-size precondition violated",
                                      f.gamma, f.gamma_limit));
    return out;
}

void run_path(const ExperimentConfig& config, OutputWriter& out, nlohmann::ordered_json& extra,
              std::vector<std::string>& warnings) {
    const PathCurve curve = path_curve(config);
    std::string csv = "t,mean_dist,sd_dist\n";
    svg::Series series{"mean |v_t - w*|", {}, {}};
    for (std::size_t t = 0; t < curve.mean_dist.size(); ++t) {
        csv += fmt::format("{},{},{}\n", t + 1, curve.mean_dist[t], curve.sd_dist[t]);
        series.xs.push_back(static_cast<double>(t + 1));
        series.ys.push_back(curve.mean_dist[t]);
    }
    out.write("path.csv", csv);
    svg::LinePlot plot{fmt::format("Gradient path, gamma = {}, n = {}", config.gammas.front(), config.n_train),
                       "t", "mean distance to w*", {series},
                       svg::Threshold{curve.threshold, "2R/3"}, false};
    out.write("path.svg", svg::render(plot));
    extra["radius"] = curve.radius;
    extra["threshold"] = curve.threshold;
    extra["preconditions"] = flags_json(curve.flags);
    warnings = flag_warnings(curve.flags);
}

void run_grid(const ExperimentConfig& config, OutputWriter& out, nlohmann::ordered_json& extra,
              std::vector<std::string>& warnings) {
    const GridResult grid = grid_cells(config);
    std::string csv = "gamma,T,gamma_T,mean_excess,sd\n";
    std::string test_csv = csv;
    for (const auto& c : grid.cells) {
        csv += fmt::format("{},{},{},{},{}\n", c.gamma, c.T, c.gamma * c.T, c.mean_excess, c.sd);
        test_csv += fmt::format("{},{},{},{},{}\n", c.gamma, c.T, c.gamma * c.T, c.mean_test_excess, c.sd_test);
    }
    out.write("grid.csv", csv);
    out.write("grid_test.csv", test_csv);

    // Cells sharing a product gamma T.
    std::vector<std::pair<double, const GridCell*>> by_product;
    for (const auto& c : grid.cells) by_product.emplace_back(c.gamma * c.T, &c);
    std::stable_sort(by_product.begin(), by_product.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::string diag = "gamma_T,cells,min_excess,max_excess,max_relative_difference\n";
    for (std::size_t i = 0; i < by_product.size();) {
        std::size_t j = i;
        double lo = by_product[i].second->mean_excess, hi = lo;
        while (j < by_product.size() && by_product[j].first == by_product[i].first) {
            lo = std::min(lo, by_product[j].second->mean_excess);
            hi = std::max(hi, by_product[j].second->mean_excess);
            ++j;
        }
        if (j - i >= 2) {
            const double rel = hi + lo > 0.0 ? (hi - lo) / (0.5 * (hi + lo)) : 0.0;
            diag += fmt::format("{},{},{},{},{}\n", by_product[i].first, j - i, lo, hi, rel);
        }
        i = j;
    }
    out.write("grid_constant_product.csv", diag);

    std::vector<int> Ts;
    for (const auto& c : grid.cells)
        if (c.gamma == config.gammas.front()) Ts.push_back(c.T);
    svg::Heatmap map{"Excess risk of the averaged iterate", "T", "gamma", {}, {}, {}};
    for (int T : Ts) map.x_ticks.push_back(std::to_string(T));
    for (double g : config.gammas) {
        map.y_ticks.push_back(fmt::format("{}", g));
        std::vector<double> row;
        for (int T : Ts) row.push_back(grid.at(g, T).mean_excess);
        map.values.push_back(std::move(row));
    }
    out.write("grid.svg", svg::render(map));
    extra["headline_estimator"] = "oracle";
    extra["preconditions"] = flags_json(grid.flags);
    warnings = flag_warnings(grid.flags);
}

void run_bounds(const ExperimentConfig& config, OutputWriter& out, nlohmann::ordered_json& extra,
                std::vector<std::string>& warnings) {
    const auto runs = bound_runs(config);
    nlohmann::ordered_json j;
    auto reports = nlohmann::ordered_json::array();
    int avg_ok = 0, last_ok = 0, noise_ok = 0, bounded = 0, n_ok = 0;
    for (const auto& run : runs) {
        const auto& r = run.report;
        nlohmann::ordered_json rec;
        rec["seed"] = run.seed;
        rec["radius"] = r.radius;
        rec["n_condition_ok"] = r.n_condition_ok;
        rec["gamma_T_schedule"] = r.gamma_T_schedule;
        rec["gamma"] = r.gamma;
        rec["T"] = r.T;
        rec["thm_avg_bound"] = r.bounds.averaged;
        rec["thm_last_bound"] = r.bounds.last;
        rec["thm_avg_bound_scheduled"] = r.bounds.averaged_scheduled;
        rec["thm_last_bound_scheduled"] = r.bounds.last_scheduled;
        rec["concentration_bound"] = r.concentration.simplified;
        rec["concentration_raw"] = r.concentration.raw;
        rec["concentration_valid"] = r.concentration.valid;
        rec["measured"] = {{"excess_avg", r.measured.excess_avg},
                           {"excess_last", r.measured.excess_last},
                           {"sup_noise", r.measured.sup_noise},
                           {"bounded_path", r.measured.path.bounded}};
        if (r.measured.path.first_violation) rec["measured"]["first_violation"] = *r.measured.path.first_violation;
        rec["within"] = {{"averaged", r.averaged_within()}, {"last", r.last_within()}, {"noise", r.noise_within()}};
        reports.push_back(rec);
        avg_ok += r.averaged_within();
        last_ok += r.last_within();
        noise_ok += r.noise_within();
        bounded += r.measured.path.bounded;
        n_ok += r.n_condition_ok;
        if (!r.n_condition_ok)
            warnings.push_back(fmt::format("seed {}: sample-size condition FAILS at the schedule", run.seed));
    }
    j["summary"] = {{"repetitions", runs.size()},
                    {"n_condition_ok", n_ok},
                    {"averaged_within", avg_ok},
                    {"last_within", last_ok},
                    {"noise_within", noise_ok},
                    {"bounded_path", bounded}};
    j["reports"] = std::move(reports);
    out.write("bounds.json", j.dump(2) + "\n");
    extra["summary"] = j["summary"];
}

void run_rademacher(const ExperimentConfig& config, OutputWriter& out, nlohmann::ordered_json&,
                    std::vector<std::string>&) {
    auto records = nlohmann::ordered_json::array();
    for (const auto& r : rademacher_records(config))
        records.push_back({{"class", r.function_class},
                           {"n", r.n},
                           {"R", r.radius},
                           {"method", r.method},
                           {"value", r.value},
                           {"std_error", r.std_error},
                           {"bound", r.bound}});
    out.write("rademacher.json", records.dump(2) + "\n");
}

}  // namespace

RunResult run_command(const ExperimentConfig& config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    std::filesystem::path dir = config.output_dir;
    if (dir.empty()) dir = default_output_dir() / to_string(config.command);
    OutputWriter out(dir);
    nlohmann::ordered_json extra = nlohmann::ordered_json::object();
    std::vector<std::string> warnings;

    switch (config.command) {
        case Command::PathExperiment: run_path(config, out, extra, warnings); break;
        case Command::GridExperiment: run_grid(config, out, extra, warnings); break;
        case Command::Bounds: run_bounds(config, out, extra, warnings); break;
        case Command::Rademacher: run_rademacher(config, out, extra, warnings); break;
    }

    nlohmann::ordered_json manifest;
    manifest["schema_version"] = kManifestSchemaVersion;
    manifest["code_version"] = code_version();
    manifest["command"] = to_string(config.command);
    manifest["config"] = to_json(config);
    auto seeds = nlohmann::ordered_json::array();
    for (int r = 0; r < config.repetitions; ++r) seeds.push_back(repetition_seed(config.seed, r));
    manifest["repetition_seeds"] = seeds;
    manifest["diagnostics"] = extra;
    auto files = out.files();
    files.push_back("manifest.json");
    manifest["files"] = files;
    manifest["timing_file"] = "timing.txt";
    out.write("manifest.json", manifest.dump(2) + "\n");

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream timing(dir / "timing.txt");
    timing << fmt::format("elapsed_seconds {:.3f}\njobs {}\n", seconds, config.jobs);

    return {dir, out.files(), warnings};
}

ExperimentConfig config_from_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw std::invalid_argument(fmt::format("cannot read manifest {}", manifest.string()));
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(fmt::format("{}: {}", manifest.string(), e.what()));
    }
    if (j.value("schema_version", 0) != kManifestSchemaVersion)
        throw std::invalid_argument(fmt::format("{}: unsupported manifest schema", manifest.string()));
    if (!j.contains("config")) throw std::invalid_argument(fmt::format("{}: no config record", manifest.string()));
    return config_from_json(j["config"]);
}

}  // namespace implreg
