#include "implreg/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

#include <fmt/format.h>

#include "implreg/concentration.hpp"

#define TOML_EXCEPTIONS 1
#include "tomlplusplus/toml.hpp"

namespace implreg {

std::string to_string(Command command) {
    switch (command) {
        case Command::PathExperiment: return "path-experiment";
        case Command::GridExperiment: return "grid-experiment";
        case Command::Bounds: return "bounds";
        case Command::Rademacher: return "rademacher";
    }
    return "unknown";
}

Command parse_command(const std::string& name) {
    for (auto c : {Command::PathExperiment, Command::GridExperiment, Command::Bounds,
                   Command::Rademacher})
        if (to_string(c) == name) return c;
    throw std::invalid_argument(fmt::format("unknown command '{}'", name));
}

ConfigError::ConfigError(const std::string& field, const std::string& problem)
    : std::invalid_argument(fmt::format("config field '{}': {}", field, problem)), field_(field) {}

LabelKind ExperimentConfig::label_kind() const {
    return labels.value_or(is_classification(loss) ? LabelKind::Sign : LabelKind::Regression);
}

SyntheticModel ExperimentConfig::model() const {
    SyntheticModel m = make_reference_model(d);
    m.noise_sd = noise_sd;
    m.seed = seed;
    m.labels = label_kind();
    m.kappa_cap = kappa_cap;
    return m;
}

int ExperimentConfig::max_T() const { return Ts.empty() ? 0 : *std::max_element(Ts.begin(), Ts.end()); }

void ExperimentConfig::validate() const {
    if (d < 1) throw ConfigError("model.d", "must be >= 1");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw ConfigError("model.noise_sd", "must be finite and >= 0");
    if (kappa_cap && !(*kappa_cap > 0.0)) throw ConfigError("model.kappa_cap", "must be > 0");
    if (label_bound && !(*label_bound >= 0.0)) throw ConfigError("loss.label_bound", "must be >= 0");
    if (is_classification(loss) && labels == LabelKind::Regression)
        throw ConfigError("model.labels", "classification losses need sign labels");
    if (n_train < 1) throw ConfigError("data.n_train", "must be >= 1");
    if (n_test && *n_test < 1) throw ConfigError("data.n_test", "must be >= 1");
    if (repetitions < 1) throw ConfigError("repetitions", "must be >= 1");
    if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta", "must lie in (0, 1]");
    if (jobs < 1) throw ConfigError("jobs", "must be >= 1");
    if (oracle == OracleMode::MonteCarlo && oracle_samples < 2)
        throw ConfigError("oracle.samples", "must be >= 2");
    if (quadrature_nodes < 2) throw ConfigError("oracle.nodes", "must be >= 2");
    if (oracle == OracleMode::AnalyticSquared && loss != LossKind::Squared)
        throw ConfigError("oracle.mode", "analytic oracle needs the squared loss");
    if (oracle == OracleMode::GaussianQuadrature &&
        (is_classification(loss) || loss == LossKind::Exponential))
        throw ConfigError("oracle.mode", "quadrature oracle needs a residual loss");

    if (command == Command::Rademacher) {
        if (function_class != "scalar" && function_class != "gradient" && function_class != "both")
            throw ConfigError("rademacher.class", "must be scalar, gradient or both");
        if (sign_method != "exhaustive" && sign_method != "monte_carlo" && sign_method != "both")
            throw ConfigError("rademacher.method", "must be exhaustive, monte_carlo or both");
        if (sign_method != "monte_carlo" && n_train > kMaxExhaustiveSamples)
            throw ConfigError("data.n_train",
                              fmt::format("exhaustive enumeration needs n <= {}", kMaxExhaustiveSamples));
        if (sign_draws < 2) throw ConfigError("rademacher.draws", "must be >= 2");
        if (radius && !(*radius > 0.0)) throw ConfigError("rademacher.radius", "must be > 0");
        return;
    }

    if (Ts.empty()) throw ConfigError("grid.T", "must be non-empty");
    for (int T : Ts)
        if (T < 1) throw ConfigError("grid.T", fmt::format("stopping time {} < 1", T));
    if (command == Command::Bounds) {
        if (max_T() < 3) throw ConfigError("grid.T", "bounds need T >= 3");
        return;
    }
    if (gammas.empty()) throw ConfigError("grid.gamma", "must be non-empty");
    for (double g : gammas)
        if (!(g > 0.0) || !std::isfinite(g))
            throw ConfigError("grid.gamma", fmt::format("step size {} must be positive", g));
    if (command == Command::PathExperiment && gammas.size() != 1)
        throw ConfigError("grid.gamma", "path experiment takes a single step size");
}

std::vector<int> log_spaced_times(int max_T, int count, const std::vector<int>& required) {
    if (max_T < 1) throw std::invalid_argument("max_T must be >= 1");
    std::set<int> values;
    for (int k = 0; k < count; ++k) {
        const double frac = count > 1 ? static_cast<double>(k) / (count - 1) : 1.0;
        values.insert(static_cast<int>(std::lround(std::pow(static_cast<double>(max_T), frac))));
    }
    for (int r : required)
        if (r >= 1 && r <= max_T) values.insert(r);
    return {values.begin(), values.end()};
}

ExperimentConfig default_config(Command command, bool full_scale) {
    ExperimentConfig c;
    c.command = command;
    c.n_train = full_scale ? 10000 : 2000;
    c.repetitions = full_scale ? 100 : 20;
    switch (command) {
        case Command::PathExperiment:
            c.gammas = {1.0};
            c.Ts = {1000};
            break;
        case Command::GridExperiment:
            c.gammas = {2, 3, 4, 5, 6, 7, 8, 9, 10};
            if (full_scale) {
                for (int T = 1; T <= 1000; ++T) c.Ts.push_back(T);
            } else {
                c.Ts = log_spaced_times(1000, 26, {1, 100, 200, 500, 1000});
            }
            break;
        case Command::Bounds:
            c.loss = LossKind::Squared;
            c.oracle = OracleMode::AnalyticSquared;
            c.n_train = 10000;
            c.Ts = {100};
            break;
        case Command::Rademacher:
            c.loss = LossKind::Squared;
            c.n_train = 12;
            c.repetitions = 1;
            break;
    }
    return c;
}

namespace {

template <class T>
T require(const toml::node& node, const std::string& field) {
    if (auto v = node.value<T>()) return *v;
    throw ConfigError(field, "has the wrong type");
}

std::size_t require_size(const toml::node& node, const std::string& field) {
    const auto v = require<std::int64_t>(node, field);
    if (v < 0) throw ConfigError(field, "must be >= 0");
    return static_cast<std::size_t>(v);
}

void check_keys(const toml::table& table, const std::string& prefix,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : table) {
        const std::string k(key.str());
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
            throw ConfigError(prefix.empty() ? k : prefix + "." + k, "unknown key");
    }
}

const toml::table* section(const toml::table& root, const char* name) {
    const auto* node = root.get(name);
    if (!node) return nullptr;
    if (const auto* t = node->as_table()) return t;
    throw ConfigError(name, "must be a table");
}

}  // namespace

void apply_toml(ExperimentConfig& c, const std::filesystem::path& file) {
    toml::table root;
    try {
        root = toml::parse_file(file.string());
    } catch (const toml::parse_error& e) {
        throw std::invalid_argument(fmt::format("{}: {}", file.string(), e.description()));
    }
    check_keys(root, "", {"command", "seed", "repetitions", "delta", "jobs", "output_dir", "loss",
                          "model", "data", "grid", "oracle", "rademacher"});
    if (const auto* n = root.get("command")) {
        const auto name = require<std::string>(*n, "command");
        if (parse_command(name) != c.command)
            throw ConfigError("command", fmt::format("file is for '{}', not '{}'", name, to_string(c.command)));
    }
    if (const auto* n = root.get("seed")) {
        const auto v = require<std::int64_t>(*n, "seed");
        if (v < 0) throw ConfigError("seed", "must be >= 0");
        c.seed = static_cast<std::uint64_t>(v);
    }
    if (const auto* n = root.get("repetitions")) c.repetitions = static_cast<int>(require<std::int64_t>(*n, "repetitions"));
    if (const auto* n = root.get("delta")) c.delta = require<double>(*n, "delta");
    if (const auto* n = root.get("jobs")) c.jobs = static_cast<int>(require<std::int64_t>(*n, "jobs"));
    if (const auto* n = root.get("output_dir")) c.output_dir = require<std::string>(*n, "output_dir");

    if (const auto* t = section(root, "loss")) {
        check_keys(*t, "loss", {"kind", "label_bound"});
        if (const auto* n = t->get("kind")) {
            try {
                c.loss = parse_loss_kind(require<std::string>(*n, "loss.kind"));
            } catch (const ConfigError&) {
                throw;
            } catch (const std::invalid_argument& e) {
                throw ConfigError("loss.kind", e.what());
            }
        }
        if (const auto* n = t->get("label_bound")) c.label_bound = require<double>(*n, "loss.label_bound");
    }
    if (const auto* t = section(root, "model")) {
        check_keys(*t, "model", {"d", "labels", "noise_sd", "kappa_cap"});
        if (const auto* n = t->get("d")) c.d = require_size(*n, "model.d");
        if (const auto* n = t->get("labels")) {
            try {
                c.labels = parse_label_kind(require<std::string>(*n, "model.labels"));
            } catch (const ConfigError&) {
                throw;
            } catch (const std::invalid_argument& e) {
                throw ConfigError("model.labels", e.what());
            }
        }
        if (const auto* n = t->get("noise_sd")) c.noise_sd = require<double>(*n, "model.noise_sd");
        if (const auto* n = t->get("kappa_cap")) c.kappa_cap = require<double>(*n, "model.kappa_cap");
    }
    if (const auto* t = section(root, "data")) {
        check_keys(*t, "data", {"n_train", "n_test"});
        if (const auto* n = t->get("n_train")) c.n_train = require_size(*n, "data.n_train");
        if (const auto* n = t->get("n_test")) c.n_test = require_size(*n, "data.n_test");
    }
    if (const auto* t = section(root, "grid")) {
        check_keys(*t, "grid", {"gamma", "T"});
        if (const auto* n = t->get("gamma")) {
            const auto* arr = n->as_array();
            if (!arr) throw ConfigError("grid.gamma", "must be an array");
            c.gammas.clear();
            for (const auto& e : *arr) c.gammas.push_back(require<double>(e, "grid.gamma"));
        }
        if (const auto* n = t->get("T")) {
            const auto* arr = n->as_array();
            if (!arr) throw ConfigError("grid.T", "must be an array");
            c.Ts.clear();
            for (const auto& e : *arr) c.Ts.push_back(static_cast<int>(require<std::int64_t>(e, "grid.T")));
        }
    }
    if (const auto* t = section(root, "oracle")) {
        check_keys(*t, "oracle", {"mode", "samples", "nodes"});
        if (const auto* n = t->get("mode")) {
            try {
                c.oracle = parse_oracle_mode(require<std::string>(*n, "oracle.mode"));
            } catch (const ConfigError&) {
                throw;
            } catch (const std::invalid_argument& e) {
                throw ConfigError("oracle.mode", e.what());
            }
        }
        if (const auto* n = t->get("samples")) c.oracle_samples = require_size(*n, "oracle.samples");
        if (const auto* n = t->get("nodes")) c.quadrature_nodes = static_cast<int>(require<std::int64_t>(*n, "oracle.nodes"));
    }
    if (const auto* t = section(root, "rademacher")) {
        check_keys(*t, "rademacher", {"class", "method", "draws", "radius"});
        if (const auto* n = t->get("class")) c.function_class = require<std::string>(*n, "rademacher.class");
        if (const auto* n = t->get("method")) c.sign_method = require<std::string>(*n, "rademacher.method");
        if (const auto* n = t->get("draws")) c.sign_draws = require<std::int64_t>(*n, "rademacher.draws");
        if (const auto* n = t->get("radius")) c.radius = require<double>(*n, "rademacher.radius");
    }
}

nlohmann::ordered_json to_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["command"] = to_string(c.command);
    j["loss"] = {{"kind", std::string(to_string(c.loss))}};
    if (c.label_bound) j["loss"]["label_bound"] = *c.label_bound;
    j["model"] = {{"d", c.d}, {"labels", to_string(c.label_kind())}, {"noise_sd", c.noise_sd}};
    if (c.kappa_cap) j["model"]["kappa_cap"] = *c.kappa_cap;
    j["data"] = {{"n_train", c.n_train}, {"n_test", c.test_size()}};
    j["grid"] = {{"gamma", c.gammas}, {"T", c.Ts}};
    j["repetitions"] = c.repetitions;
    j["delta"] = c.delta;
    j["seed"] = c.seed;
    j["oracle"] = {{"mode", to_string(c.oracle)},
                   {"samples", c.oracle_samples},
                   {"nodes", c.quadrature_nodes}};
    if (c.command == Command::Rademacher) {
        j["rademacher"] = {{"class", c.function_class},
                           {"method", c.sign_method},
                           {"draws", c.sign_draws}};
        if (c.radius) j["rademacher"]["radius"] = *c.radius;
    }
    return j;
}

ExperimentConfig config_from_json(const nlohmann::ordered_json& j) {
    try {
        ExperimentConfig c = default_config(parse_command(j.at("command").get<std::string>()));
        c.loss = parse_loss_kind(j.at("loss").at("kind").get<std::string>());
        if (j["loss"].contains("label_bound")) c.label_bound = j["loss"]["label_bound"].get<double>();
        c.d = j.at("model").at("d").get<std::size_t>();
        c.labels = parse_label_kind(j["model"].at("labels").get<std::string>());
        c.noise_sd = j["model"].at("noise_sd").get<double>();
        if (j["model"].contains("kappa_cap")) c.kappa_cap = j["model"]["kappa_cap"].get<double>();
        c.n_train = j.at("data").at("n_train").get<std::size_t>();
        c.n_test = j["data"].at("n_test").get<std::size_t>();
        c.gammas = j.at("grid").at("gamma").get<std::vector<double>>();
        c.Ts = j["grid"].at("T").get<std::vector<int>>();
        c.repetitions = j.at("repetitions").get<int>();
        c.delta = j.at("delta").get<double>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.oracle = parse_oracle_mode(j.at("oracle").at("mode").get<std::string>());
        c.oracle_samples = j["oracle"].at("samples").get<std::size_t>();
        c.quadrature_nodes = j["oracle"].at("nodes").get<int>();
        if (j.contains("rademacher")) {
            const auto& r = j["rademacher"];
            c.function_class = r.at("class").get<std::string>();
            c.sign_method = r.at("method").get<std::string>();
            c.sign_draws = r.at("draws").get<long>();
            if (r.contains("radius")) c.radius = r["radius"].get<double>();
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(fmt::format("malformed config record: {}", e.what()));
    }
}

std::filesystem::path default_output_dir() {
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
    return "results";
}

}  // namespace implreg
