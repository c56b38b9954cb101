#include "implreg/data.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "json.hpp"
#include "implreg/rng.hpp"

namespace implreg {

double Dataset::label_bound() const { return ys.size() ? ys.cwiseAbs().maxCoeff() : 0.0; }

double Dataset::max_norm() const { return xs.rows() ? xs.rowwise().norm().maxCoeff() : 0.0; }

void Dataset::validate() const {
    if (xs.rows() < 1) throw std::invalid_argument("dataset needs n >= 1 samples");
    if (xs.cols() < 1) throw std::invalid_argument("dataset needs dimension d >= 1");
    if (ys.size() != xs.rows())
        throw std::invalid_argument(
            fmt::format("dataset has {} rows but {} labels", xs.rows(), ys.size()));
    if (!(kappa >= 1.0)) throw std::invalid_argument(fmt::format("kappa {} < 1", kappa));
    const double norm = max_norm();
    if (norm > kappa)
        throw std::invalid_argument(fmt::format("kappa {} below max sample norm {}", kappa, norm));
    if (!xs.allFinite() || !ys.allFinite())
        throw std::invalid_argument("dataset contains non-finite values");
}

Dataset make_dataset(Matrix xs, Vector ys, std::optional<double> kappa) {
    Dataset data{std::move(xs), std::move(ys), 1.0};
    data.kappa = kappa.value_or(std::max(1.0, data.max_norm()));
    data.validate();
    return data;
}

void SyntheticModel::validate() const {
    if (d < 1) throw std::invalid_argument("model dimension must be >= 1");
    if (static_cast<std::size_t>(sigma_diag.size()) != d ||
        static_cast<std::size_t>(w_star.size()) != d)
        throw std::invalid_argument("model sigma_diag/w_star must have dimension d");
    if ((sigma_diag.array() <= 0.0).any())
        throw std::invalid_argument("sigma_diag entries must be positive");
    if (!(noise_sd >= 0.0)) throw std::invalid_argument("noise_sd must be nonnegative");
    if (kappa_cap && !(*kappa_cap > 0.0)) throw std::invalid_argument("kappa_cap must be > 0");
}

SyntheticModel make_reference_model(std::size_t d) {
    if (d < 1) throw std::invalid_argument("model dimension must be >= 1");
    SyntheticModel model;
    model.d = d;
    model.sigma_diag.resize(static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) {
        const double jj = static_cast<double>(j + 1);
        model.sigma_diag[static_cast<Eigen::Index>(j)] = 1.0 / (jj * jj);
    }
    model.w_star = model.sigma_diag;  // Sigma * e
    model.noise_sd = 1.0;
    return model;
}

Dataset sample(const SyntheticModel& model, std::size_t n, std::uint64_t seed) {
    model.validate();
    if (n < 1) throw std::invalid_argument("sample size must be >= 1");
    Rng rng(seed);
    const auto d = static_cast<Eigen::Index>(model.d);
    const Vector scale = model.sigma_diag.cwiseSqrt();
    Matrix xs(static_cast<Eigen::Index>(n), d);
    Vector ys(static_cast<Eigen::Index>(n));
    for (Eigen::Index j = 0; j < xs.rows(); ++j) {
        for (;;) {
            for (Eigen::Index k = 0; k < d; ++k) xs(j, k) = scale[k] * rng.normal();
            if (!model.kappa_cap || xs.row(j).norm() <= *model.kappa_cap) break;
        }
        const double signal = xs.row(j).dot(model.w_star) + model.noise_sd * rng.normal();
        ys[j] = model.labels == LabelKind::Sign ? (signal >= 0.0 ? 1.0 : -1.0) : signal;
    }
    std::optional<double> kappa;
    if (model.kappa_cap) kappa = std::max(1.0, *model.kappa_cap);
    return make_dataset(std::move(xs), std::move(ys), kappa);
}

std::string to_string(LabelKind labels) {
    return labels == LabelKind::Sign ? "sign" : "regression";
}

LabelKind parse_label_kind(const std::string& name) {
    if (name == "regression") return LabelKind::Regression;
    if (name == "sign") return LabelKind::Sign;
    throw std::invalid_argument(fmt::format("unknown label kind '{}'", name));
}

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_std(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
    return csv_path.string() + ".json";
}

}  // namespace

void write_dataset(const std::filesystem::path& csv_path, const Dataset& data,
                   std::uint64_t seed, const std::optional<SyntheticModel>& model) {
    data.validate();
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error(fmt::format("cannot write {}", csv_path.string()));
    for (std::size_t k = 0; k < data.d(); ++k) csv << "x_" << (k + 1) << ',';
    csv << "y\n";
    for (Eigen::Index j = 0; j < data.xs.rows(); ++j) {
        for (Eigen::Index k = 0; k < data.xs.cols(); ++k) csv << fmt::format("{},", data.xs(j, k));
        csv << fmt::format("{}\n", data.ys[j]);
    }

    nlohmann::ordered_json meta;
    meta["schema_version"] = 1;
    meta["d"] = data.d();
    meta["n"] = data.n();
    meta["kappa"] = data.kappa;
    meta["seed"] = seed;
    if (model) {
        meta["model"] = {{"d", model->d},
                         {"sigma_diag", to_std(model->sigma_diag)},
                         {"w_star", to_std(model->w_star)},
                         {"noise_sd", model->noise_sd},
                         {"seed", model->seed},
                         {"labels", to_string(model->labels)}};
        if (model->kappa_cap) meta["model"]["kappa_cap"] = *model->kappa_cap;
    }
    std::ofstream side(sidecar_path(csv_path));
    side << meta.dump(2) << '\n';
}

LoadedDataset read_dataset(const std::filesystem::path& csv_path) {
    std::ifstream side(sidecar_path(csv_path));
    if (!side)
        throw std::runtime_error(fmt::format("missing sidecar {}", sidecar_path(csv_path).string()));
    const auto meta = nlohmann::json::parse(side);

    DatasetSidecar sidecar;
    sidecar.d = meta.at("d").get<std::size_t>();
    sidecar.n = meta.at("n").get<std::size_t>();
    sidecar.kappa = meta.at("kappa").get<double>();
    sidecar.seed = meta.at("seed").get<std::uint64_t>();
    if (meta.contains("model")) {
        const auto& m = meta["model"];
        SyntheticModel model;
        model.d = m.at("d").get<std::size_t>();
        model.sigma_diag = from_std(m.at("sigma_diag").get<std::vector<double>>());
        model.w_star = from_std(m.at("w_star").get<std::vector<double>>());
        model.noise_sd = m.at("noise_sd").get<double>();
        model.seed = m.at("seed").get<std::uint64_t>();
        model.labels = parse_label_kind(m.at("labels").get<std::string>());
        if (m.contains("kappa_cap")) model.kappa_cap = m["kappa_cap"].get<double>();
        sidecar.model = std::move(model);
    }

    std::ifstream csv(csv_path);
    if (!csv) throw std::runtime_error(fmt::format("cannot read {}", csv_path.string()));
    std::string line;
    std::getline(csv, line);  // header
    Matrix xs(static_cast<Eigen::Index>(sidecar.n), static_cast<Eigen::Index>(sidecar.d));
    Vector ys(static_cast<Eigen::Index>(sidecar.n));
    Eigen::Index row = 0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        if (row >= xs.rows()) throw std::runtime_error("dataset CSV has more rows than sidecar n");
        std::istringstream fields(line);
        std::string cell;
        Eigen::Index col = 0;
        while (std::getline(fields, cell, ',')) {
            const double value = std::stod(cell);
            if (col < xs.cols()) xs(row, col) = value;
            else if (col == xs.cols()) ys[row] = value;
            ++col;
        }
        if (col != xs.cols() + 1)
            throw std::runtime_error(fmt::format("dataset CSV row {} has {} fields", row + 1, col));
        ++row;
    }
    if (row != xs.rows()) throw std::runtime_error("dataset CSV has fewer rows than sidecar n");
    return {make_dataset(std::move(xs), std::move(ys), sidecar.kappa), std::move(sidecar)};
}

}  // namespace implreg
