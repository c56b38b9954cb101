#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <Eigen/Core>

namespace implreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// n paired samples (x_j, y_j) with x_j in R^d, stored one sample per row.
/// Invariants: n >= 1, kappa >= 1 and kappa >= max_j |x_j|.
struct Dataset {
    Matrix xs;
    Vector ys;
    double kappa = 1.0;

    std::size_t n() const { return static_cast<std::size_t>(xs.rows()); }
    std::size_t d() const { return static_cast<std::size_t>(xs.cols()); }
    /// max_j |y_j|, the data-dependent label bound b.
    double label_bound() const;
    double max_norm() const;
    /// Throws std::invalid_argument when an invariant is broken.
    void validate() const;
};

/// Builds a dataset; kappa defaults to max(1, max_j |x_j|).
Dataset make_dataset(Matrix xs, Vector ys, std::optional<double> kappa = std::nullopt);

enum class LabelKind {
    Regression,  ///< y = <x, w> + eps
    Sign,        ///< y = sign(<x, w> + eps), sign(0) = 1
};

/// Gaussian design X ~ N(0, diag(sigma_diag)) with labels from w_star and
/// N(0, noise_sd^2) noise.
struct SyntheticModel {
    std::size_t d = 0;
    Vector sigma_diag;
    Vector w_star;
    double noise_sd = 1.0;
    std::uint64_t seed = 0;
    LabelKind labels = LabelKind::Regression;
    /// When set, covariates with norm above the cap are redrawn and the
    /// dataset's kappa is max(1, cap).
    std::optional<double> kappa_cap;

    void validate() const;
};

/// Sigma_jj = j^-2 and w_star = Sigma * (1, ..., 1), unit noise.
SyntheticModel make_reference_model(std::size_t d);

/// Deterministic given (model, n, seed).
Dataset sample(const SyntheticModel& model, std::size_t n, std::uint64_t seed);

std::string to_string(LabelKind labels);
LabelKind parse_label_kind(const std::string& name);

/// Metadata carried in the JSON sidecar next to a dataset CSV.
struct DatasetSidecar {
    std::size_t d = 0;
    std::size_t n = 0;
    double kappa = 1.0;
    std::uint64_t seed = 0;
    std::optional<SyntheticModel> model;
};

/// Writes `csv_path` (header x_1..x_d,y) and `csv_path` + ".json".
/// Values are written in shortest round-trip form, so reading back is exact.
void write_dataset(const std::filesystem::path& csv_path, const Dataset& data,
                   std::uint64_t seed, const std::optional<SyntheticModel>& model);

struct LoadedDataset {
    Dataset data;
    DatasetSidecar sidecar;
};

/// Reads a CSV written by write_dataset; the sidecar is required and its
/// d, n and kappa must agree with the CSV.
LoadedDataset read_dataset(const std::filesystem::path& csv_path);

}  // namespace implreg
