#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qkdcoex/dataset.hpp"
#include "qkdcoex/error.hpp"

namespace qkdcoex::ml {

class ModelError : public Error {
public:
    using Error::Error;
};

class SingularMatrixError : public ModelError {
public:
    using ModelError::ModelError;
};

enum class ModelKind { RandomForest, LeastSquares, KNeighbors, Lasso, Ridge };

inline constexpr std::array<ModelKind, 5> kAllModelKinds = {
    ModelKind::RandomForest, ModelKind::LeastSquares, ModelKind::KNeighbors, ModelKind::Lasso,
    ModelKind::Ridge};

// Short labels: "RF", "LS", "KN", "Lasso", "Ridge".
std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view label);

struct ModelSpec {
    ModelKind kind = ModelKind::KNeighbors;
    int k = 5;
    double lambda = 0.0;
    int trees = 100;
    int max_depth = 8;
    int features_per_split = 3;
    int min_samples_leaf = 1;
    std::uint64_t bootstrap_seed = 1;

    // Documented defaults per kind: KN k=5, Ridge lambda=1, Lasso lambda=0.01,
    // RF 100 trees of depth 8 with ceil(7/3) candidate features per split.
    static ModelSpec defaults(ModelKind kind);
    void validate() const;

    bool operator==(const ModelSpec&) const = default;
};

// Dense row-major design matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);
    static Matrix from_features(const InstanceSet& instances);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

std::vector<double> target_column(const InstanceSet& instances, Target t);

// Per-feature z-score statistics (population standard deviation). Features
// with zero spread keep sd = 1 so they map to 0.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> sd;

    static Standardizer fit(const Matrix& x);
    std::vector<double> apply(std::span<const double> row) const;
    Matrix apply(const Matrix& x) const;

    bool operator==(const Standardizer&) const = default;
};

struct LinearParams {
    double intercept = 0.0;
    std::vector<double> coefficients;  // in the space given by `standardized`
    bool standardized = false;
    // Lasso fits a z-scored target; predictions are rescaled by these.
    double target_mean = 0.0;
    double target_scale = 1.0;
    int sweeps = 0;  // coordinate-descent sweeps used (Lasso only)

    bool operator==(const LinearParams&) const = default;
};

struct KnnParams {
    Matrix points;  // standardized training features
    std::vector<double> targets;

    bool operator==(const KnnParams&) const = default;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(std::span<const double> x) const;
    bool operator==(const RegressionTree&) const = default;
};

struct ForestParams {
    std::vector<RegressionTree> trees;

    bool operator==(const ForestParams&) const = default;
};

class FittedModel {
public:
    using Params = std::variant<LinearParams, KnnParams, ForestParams>;

    FittedModel(ModelSpec spec, std::size_t dimension, Standardizer standardizer, Params params);

    const ModelSpec& spec() const { return spec_; }
    std::size_t dimension() const { return dimension_; }
    const Standardizer& standardizer() const { return standardizer_; }
    const Params& params() const { return params_; }

    // Throws ModelError on dimension mismatch.
    double predict(std::span<const double> x) const;
    std::vector<double> predict(const Matrix& x) const;

    // Linear models only: (intercept, coefficients) mapped back to raw features.
    std::pair<double, std::vector<double>> raw_coefficients() const;

    // Standard deviation of per-tree predictions (RF); 0 for the other kinds.
    double prediction_spread(std::span<const double> x) const;

    bool operator==(const FittedModel&) const = default;

private:
    ModelSpec spec_;
    std::size_t dimension_;
    Standardizer standardizer_;
    Params params_;
};

FittedModel fit(const ModelSpec& spec, const Matrix& x, std::span<const double> y);
FittedModel fit(const ModelSpec& spec, const InstanceSet& instances, Target target);

double predict(const FittedModel& model, std::span<const double> x);

double mse(std::span<const double> predictions, std::span<const double> actuals);

// One fitted model per target, sharing a spec.
struct TargetModels {
    ModelSpec spec;
    std::vector<FittedModel> models;  // indexed by Target

    const FittedModel& operator[](Target t) const { return models[static_cast<std::size_t>(t)]; }
    TargetVector predict(std::span<const double> x) const;
};

TargetModels fit_targets(const ModelSpec& spec, const InstanceSet& instances);

void save_models(const TargetModels& models, const std::filesystem::path& path);
TargetModels load_models(const std::filesystem::path& path);

struct ComparisonRow {
    std::string label;
    // per_set[s][t]: MSE on validation set s for target t.
    std::vector<TargetVector> per_set;
    TargetVector mean{};
};

struct ComparisonTable {
    std::vector<ComparisonRow> models;
    ComparisonRow baseline;  // predicts the training-set mean

    std::string to_text() const;
    std::string to_csv() const;
};

// Fits every spec on each training set and scores it on the matching
// validation set.
ComparisonTable compare_models(const DatasetBundle& bundle, const std::vector<ModelSpec>& specs);

}  // namespace qkdcoex::ml
