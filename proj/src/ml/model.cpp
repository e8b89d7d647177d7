#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fitters.hpp"

namespace qkdcoex::ml {

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::RandomForest: return "RF";
        case ModelKind::LeastSquares: return "LS";
        case ModelKind::KNeighbors: return "KN";
        case ModelKind::Lasso: return "Lasso";
        case ModelKind::Ridge: return "Ridge";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view label) {
    for (ModelKind k : kAllModelKinds) {
        if (to_string(k) == label) return k;
    }
    throw DataError("unknown model kind '" + std::string(label) + "' (expected RF, LS, KN, Lasso or Ridge)");
}

ModelSpec ModelSpec::defaults(ModelKind kind) {
    ModelSpec s;
    s.kind = kind;
    switch (kind) {
        case ModelKind::Ridge: s.lambda = 1.0; break;
        case ModelKind::Lasso: s.lambda = 0.01; break;
        default: break;
    }
    s.features_per_split = static_cast<int>((kFeatureCount + 2) / 3);
    return s;
}

void ModelSpec::validate() const {
    switch (kind) {
        case ModelKind::KNeighbors:
            if (k < 1) throw ModelError("KN: k must be >= 1");
            break;
        case ModelKind::Ridge:
        case ModelKind::Lasso:
            if (!(lambda >= 0.0)) throw ModelError(std::string(to_string(kind)) + ": lambda must be >= 0");
            break;
        case ModelKind::RandomForest:
            if (trees < 1 || max_depth < 1 || features_per_split < 1 || min_samples_leaf < 1) {
                throw ModelError("RF: trees, max_depth, features_per_split and min_samples_leaf must be >= 1");
            }
            break;
        case ModelKind::LeastSquares: break;
    }
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    Matrix m(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) throw ModelError("ragged design matrix");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c];
    }
    return m;
}

Matrix Matrix::from_features(const InstanceSet& instances) {
    Matrix m(instances.size(), kFeatureCount);
    for (std::size_t r = 0; r < instances.size(); ++r) {
        for (std::size_t c = 0; c < kFeatureCount; ++c) m(r, c) = instances[r].features[c];
    }
    return m;
}

std::vector<double> target_column(const InstanceSet& instances, Target t) {
    std::vector<double> y;
    y.reserve(instances.size());
    for (const auto& inst : instances) y.push_back(inst.target(t));
    return y;
}

Standardizer Standardizer::fit(const Matrix& x) {
    Standardizer s;
    const std::size_t n = x.rows();
    s.mean.assign(x.cols(), 0.0);
    s.sd.assign(x.cols(), 1.0);
    for (std::size_t c = 0; c < x.cols(); ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < n; ++r) sum += x(r, c);
        const double mean = sum / static_cast<double>(n);
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
        var /= static_cast<double>(n);
        s.mean[c] = mean;
        s.sd[c] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
    std::vector<double> out(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) out[c] = (row[c] - mean[c]) / sd[c];
    return out;
}

Matrix Standardizer::apply(const Matrix& x) const {
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - mean[c]) / sd[c];
    }
    return out;
}

FittedModel::FittedModel(ModelSpec spec, std::size_t dimension, Standardizer standardizer,
                         Params params)
    : spec_(std::move(spec)),
      dimension_(dimension),
      standardizer_(std::move(standardizer)),
      params_(std::move(params)) {}

double FittedModel::predict(std::span<const double> x) const {
    if (x.size() != dimension_) {
        throw ModelError("predict: expected " + std::to_string(dimension_) + " features, got " +
                         std::to_string(x.size()));
    }
    if (const auto* lin = std::get_if<LinearParams>(&params_)) {
        const std::vector<double> z =
            lin->standardized ? standardizer_.apply(x) : std::vector<double>(x.begin(), x.end());
        double acc = lin->intercept;
        for (std::size_t j = 0; j < z.size(); ++j) acc += lin->coefficients[j] * z[j];
        return spec_.kind == ModelKind::Lasso ? lin->target_mean + lin->target_scale * acc : acc;
    }
    if (const auto* knn = std::get_if<KnnParams>(&params_)) {
        return detail::predict_knn(*knn, standardizer_.apply(x), spec_.k);
    }
    const auto& forest = std::get<ForestParams>(params_);
    double sum = 0.0;
    double lo = forest.trees.front().predict(x);
    double hi = lo;
    for (const auto& tree : forest.trees) {
        const double v = tree.predict(x);
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return std::clamp(sum / static_cast<double>(forest.trees.size()), lo, hi);
}

std::vector<double> FittedModel::predict(const Matrix& x) const {
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict(x.row(r));
    return out;
}

std::pair<double, std::vector<double>> FittedModel::raw_coefficients() const {
    const auto* lin = std::get_if<LinearParams>(&params_);
    if (!lin) throw ModelError("raw_coefficients: not a linear model");
    if (!lin->standardized) return {lin->intercept, lin->coefficients};

    const double scale = spec_.kind == ModelKind::Lasso ? lin->target_scale : 1.0;
    double intercept = spec_.kind == ModelKind::Lasso ? lin->target_mean : lin->intercept;
    std::vector<double> coef(lin->coefficients.size());
    for (std::size_t j = 0; j < coef.size(); ++j) {
        coef[j] = scale * lin->coefficients[j] / standardizer_.sd[j];
        intercept -= coef[j] * standardizer_.mean[j];
    }
    return {intercept, coef};
}

double FittedModel::prediction_spread(std::span<const double> x) const {
    const auto* forest = std::get_if<ForestParams>(&params_);
    if (!forest) return 0.0;
    if (x.size() != dimension_) throw ModelError("prediction_spread: dimension mismatch");
    double sum = 0.0, sq = 0.0;
    for (const auto& t : forest->trees) {
        const double v = t.predict(x);
        sum += v;
        sq += v * v;
    }
    const double n = static_cast<double>(forest->trees.size());
    const double mean = sum / n;
    return std::sqrt(std::max(0.0, sq / n - mean * mean));
}

FittedModel fit(const ModelSpec& spec, const Matrix& x, std::span<const double> y) {
    spec.validate();
    if (x.rows() == 0) throw ModelError("fit: empty dataset");
    if (x.rows() < 2) throw ModelError("fit: need at least 2 instances");
    if (y.size() != x.rows()) throw ModelError("fit: feature and target row counts differ");
    for (double v : y) {
        if (!std::isfinite(v)) throw ModelError("fit: non-finite target value");
    }

    Standardizer standardizer = Standardizer::fit(x);
    switch (spec.kind) {
        case ModelKind::LeastSquares:
            return {spec, x.cols(), std::move(standardizer), detail::fit_least_squares(x, y)};
        case ModelKind::Ridge:
            return {spec, x.cols(), standardizer,
                    detail::fit_ridge(standardizer.apply(x), y, spec.lambda)};
        case ModelKind::Lasso:
            return {spec, x.cols(), standardizer,
                    detail::fit_lasso(standardizer.apply(x), y, spec.lambda)};
        case ModelKind::KNeighbors:
            return {spec, x.cols(), standardizer, detail::fit_knn(standardizer.apply(x), y)};
        case ModelKind::RandomForest:
            return {spec, x.cols(), std::move(standardizer), detail::fit_forest(spec, x, y)};
    }
    throw ModelError("fit: unknown model kind");
}

FittedModel fit(const ModelSpec& spec, const InstanceSet& instances, Target target) {
    if (instances.empty()) throw ModelError("fit: empty dataset");
    const auto y = target_column(instances, target);
    return fit(spec, Matrix::from_features(instances), y);
}

double predict(const FittedModel& model, std::span<const double> x) { return model.predict(x); }

double mse(std::span<const double> predictions, std::span<const double> actuals) {
    if (predictions.size() != actuals.size()) throw std::invalid_argument("mse: length mismatch");
    if (predictions.empty()) throw std::invalid_argument("mse: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - actuals[i];
        sum += d * d;
    }
    return sum / static_cast<double>(predictions.size());
}

TargetVector TargetModels::predict(std::span<const double> x) const {
    TargetVector out{};
    for (std::size_t t = 0; t < kTargetCount; ++t) out[t] = models[t].predict(x);
    return out;
}

TargetModels fit_targets(const ModelSpec& spec, const InstanceSet& instances) {
    TargetModels out;
    out.spec = spec;
    for (Target t : kAllTargets) out.models.push_back(fit(spec, instances, t));
    return out;
}

}  // namespace qkdcoex::ml
