#pragma once

#include <span>

#include "qkdcoex/ml.hpp"

namespace qkdcoex::ml::detail {

LinearParams fit_least_squares(const Matrix& x, std::span<const double> y);
LinearParams fit_ridge(const Matrix& z, std::span<const double> y, double lambda);
LinearParams fit_lasso(const Matrix& z, std::span<const double> y, double lambda);

KnnParams fit_knn(const Matrix& z, std::span<const double> y);
double predict_knn(const KnnParams& p, std::span<const double> z, int k);

ForestParams fit_forest(const ModelSpec& spec, const Matrix& x, std::span<const double> y);

inline constexpr double kLassoTolerance = 1e-8;
inline constexpr int kLassoMaxSweeps = 10000;

}  // namespace qkdcoex::ml::detail
