#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "fitters.hpp"

namespace qkdcoex::ml::detail {

namespace {

Eigen::MatrixXd to_eigen(const Matrix& x) {
    Eigen::MatrixXd m(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) m(r, c) = x(r, c);
    }
    return m;
}

double mean_of(std::span<const double> y) {
    double s = 0.0;
    for (double v : y) s += v;
    return s / static_cast<double>(y.size());
}

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

}  // namespace

LinearParams fit_least_squares(const Matrix& x, std::span<const double> y) {
    const auto n = static_cast<Eigen::Index>(x.rows());
    const auto p = static_cast<Eigen::Index>(x.cols());
    Eigen::MatrixXd design(n, p + 1);
    design.col(0).setOnes();
    design.rightCols(p) = to_eigen(x);
    const Eigen::Map<const Eigen::VectorXd> target(y.data(), n);

    // Normal equations, Jacobi-scaled so the rank test is insensitive to
    // feature units.
    Eigen::MatrixXd gram = design.transpose() * design;
    Eigen::VectorXd rhs = design.transpose() * target;
    Eigen::VectorXd scale = gram.diagonal().cwiseSqrt();
    for (Eigen::Index i = 0; i < scale.size(); ++i) {
        if (scale(i) == 0.0) scale(i) = 1.0;
    }
    const Eigen::MatrixXd scaled = scale.asDiagonal().inverse() * gram * scale.asDiagonal().inverse();

    Eigen::FullPivLU<Eigen::MatrixXd> lu(scaled);
    lu.setThreshold(1e-12);
    if (lu.rank() < scaled.rows()) {
        throw SingularMatrixError(
            "least squares: normal-equation matrix is singular (collinear or constant features); "
            "use Ridge with lambda > 0");
    }
    const Eigen::VectorXd beta =
        scale.asDiagonal().inverse() * lu.solve(scale.asDiagonal().inverse() * rhs);

    LinearParams out;
    out.intercept = beta(0);
    out.coefficients.assign(beta.data() + 1, beta.data() + beta.size());
    out.standardized = false;
    return out;
}

LinearParams fit_ridge(const Matrix& z, std::span<const double> y, double lambda) {
    const auto n = static_cast<Eigen::Index>(z.rows());
    const auto p = static_cast<Eigen::Index>(z.cols());
    const Eigen::MatrixXd zm = to_eigen(z);
    const double y_mean = mean_of(y);
    Eigen::VectorXd centered(n);
    for (Eigen::Index i = 0; i < n; ++i) centered(i) = y[static_cast<std::size_t>(i)] - y_mean;

    // Standardized columns are centered, so the unpenalized intercept is the
    // target mean and drops out of the system.
    Eigen::MatrixXd a = zm.transpose() * zm;
    a.diagonal().array() += lambda;
    const Eigen::VectorXd rhs = zm.transpose() * centered;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-12);
    if (lu.rank() < p) {
        throw SingularMatrixError("ridge: system is singular; increase lambda");
    }
    const Eigen::VectorXd beta = lu.solve(rhs);

    LinearParams out;
    out.intercept = y_mean;
    out.coefficients.assign(beta.data(), beta.data() + beta.size());
    out.standardized = true;
    return out;
}

LinearParams fit_lasso(const Matrix& z, std::span<const double> y, double lambda) {
    const std::size_t n = z.rows();
    const std::size_t p = z.cols();
    const double y_mean = mean_of(y);
    double y_var = 0.0;
    for (double v : y) y_var += (v - y_mean) * (v - y_mean);
    const double y_sd = y_var > 0.0 ? std::sqrt(y_var / static_cast<double>(n)) : 1.0;

    // Objective: 1/(2n) |r|^2 + lambda |b|_1 on the z-scored target.
    std::vector<double> residual(n);
    for (std::size_t i = 0; i < n; ++i) residual[i] = (y[i] - y_mean) / y_sd;
    std::vector<double> col_sq(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) col_sq[j] += z(i, j) * z(i, j);
    }
    for (double& c : col_sq) c /= static_cast<double>(n);

    std::vector<double> beta(p, 0.0);
    int sweep = 0;
    for (; sweep < kLassoMaxSweeps; ++sweep) {
        double max_change = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (col_sq[j] == 0.0) continue;
            double rho = 0.0;
            for (std::size_t i = 0; i < n; ++i) rho += z(i, j) * residual[i];
            rho = rho / static_cast<double>(n) + col_sq[j] * beta[j];
            const double updated = soft_threshold(rho, lambda) / col_sq[j];
            const double delta = updated - beta[j];
            if (delta != 0.0) {
                for (std::size_t i = 0; i < n; ++i) residual[i] -= z(i, j) * delta;
                beta[j] = updated;
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        if (max_change < kLassoTolerance) {
            ++sweep;
            break;
        }
    }

    LinearParams out;
    out.intercept = 0.0;
    out.coefficients = std::move(beta);
    out.standardized = true;
    out.target_mean = y_mean;
    out.target_scale = y_sd;
    out.sweeps = sweep;
    return out;
}

}  // namespace qkdcoex::ml::detail
