#include <algorithm>
#include <utility>
#include <vector>

#include "fitters.hpp"

namespace qkdcoex::ml::detail {

KnnParams fit_knn(const Matrix& z, std::span<const double> y) {
    return {z, std::vector<double>(y.begin(), y.end())};
}

double predict_knn(const KnnParams& p, std::span<const double> z, int k) {
    const std::size_t n = p.points.rows();
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = p.points.row(i);
        double d2 = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double d = row[j] - z[j];
            d2 += d * d;
        }
        dist[i] = {d2, i};
    }
    // Pair ordering breaks distance ties by lowest training index.
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), n);
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < take; ++i) sum += p.targets[dist[i].second];
    return sum / static_cast<double>(take);
}

}  // namespace qkdcoex::ml::detail
