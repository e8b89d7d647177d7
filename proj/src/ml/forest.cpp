#include <algorithm>
#include <numeric>
#include <random>

#include "../parallel.hpp"
#include "fitters.hpp"

namespace qkdcoex::ml {

double RegressionTree::predict(std::span<const double> x) const {
    int at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
        const TreeNode& node = nodes[static_cast<std::size_t>(at)];
        at = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
}

namespace detail {

namespace {

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const ModelSpec& spec, const Matrix& x, std::span<const double> y,
                std::mt19937_64& rng)
        : spec_(spec), x_(x), y_(y), rng_(rng) {}

    RegressionTree build(std::vector<std::size_t> samples) {
        tree_.nodes.clear();
        grow(samples, 0);
        return std::move(tree_);
    }

private:
    int grow(std::vector<std::size_t>& samples, int depth) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back({});

        double sum = 0.0;
        double lo = y_[samples.front()];
        double hi = lo;
        for (std::size_t i : samples) {
            sum += y_[i];
            lo = std::min(lo, y_[i]);
            hi = std::max(hi, y_[i]);
        }
        if (lo == hi) {
            // Pure node: store the value itself rather than a rounded mean.
            tree_.nodes[static_cast<std::size_t>(id)].value = lo;
            return id;
        }
        const double mean = sum / static_cast<double>(samples.size());
        tree_.nodes[static_cast<std::size_t>(id)].value = std::clamp(mean, lo, hi);

        const auto leaf = static_cast<std::size_t>(spec_.min_samples_leaf);
        if (depth >= spec_.max_depth || samples.size() < 2 * leaf) return id;

        const Split best = find_split(samples);
        if (best.feature < 0) return id;

        std::vector<std::size_t> left, right;
        for (std::size_t i : samples) {
            (x_(i, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right)
                .push_back(i);
        }
        samples.clear();
        samples.shrink_to_fit();

        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    std::vector<std::size_t> candidate_features() {
        std::vector<std::size_t> features(x_.cols());
        std::iota(features.begin(), features.end(), 0);
        const std::size_t m =
            std::min<std::size_t>(static_cast<std::size_t>(spec_.features_per_split), features.size());
        for (std::size_t i = 0; i < m; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, features.size() - 1);
            std::swap(features[i], features[pick(rng_)]);
        }
        features.resize(m);
        std::sort(features.begin(), features.end());
        return features;
    }

    // Largest reduction in summed squared error; ties keep the lowest feature
    // index, then the lowest threshold.
    Split find_split(const std::vector<std::size_t>& samples) {
        const std::size_t n = samples.size();
        const auto leaf = static_cast<std::size_t>(spec_.min_samples_leaf);
        double total = 0.0, total_sq = 0.0;
        for (std::size_t i : samples) {
            total += y_[i];
            total_sq += y_[i] * y_[i];
        }
        const double parent_sse = total_sq - total * total / static_cast<double>(n);

        Split best;
        std::vector<std::size_t> order(samples);
        for (std::size_t f : candidate_features()) {
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return x_(a, f) < x_(b, f); });
            double left_sum = 0.0, left_sq = 0.0;
            for (std::size_t pos = 0; pos + 1 < n; ++pos) {
                const double v = y_[order[pos]];
                left_sum += v;
                left_sq += v * v;
                const double here = x_(order[pos], f);
                const double next = x_(order[pos + 1], f);
                if (!(here < next)) continue;
                const std::size_t nl = pos + 1;
                const std::size_t nr = n - nl;
                if (nl < leaf || nr < leaf) continue;
                const double right_sum = total - left_sum;
                const double right_sq = total_sq - left_sq;
                const double sse = (left_sq - left_sum * left_sum / static_cast<double>(nl)) +
                                   (right_sq - right_sum * right_sum / static_cast<double>(nr));
                const double gain = parent_sse - sse;
                if (gain > best.gain * (1.0 + 1e-12) + 1e-300) {
                    // The midpoint can round up to `next` for adjacent doubles.
                    const double mid = here + 0.5 * (next - here);
                    best = {static_cast<int>(f), mid < next ? mid : here, gain};
                }
            }
        }
        return best;
    }

    const ModelSpec& spec_;
    const Matrix& x_;
    std::span<const double> y_;
    std::mt19937_64& rng_;
    RegressionTree tree_;
};

}  // namespace

ForestParams fit_forest(const ModelSpec& spec, const Matrix& x, std::span<const double> y) {
    const std::size_t n = x.rows();
    ForestParams out;
    out.trees.resize(static_cast<std::size_t>(spec.trees));
    qkdcoex::detail::parallel_for(out.trees.size(), [&](std::size_t t) {
        std::seed_seq seq{static_cast<std::uint32_t>(spec.bootstrap_seed),
                          static_cast<std::uint32_t>(spec.bootstrap_seed >> 32),
                          static_cast<std::uint32_t>(t)};
        std::mt19937_64 rng(seq);
        std::uniform_int_distribution<std::size_t> draw(0, n - 1);
        std::vector<std::size_t> sample(n);
        for (auto& s : sample) s = draw(rng);
        std::sort(sample.begin(), sample.end());
        TreeBuilder builder(spec, x, y, rng);
        out.trees[t] = builder.build(std::move(sample));
    });
    return out;
}

}  // namespace detail
}  // namespace qkdcoex::ml
