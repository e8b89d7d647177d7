#include <iomanip>
#include <sstream>

#include "../parallel.hpp"
#include "qkdcoex/ml.hpp"

namespace qkdcoex::ml {

namespace {

TargetVector average(const std::vector<TargetVector>& per_set) {
    TargetVector m{};
    for (const auto& v : per_set) {
        for (std::size_t t = 0; t < kTargetCount; ++t) m[t] += v[t];
    }
    for (double& x : m) x /= static_cast<double>(per_set.size());
    return m;
}

}  // namespace

ComparisonTable compare_models(const DatasetBundle& bundle, const std::vector<ModelSpec>& specs) {
    const std::size_t sets = bundle.set_count();
    if (sets == 0 || bundle.validation.size() != sets) {
        throw ModelError("compare_models: bundle needs matching training/validation sets");
    }

    // scores[s][m][t]; index m == specs.size() is the mean baseline.
    std::vector<std::vector<TargetVector>> scores(sets, std::vector<TargetVector>(specs.size() + 1));
    qkdcoex::detail::parallel_for(sets, [&](std::size_t s) {
        const InstanceSet& train = bundle.training[s];
        const InstanceSet& val = bundle.validation[s];
        const Matrix x_val = Matrix::from_features(val);
        for (Target t : kAllTargets) {
            const auto ti = static_cast<std::size_t>(t);
            const auto y_train = target_column(train, t);
            const auto y_val = target_column(val, t);
            for (std::size_t m = 0; m < specs.size(); ++m) {
                const FittedModel model = fit(specs[m], train, t);
                scores[s][m][ti] = mse(model.predict(x_val), y_val);
            }
            double mean = 0.0;
            for (double v : y_train) mean += v;
            mean /= static_cast<double>(y_train.size());
            const std::vector<double> flat(y_val.size(), mean);
            scores[s][specs.size()][ti] = mse(flat, y_val);
        }
    });

    ComparisonTable table;
    for (std::size_t m = 0; m <= specs.size(); ++m) {
        ComparisonRow row;
        row.label = m < specs.size() ? std::string(to_string(specs[m].kind)) : "Mean";
        for (std::size_t s = 0; s < sets; ++s) row.per_set.push_back(scores[s][m]);
        row.mean = average(row.per_set);
        if (m < specs.size()) {
            table.models.push_back(std::move(row));
        } else {
            table.baseline = std::move(row);
        }
    }
    return table;
}

std::string ComparisonTable::to_text() const {
    std::ostringstream os;
    os << "Validation MSE (mean over " << baseline.per_set.size() << " sets)\n";
    os << std::left << std::setw(10) << "model";
    for (auto name : kTargetNames) os << std::right << std::setw(16) << name;
    os << '\n';
    auto line = [&](const ComparisonRow& r) {
        os << std::left << std::setw(10) << r.label;
        for (double v : r.mean) os << std::right << std::setw(16) << std::setprecision(6) << v;
        os << '\n';
    };
    for (const auto& r : models) line(r);
    line(baseline);
    return os.str();
}

std::string ComparisonTable::to_csv() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "model,set";
    for (auto name : kTargetNames) os << ',' << name;
    os << '\n';
    auto rows = [&](const ComparisonRow& r) {
        for (std::size_t s = 0; s < r.per_set.size(); ++s) {
            os << r.label << ',' << s;
            for (double v : r.per_set[s]) os << ',' << v;
            os << '\n';
        }
        os << r.label << ",mean";
        for (double v : r.mean) os << ',' << v;
        os << '\n';
    };
    for (const auto& r : models) rows(r);
    rows(baseline);
    return os.str();
}

}  // namespace qkdcoex::ml
