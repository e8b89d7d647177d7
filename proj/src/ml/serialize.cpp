#include <fstream>

#include <nlohmann/json.hpp>

#include "qkdcoex/ml.hpp"

namespace qkdcoex::ml {

using nlohmann::json;

namespace {

constexpr int kModelFormatVersion = 1;

json spec_to_json(const ModelSpec& s) {
    return {{"kind", to_string(s.kind)},
            {"k", s.k},
            {"lambda", s.lambda},
            {"trees", s.trees},
            {"max_depth", s.max_depth},
            {"features_per_split", s.features_per_split},
            {"min_samples_leaf", s.min_samples_leaf},
            {"bootstrap_seed", s.bootstrap_seed}};
}

ModelSpec spec_from_json(const json& j) {
    ModelSpec s;
    s.kind = parse_model_kind(j.at("kind").get<std::string>());
    s.k = j.at("k").get<int>();
    s.lambda = j.at("lambda").get<double>();
    s.trees = j.at("trees").get<int>();
    s.max_depth = j.at("max_depth").get<int>();
    s.features_per_split = j.at("features_per_split").get<int>();
    s.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    s.bootstrap_seed = j.at("bootstrap_seed").get<std::uint64_t>();
    return s;
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return {{"cols", m.cols()}, {"rows", std::move(rows)}};
}

Matrix matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<std::vector<std::vector<double>>>();
    Matrix m = Matrix::from_rows(rows);
    if (rows.empty()) m = Matrix(0, j.at("cols").get<std::size_t>());
    return m;
}

json model_to_json(const FittedModel& m) {
    json params;
    if (const auto* lin = std::get_if<LinearParams>(&m.params())) {
        params = {{"type", "linear"},
                  {"intercept", lin->intercept},
                  {"coefficients", lin->coefficients},
                  {"standardized", lin->standardized},
                  {"target_mean", lin->target_mean},
                  {"target_scale", lin->target_scale},
                  {"sweeps", lin->sweeps}};
    } else if (const auto* knn = std::get_if<KnnParams>(&m.params())) {
        params = {{"type", "knn"}, {"points", matrix_to_json(knn->points)}, {"targets", knn->targets}};
    } else {
        json trees = json::array();
        for (const auto& t : std::get<ForestParams>(m.params()).trees) {
            json nodes = json::array();
            for (const auto& n : t.nodes) {
                nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
            }
            trees.push_back(std::move(nodes));
        }
        params = {{"type", "forest"}, {"trees", std::move(trees)}};
    }
    return {{"spec", spec_to_json(m.spec())},
            {"dimension", m.dimension()},
            {"standardizer", {{"mean", m.standardizer().mean}, {"sd", m.standardizer().sd}}},
            {"params", std::move(params)}};
}

FittedModel model_from_json(const json& j) {
    ModelSpec spec = spec_from_json(j.at("spec"));
    spec.validate();
    Standardizer st{j.at("standardizer").at("mean").get<std::vector<double>>(),
                    j.at("standardizer").at("sd").get<std::vector<double>>()};
    const auto dim = j.at("dimension").get<std::size_t>();
    if (st.mean.size() != dim || st.sd.size() != dim) {
        throw DataError("model file: standardizer size does not match dimension");
    }
    const json& p = j.at("params");
    const auto type = p.at("type").get<std::string>();
    if (type == "linear") {
        LinearParams lin;
        lin.intercept = p.at("intercept").get<double>();
        lin.coefficients = p.at("coefficients").get<std::vector<double>>();
        lin.standardized = p.at("standardized").get<bool>();
        lin.target_mean = p.at("target_mean").get<double>();
        lin.target_scale = p.at("target_scale").get<double>();
        lin.sweeps = p.at("sweeps").get<int>();
        if (lin.coefficients.size() != dim) throw DataError("model file: coefficient count mismatch");
        return {spec, dim, std::move(st), std::move(lin)};
    }
    if (type == "knn") {
        KnnParams knn{matrix_from_json(p.at("points")), p.at("targets").get<std::vector<double>>()};
        if (knn.points.rows() != knn.targets.size() || knn.points.rows() == 0 ||
            knn.points.cols() != dim) {
            throw DataError("model file: malformed neighbour store");
        }
        return {spec, dim, std::move(st), std::move(knn)};
    }
    if (type == "forest") {
        ForestParams forest;
        for (const auto& t : p.at("trees")) {
            RegressionTree tree;
            for (const auto& n : t) {
                tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                                      n.at(3).get<int>(), n.at(4).get<double>()});
            }
            const int count = static_cast<int>(tree.nodes.size());
            for (const auto& n : tree.nodes) {
                if (n.feature >= static_cast<int>(dim) ||
                    (n.feature >= 0 && (n.left <= 0 || n.left >= count || n.right <= 0 ||
                                        n.right >= count))) {
                    throw DataError("model file: malformed tree node");
                }
            }
            if (tree.nodes.empty()) throw DataError("model file: empty tree");
            forest.trees.push_back(std::move(tree));
        }
        if (forest.trees.empty()) throw DataError("model file: forest has no trees");
        return {spec, dim, std::move(st), std::move(forest)};
    }
    throw DataError("model file: unknown params type '" + type + "'");
}

}  // namespace

void save_models(const TargetModels& models, const std::filesystem::path& path) {
    json targets = json::object();
    for (Target t : kAllTargets) targets[std::string(to_string(t))] = model_to_json(models[t]);
    const json doc = {{"format_version", kModelFormatVersion},
                      {"spec", spec_to_json(models.spec)},
                      {"features", kFeatureNames},
                      {"targets", std::move(targets)}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << doc.dump() << '\n';
    if (!out.flush()) throw DataError("write failed: " + path.string());
}

TargetModels load_models(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        const json doc = json::parse(in);
        if (doc.at("format_version").get<int>() != kModelFormatVersion) {
            throw DataError(path.string() + ": unsupported model format_version");
        }
        TargetModels out;
        out.spec = spec_from_json(doc.at("spec"));
        for (Target t : kAllTargets) {
            out.models.push_back(model_from_json(doc.at("targets").at(std::string(to_string(t)))));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    } catch (const ModelError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace qkdcoex::ml
