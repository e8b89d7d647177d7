#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "qkdcoex/ml.hpp"

using namespace qkdcoex;
using namespace qkdcoex::ml;

namespace {

struct Planted {
    Matrix x;
    std::vector<double> y;
    std::vector<double> coef;
    double intercept;
};

// y = 3.5 + sum_j c_j x_j exactly, with features on very different scales.
Planted planted_linear(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Planted p{Matrix(n, 7), std::vector<double>(n), {1.5, -2.0, 0.25, 1e-3, -4.0, 0.0, 7.0}, 3.5};
    const double scale[7] = {1.0, 10.0, 0.1, 1000.0, 1.0, 5.0, 2.0};
    for (std::size_t i = 0; i < n; ++i) {
        double y = p.intercept;
        for (std::size_t j = 0; j < 7; ++j) {
            p.x(i, j) = scale[j] * z(rng) + static_cast<double>(j);
            y += p.coef[j] * p.x(i, j);
        }
        p.y[i] = y;
    }
    return p;
}

ModelSpec spec_of(ModelKind kind) { return ModelSpec::defaults(kind); }

const DatasetBundle& bundle() {
    static const DatasetBundle b = generate_campaign(CampaignConfig{}, LinkSetup{}, 42);
    return b;
}

}  // namespace

TEST_SUITE("ml") {

TEST_CASE("least squares recovers planted coefficients") {
    const Planted p = planted_linear(200, 1);
    const FittedModel m = fit(spec_of(ModelKind::LeastSquares), p.x, p.y);
    const auto [b0, b] = m.raw_coefficients();
    CHECK(b0 == doctest::Approx(p.intercept).epsilon(1e-6));
    for (std::size_t j = 0; j < 7; ++j) {
        CAPTURE(j);
        CHECK(std::abs(b[j] - p.coef[j]) < 1e-6);
    }
}

TEST_CASE("ridge with zero penalty equals least squares") {
    const Planted p = planted_linear(150, 2);
    ModelSpec r = spec_of(ModelKind::Ridge);
    r.lambda = 0.0;
    const FittedModel ls = fit(spec_of(ModelKind::LeastSquares), p.x, p.y);
    const FittedModel ridge = fit(r, p.x, p.y);
    for (std::size_t i = 0; i < p.x.rows(); ++i) {
        CHECK(std::abs(ridge.predict(p.x.row(i)) - ls.predict(p.x.row(i))) < 1e-6);
    }
    const auto [a0, a] = ls.raw_coefficients();
    const auto [b0, b] = ridge.raw_coefficients();
    CHECK(std::abs(a0 - b0) < 1e-6);
    for (std::size_t j = 0; j < 7; ++j) CHECK(std::abs(a[j] - b[j]) < 1e-6);
}

TEST_CASE("ridge shrinks coefficients as the penalty grows") {
    const Planted p = planted_linear(100, 3);
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {0.0, 1.0, 10.0, 100.0, 1000.0}) {
        ModelSpec r = spec_of(ModelKind::Ridge);
        r.lambda = lambda;
        const FittedModel m = fit(r, p.x, p.y);
        const auto& lin = std::get<LinearParams>(m.params());
        double norm = 0.0;
        for (double c : lin.coefficients) norm += c * c;
        CHECK(norm <= prev + 1e-9);
        prev = norm;
    }
}

TEST_CASE("lasso with a large penalty zeroes every coefficient") {
    const Planted p = planted_linear(100, 4);
    ModelSpec l = spec_of(ModelKind::Lasso);
    l.lambda = 1e6;
    const FittedModel m = fit(l, p.x, p.y);
    const auto& lin = std::get<LinearParams>(m.params());
    for (double c : lin.coefficients) CHECK(c == 0.0);
    const double mean = std::accumulate(p.y.begin(), p.y.end(), 0.0) / static_cast<double>(p.y.size());
    CHECK(m.predict(p.x.row(0)) == doctest::Approx(mean));
}

TEST_CASE("lasso with a tiny penalty approaches least squares") {
    const Planted p = planted_linear(300, 5);
    ModelSpec l = spec_of(ModelKind::Lasso);
    l.lambda = 1e-9;
    const FittedModel m = fit(l, p.x, p.y);
    for (std::size_t i = 0; i < 20; ++i) CHECK(m.predict(p.x.row(i)) == doctest::Approx(p.y[i]).epsilon(1e-4));
    CHECK(std::get<LinearParams>(m.params()).sweeps <= 10000);
}

TEST_CASE("lasso zeroes an irrelevant feature before relevant ones") {
    const Planted p = planted_linear(300, 6);
    ModelSpec l = spec_of(ModelKind::Lasso);
    l.lambda = 0.05;
    const FittedModel m = fit(l, p.x, p.y);
    const auto& lin = std::get<LinearParams>(m.params());
    CHECK(lin.coefficients[5] == 0.0);
    CHECK(lin.coefficients[6] != 0.0);
}

TEST_CASE("1-NN reproduces its training targets") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    Matrix x(120, 7);
    std::vector<double> y(120);
    for (std::size_t i = 0; i < 120; ++i) {
        for (std::size_t j = 0; j < 7; ++j) x(i, j) = u(rng);
        y[i] = u(rng);
    }
    ModelSpec k1 = spec_of(ModelKind::KNeighbors);
    k1.k = 1;
    const FittedModel m = fit(k1, x, y);
    CHECK(mse(m.predict(x), y) == 0.0);
}

TEST_CASE("k-NN averages the k nearest points; ties go to the lower index") {
    const Matrix x = Matrix::from_rows({{0.0}, {1.0}, {1.0}, {3.0}, {10.0}});
    const std::vector<double> y{0.0, 10.0, 20.0, 30.0, 40.0};
    ModelSpec k2 = spec_of(ModelKind::KNeighbors);
    k2.k = 2;
    const FittedModel m = fit(k2, x, y);
    const std::vector<double> q{1.0};
    CHECK(m.predict(q) == doctest::Approx(15.0));
    k2.k = 1;
    CHECK(fit(k2, x, y).predict(q) == 10.0);
    k2.k = 50;
    CHECK(fit(k2, x, y).predict(q) == doctest::Approx(20.0));
}

TEST_CASE("random forest predictions stay within the training-target range") {
    const InstanceSet& train = bundle().training[0];
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1e4, 1e4);
    for (Target t : kAllTargets) {
        const auto y = target_column(train, t);
        const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
        const FittedModel m = fit(spec_of(ModelKind::RandomForest), train, t);
        for (const auto& inst : bundle().validation[0]) {
            const double v = m.predict(inst.features);
            CHECK(v >= *lo);
            CHECK(v <= *hi);
        }
        for (int i = 0; i < 50; ++i) {
            std::vector<double> wild(7);
            for (auto& w : wild) w = u(rng);
            const double v = m.predict(wild);
            CHECK(v >= *lo);
            CHECK(v <= *hi);
        }
    }
}

TEST_CASE("random forest is deterministic under its bootstrap seed") {
    const InstanceSet& train = bundle().training[1];
    ModelSpec s = spec_of(ModelKind::RandomForest);
    s.trees = 20;
    const FittedModel a = fit(s, train, Target::Skr);
    const FittedModel b = fit(s, train, Target::Skr);
    CHECK(a == b);
    s.bootstrap_seed = 2;
    CHECK_FALSE(fit(s, train, Target::Skr) == a);
    CHECK(a.prediction_spread(train[0].features) >= 0.0);
}

TEST_CASE("single-sample-per-leaf trees fit distinct training points exactly") {
    const Planted p = planted_linear(60, 10);
    ModelSpec s = spec_of(ModelKind::RandomForest);
    s.trees = 1;
    s.max_depth = 64;
    s.features_per_split = 7;
    const FittedModel m = fit(s, p.x, p.y);
    const auto& tree = std::get<ForestParams>(m.params()).trees[0];
    for (const auto& node : tree.nodes) {
        if (node.feature >= 0) {
            CHECK(node.left > 0);
            CHECK(node.right > 0);
        }
    }
}

TEST_CASE("model spec validation") {
    ModelSpec s = spec_of(ModelKind::KNeighbors);
    s.k = 0;
    CHECK_THROWS_AS(s.validate(), ModelError);
    s = spec_of(ModelKind::Ridge);
    s.lambda = -1.0;
    CHECK_THROWS_AS(s.validate(), ModelError);
    s = spec_of(ModelKind::RandomForest);
    s.trees = 0;
    CHECK_THROWS_AS(s.validate(), ModelError);
    CHECK(spec_of(ModelKind::RandomForest).features_per_split == 3);
    CHECK(spec_of(ModelKind::Ridge).lambda == 1.0);
    CHECK(spec_of(ModelKind::Lasso).lambda == 0.01);
    CHECK(spec_of(ModelKind::KNeighbors).k == 5);
    CHECK_THROWS_AS(parse_model_kind("SVM"), DataError);
}

TEST_CASE("fit rejects degenerate input and predict checks the dimension") {
    const Matrix one = Matrix::from_rows({{1.0, 2.0}});
    CHECK_THROWS_AS(fit(spec_of(ModelKind::LeastSquares), one, std::vector<double>{1.0}), ModelError);
    const Matrix collinear = Matrix::from_rows({{1.0, 2.0}, {2.0, 4.0}, {3.0, 6.0}});
    CHECK_THROWS_AS(fit(spec_of(ModelKind::LeastSquares), collinear, std::vector<double>{1.0, 2.0, 3.0}),
                    SingularMatrixError);
    const Planted p = planted_linear(20, 11);
    const FittedModel m = fit(spec_of(ModelKind::LeastSquares), p.x, p.y);
    CHECK_THROWS_AS(m.predict(std::vector<double>{1.0, 2.0}), ModelError);
}

TEST_CASE("saved models load back identically for every kind") {
    test::TempDir dir("models");
    const InstanceSet& train = bundle().training[2];
    for (ModelKind kind : kAllModelKinds) {
        CAPTURE(to_string(kind));
        ModelSpec s = spec_of(kind);
        s.trees = 10;
        const TargetModels m = fit_targets(s, train);
        const auto path = dir / (std::string(to_string(kind)) + ".json");
        save_models(m, path);
        const TargetModels back = load_models(path);
        CHECK(back.spec == m.spec);
        CHECK(back.models == m.models);
        for (const auto& inst : bundle().validation[2]) CHECK(back.predict(inst.features) == m.predict(inst.features));
    }
}

TEST_CASE("corrupt model files are rejected as data errors") {
    test::TempDir dir("models-bad");
    ModelSpec s = spec_of(ModelKind::RandomForest);
    s.trees = 2;
    save_models(fit_targets(s, bundle().training[0]), dir / "rf.json");
    auto doc = nlohmann::json::parse(std::ifstream(dir / "rf.json"));

    auto bad = doc;
    bad["targets"]["skr"]["params"]["trees"][0][0] = {0, 0.0, 100000, 100001, 1.0};
    std::ofstream(dir / "a.json") << bad.dump();
    CHECK_THROWS_AS(load_models(dir / "a.json"), DataError);

    bad = doc;
    bad["format_version"] = 99;
    std::ofstream(dir / "b.json") << bad.dump();
    CHECK_THROWS_AS(load_models(dir / "b.json"), DataError);

    bad = doc;
    bad["targets"]["qber"]["spec"]["trees"] = 0;
    std::ofstream(dir / "c.json") << bad.dump();
    CHECK_THROWS_AS(load_models(dir / "c.json"), DataError);

    std::ofstream(dir / "d.json") << "{not json";
    CHECK_THROWS_AS(load_models(dir / "d.json"), DataError);
    CHECK_THROWS_AS(load_models(dir / "none.json"), DataError);
}

TEST_CASE("comparison table has one row per spec plus the baseline") {
    DatasetBundle small = bundle();
    std::vector<ModelSpec> specs{spec_of(ModelKind::LeastSquares), spec_of(ModelKind::KNeighbors)};
    const ComparisonTable t = compare_models(small, specs);
    REQUIRE(t.models.size() == 2);
    CHECK(t.models[0].label == "LS");
    CHECK(t.models[1].label == "KN");
    CHECK(t.baseline.per_set.size() == 5);
    for (std::size_t ti = 0; ti < kTargetCount; ++ti) {
        double sum = 0.0;
        for (const auto& s : t.models[1].per_set) sum += s[ti];
        CHECK(t.models[1].mean[ti] == doctest::Approx(sum / 5.0));
    }
    // The baseline is the training mean scored on validation.
    const auto y_train = target_column(small.training[3], Target::Skr);
    const auto y_val = target_column(small.validation[3], Target::Skr);
    const double mean = std::accumulate(y_train.begin(), y_train.end(), 0.0) / static_cast<double>(y_train.size());
    CHECK(t.baseline.per_set[3][1] == doctest::Approx(mse(std::vector<double>(y_val.size(), mean), y_val)));

    const std::string text = t.to_text();
    CHECK(text.find("LS") != std::string::npos);
    CHECK(text.find("noise_rate") != std::string::npos);
    const std::string csv = t.to_csv();
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 6);
}

}
