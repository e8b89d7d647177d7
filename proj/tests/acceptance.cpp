// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>

#include "qkdcoex/config.hpp"
#include "qkdcoex/controller.hpp"
#include "qkdcoex/dataset.hpp"
#include "qkdcoex/ml.hpp"
#include "qkdcoex/physics.hpp"
#include "qkdcoex/wire.hpp"

using namespace qkdcoex;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

std::vector<double> random_frequencies(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> f(191.0, 196.5);
    std::set<double> s;
    while (s.size() < n) s.insert(f(rng));
    std::vector<double> v(s.begin(), s.end());
    std::shuffle(v.begin(), v.end(), rng);
    return v;
}

const AppConfig& config() {
    static const AppConfig c;
    return c;
}

const DatasetBundle& bundle() {
    static const DatasetBundle b = generate_campaign(config().campaign, config().link, config().seed);
    return b;
}

Outcome fwm_count_law() {
    Outcome o;
    std::mt19937_64 rng(1);
    for (std::size_t n = 1; n <= 10; ++n) {
        const auto f = random_frequencies(rng, n);
        const auto products = enumerate_fwm_products(f);
        std::set<std::tuple<std::size_t, std::size_t, std::size_t>> brute;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k < n; ++k)
                    if (k != i && k != j) brute.insert({std::min(i, j), std::max(i, j), k});
        std::set<std::tuple<std::size_t, std::size_t, std::size_t>> got;
        for (const auto& p : products) got.insert({p.parents[0], p.parents[1], p.parents[2]});
        o.require(products.size() == (n * n * n - n * n) / 2, "count differs from (N^3-N^2)/2 at N=" + std::to_string(n));
        o.require(got == brute && got.size() == products.size(), "triples differ from brute force at N=" + std::to_string(n));
    }
    const auto f8 = random_frequencies(rng, 8);
    const std::size_t n8 = enumerate_fwm_products(f8).size();
    o.require(n8 == 224, "N=8 gave " + std::to_string(n8));
    if (o.pass) o.detail = "N=1..10 match brute force, N=8 -> " + std::to_string(n8);
    return o;
}

Outcome guard_band_law() {
    Outcome o;
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> count(2, 10);
    std::size_t checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto f = random_frequencies(rng, count(rng));
        const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
        const GuardBand g = fwm_guard_frequencies(*lo, *hi);
        o.require(g.low_thz == 2 * *lo - *hi && g.high_thz == 2 * *hi - *lo, "guard band formula");
        for (const auto& p : enumerate_fwm_products(f)) {
            o.require(p.frequency_thz >= g.low_thz && p.frequency_thz <= g.high_thz,
                      "product outside guard band in trial " + std::to_string(trial));
            ++checked;
        }
    }
    if (o.pass) o.detail = std::to_string(checked) + " products over 1000 sets inside [2fmin-fmax, 2fmax-fmin]";
    return o;
}

Outcome dataset_fidelity() {
    Outcome o;
    const DatasetBundle& b = bundle();
    o.require(b.training.size() == 5 && b.validation.size() == 5, "set count");
    std::set<std::size_t> ids;
    std::size_t total = 0;
    for (std::size_t s = 0; s < b.training.size(); ++s) {
        o.require(b.training[s].size() == 164, "training size");
        o.require(b.validation[s].size() == 43, "validation size");
        std::set<std::string> train;
        for (const auto& i : b.training[s]) train.insert(i.combination);
        for (const auto& i : b.validation[s]) o.require(train.count(i.combination) == 0, "validation point in training");
        for (const auto& i : b.training[s]) ids.insert(i.id);
        for (const auto& i : b.validation[s]) ids.insert(i.id);
        total += b.training[s].size() + b.validation[s].size();
    }
    o.require(ids.size() == total, "instance ids repeat");
    o.require(std::tuple_size_v<FeatureVector> == 7 && kFeatureNames.size() == 7, "feature width");
    const DatasetBundle again = generate_campaign(config().campaign, config().link, config().seed);
    o.require(again == b, "second generation differs");
    if (o.pass) o.detail = "5x164 training, 5x43 validation, disjoint, 7 features, deterministic";
    return o;
}

Outcome regressor_oracles() {
    using namespace ml;
    Outcome o;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z(0.0, 1.0);
    const std::vector<double> coef = {1.5, -2.0, 0.25, 1e-3, -4.0, 0.0, 7.0};
    const double scale[7] = {1.0, 10.0, 0.1, 1000.0, 1.0, 5.0, 2.0};
    Matrix x(200, 7);
    std::vector<double> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
        y[i] = 3.5;
        for (std::size_t j = 0; j < 7; ++j) {
            x(i, j) = scale[j] * z(rng) + static_cast<double>(j);
            y[i] += coef[j] * x(i, j);
        }
    }
    const FittedModel ls = fit(ModelSpec::defaults(ModelKind::LeastSquares), x, y);
    const auto [b0, b] = ls.raw_coefficients();
    o.require(std::abs(b0 - 3.5) < 1e-6, "LS intercept");
    for (std::size_t j = 0; j < 7; ++j) o.require(std::abs(b[j] - coef[j]) < 1e-6, "LS coefficient " + std::to_string(j));

    ModelSpec r0 = ModelSpec::defaults(ModelKind::Ridge);
    r0.lambda = 0.0;
    const FittedModel ridge = fit(r0, x, y);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        o.require(std::abs(ridge.predict(x.row(i)) - ls.predict(x.row(i))) < 1e-6, "Ridge(0) differs from LS");
    }

    ModelSpec big = ModelSpec::defaults(ModelKind::Lasso);
    big.lambda = 1e6;
    const FittedModel lasso = fit(big, x, y);
    for (double c : std::get<LinearParams>(lasso.params()).coefficients) {
        o.require(c == 0.0, "Lasso(large) left a nonzero coefficient");
    }

    const InstanceSet& train = bundle().training[0];
    ModelSpec k1 = ModelSpec::defaults(ModelKind::KNeighbors);
    k1.k = 1;
    for (Target t : kAllTargets) {
        const auto col = target_column(train, t);
        const FittedModel knn = fit(k1, train, t);
        const Matrix fx = Matrix::from_features(train);
        o.require(mse(knn.predict(fx), col) == 0.0, "KN(k=1) training MSE is not zero");

        const FittedModel rf = fit(config().model_spec(ModelKind::RandomForest), train, t);
        const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
        for (const auto& inst : bundle().validation[0]) {
            const double v = rf.predict(inst.features);
            o.require(v >= *lo && v <= *hi, "RF prediction outside the training-target range");
        }
    }
    if (o.pass) o.detail = "LS, Ridge(0), Lasso(1e6), KN(k=1), RF range all hold";
    return o;
}

Outcome model_comparison() {
    Outcome o;
    std::vector<ml::ModelSpec> specs;
    for (auto kind : ml::kAllModelKinds) specs.push_back(config().model_spec(kind));
    const ml::ComparisonTable table = ml::compare_models(bundle(), specs);
    std::cout << table.to_text();
    o.require(table.models.size() == specs.size(), "row count");
    for (const auto& row : table.models) {
        for (std::size_t s = 0; s < row.per_set.size(); ++s) {
            for (std::size_t t = 0; t < kTargetCount; ++t) {
                o.require(row.per_set[s][t] < table.baseline.per_set[s][t],
                          row.label + " does not beat the mean baseline on " + std::string(kTargetNames[t]) +
                              " in validation set " + std::to_string(s + 1));
            }
        }
    }
    if (o.pass) o.detail = "all 5 models beat the mean baseline on 3 targets x 5 sets (seed " +
                           std::to_string(config().seed) + ")";
    return o;
}

Outcome scenario_reproduction() {
    using namespace controller;
    Outcome o;
    const AppConfig& cfg = config();
    const ModelPredictor model(ml::fit_targets(cfg.model_spec(cfg.scenario_model), bundle().all_training()),
                               cfg.link.quantum, cfg.campaign.features);
    const ScenarioReport r = run_scenario(cfg.scenario, cfg.link, model);
    const ScenarioReport again = run_scenario(cfg.scenario, cfg.link, model);
    o.require(r.to_json() == again.to_json(), "scenario not deterministic");
    o.require(r.stages.size() == 4, "stage count");
    if (r.stages.size() == 4) {
        o.require(r.stages[0].action.kind == ActionKind::Keep, "initial stage is not Keep");
        o.require(r.stages[1].action.reason == ActionReason::ThresholdViolation, "stage1 did not violate");
        o.require(r.stages[1].action.kind == ActionKind::Reallocate &&
                      r.stages[1].action.channels == std::vector<int>{75, 77, 79, 81, 83, 85, 87, 89},
                  "stage1 did not reallocate to Ch75..89");
        o.require(r.stages[2].action.kind == ActionKind::Keep, "stage2 is not Keep");
        o.require(r.stages[3].action.kind == ActionKind::Reallocate &&
                      r.stages[3].action.channels == std::vector<int>{11, 17, 23, 29, 41, 47, 53, 59},
                  "stage3 did not reallocate to Ch11..59");
        o.require(r.stages[2].monitored.noise.total_rate < r.stages[1].monitored.noise.total_rate,
                  "stage2 measured noise not below stage1");
    }
    o.require(r.all_expected(), "script expectations not met");
    if (o.pass) {
        std::ostringstream d;
        d << "path " << r.selection.id << ": Keep, Reallocate(Ch75..89), Keep, Reallocate(Ch11..59); noise "
          << std::lround(r.stages[1].monitored.noise.total_rate) << " -> "
          << std::lround(r.stages[2].monitored.noise.total_rate) << " ph/s (" << ml::to_string(cfg.scenario_model) << ")";
        o.detail = d.str();
    }
    return o;
}

Outcome wire_round_trip() {
    using namespace wire;
    Outcome o;
    const auto fig = SssConfigMessage::make(1, 0, "A", "4", 1554.134, 38.0);
    const std::string line = encode(fig);
    o.require(line.find("in=A out=4 wl_nm=1554.134 width_ghz=38.0") != std::string::npos, "example encoding: " + line);
    o.require(decode(line) == fig && encode(decode(line)) == line, "example round-trip");

    std::mt19937_64 rng(4);
    for (int i = 0; i < 1000; ++i) {
        SssConfigMessage m;
        m.id = std::uniform_int_distribution<std::uint64_t>()(rng);
        m.timestamp_ms = std::uniform_int_distribution<std::int64_t>(0, 4'000'000'000'000)(rng);
        m.in_port = "in" + std::to_string(rng() % 1000);
        m.out_port = std::to_string(rng() % 64);
        m.wavelength_pm = std::uniform_int_distribution<std::int64_t>(1'530'000, 1'565'000)(rng);
        m.filter_width_dghz = std::uniform_int_distribution<std::int64_t>(1, 2000)(rng);
        const std::string s = encode(m);
        o.require(decode(s) == m && encode(decode(s)) == s, "random message " + std::to_string(i));
    }

    const auto dir = std::filesystem::temp_directory_path() / ("qkdcoex-acceptance-" + std::to_string(rng()));
    std::filesystem::create_directories(dir);
    const controller::OraclePredictor model(config().link.quantum, config().link.physics);
    {
        RecordLog log(dir / "records.log");
        controller::run_scenario(config().scenario, config().link, model, &log);
    }
    const auto replayed = replay(dir / "records.log");
    const auto check = controller::replay_decisions(replayed.records, config().scenario, config().link, model);
    o.require(replayed.warnings.empty(), "log replay warnings");
    o.require(check.identical() && check.logged.size() == config().scenario.stages.size(),
              "replayed actions differ from logged actions");
    std::filesystem::remove_all(dir);
    if (o.pass) o.detail = "example + 1000 random messages bit-exact; " + std::to_string(check.logged.size()) +
                           " logged actions re-derived identically";
    return o;
}

Outcome physics_sanity() {
    Outcome o;
    const LinkSetup& link = config().link;
    const FiberProfile& fiber = link.fiber("lab");
    const double e_star = zero_key_rate_qber();
    o.require(std::abs(1.0 - 2.0 * binary_entropy(e_star)) < 1e-4, "1-2H2(e*) != 0");
    o.require(std::abs(e_star - 0.1100) < 1e-4, "e* not near 0.1100");
    double prev = std::numeric_limits<double>::infinity();
    bool past = false;
    for (int i = 0; i < 50; ++i) {
        NoiseBreakdown n;
        n.total_rate = 10.0 * std::pow(1.25, i);
        const QkdPerformance p = performance_from_noise(n, link.quantum, fiber, link.physics);
        o.require(p.skr <= prev, "SKR increased with noise at step " + std::to_string(i));
        if (p.qber >= e_star) {
            o.require(p.skr == 0.0, "SKR nonzero at QBER >= e*");
            past = true;
        }
        prev = p.skr;
    }
    o.require(past, "sweep never reached e*");
    if (o.pass) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "50-point sweep non-increasing; SKR = 0 past e* = %.6f", e_star);
        o.detail = buf;
    }
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double limit_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "FWM count law", 1.0, fwm_count_law},
        {2, "guard-band law", 1.0, guard_band_law},
        {3, "dataset fidelity", 30.0, dataset_fidelity},
        {4, "regressor oracles", 10.0, regressor_oracles},
        {5, "model comparison", 120.0, model_comparison},
        {6, "scenario reproduction", 30.0, scenario_reproduction},
        {7, "wire round-trip and log replay", 5.0, wire_round_trip},
        {8, "physics sanity", 1.0, physics_sanity},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (o.pass && secs > c.limit_s) {
            o.pass = false;
            o.detail = "took longer than " + std::to_string(c.limit_s) + " s";
        }
        char timing[32];
        std::snprintf(timing, sizeof timing, "%.2fs", secs);
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << ", " << timing
                  << "): " << o.detail << std::endl;
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
