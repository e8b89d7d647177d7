#include <doctest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "qkdcoex/config.hpp"
#include "qkdcoex/controller.hpp"

using namespace qkdcoex;
using namespace qkdcoex::controller;

namespace {

const LinkSetup& link() {
    static const LinkSetup l;
    return l;
}

const OraclePredictor& oracle() {
    static const OraclePredictor p(link().quantum, link().physics);
    return p;
}

// Random forest trained on the default campaign, as the CLI would build it.
const ModelPredictor& forest() {
    static const ModelPredictor p = [] {
        const AppConfig cfg;
        const auto bundle = generate_campaign(cfg.campaign, cfg.link, cfg.seed);
        return ModelPredictor(ml::fit_targets(cfg.model_spec(ml::ModelKind::RandomForest), bundle.all_training()),
                              cfg.link.quantum, cfg.campaign.features);
    }();
    return p;
}

MonitoringSnapshot snapshot(std::vector<int> channels, std::string fiber = "lab", double dbm = -25.0) {
    std::sort(channels.begin(), channels.end());
    MonitoringSnapshot s;
    s.link_id = fiber;
    s.fiber = fiber;
    s.channels = channels;
    s.nominal_powers_dbm.assign(channels.size(), dbm);
    s.measured_powers_dbm = s.nominal_powers_dbm;
    return s;
}

const std::vector<int> kInitial = {35, 37, 43, 45};
const std::vector<int> kStage1 = {35, 36, 37, 38, 42, 43, 44, 45};

Threshold default_threshold() {
    const auto p = oracle().predict(snapshot(kInitial).observed(link().grid), link().fiber("lab"));
    return {0.5 * p.skr, 0.06, 500.0};
}

std::vector<Plan> standard_plans() { return {preset_plan("upper-band"), preset_plan("fragmented")}; }

std::vector<Path> all_paths() { return ScenarioScript::standard().paths; }

}  // namespace

TEST_SUITE("controller") {

TEST_CASE("threshold clauses") {
    const Threshold t{1000.0, 0.05, 400.0};
    CHECK(t.satisfied_by({100.0, 1500.0, 0.02}));
    CHECK_FALSE(t.satisfied_by({100.0, 999.0, 0.02}));
    CHECK_FALSE(t.satisfied_by({100.0, 1500.0, 0.051}));
    CHECK_FALSE(t.satisfied_by({401.0, 1500.0, 0.02}));
    CHECK_THROWS(Threshold{-1.0, 0.05, 400.0}.validate());
    CHECK_THROWS(Threshold{0.0, 0.0, 400.0}.validate());
    CHECK_THROWS(Threshold{0.0, 0.6, 400.0}.validate());
}

TEST_CASE("initial allocation passes and is kept") {
    const auto a = evaluate_and_decide(snapshot(kInitial), oracle(), default_threshold(), standard_plans(),
                                       all_paths(), link());
    CHECK(a.kind == ActionKind::Keep);
    CHECK(a.reason == ActionReason::ThresholdsMet);
    CHECK_FALSE(a.warning);
    CHECK(a.predicted == a.current);
}

TEST_CASE("stage-1 violation reallocates to the upper band with the fragmented plan as backup") {
    const auto a = evaluate_and_decide(snapshot(kStage1), oracle(), default_threshold(), standard_plans(),
                                       all_paths(), link());
    CHECK(a.kind == ActionKind::Reallocate);
    CHECK(a.reason == ActionReason::ThresholdViolation);
    CHECK(a.plan == "upper-band");
    CHECK(a.channels == preset_plan("upper-band").channels);
    CHECK(a.backup_plan == "fragmented");
    CHECK_FALSE(a.warning);
    CHECK(a.current.noise_rate > 500.0);
    CHECK(a.predicted.skr > a.current.skr);
}

TEST_CASE("Keep is returned exactly when the current prediction meets every clause") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> idx(11, 97), count(1, 8);
    std::uniform_real_distribution<double> skr(0.0, 2500.0), noise(50.0, 1500.0);
    int keeps = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> chans;
        const int n = count(rng);
        while (static_cast<int>(chans.size()) < n) {
            const int c = idx(rng);
            if (c >= 39 && c <= 41) continue;
            if (std::find(chans.begin(), chans.end(), c) == chans.end()) chans.push_back(c);
        }
        const auto snap = snapshot(chans);
        const Threshold t{skr(rng), 0.06, noise(rng)};
        const auto current = oracle().predict(snap.observed(link().grid), link().fiber("lab"));
        const auto a = evaluate_and_decide(snap, oracle(), t, standard_plans(), all_paths(), link());
        CHECK((a.kind == ActionKind::Keep && !a.warning) == t.satisfied_by(current));
        keeps += a.kind == ActionKind::Keep;
    }
    CHECK(keeps > 0);
    CHECK(keeps < 200);
}

TEST_CASE("nothing satisfies: best plan with a warning") {
    const Threshold impossible{1e9, 0.06, 500.0};
    const auto a = evaluate_and_decide(snapshot(kStage1), oracle(), impossible, standard_plans(), all_paths(),
                                       link());
    CHECK(a.kind == ActionKind::Reallocate);
    CHECK(a.warning);
    CHECK(a.reason == ActionReason::NoSatisfyingOption);
    CHECK(a.plan == "upper-band");

    const auto none = evaluate_and_decide(snapshot(kStage1), oracle(), impossible, {}, {}, link());
    CHECK(none.kind == ActionKind::Keep);
    CHECK(none.warning);
}

TEST_CASE("with no usable plan a satisfying alternate path is chosen") {
    // The four initial channels exceed the noise ceiling on the city link but not in the lab.
    const auto snap = snapshot(kInitial, "city");
    const Threshold t{900.0, 0.06, 500.0};
    const auto a = evaluate_and_decide(snap, oracle(), t, {}, all_paths(), link());
    CHECK(a.kind == ActionKind::SwitchPath);
    CHECK(a.path == "lab");
    CHECK(t.satisfied_by(a.predicted));
    CHECK_FALSE(a.warning);

    // Plans of the wrong size are not candidates.
    const std::vector<Plan> wrong = {preset_plan("upper-band")};
    CHECK(evaluate_and_decide(snap, oracle(), t, wrong, all_paths(), link()).kind == ActionKind::SwitchPath);
}

TEST_CASE("blocked spectrum forces a move and excludes overlapping plans") {
    auto snap = snapshot(preset_plan("upper-band").channels);
    for (int c = 75; c <= 89; ++c) snap.blocked_channels.push_back(c);
    const Threshold t = default_threshold();
    CHECK(evaluate_and_decide(snap, oracle(), t, standard_plans(), all_paths(), link()).kind == ActionKind::Keep);

    const auto a = decide(snap, oracle(), t, standard_plans(), all_paths(), link());
    CHECK(a.kind == ActionKind::Reallocate);
    CHECK(a.reason == ActionReason::SpectrumUnavailable);
    CHECK(a.plan == "fragmented");
    CHECK(a.backup_plan.empty());

    auto clear = snapshot(preset_plan("upper-band").channels);
    CHECK(decide(clear, oracle(), t, standard_plans(), all_paths(), link()) ==
          evaluate_and_decide(clear, oracle(), t, standard_plans(), all_paths(), link()));
}

TEST_CASE("decisions are deterministic and every reallocation is a valid channel set") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> idx(0, 97);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Plan> plans;
        for (int p = 0; p < 4; ++p) {
            Plan plan{"p" + std::to_string(p), {}};
            while (plan.channels.size() < kStage1.size()) {
                const int c = idx(rng);
                if (std::find(plan.channels.begin(), plan.channels.end(), c) == plan.channels.end()) {
                    plan.channels.push_back(c);
                }
            }
            plans.push_back(std::move(plan));
        }
        const auto snap = snapshot(kStage1);
        const Threshold t{std::uniform_real_distribution<double>(0.0, 2000.0)(rng), 0.06, 500.0};
        const auto a = decide(snap, oracle(), t, plans, all_paths(), link());
        CHECK(a == decide(snap, oracle(), t, plans, all_paths(), link()));
        if (a.kind == ActionKind::Reallocate) {
            CHECK(a.channels.size() == snap.channels.size());
            const auto set = ClassicalChannelSet::uniform(a.channels, -25.0, link().grid);
            CHECK(validate_channel_set(set, link().quantum).empty());
        }
    }
}

TEST_CASE("greedy search moves channels away from the quantum channel") {
    const auto snap = snapshot(kStage1);
    const Threshold t = default_threshold();
    const auto g = greedy_plan(snap, oracle(), t, link(), DecisionOptions{});
    REQUIRE(g.has_value());
    CHECK(g->channels.size() == kStage1.size());
    const auto before = oracle().predict(snap.observed(link().grid), link().fiber("lab"));
    const auto after = oracle().predict(ClassicalChannelSet::uniform(g->channels, -25.0, link().grid),
                                        link().fiber("lab"));
    CHECK(after.skr > before.skr);
    CHECK(validate_channel_set(ClassicalChannelSet::uniform(g->channels, -25.0, link().grid), link().quantum)
              .empty());

    DecisionOptions opts;
    opts.greedy_search = true;
    const auto a = evaluate_and_decide(snap, oracle(), t, {}, {}, link(), opts);
    CHECK(a.kind == ActionKind::Reallocate);
    CHECK(a.plan == "greedy");
}

TEST_CASE("initial path selection") {
    const auto set = ClassicalChannelSet::uniform(kInitial, -25.0, link().grid);
    const auto loud = ClassicalChannelSet::uniform(kInitial, -15.0, link().grid);
    const FiberProfile& lab = link().fiber("lab");

    const std::vector<PathOption> one = {{"only", lab, set}};
    CHECK(select_initial_path(one, oracle()).id == "only");

    const std::vector<PathOption> power = {{"a", lab, loud}, {"b", lab, set}};
    CHECK(select_initial_path(power, oracle()).id == "b");

    const std::vector<PathOption> tie = {{"z", lab, set}, {"m", lab, set}};
    const auto t = select_initial_path(tie, oracle());
    CHECK(t.id == "m");
    CHECK(t.index == 1);
    CHECK(t.predictions.size() == 2);

    CHECK_THROWS_AS(select_initial_path(std::vector<PathOption>{}, oracle()), ScenarioError);

    std::vector<PathOption> three;
    for (const auto& p : all_paths()) three.push_back({p.id, link().fiber(p.fiber), set});
    CHECK(select_initial_path(three, oracle()).id == "lab");
    CHECK(select_initial_path(three, forest()).id == "lab");
}

TEST_CASE("default scenario with the ground-truth predictor") {
    const auto r = run_scenario(ScenarioScript::standard(), link(), oracle());
    REQUIRE(r.stages.size() == 4);
    CHECK(r.selection.id == "lab");
    CHECK(r.all_expected());
    CHECK(r.stages[0].action.kind == ActionKind::Keep);
    CHECK(r.stages[1].action.plan == "upper-band");
    CHECK(r.stages[2].action.kind == ActionKind::Keep);
    CHECK(r.stages[3].action.plan == "fragmented");
    CHECK(r.stages[3].action.reason == ActionReason::SpectrumUnavailable);
    CHECK(r.threshold.min_skr == doctest::Approx(0.5 * r.stages[0].predicted.skr));
}

TEST_CASE("default scenario with the trained forest") {
    const auto r = run_scenario(ScenarioScript::standard(), link(), forest());
    REQUIRE(r.stages.size() == 4);
    CHECK(r.all_expected());
    CHECK(r.stages[2].predicted.noise_rate < r.stages[1].predicted.noise_rate);
    CHECK(r.stages[2].monitored.noise.total_rate < r.stages[1].monitored.noise.total_rate);

    for (std::size_t i = 0; i < r.stages.size(); ++i) {
        const auto& s = r.stages[i];
        CHECK(s.snapshot.timestamp_ms == static_cast<std::int64_t>(i) * 60'000);
        if (s.action.kind != ActionKind::Reallocate) {
            CHECK(s.messages.empty());
            continue;
        }
        const std::vector<int>& before = s.snapshot.channels;
        std::vector<int> added;
        std::set_difference(s.channels_after.begin(), s.channels_after.end(), before.begin(), before.end(),
                            std::back_inserter(added));
        REQUIRE(s.messages.size() == added.size());
        for (std::size_t m = 0; m < added.size(); ++m) {
            const double nm = frequency_to_wavelength(channel_to_frequency(added[m], link().grid)).value;
            CHECK(s.messages[m].wavelength_nm() == doctest::Approx(nm).epsilon(1e-6));
            CHECK(s.messages[m].in_port == "A");
            CHECK(s.messages[m].out_port == "4");
            CHECK(s.messages[m].filter_width_ghz() == 38.0);
        }
    }
}

TEST_CASE("replaying the record log re-derives the same actions") {
    test::TempDir dir("scenario");
    const auto script = ScenarioScript::standard();
    ScenarioReport report;
    {
        wire::RecordLog log(dir / "records.log");
        report = run_scenario(script, link(), forest(), &log);
    }
    const auto replayed = wire::replay(dir / "records.log");
    CHECK(replayed.warnings.empty());
    const auto check = replay_decisions(replayed.records, script, link(), forest());
    CHECK(check.identical());
    REQUIRE(check.logged.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(check.logged[i] == report.stages[i].action);

    std::size_t messages = 0;
    for (const auto& rec : replayed.records) {
        if (rec.kind == wire::RecordKind::Message) {
            CHECK_NOTHROW(wire::decode(rec.payload.at("line").get<std::string>()));
            ++messages;
        }
    }
    std::size_t expected = 0;
    for (const auto& s : report.stages) expected += s.messages.size();
    CHECK(messages == expected);

    auto tampered = replayed.records;
    for (auto& rec : tampered) {
        if (rec.kind == wire::RecordKind::Action && rec.payload.at("stage") == "stage1") {
            rec.payload["action"]["plan"] = "fragmented";
        }
    }
    CHECK_FALSE(replay_decisions(tampered, script, link(), forest()).identical());
}

TEST_CASE("scenario runs are deterministic") {
    const auto a = run_scenario(ScenarioScript::standard(), link(), forest());
    const auto b = run_scenario(ScenarioScript::standard(), link(), forest());
    CHECK(a.to_json() == b.to_json());
    CHECK(a.to_text() == b.to_text());
}

TEST_CASE("scenario script validation") {
    auto s = ScenarioScript::standard();
    CHECK_NOTHROW(s.validate(link()));

    auto prefix = s;
    prefix.stages.resize(2);
    CHECK(run_scenario(prefix, link(), oracle()).stages.size() == 2);

    auto swapped = s;
    std::swap(swapped.stages[1], swapped.stages[2]);
    CHECK_THROWS_AS(swapped.validate(link()), ScenarioError);
    CHECK_THROWS_AS(run_scenario(swapped, link(), oracle()), ScenarioError);

    auto bad = s;
    bad.stages[0].name = "warmup";
    CHECK_THROWS_AS(bad.validate(link()), ScenarioError);

    bad = s;
    bad.stages.clear();
    CHECK_THROWS_AS(bad.validate(link()), ScenarioError);

    bad = s;
    bad.plans[0].channels[0] = -3;
    CHECK_THROWS_AS(bad.validate(link()), ScenarioError);

    bad = s;
    bad.paths.push_back(bad.paths[0]);
    CHECK_THROWS_AS(bad.validate(link()), ScenarioError);

    bad = s;
    bad.monitor_ripple_db = 1.0;
    CHECK_THROWS_AS(bad.validate(link()), ScenarioError);

    bad = s;
    bad.paths[0].fiber = "moon";
    CHECK_THROWS(bad.validate(link()));

    bad = s;
    bad.stages[1].add_channels = {35};
    CHECK_THROWS_AS(run_scenario(bad, link(), oracle()), ScenarioError);
}

TEST_CASE("snapshot validation enforces the monitor tolerance") {
    auto s = snapshot(kInitial);
    CHECK_NOTHROW(s.validate(0.5));
    s.measured_powers_dbm[2] += 0.6;
    CHECK_THROWS_AS(s.validate(0.5), ScenarioError);
    s = snapshot(kInitial);
    std::swap(s.channels[0], s.channels[1]);
    CHECK_THROWS_AS(s.validate(0.5), ScenarioError);
    s = snapshot(kInitial);
    s.measured_powers_dbm.pop_back();
    CHECK_THROWS_AS(s.validate(0.5), ScenarioError);
}

TEST_CASE("actions, snapshots and scripts round-trip through JSON") {
    const auto r = run_scenario(ScenarioScript::standard(), link(), oracle());
    for (const auto& s : r.stages) {
        CHECK(action_from_json(to_json(s.action)) == s.action);
        CHECK(snapshot_from_json(to_json(s.snapshot)) == s.snapshot);
    }
    auto script = ScenarioScript::standard();
    script.thresholds.min_skr = 750.0;
    script.decision.greedy_search = true;
    CHECK(script_from_json(to_json(script)) == script);
    CHECK(script_from_json(to_json(ScenarioScript::standard())) == ScenarioScript::standard());

    auto j = to_json(script);
    j["plans"] = {"fragmented"};
    CHECK(script_from_json(j).plans == std::vector<Plan>{preset_plan("fragmented")});
    j["colour"] = 1;
    CHECK_THROWS_AS(script_from_json(j), ConfigError);
}

TEST_CASE("preset plans") {
    CHECK(preset_plans().size() == 3);
    CHECK(preset_plan("upper-band-ch70").channels[2] == 70);
    CHECK_THROWS_AS(preset_plan("lower-band"), ConfigError);
}

}
