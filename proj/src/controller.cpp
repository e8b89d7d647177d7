#include "qkdcoex/controller.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

namespace qkdcoex::controller {

using nlohmann::json;
using qkdcoex::detail::read;
using qkdcoex::detail::reject_unknown;

Prediction to_prediction(const QkdPerformance& perf) {
    return {perf.noise.total_rate, perf.skr, perf.qber};
}

ModelPredictor::ModelPredictor(ml::TargetModels models, QuantumChannelSpec quantum,
                               FeatureOptions features)
    : models_(std::move(models)), quantum_(std::move(quantum)), features_(features) {
    if (models_.models.size() != kTargetCount) {
        throw ml::ModelError("predictor needs one model per target");
    }
}

Prediction ModelPredictor::predict(const ClassicalChannelSet& set, const FiberProfile& fiber) const {
    const FeatureVector x = featurize(set, quantum_, fiber, features_);
    const TargetVector y = models_.predict(x);
    return {std::max(0.0, y[static_cast<std::size_t>(Target::Noise)]),
            std::max(0.0, y[static_cast<std::size_t>(Target::Skr)]),
            std::clamp(y[static_cast<std::size_t>(Target::Qber)], 0.0, 0.5)};
}

OraclePredictor::OraclePredictor(QuantumChannelSpec quantum, PhysicsConstants constants)
    : quantum_(std::move(quantum)), constants_(constants) {}

Prediction OraclePredictor::predict(const ClassicalChannelSet& set, const FiberProfile& fiber) const {
    return to_prediction(evaluate_link(set, quantum_, fiber, constants_));
}

void Threshold::validate() const {
    if (!(min_skr >= 0.0)) throw ConfigError("threshold: min_skr must be >= 0");
    if (!(max_qber > 0.0 && max_qber <= 0.5)) throw ConfigError("threshold: max_qber must be in (0, 0.5]");
    if (!(max_noise_rate >= 0.0)) throw ConfigError("threshold: max_noise_rate must be >= 0");
}

bool Threshold::satisfied_by(const Prediction& p) const {
    return p.skr >= min_skr && p.qber <= max_qber && p.noise_rate <= max_noise_rate;
}

std::vector<Plan> preset_plans() {
    return {
        {"upper-band", {75, 77, 79, 81, 83, 85, 87, 89}},
        {"upper-band-ch70", {75, 77, 70, 81, 83, 85, 87, 89}},
        {"fragmented", {11, 17, 23, 29, 41, 47, 53, 59}},
    };
}

Plan preset_plan(std::string_view name) {
    for (auto& p : preset_plans()) {
        if (p.name == name) return p;
    }
    throw ConfigError("unknown plan preset '" + std::string(name) +
                      "' (expected upper-band, upper-band-ch70 or fragmented)");
}

ClassicalChannelSet MonitoringSnapshot::observed(const GridSpec& grid) const {
    return ClassicalChannelSet::from_indices(channels, measured_powers_dbm, grid);
}

void MonitoringSnapshot::validate(double tolerance_db) const {
    if (channels.size() != nominal_powers_dbm.size() || channels.size() != measured_powers_dbm.size()) {
        throw ScenarioError("snapshot: channel and power lists differ in length");
    }
    if (!std::is_sorted(channels.begin(), channels.end()) ||
        std::adjacent_find(channels.begin(), channels.end()) != channels.end()) {
        throw ScenarioError("snapshot: channels must be strictly increasing");
    }
    for (std::size_t i = 0; i < channels.size(); ++i) {
        if (!(std::abs(measured_powers_dbm[i] - nominal_powers_dbm[i]) <= tolerance_db)) {
            throw ScenarioError("snapshot: Ch" + std::to_string(channels[i]) +
                                " measured power deviates from nominal by more than " +
                                std::to_string(tolerance_db) + " dB");
        }
    }
}

std::string_view to_string(ActionKind kind) {
    switch (kind) {
        case ActionKind::Keep: return "Keep";
        case ActionKind::Reallocate: return "Reallocate";
        case ActionKind::SwitchPath: return "SwitchPath";
    }
    return "?";
}

std::string_view to_string(ActionReason reason) {
    switch (reason) {
        case ActionReason::ThresholdsMet: return "ThresholdsMet";
        case ActionReason::ThresholdViolation: return "ThresholdViolation";
        case ActionReason::SpectrumUnavailable: return "SpectrumUnavailable";
        case ActionReason::NoSatisfyingOption: return "NoSatisfyingOption";
    }
    return "?";
}

namespace {

ActionKind parse_action_kind(std::string_view s) {
    for (auto k : {ActionKind::Keep, ActionKind::Reallocate, ActionKind::SwitchPath}) {
        if (to_string(k) == s) return k;
    }
    throw DataError("unknown action kind '" + std::string(s) + "'");
}

ActionReason parse_action_reason(std::string_view s) {
    for (auto r : {ActionReason::ThresholdsMet, ActionReason::ThresholdViolation,
                   ActionReason::SpectrumUnavailable, ActionReason::NoSatisfyingOption}) {
        if (to_string(r) == s) return r;
    }
    throw DataError("unknown action reason '" + std::string(s) + "'");
}

// Channels leaving the allocation paired, in frequency order, with the ones
// replacing them.
std::vector<std::pair<int, int>> moved_pairs(const std::vector<int>& from, const std::vector<int>& to) {
    std::vector<int> a(from), b(to);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<int> gone, added;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(gone));
    std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(added));
    std::vector<std::pair<int, int>> out;
    for (std::size_t i = 0; i < gone.size(); ++i) out.emplace_back(gone[i], added[i]);
    return out;
}

// Nominal powers for `target` (sorted); a moved channel keeps the power of
// the channel it replaces.
std::vector<double> carry_powers(const std::vector<int>& channels, const std::vector<double>& powers,
                                 const std::vector<int>& target) {
    std::vector<double> out;
    const auto pairs = moved_pairs(channels, target);
    for (int ch : target) {
        int source = ch;
        for (const auto& [old_ch, new_ch] : pairs) {
            if (new_ch == ch) source = old_ch;
        }
        const auto it = std::find(channels.begin(), channels.end(), source);
        out.push_back(powers[static_cast<std::size_t>(it - channels.begin())]);
    }
    return out;
}

bool overlaps(const std::vector<int>& channels, const std::vector<int>& blocked) {
    return std::any_of(channels.begin(), channels.end(), [&](int c) {
        return std::find(blocked.begin(), blocked.end(), c) != blocked.end();
    });
}

struct Candidate {
    const Plan* plan = nullptr;
    std::vector<int> channels;
    Prediction prediction;
    std::size_t order = 0;
};

// Better = higher SKR, then lower noise, then earlier in the list.
bool better(const Prediction& a, std::size_t ia, const Prediction& b, std::size_t ib) {
    if (a.skr != b.skr) return a.skr > b.skr;
    if (a.noise_rate != b.noise_rate) return a.noise_rate < b.noise_rate;
    return ia < ib;
}

std::vector<Candidate> rank_plans(const MonitoringSnapshot& snap, const Predictor& model,
                                  std::span<const Plan> plans, const LinkSetup& link,
                                  const FiberProfile& fiber) {
    std::vector<Candidate> out;
    for (std::size_t i = 0; i < plans.size(); ++i) {
        std::vector<int> target = plans[i].channels;
        std::sort(target.begin(), target.end());
        if (target.size() != snap.channels.size()) continue;
        if (std::adjacent_find(target.begin(), target.end()) != target.end()) continue;
        if (overlaps(target, snap.blocked_channels)) continue;
        const auto powers = carry_powers(snap.channels, snap.nominal_powers_dbm, target);
        const auto set = ClassicalChannelSet::from_indices(target, powers, link.grid);
        if (!validate_channel_set(set, link.quantum).empty()) continue;
        out.push_back({&plans[i], target, model.predict(set, fiber), i});
    }
    std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        return better(a.prediction, a.order, b.prediction, b.order);
    });
    return out;
}

struct PathCandidate {
    const Path* path = nullptr;
    Prediction prediction;
};

std::vector<PathCandidate> rank_paths(const MonitoringSnapshot& snap, const Predictor& model,
                                      std::span<const Path> paths, const LinkSetup& link) {
    std::vector<PathCandidate> out;
    const auto set = snap.observed(link.grid);
    for (const auto& p : paths) {
        if (p.id == snap.link_id) continue;
        out.push_back({&p, model.predict(set, link.fiber(p.fiber))});
    }
    std::stable_sort(out.begin(), out.end(), [](const PathCandidate& a, const PathCandidate& b) {
        if (a.prediction.skr != b.prediction.skr) return a.prediction.skr > b.prediction.skr;
        if (a.prediction.noise_rate != b.prediction.noise_rate) {
            return a.prediction.noise_rate < b.prediction.noise_rate;
        }
        return a.path->id < b.path->id;
    });
    return out;
}

// Shared tail of both decision paths once the current allocation is out.
Action choose_alternative(const MonitoringSnapshot& snap, const Predictor& model,
                          const Threshold& threshold, std::span<const Plan> plans,
                          std::span<const Path> alternates, const LinkSetup& link,
                          const DecisionOptions& options, const Prediction& current,
                          ActionReason reason) {
    const FiberProfile& fiber = link.fiber(snap.fiber);

    std::vector<Plan> all(plans.begin(), plans.end());
    if (options.greedy_search) {
        if (auto g = greedy_plan(snap, model, threshold, link, options)) all.push_back(std::move(*g));
    }
    const auto ranked = rank_plans(snap, model, all, link, fiber);

    Action a;
    a.current = current;
    a.reason = reason;

    std::vector<const Candidate*> ok;
    for (const auto& c : ranked) {
        if (threshold.satisfied_by(c.prediction)) ok.push_back(&c);
    }
    if (!ok.empty()) {
        a.kind = ActionKind::Reallocate;
        a.plan = ok[0]->plan->name;
        a.channels = ok[0]->channels;
        a.predicted = ok[0]->prediction;
        if (ok.size() > 1) a.backup_plan = ok[1]->plan->name;
        return a;
    }

    for (const auto& p : rank_paths(snap, model, alternates, link)) {
        if (threshold.satisfied_by(p.prediction)) {
            a.kind = ActionKind::SwitchPath;
            a.path = p.path->id;
            a.predicted = p.prediction;
            return a;
        }
    }

    a.warning = true;
    a.reason = reason == ActionReason::SpectrumUnavailable ? reason : ActionReason::NoSatisfyingOption;
    if (!ranked.empty()) {
        a.kind = ActionKind::Reallocate;
        a.plan = ranked[0].plan->name;
        a.channels = ranked[0].channels;
        a.predicted = ranked[0].prediction;
        if (ranked.size() > 1) a.backup_plan = ranked[1].plan->name;
    } else {
        a.kind = ActionKind::Keep;
        a.predicted = current;
    }
    return a;
}

}  // namespace

Action evaluate_and_decide(const MonitoringSnapshot& snapshot, const Predictor& model,
                           const Threshold& threshold, std::span<const Plan> plans,
                           std::span<const Path> alternate_paths, const LinkSetup& link,
                           const DecisionOptions& options) {
    const Prediction current = model.predict(snapshot.observed(link.grid), link.fiber(snapshot.fiber));
    if (threshold.satisfied_by(current)) {
        Action a;
        a.kind = ActionKind::Keep;
        a.reason = ActionReason::ThresholdsMet;
        a.current = current;
        a.predicted = current;
        return a;
    }
    return choose_alternative(snapshot, model, threshold, plans, alternate_paths, link, options,
                              current, ActionReason::ThresholdViolation);
}

Action decide(const MonitoringSnapshot& snapshot, const Predictor& model, const Threshold& threshold,
              std::span<const Plan> plans, std::span<const Path> alternate_paths,
              const LinkSetup& link, const DecisionOptions& options) {
    if (!overlaps(snapshot.channels, snapshot.blocked_channels)) {
        return evaluate_and_decide(snapshot, model, threshold, plans, alternate_paths, link, options);
    }
    const Prediction current = model.predict(snapshot.observed(link.grid), link.fiber(snapshot.fiber));
    return choose_alternative(snapshot, model, threshold, plans, alternate_paths, link, options,
                              current, ActionReason::SpectrumUnavailable);
}

std::optional<Plan> greedy_plan(const MonitoringSnapshot& snapshot, const Predictor& model,
                                const Threshold& threshold, const LinkSetup& link,
                                const DecisionOptions& options) {
    const FiberProfile& fiber = link.fiber(snapshot.fiber);
    const int center = nearest_channel(Thz{link.quantum.center_frequency_thz()}, link.grid);
    auto usable = [&](int idx, const std::vector<int>& taken) {
        if (idx < options.min_channel_index || idx > options.max_channel_index) return false;
        if (std::find(taken.begin(), taken.end(), idx) != taken.end()) return false;
        if (std::find(snapshot.blocked_channels.begin(), snapshot.blocked_channels.end(), idx) !=
            snapshot.blocked_channels.end()) {
            return false;
        }
        return !link.quantum.in_band(channel_to_frequency(idx, link.grid).value);
    };
    auto predict = [&](const std::vector<int>& chans) {
        const auto powers = carry_powers(snapshot.channels, snapshot.nominal_powers_dbm, chans);
        return model.predict(ClassicalChannelSet::from_indices(chans, powers, link.grid), fiber);
    };

    std::vector<int> current = snapshot.channels;
    Prediction best_pred = predict(current);
    bool moved = false;
    for (int step = 0; step < options.greedy_max_moves && !threshold.satisfied_by(best_pred); ++step) {
        std::optional<std::vector<int>> best;
        Prediction best_step = best_pred;
        for (std::size_t i = 0; i < current.size(); ++i) {
            const int dir = current[i] >= center ? 1 : -1;
            int target = current[i] + dir;
            while (target >= options.min_channel_index && target <= options.max_channel_index &&
                   !usable(target, current)) {
                target += dir;
            }
            if (!usable(target, current)) continue;
            std::vector<int> trial = current;
            trial[i] = target;
            std::sort(trial.begin(), trial.end());
            const Prediction p = predict(trial);
            if (better(p, 0, best_step, 1)) {
                best_step = p;
                best = std::move(trial);
            }
        }
        if (!best) break;
        current = std::move(*best);
        best_pred = best_step;
        moved = true;
    }
    if (!moved) return std::nullopt;
    return Plan{"greedy", current};
}

PathChoice select_initial_path(std::span<const PathOption> options, const Predictor& model) {
    if (options.empty()) throw ScenarioError("select_initial_path: no candidate paths");
    PathChoice choice;
    for (const auto& o : options) choice.predictions.push_back(model.predict(o.channels, o.fiber));
    for (std::size_t i = 1; i < options.size(); ++i) {
        const Prediction& a = choice.predictions[i];
        const Prediction& b = choice.predictions[choice.index];
        const bool wins = a.skr != b.skr               ? a.skr > b.skr
                          : a.noise_rate != b.noise_rate ? a.noise_rate < b.noise_rate
                                                         : options[i].id < options[choice.index].id;
        if (wins) choice.index = i;
    }
    choice.id = options[choice.index].id;
    return choice;
}

ScenarioScript ScenarioScript::standard() {
    ScenarioScript s;
    s.paths = {{"lab", "lab", "4"}, {"campus", "campus", "5"}, {"city", "city", "6"}};
    s.initial_channels = {35, 37, 43, 45};
    s.plans = {preset_plan("upper-band"), preset_plan("fragmented")};
    std::vector<int> plan_a_band;
    for (int c = 75; c <= 89; ++c) plan_a_band.push_back(c);
    s.stages = {
        {"initial", {}, {}, ActionKind::Keep, ""},
        {"stage1", {36, 38, 42, 44}, {}, ActionKind::Reallocate, "upper-band"},
        {"stage2", {}, {}, ActionKind::Keep, ""},
        {"stage3", {}, plan_a_band, ActionKind::Reallocate, "fragmented"},
    };
    return s;
}

void ScenarioScript::validate(const LinkSetup& link) const {
    static const std::vector<std::string> kOrder = {"initial", "stage1", "stage2", "stage3"};
    if (stages.empty()) throw ScenarioError("scenario: no stages");
    if (stages.size() > kOrder.size()) throw ScenarioError("scenario: at most 4 stages");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (stages[i].name != kOrder[i]) {
            throw ScenarioError("scenario: stage " + std::to_string(i + 1) + " is '" + stages[i].name +
                                "', expected '" + kOrder[i] + "' (stages run initial, stage1, stage2, stage3)");
        }
    }
    if (paths.empty()) throw ScenarioError("scenario: no paths");
    std::set<std::string> ids;
    for (const auto& p : paths) {
        link.fiber(p.fiber);
        if (!ids.insert(p.id).second) throw ScenarioError("scenario: duplicate path id '" + p.id + "'");
        if (p.out_port.empty()) throw ScenarioError("scenario: path '" + p.id + "' has no out port");
    }
    if (initial_channels.empty()) throw ScenarioError("scenario: no initial channels");
    auto check_indices = [](const std::vector<int>& v, const std::string& what) {
        for (int c : v) {
            if (c < 0) throw ScenarioError("scenario: " + what + " has negative channel index " + std::to_string(c));
        }
        std::vector<int> s(v);
        std::sort(s.begin(), s.end());
        if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
            throw ScenarioError("scenario: " + what + " repeats a channel");
        }
    };
    check_indices(initial_channels, "initial_channels");
    for (const auto& p : plans) {
        if (p.name.empty()) throw ScenarioError("scenario: plan without a name");
        check_indices(p.channels, "plan '" + p.name + "'");
    }
    for (const auto& st : stages) {
        check_indices(st.add_channels, st.name + " add_channels");
        check_indices(st.block_channels, st.name + " block_channels");
    }
    if (!std::isfinite(channel_power_dbm)) throw ScenarioError("scenario: channel power must be finite");
    if (!(monitor_tolerance_db >= 0.0) || !(monitor_ripple_db >= 0.0) ||
        monitor_ripple_db > monitor_tolerance_db) {
        throw ScenarioError("scenario: need 0 <= monitor ripple <= monitor tolerance");
    }
    if (!(thresholds.min_skr_fraction >= 0.0)) throw ScenarioError("scenario: min_skr_fraction must be >= 0");
    Threshold{thresholds.min_skr.value_or(0.0), thresholds.max_qber, thresholds.max_noise_rate}.validate();
    if (!(filter_width_ghz > 0.0)) throw ScenarioError("scenario: filter width must be > 0");
    if (stage_interval_ms < 0) throw ScenarioError("scenario: stage interval must be >= 0");
}

namespace {

Threshold derive_threshold(const ThresholdPolicy& policy, const Prediction& initial) {
    Threshold t;
    t.min_skr = policy.min_skr ? *policy.min_skr : policy.min_skr_fraction * initial.skr;
    t.max_qber = policy.max_qber;
    t.max_noise_rate = policy.max_noise_rate;
    t.validate();
    return t;
}

std::vector<Path> alternates_of(const std::vector<Path>& paths, const std::string& current) {
    std::vector<Path> out;
    for (const auto& p : paths) {
        if (p.id != current) out.push_back(p);
    }
    return out;
}

// Measured power = nominal + uniform ripple, at 0.01 dB resolution.
std::vector<double> measure(const std::vector<double>& nominal, double ripple_db, std::uint64_t seed,
                            std::size_t stage) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stage)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> ripple(-ripple_db, ripple_db);
    std::vector<double> out;
    for (double p : nominal) {
        const double r = ripple_db > 0.0 ? ripple(rng) : 0.0;
        out.push_back(std::round((p + r) * 100.0) / 100.0);
    }
    return out;
}

const Path& find_path(const std::vector<Path>& paths, const std::string& id) {
    for (const auto& p : paths) {
        if (p.id == id) return p;
    }
    throw ScenarioError("unknown path '" + id + "'");
}

json perf_json(const QkdPerformance& p) {
    return {{"raman_rate", p.noise.raman_rate},
            {"fwm_rate", p.noise.fwm_rate},
            {"ase_rate", p.noise.ase_rate},
            {"leakage_rate", p.noise.leakage_rate},
            {"noise_rate", p.noise.total_rate},
            {"dark_count_probability", p.noise.dark_count_probability},
            {"qber", p.qber},
            {"skr", p.skr}};
}

json prediction_json(const Prediction& p) {
    return {{"noise_rate", p.noise_rate}, {"skr", p.skr}, {"qber", p.qber}};
}

Prediction prediction_from_json(const json& j) {
    return {j.at("noise_rate").get<double>(), j.at("skr").get<double>(), j.at("qber").get<double>()};
}

}  // namespace

ScenarioReport run_scenario(const ScenarioScript& script, const LinkSetup& link,
                            const Predictor& model, wire::RecordLog* store) {
    script.validate(link);

    ScenarioReport report;
    std::vector<PathOption> options;
    const std::vector<double> initial_powers(script.initial_channels.size(), script.channel_power_dbm);
    std::vector<int> channels = script.initial_channels;
    std::sort(channels.begin(), channels.end());
    for (const auto& p : script.paths) {
        options.push_back({p.id, link.fiber(p.fiber),
                           ClassicalChannelSet::from_indices(channels, initial_powers, link.grid)});
        report.path_ids.push_back(p.id);
    }
    report.selection = select_initial_path(options, model);
    std::string path_id = report.selection.id;

    std::vector<double> powers = initial_powers;
    std::vector<int> blocked;
    std::uint64_t message_id = 1;

    for (std::size_t i = 0; i < script.stages.size(); ++i) {
        const ScenarioStage& stage = script.stages[i];
        for (int c : stage.add_channels) {
            if (std::find(channels.begin(), channels.end(), c) != channels.end()) {
                throw ScenarioError(stage.name + ": Ch" + std::to_string(c) + " is already allocated");
            }
            const auto pos = std::upper_bound(channels.begin(), channels.end(), c) - channels.begin();
            channels.insert(channels.begin() + pos, c);
            powers.insert(powers.begin() + pos, script.channel_power_dbm);
        }
        for (int c : stage.block_channels) {
            if (std::find(blocked.begin(), blocked.end(), c) == blocked.end()) blocked.push_back(c);
        }
        std::sort(blocked.begin(), blocked.end());

        const Path& path = find_path(script.paths, path_id);
        const FiberProfile& fiber = link.fiber(path.fiber);

        StageRecord rec;
        rec.stage = stage.name;
        rec.path = path_id;
        rec.snapshot.timestamp_ms = script.start_time_ms + static_cast<std::int64_t>(i) * script.stage_interval_ms;
        rec.snapshot.link_id = path_id;
        rec.snapshot.fiber = path.fiber;
        rec.snapshot.channels = channels;
        rec.snapshot.nominal_powers_dbm = powers;
        rec.snapshot.measured_powers_dbm = measure(powers, script.monitor_ripple_db, script.monitor_seed, i);
        rec.snapshot.blocked_channels = blocked;
        rec.snapshot.validate(script.monitor_tolerance_db);
        const ClassicalChannelSet observed = rec.snapshot.observed(link.grid);
        if (const auto v = validate_channel_set(observed, link.quantum); !v.empty()) {
            throw ScenarioError(stage.name + ": " + v.front().detail);
        }

        rec.monitored = evaluate_link(observed, link.quantum, fiber, link.physics);
        rec.predicted = model.predict(observed, fiber);
        if (i == 0) report.threshold = derive_threshold(script.thresholds, rec.predicted);

        if (store) {
            store->append(wire::RecordKind::Snapshot, {{"stage", stage.name}, {"snapshot", to_json(rec.snapshot)}});
            store->append(wire::RecordKind::Prediction, {{"stage", stage.name},
                                                         {"predicted", prediction_json(rec.predicted)},
                                                         {"monitored", perf_json(rec.monitored)}});
        }

        const auto alternates = alternates_of(script.paths, path_id);
        rec.action = decide(rec.snapshot, model, report.threshold, script.plans, alternates, link,
                            script.decision);
        if (store) store->append(wire::RecordKind::Action, {{"stage", stage.name}, {"action", to_json(rec.action)}});

        auto message = [&](const std::string& out_port, int channel) {
            const double nm = frequency_to_wavelength(channel_to_frequency(channel, link.grid)).value;
            return wire::SssConfigMessage::make(message_id++, rec.snapshot.timestamp_ms, script.in_port,
                                                out_port, nm, script.filter_width_ghz);
        };
        if (rec.action.kind == ActionKind::Reallocate) {
            for (const auto& [from, to] : moved_pairs(channels, rec.action.channels)) {
                (void)from;
                rec.messages.push_back(message(path.out_port, to));
            }
            powers = carry_powers(channels, powers, rec.action.channels);
            channels = rec.action.channels;
        } else if (rec.action.kind == ActionKind::SwitchPath) {
            const Path& next = find_path(script.paths, rec.action.path);
            for (int c : channels) rec.messages.push_back(message(next.out_port, c));
            path_id = next.id;
            // Spectrum occupancy is per link; the new link starts clear.
            blocked.clear();
        }
        if (store) {
            for (const auto& m : rec.messages) {
                store->append(wire::RecordKind::Message, {{"stage", stage.name}, {"line", wire::encode(m)}});
            }
        }

        rec.channels_after = channels;
        if (rec.action.kind == ActionKind::Keep) {
            rec.monitored_after = rec.monitored;
            rec.predicted_after = rec.predicted;
        } else {
            const FiberProfile& now = link.fiber(find_path(script.paths, path_id).fiber);
            const auto set = ClassicalChannelSet::from_indices(channels, powers, link.grid);
            rec.monitored_after = evaluate_link(set, link.quantum, now, link.physics);
            rec.predicted_after = model.predict(set, now);
        }
        if (stage.expected_action) {
            rec.matches_expected = rec.action.kind == *stage.expected_action &&
                                   (stage.expected_plan.empty() || rec.action.plan == stage.expected_plan);
        }
        report.stages.push_back(std::move(rec));
    }
    return report;
}

ReplayCheck replay_decisions(std::span<const wire::Record> records, const ScenarioScript& script,
                             const LinkSetup& link, const Predictor& model) {
    ReplayCheck check;
    std::optional<Threshold> threshold;
    for (const auto& r : records) {
        if (r.kind == wire::RecordKind::Action) {
            check.logged.push_back(action_from_json(r.payload.at("action")));
        } else if (r.kind == wire::RecordKind::Snapshot) {
            const MonitoringSnapshot snap = snapshot_from_json(r.payload.at("snapshot"));
            const FiberProfile& fiber = link.fiber(snap.fiber);
            if (!threshold) {
                threshold = derive_threshold(script.thresholds, model.predict(snap.observed(link.grid), fiber));
            }
            const auto alternates = alternates_of(script.paths, snap.link_id);
            check.rederived.push_back(decide(snap, model, *threshold, script.plans, alternates, link,
                                             script.decision));
        }
    }
    return check;
}

bool ScenarioReport::all_expected() const {
    return std::all_of(stages.begin(), stages.end(), [](const StageRecord& s) { return s.matches_expected; });
}

namespace {

std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

}  // namespace

std::string ScenarioReport::to_text() const {
    std::ostringstream os;
    os << std::fixed;
    os << "Path selection (predicted):\n";
    for (std::size_t i = 0; i < path_ids.size(); ++i) {
        const auto& p = selection.predictions[i];
        os << "  " << (i == selection.index ? '*' : ' ') << ' ' << std::left << std::setw(8) << path_ids[i]
           << std::right << " skr=" << std::setprecision(1) << std::setw(8) << p.skr
           << "  noise=" << std::setw(8) << p.noise_rate << "  qber=" << std::setprecision(4) << p.qber
           << '\n';
    }
    os << std::setprecision(1) << "Threshold: skr >= " << threshold.min_skr << " bit/s, qber <= "
       << std::setprecision(3) << threshold.max_qber << ", noise <= " << std::setprecision(1)
       << threshold.max_noise_rate << " ph/s\n\n";

    os << std::left << std::setw(8) << "stage" << std::setw(8) << "path" << std::setw(26) << "channels"
       << std::right << std::setw(10) << "noise_mon" << std::setw(10) << "noise_prd" << std::setw(9)
       << "qber_mon" << std::setw(9) << "qber_prd" << std::setw(9) << "skr_mon" << std::setw(9)
       << "skr_prd" << "  action\n";
    for (const auto& s : stages) {
        os << std::left << std::setw(8) << s.stage << std::setw(8) << s.path << std::setw(26)
           << join(s.snapshot.channels) << std::right << std::setprecision(1) << std::setw(10)
           << s.monitored.noise.total_rate << std::setw(10) << s.predicted.noise_rate
           << std::setprecision(4) << std::setw(9) << s.monitored.qber << std::setw(9) << s.predicted.qber
           << std::setprecision(1) << std::setw(9) << s.monitored.skr << std::setw(9) << s.predicted.skr
           << "  " << to_string(s.action.kind);
        if (!s.action.plan.empty()) os << '(' << s.action.plan << ')';
        if (!s.action.path.empty()) os << '(' << s.action.path << ')';
        os << " [" << to_string(s.action.reason) << ']';
        if (!s.action.backup_plan.empty()) os << " backup=" << s.action.backup_plan;
        if (s.action.warning) os << " WARNING";
        if (!s.matches_expected) os << " UNEXPECTED";
        os << '\n';
        if (s.action.kind != ActionKind::Keep) {
            os << "        -> " << join(s.channels_after) << std::setprecision(1)
               << "  monitored noise=" << s.monitored_after.noise.total_rate
               << " skr=" << s.monitored_after.skr << "  predicted noise=" << s.predicted_after.noise_rate
               << " skr=" << s.predicted_after.skr << "  messages=" << s.messages.size() << '\n';
            for (const auto& m : s.messages) os << "           " << wire::encode(m) << '\n';
        }
    }
    return os.str();
}

json ScenarioReport::to_json() const {
    json stages_json = json::array();
    for (const auto& s : stages) {
        json messages = json::array();
        for (const auto& m : s.messages) messages.push_back(wire::encode(m));
        stages_json.push_back({{"stage", s.stage},
                               {"path", s.path},
                               {"snapshot", controller::to_json(s.snapshot)},
                               {"monitored", perf_json(s.monitored)},
                               {"predicted", prediction_json(s.predicted)},
                               {"delta", {{"noise_rate", s.predicted.noise_rate - s.monitored.noise.total_rate},
                                          {"skr", s.predicted.skr - s.monitored.skr},
                                          {"qber", s.predicted.qber - s.monitored.qber}}},
                               {"action", controller::to_json(s.action)},
                               {"messages", messages},
                               {"channels_after", s.channels_after},
                               {"monitored_after", perf_json(s.monitored_after)},
                               {"predicted_after", prediction_json(s.predicted_after)},
                               {"matches_expected", s.matches_expected}});
    }
    json preds = json::array();
    for (std::size_t i = 0; i < path_ids.size(); ++i) {
        preds.push_back({{"path", path_ids[i]}, {"predicted", prediction_json(selection.predictions[i])}});
    }
    return {{"selected_path", selection.id},
            {"path_predictions", preds},
            {"threshold",
             {{"min_skr", threshold.min_skr}, {"max_qber", threshold.max_qber}, {"max_noise_rate", threshold.max_noise_rate}}},
            {"stages", stages_json},
            {"all_expected", all_expected()}};
}

json to_json(const Action& a) {
    return {{"kind", to_string(a.kind)},
            {"reason", to_string(a.reason)},
            {"plan", a.plan},
            {"channels", a.channels},
            {"path", a.path},
            {"backup_plan", a.backup_plan},
            {"warning", a.warning},
            {"current", prediction_json(a.current)},
            {"predicted", prediction_json(a.predicted)}};
}

Action action_from_json(const json& j) {
    Action a;
    a.kind = parse_action_kind(j.at("kind").get<std::string>());
    a.reason = parse_action_reason(j.at("reason").get<std::string>());
    a.plan = j.at("plan").get<std::string>();
    a.channels = j.at("channels").get<std::vector<int>>();
    a.path = j.at("path").get<std::string>();
    a.backup_plan = j.at("backup_plan").get<std::string>();
    a.warning = j.at("warning").get<bool>();
    a.current = prediction_from_json(j.at("current"));
    a.predicted = prediction_from_json(j.at("predicted"));
    return a;
}

json to_json(const MonitoringSnapshot& s) {
    return {{"timestamp_ms", s.timestamp_ms},
            {"link_id", s.link_id},
            {"fiber", s.fiber},
            {"channels", s.channels},
            {"nominal_powers_dbm", s.nominal_powers_dbm},
            {"measured_powers_dbm", s.measured_powers_dbm},
            {"blocked_channels", s.blocked_channels}};
}

MonitoringSnapshot snapshot_from_json(const json& j) {
    MonitoringSnapshot s;
    s.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
    s.link_id = j.at("link_id").get<std::string>();
    s.fiber = j.at("fiber").get<std::string>();
    s.channels = j.at("channels").get<std::vector<int>>();
    s.nominal_powers_dbm = j.at("nominal_powers_dbm").get<std::vector<double>>();
    s.measured_powers_dbm = j.at("measured_powers_dbm").get<std::vector<double>>();
    s.blocked_channels = j.at("blocked_channels").get<std::vector<int>>();
    return s;
}

json to_json(const ScenarioScript& s) {
    json paths = json::array();
    for (const auto& p : s.paths) paths.push_back({{"id", p.id}, {"fiber", p.fiber}, {"out_port", p.out_port}});
    json plans = json::array();
    for (const auto& p : s.plans) plans.push_back({{"name", p.name}, {"channels", p.channels}});
    json stages = json::array();
    for (const auto& st : s.stages) {
        json e = {{"name", st.name}, {"add_channels", st.add_channels}, {"block_channels", st.block_channels}};
        if (st.expected_action) e["expected_action"] = to_string(*st.expected_action);
        if (!st.expected_plan.empty()) e["expected_plan"] = st.expected_plan;
        stages.push_back(std::move(e));
    }
    json thresholds = {{"min_skr_fraction", s.thresholds.min_skr_fraction},
                       {"max_qber", s.thresholds.max_qber},
                       {"max_noise_rate", s.thresholds.max_noise_rate}};
    if (s.thresholds.min_skr) thresholds["min_skr"] = *s.thresholds.min_skr;
    return {{"paths", paths},
            {"initial_channels", s.initial_channels},
            {"channel_power_dbm", s.channel_power_dbm},
            {"plans", plans},
            {"thresholds", thresholds},
            {"monitor_tolerance_db", s.monitor_tolerance_db},
            {"monitor_ripple_db", s.monitor_ripple_db},
            {"monitor_seed", s.monitor_seed},
            {"in_port", s.in_port},
            {"filter_width_ghz", s.filter_width_ghz},
            {"start_time_ms", s.start_time_ms},
            {"stage_interval_ms", s.stage_interval_ms},
            {"decision",
             {{"greedy_search", s.decision.greedy_search},
              {"greedy_max_moves", s.decision.greedy_max_moves},
              {"min_channel_index", s.decision.min_channel_index},
              {"max_channel_index", s.decision.max_channel_index}}},
            {"stages", stages}};
}

ScenarioScript script_from_json(const json& j) {
    reject_unknown(j,
                   {"paths", "initial_channels", "channel_power_dbm", "plans", "thresholds",
                    "monitor_tolerance_db", "monitor_ripple_db", "monitor_seed", "in_port",
                    "filter_width_ghz", "start_time_ms", "stage_interval_ms", "decision", "stages"},
                   "scenario");
    ScenarioScript s = ScenarioScript::standard();
    try {
        if (j.contains("paths")) {
            s.paths.clear();
            for (const auto& p : j.at("paths")) {
                reject_unknown(p, {"id", "fiber", "out_port"}, "scenario.paths[]");
                s.paths.push_back({p.at("id").get<std::string>(), p.at("fiber").get<std::string>(),
                                   p.at("out_port").get<std::string>()});
            }
        }
        read(j, "initial_channels", s.initial_channels);
        read(j, "channel_power_dbm", s.channel_power_dbm);
        if (j.contains("plans")) {
            s.plans.clear();
            for (const auto& p : j.at("plans")) {
                if (p.is_string()) {
                    s.plans.push_back(preset_plan(p.get<std::string>()));
                } else {
                    reject_unknown(p, {"name", "channels"}, "scenario.plans[]");
                    s.plans.push_back({p.at("name").get<std::string>(), p.at("channels").get<std::vector<int>>()});
                }
            }
        }
        if (j.contains("thresholds")) {
            const json& t = j.at("thresholds");
            reject_unknown(t, {"min_skr", "min_skr_fraction", "max_qber", "max_noise_rate"}, "scenario.thresholds");
            if (t.contains("min_skr")) s.thresholds.min_skr = t.at("min_skr").get<double>();
            read(t, "min_skr_fraction", s.thresholds.min_skr_fraction);
            read(t, "max_qber", s.thresholds.max_qber);
            read(t, "max_noise_rate", s.thresholds.max_noise_rate);
        }
        read(j, "monitor_tolerance_db", s.monitor_tolerance_db);
        read(j, "monitor_ripple_db", s.monitor_ripple_db);
        read(j, "monitor_seed", s.monitor_seed);
        read(j, "in_port", s.in_port);
        read(j, "filter_width_ghz", s.filter_width_ghz);
        read(j, "start_time_ms", s.start_time_ms);
        read(j, "stage_interval_ms", s.stage_interval_ms);
        if (j.contains("decision")) {
            const json& d = j.at("decision");
            reject_unknown(d, {"greedy_search", "greedy_max_moves", "min_channel_index", "max_channel_index"},
                           "scenario.decision");
            read(d, "greedy_search", s.decision.greedy_search);
            read(d, "greedy_max_moves", s.decision.greedy_max_moves);
            read(d, "min_channel_index", s.decision.min_channel_index);
            read(d, "max_channel_index", s.decision.max_channel_index);
        }
        if (j.contains("stages")) {
            s.stages.clear();
            for (const auto& st : j.at("stages")) {
                reject_unknown(st, {"name", "add_channels", "block_channels", "expected_action", "expected_plan"},
                               "scenario.stages[]");
                ScenarioStage stage;
                stage.name = st.at("name").get<std::string>();
                read(st, "add_channels", stage.add_channels);
                read(st, "block_channels", stage.block_channels);
                if (st.contains("expected_action")) {
                    stage.expected_action = parse_action_kind(st.at("expected_action").get<std::string>());
                }
                read(st, "expected_plan", stage.expected_plan);
                s.stages.push_back(std::move(stage));
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    return s;
}

}  // namespace qkdcoex::controller
