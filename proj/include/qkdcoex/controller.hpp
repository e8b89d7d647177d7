#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qkdcoex/dataset.hpp"
#include "qkdcoex/error.hpp"
#include "qkdcoex/ml.hpp"
#include "qkdcoex/physics.hpp"
#include "qkdcoex/wire.hpp"

namespace qkdcoex::controller {

class ScenarioError : public DataError {
public:
    using DataError::DataError;
};

struct Prediction {
    double noise_rate = 0.0;
    double skr = 0.0;
    double qber = 0.0;

    bool operator==(const Prediction&) const = default;
};

Prediction to_prediction(const QkdPerformance& perf);

class Predictor {
public:
    virtual ~Predictor() = default;
    virtual Prediction predict(const ClassicalChannelSet& set, const FiberProfile& fiber) const = 0;
};

// Fitted regressors behind the predictor interface. Outputs are clamped to
// the physical range (rates >= 0, QBER in [0, 0.5]).
class ModelPredictor final : public Predictor {
public:
    ModelPredictor(ml::TargetModels models, QuantumChannelSpec quantum,
                   FeatureOptions features = {});
    Prediction predict(const ClassicalChannelSet& set, const FiberProfile& fiber) const override;

    const ml::TargetModels& models() const { return models_; }

private:
    ml::TargetModels models_;
    QuantumChannelSpec quantum_;
    FeatureOptions features_;
};

// Ground truth used as a predictor; handy for calibration and tests.
class OraclePredictor final : public Predictor {
public:
    OraclePredictor(QuantumChannelSpec quantum, PhysicsConstants constants);
    Prediction predict(const ClassicalChannelSet& set, const FiberProfile& fiber) const override;

private:
    QuantumChannelSpec quantum_;
    PhysicsConstants constants_;
};

struct Threshold {
    double min_skr = 0.0;
    double max_qber = 0.06;
    double max_noise_rate = 500.0;

    void validate() const;
    bool satisfied_by(const Prediction& p) const;

    bool operator==(const Threshold&) const = default;
};

struct Plan {
    std::string name;
    std::vector<int> channels;  // grid indices

    bool operator==(const Plan&) const = default;
};

// "upper-band" (Ch75..89 odd), "upper-band-ch70" (same with Ch70 in place of Ch79) and
// "fragmented" (Ch11..59, for a fragmented spectrum).
std::vector<Plan> preset_plans();
Plan preset_plan(std::string_view name);

struct Path {
    std::string id;
    std::string fiber;
    std::string out_port;

    bool operator==(const Path&) const = default;
};

struct MonitoringSnapshot {
    std::int64_t timestamp_ms = 0;
    std::string link_id;
    std::string fiber;
    std::vector<int> channels;  // sorted grid indices
    std::vector<double> nominal_powers_dbm;
    std::vector<double> measured_powers_dbm;
    std::vector<int> blocked_channels;  // occupied by other traffic on this link

    // Channel set with the measured powers.
    ClassicalChannelSet observed(const GridSpec& grid) const;
    // Throws ScenarioError on inconsistent sizes, unsorted channels or a
    // measured power further than `tolerance_db` from nominal.
    void validate(double tolerance_db) const;

    bool operator==(const MonitoringSnapshot&) const = default;
};

enum class ActionKind { Keep, Reallocate, SwitchPath };
enum class ActionReason { ThresholdsMet, ThresholdViolation, SpectrumUnavailable, NoSatisfyingOption };

std::string_view to_string(ActionKind kind);
std::string_view to_string(ActionReason reason);

struct Action {
    ActionKind kind = ActionKind::Keep;
    ActionReason reason = ActionReason::ThresholdsMet;
    std::string plan;            // Reallocate only
    std::vector<int> channels;   // Reallocate only: new allocation
    std::string path;            // SwitchPath only
    std::string backup_plan;     // runner-up satisfying plan, if any
    bool warning = false;        // no option met the threshold
    Prediction current;          // prediction for the allocation in the snapshot
    Prediction predicted;        // prediction for the chosen option

    bool operator==(const Action&) const = default;
};

struct DecisionOptions {
    bool greedy_search = false;  // adds a searched plan to the candidates
    int greedy_max_moves = 16;
    int min_channel_index = 11;
    int max_channel_index = 97;

    bool operator==(const DecisionOptions&) const = default;
};

// Keep iff the current prediction satisfies all threshold clauses. Otherwise
// the satisfying plan with the highest predicted SKR (ties: lower noise, then
// list order), else the satisfying alternate path with the highest SKR, else
// the best plan overall flagged with a warning. Plans of the wrong size, that
// overlap blocked channels, or that fail channel-set validation are skipped.
Action evaluate_and_decide(const MonitoringSnapshot& snapshot, const Predictor& model,
                           const Threshold& threshold, std::span<const Plan> plans,
                           std::span<const Path> alternate_paths, const LinkSetup& link,
                           const DecisionOptions& options = {});

// Moves the channel whose outward shift most improves predicted SKR, one grid
// step chain at a time, until the threshold holds or no move helps. Returns
// nothing if no move was made.
std::optional<Plan> greedy_plan(const MonitoringSnapshot& snapshot, const Predictor& model,
                                const Threshold& threshold, const LinkSetup& link,
                                const DecisionOptions& options);

// Full controller step: when the current allocation collides with blocked
// spectrum the best available plan is forced (reason SpectrumUnavailable);
// otherwise this is evaluate_and_decide.
Action decide(const MonitoringSnapshot& snapshot, const Predictor& model, const Threshold& threshold,
              std::span<const Plan> plans, std::span<const Path> alternate_paths,
              const LinkSetup& link, const DecisionOptions& options = {});

struct PathOption {
    std::string id;
    FiberProfile fiber;
    ClassicalChannelSet channels;
};

struct PathChoice {
    std::size_t index = 0;
    std::string id;
    std::vector<Prediction> predictions;  // one per option
};

// Highest predicted SKR; ties by lower predicted noise, then lower id.
PathChoice select_initial_path(std::span<const PathOption> options, const Predictor& model);

struct ScenarioStage {
    std::string name;
    std::vector<int> add_channels;
    std::vector<int> block_channels;
    std::optional<ActionKind> expected_action;
    std::string expected_plan;

    bool operator==(const ScenarioStage&) const = default;
};

struct ThresholdPolicy {
    std::optional<double> min_skr;   // absolute; overrides the fraction
    double min_skr_fraction = 0.5;   // of the initial predicted SKR
    double max_qber = 0.06;
    double max_noise_rate = 500.0;

    bool operator==(const ThresholdPolicy&) const = default;
};

struct ScenarioScript {
    std::vector<Path> paths;
    std::vector<int> initial_channels;
    double channel_power_dbm = -25.0;
    std::vector<Plan> plans;
    ThresholdPolicy thresholds;
    double monitor_tolerance_db = 0.5;
    double monitor_ripple_db = 0.1;
    std::uint64_t monitor_seed = 42;
    std::string in_port = "A";
    double filter_width_ghz = 38.0;
    std::int64_t start_time_ms = 0;
    std::int64_t stage_interval_ms = 60'000;
    DecisionOptions decision;
    std::vector<ScenarioStage> stages;

    // Three paths, four initial channels, four channels added at stage 1,
    // plan A then plan B after the plan-A band is taken at stage 3.
    static ScenarioScript standard();
    // Stage names must run initial, stage1, stage2, stage3 in order (a prefix
    // is allowed). Throws ScenarioError.
    void validate(const LinkSetup& link) const;

    bool operator==(const ScenarioScript&) const = default;
};

struct StageRecord {
    std::string stage;
    std::string path;
    MonitoringSnapshot snapshot;
    QkdPerformance monitored;
    Prediction predicted;
    Action action;
    std::vector<wire::SssConfigMessage> messages;
    std::vector<int> channels_after;
    QkdPerformance monitored_after;  // equals `monitored` when nothing moved
    Prediction predicted_after;
    bool matches_expected = true;
};

struct ScenarioReport {
    PathChoice selection;
    std::vector<std::string> path_ids;
    Threshold threshold;
    std::vector<StageRecord> stages;

    bool all_expected() const;
    std::string to_text() const;
    nlohmann::json to_json() const;
};

// Runs the script against the physics oracle. When `store` is given every
// snapshot, prediction, action and message is appended to it.
ScenarioReport run_scenario(const ScenarioScript& script, const LinkSetup& link,
                            const Predictor& model, wire::RecordLog* store = nullptr);

struct ReplayCheck {
    std::vector<Action> logged;
    std::vector<Action> rederived;
    bool identical() const { return logged == rederived; }
};

// Re-derives every decision from the snapshots in a record log.
ReplayCheck replay_decisions(std::span<const wire::Record> records, const ScenarioScript& script,
                             const LinkSetup& link, const Predictor& model);

nlohmann::json to_json(const Action& a);
Action action_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MonitoringSnapshot& s);
MonitoringSnapshot snapshot_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioScript& s);
ScenarioScript script_from_json(const nlohmann::json& j);

}  // namespace qkdcoex::controller
