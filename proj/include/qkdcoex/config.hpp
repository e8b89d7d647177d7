#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "qkdcoex/controller.hpp"
#include "qkdcoex/dataset.hpp"
#include "qkdcoex/ml.hpp"
#include "qkdcoex/physics.hpp"

namespace qkdcoex {

// Every tunable of the pipeline. Missing keys keep their defaults; unknown
// keys are rejected.
struct AppConfig {
    std::uint64_t seed = 42;
    LinkSetup link;
    CampaignConfig campaign;
    std::array<ml::ModelSpec, ml::kAllModelKinds.size()> models = default_models();
    // RF bootstrap seed; follows `seed` unless set.
    std::optional<std::uint64_t> bootstrap_seed;
    ml::ModelKind scenario_model = ml::ModelKind::RandomForest;
    controller::ScenarioScript scenario = controller::ScenarioScript::standard();

    static std::array<ml::ModelSpec, ml::kAllModelKinds.size()> default_models();

    // Spec for `kind` with the effective bootstrap seed filled in.
    ml::ModelSpec model_spec(ml::ModelKind kind) const;
    ml::ModelSpec& model(ml::ModelKind kind);

    // Throws ConfigError (or the module's own error) on the first bad value.
    void validate() const;
};

AppConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AppConfig& config);

// Reads and validates a JSON config file.
AppConfig load_config(const std::filesystem::path& path);

}  // namespace qkdcoex
