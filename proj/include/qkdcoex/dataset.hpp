#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "qkdcoex/grid.hpp"
#include "qkdcoex/physics.hpp"

namespace qkdcoex {

inline constexpr std::size_t kFeatureCount = 7;
inline constexpr std::size_t kTargetCount = 3;

using FeatureVector = std::array<double, kFeatureCount>;
using TargetVector = std::array<double, kTargetCount>;

// Column names, in feature-vector order. Also the CSV header.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "n_channels",                // count of classical channels
    "mean_channel_power_dbm",    // arithmetic mean of per-channel dBm values
    "total_power_dbm",           // linear-domain sum, in dBm
    "min_spacing_ghz",           // smallest gap between any two classical channels
    "min_quantum_distance_ghz",  // smallest |f_c - f_q|
    "inband_fwm_count",          // mixing products inside the quantum filter
    "fiber_loss_db",             // end-to-end link loss
};

enum class Target : std::size_t { Noise = 0, Skr = 1, Qber = 2 };

inline constexpr std::array<std::string_view, kTargetCount> kTargetNames = {"noise_rate", "skr",
                                                                            "qber"};
inline constexpr std::array<Target, kTargetCount> kAllTargets = {Target::Noise, Target::Skr,
                                                                 Target::Qber};

std::string_view to_string(Target t);
Target parse_target(std::string_view name);

struct FeatureOptions {
    double max_distance_ghz = 5000.0;  // sentinel for undefined spacing/distance
    double power_floor_dbm = -60.0;    // replaces -inf powers

    bool operator==(const FeatureOptions&) const = default;
};

FeatureVector featurize(const ClassicalChannelSet& set, const QuantumChannelSpec& q,
                        const FiberProfile& fiber, const FeatureOptions& options = {});

struct Instance {
    std::size_t id = 0;
    FeatureVector features{};
    TargetVector targets{};  // indexed by Target
    ClassicalChannelSet channels;
    std::string fiber;
    std::uint64_t seed = 0;
    std::string combination;  // human-readable key of the sweep point

    double target(Target t) const { return targets[static_cast<std::size_t>(t)]; }
    bool operator==(const Instance&) const = default;
};

using InstanceSet = std::vector<Instance>;

struct DatasetBundle {
    std::uint64_t seed = 0;
    std::vector<InstanceSet> training;
    std::vector<InstanceSet> validation;

    std::size_t set_count() const { return training.size(); }
    // Every training instance across all sets, in set order.
    InstanceSet all_training() const;

    bool operator==(const DatasetBundle&) const = default;
};

// Sweep definition for the synthetic data-collection campaign. Channel
// placements are expressed in grid steps relative to the grid channel nearest
// the quantum channel.
struct CampaignConfig {
    std::vector<int> n_values = {1, 4, 8};
    std::vector<double> spacings_ghz = {50.0, 100.0, 150.0, 200.0};
    std::vector<int> straddle_gaps = {1, 2, 3};
    std::vector<int> block_starts = {2, 5, 10, 20, 35};
    std::vector<int> single_offsets = {1, 2, 3, 4, 6, 8, 12, 16, 24, 32};
    int scatter_variants = 6;
    std::vector<double> power_tilts_db = {0.0, 2.0, -2.0};
    double tp_min_dbm = -26.0;
    double tp_max_dbm = -15.0;
    // Sweep points alternate between training and validation, so validation
    // only sees total powers absent from training.
    double tp_step_db = 0.5;
    int min_channel_index = 11;
    int max_channel_index = 97;
    // Placement/tilt configurations each set draws from every fiber x n stratum.
    int configurations_per_stratum = 3;
    int set_count = 5;
    int training_size = 164;
    int validation_size = 43;
    FeatureOptions features;

    void validate(const GridSpec& grid) const;
};

DatasetBundle generate_campaign(const CampaignConfig& config, const LinkSetup& link,
                                std::uint64_t seed);

// Writes `<prefix>.csv` and `<prefix>.channels.json`.
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& prefix);
DatasetBundle load_bundle(const std::filesystem::path& prefix);

std::filesystem::path bundle_table_path(const std::filesystem::path& prefix);
std::filesystem::path bundle_channels_path(const std::filesystem::path& prefix);

}  // namespace qkdcoex
