#include "qkdcoex/config.hpp"

#include <fstream>

#include "json_util.hpp"

namespace qkdcoex {

using nlohmann::json;
using detail::read;
using detail::reject_unknown;

std::array<ml::ModelSpec, ml::kAllModelKinds.size()> AppConfig::default_models() {
    std::array<ml::ModelSpec, ml::kAllModelKinds.size()> out;
    for (auto k : ml::kAllModelKinds) out[static_cast<std::size_t>(k)] = ml::ModelSpec::defaults(k);
    return out;
}

ml::ModelSpec AppConfig::model_spec(ml::ModelKind kind) const {
    ml::ModelSpec s = models[static_cast<std::size_t>(kind)];
    s.bootstrap_seed = bootstrap_seed.value_or(seed);
    return s;
}

ml::ModelSpec& AppConfig::model(ml::ModelKind kind) { return models[static_cast<std::size_t>(kind)]; }

void AppConfig::validate() const {
    link.validate();
    campaign.validate(link.grid);
    for (auto k : ml::kAllModelKinds) {
        try {
            model_spec(k).validate();
        } catch (const ml::ModelError& e) {
            throw ConfigError(std::string("models.") + std::string(ml::to_string(k)) + ": " + e.what());
        }
    }
    scenario.validate(link);
}

namespace {

json detector_json(const DetectorModel& d) {
    return {{"detection_efficiency", d.detection_efficiency},
            {"intrinsic_dark_count_probability", d.intrinsic_dark_count_probability},
            {"gate_rate_hz", d.gate_rate_hz},
            {"detector_error_rate", d.detector_error_rate}};
}

void read_detector(const json& j, DetectorModel& d) {
    reject_unknown(j, {"detection_efficiency", "intrinsic_dark_count_probability", "gate_rate_hz",
                       "detector_error_rate"},
                   "link.quantum.detector");
    read(j, "detection_efficiency", d.detection_efficiency);
    read(j, "intrinsic_dark_count_probability", d.intrinsic_dark_count_probability);
    read(j, "gate_rate_hz", d.gate_rate_hz);
    read(j, "detector_error_rate", d.detector_error_rate);
}

json fiber_json(const FiberProfile& f) {
    return {{"name", f.name},
            {"length_km", f.length_km},
            {"end_to_end_loss_db", f.end_to_end_loss_db},
            {"raman_coefficient", f.raman_coefficient},
            {"fwm_efficiency", f.fwm_efficiency}};
}

FiberProfile read_fiber(const json& j) {
    reject_unknown(j, {"name", "length_km", "end_to_end_loss_db", "raman_coefficient", "fwm_efficiency"},
                   "link.fibers[]");
    FiberProfile f;
    f.name = j.at("name").get<std::string>();
    read(j, "length_km", f.length_km);
    read(j, "end_to_end_loss_db", f.end_to_end_loss_db);
    read(j, "raman_coefficient", f.raman_coefficient);
    read(j, "fwm_efficiency", f.fwm_efficiency);
    return f;
}

json link_json(const LinkSetup& l) {
    json fibers = json::array();
    for (const auto& f : l.fibers) fibers.push_back(fiber_json(f));
    return {{"grid", {{"anchor_thz", l.grid.anchor_thz()}, {"spacing_ghz", l.grid.spacing_ghz()}}},
            {"quantum",
             {{"center_wavelength_nm", l.quantum.center_wavelength_nm},
              {"filter_bandwidth_ghz", l.quantum.filter_bandwidth_ghz},
              {"detector", detector_json(l.quantum.detector)}}},
            {"physics",
             {{"mean_photon_number", l.physics.mean_photon_number},
              {"sift_factor", l.physics.sift_factor},
              {"ase_floor_per_channel", l.physics.ase_floor_per_channel},
              {"leakage_fraction", l.physics.leakage_fraction},
              {"leakage_decay_ghz", l.physics.leakage_decay_ghz},
              {"label_jitter_sigma", l.physics.label_jitter_sigma}}},
            {"fibers", fibers}};
}

void read_link(const json& j, LinkSetup& l) {
    reject_unknown(j, {"grid", "quantum", "physics", "fibers"}, "link");
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        reject_unknown(g, {"anchor_thz", "spacing_ghz"}, "link.grid");
        double anchor = l.grid.anchor_thz();
        double spacing = l.grid.spacing_ghz();
        read(g, "anchor_thz", anchor);
        read(g, "spacing_ghz", spacing);
        l.grid = GridSpec(anchor, spacing);
    }
    if (j.contains("quantum")) {
        const json& q = j.at("quantum");
        reject_unknown(q, {"center_wavelength_nm", "filter_bandwidth_ghz", "detector"}, "link.quantum");
        read(q, "center_wavelength_nm", l.quantum.center_wavelength_nm);
        read(q, "filter_bandwidth_ghz", l.quantum.filter_bandwidth_ghz);
        if (q.contains("detector")) read_detector(q.at("detector"), l.quantum.detector);
    }
    if (j.contains("physics")) {
        const json& p = j.at("physics");
        reject_unknown(p, {"mean_photon_number", "sift_factor", "ase_floor_per_channel", "leakage_fraction",
                           "leakage_decay_ghz", "label_jitter_sigma"},
                       "link.physics");
        read(p, "mean_photon_number", l.physics.mean_photon_number);
        read(p, "sift_factor", l.physics.sift_factor);
        read(p, "ase_floor_per_channel", l.physics.ase_floor_per_channel);
        read(p, "leakage_fraction", l.physics.leakage_fraction);
        read(p, "leakage_decay_ghz", l.physics.leakage_decay_ghz);
        read(p, "label_jitter_sigma", l.physics.label_jitter_sigma);
    }
    if (j.contains("fibers")) {
        l.fibers.clear();
        for (const auto& f : j.at("fibers")) l.fibers.push_back(read_fiber(f));
    }
}

json campaign_json(const CampaignConfig& c) {
    return {{"n_values", c.n_values},
            {"spacings_ghz", c.spacings_ghz},
            {"straddle_gaps", c.straddle_gaps},
            {"block_starts", c.block_starts},
            {"single_offsets", c.single_offsets},
            {"scatter_variants", c.scatter_variants},
            {"power_tilts_db", c.power_tilts_db},
            {"tp_min_dbm", c.tp_min_dbm},
            {"tp_max_dbm", c.tp_max_dbm},
            {"tp_step_db", c.tp_step_db},
            {"min_channel_index", c.min_channel_index},
            {"max_channel_index", c.max_channel_index},
            {"configurations_per_stratum", c.configurations_per_stratum},
            {"set_count", c.set_count},
            {"training_size", c.training_size},
            {"validation_size", c.validation_size},
            {"features",
             {{"max_distance_ghz", c.features.max_distance_ghz}, {"power_floor_dbm", c.features.power_floor_dbm}}}};
}

void read_campaign(const json& j, CampaignConfig& c) {
    reject_unknown(j, {"n_values", "spacings_ghz", "straddle_gaps", "block_starts", "single_offsets",
                       "scatter_variants", "power_tilts_db", "tp_min_dbm", "tp_max_dbm", "tp_step_db",
                       "min_channel_index", "max_channel_index", "configurations_per_stratum", "set_count",
                       "training_size", "validation_size", "features"},
                   "campaign");
    read(j, "n_values", c.n_values);
    read(j, "spacings_ghz", c.spacings_ghz);
    read(j, "straddle_gaps", c.straddle_gaps);
    read(j, "block_starts", c.block_starts);
    read(j, "single_offsets", c.single_offsets);
    read(j, "scatter_variants", c.scatter_variants);
    read(j, "power_tilts_db", c.power_tilts_db);
    read(j, "tp_min_dbm", c.tp_min_dbm);
    read(j, "tp_max_dbm", c.tp_max_dbm);
    read(j, "tp_step_db", c.tp_step_db);
    read(j, "min_channel_index", c.min_channel_index);
    read(j, "max_channel_index", c.max_channel_index);
    read(j, "configurations_per_stratum", c.configurations_per_stratum);
    read(j, "set_count", c.set_count);
    read(j, "training_size", c.training_size);
    read(j, "validation_size", c.validation_size);
    if (j.contains("features")) {
        const json& f = j.at("features");
        reject_unknown(f, {"max_distance_ghz", "power_floor_dbm"}, "campaign.features");
        read(f, "max_distance_ghz", c.features.max_distance_ghz);
        read(f, "power_floor_dbm", c.features.power_floor_dbm);
    }
}

json model_json(const ml::ModelSpec& s) {
    switch (s.kind) {
        case ml::ModelKind::KNeighbors: return {{"k", s.k}};
        case ml::ModelKind::Lasso:
        case ml::ModelKind::Ridge: return {{"lambda", s.lambda}};
        case ml::ModelKind::RandomForest:
            return {{"trees", s.trees},
                    {"max_depth", s.max_depth},
                    {"features_per_split", s.features_per_split},
                    {"min_samples_leaf", s.min_samples_leaf}};
        case ml::ModelKind::LeastSquares: break;
    }
    return json::object();
}

void read_model(const json& j, ml::ModelSpec& s) {
    const std::string where = "models." + std::string(ml::to_string(s.kind));
    switch (s.kind) {
        case ml::ModelKind::KNeighbors:
            reject_unknown(j, {"k"}, where);
            read(j, "k", s.k);
            break;
        case ml::ModelKind::Lasso:
        case ml::ModelKind::Ridge:
            reject_unknown(j, {"lambda"}, where);
            read(j, "lambda", s.lambda);
            break;
        case ml::ModelKind::RandomForest:
            reject_unknown(j, {"trees", "max_depth", "features_per_split", "min_samples_leaf"}, where);
            read(j, "trees", s.trees);
            read(j, "max_depth", s.max_depth);
            read(j, "features_per_split", s.features_per_split);
            read(j, "min_samples_leaf", s.min_samples_leaf);
            break;
        case ml::ModelKind::LeastSquares:
            reject_unknown(j, {}, where);
            break;
    }
}

}  // namespace

AppConfig config_from_json(const json& j) {
    reject_unknown(j, {"seed", "bootstrap_seed", "link", "campaign", "models", "scenario_model", "scenario"},
                   "config");
    AppConfig c;
    try {
        read(j, "seed", c.seed);
        if (j.contains("bootstrap_seed")) c.bootstrap_seed = j.at("bootstrap_seed").get<std::uint64_t>();
        if (j.contains("link")) read_link(j.at("link"), c.link);
        if (j.contains("campaign")) read_campaign(j.at("campaign"), c.campaign);
        if (j.contains("models")) {
            const json& m = j.at("models");
            if (!m.is_object()) throw ConfigError("models: expected an object");
            for (const auto& [label, spec] : m.items()) {
                ml::ModelKind kind;
                try {
                    kind = ml::parse_model_kind(label);
                } catch (const DataError&) {
                    throw ConfigError("models: unknown model '" + label + "'");
                }
                read_model(spec, c.model(kind));
            }
        }
        if (j.contains("scenario_model")) {
            try {
                c.scenario_model = ml::parse_model_kind(j.at("scenario_model").get<std::string>());
            } catch (const DataError& e) {
                throw ConfigError(std::string("scenario_model: ") + e.what());
            }
        }
        if (j.contains("scenario")) c.scenario = controller::script_from_json(j.at("scenario"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

json to_json(const AppConfig& c) {
    json models = json::object();
    for (auto k : ml::kAllModelKinds) models[std::string(ml::to_string(k))] = model_json(c.model_spec(k));
    json out = {{"seed", c.seed},
                {"link", link_json(c.link)},
                {"campaign", campaign_json(c.campaign)},
                {"models", models},
                {"scenario_model", ml::to_string(c.scenario_model)},
                {"scenario", controller::to_json(c.scenario)}};
    if (c.bootstrap_seed) out["bootstrap_seed"] = *c.bootstrap_seed;
    return out;
}

AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    AppConfig c = config_from_json(j);
    c.validate();
    return c;
}

}  // namespace qkdcoex
