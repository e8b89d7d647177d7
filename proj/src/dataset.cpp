#include "qkdcoex/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "parallel.hpp"
#include "qkdcoex/error.hpp"

namespace qkdcoex {

using nlohmann::json;

std::string_view to_string(Target t) { return kTargetNames[static_cast<std::size_t>(t)]; }

Target parse_target(std::string_view name) {
    for (std::size_t i = 0; i < kTargetCount; ++i) {
        if (kTargetNames[i] == name) return static_cast<Target>(i);
    }
    throw DataError("unknown target '" + std::string(name) + "'");
}

FeatureVector featurize(const ClassicalChannelSet& set, const QuantumChannelSpec& q,
                        const FiberProfile& fiber, const FeatureOptions& options) {
    FeatureVector v{};
    const std::size_t n = set.size();
    v[0] = static_cast<double>(n);
    v[6] = fiber.end_to_end_loss_db;
    if (n == 0) {
        v[1] = v[2] = options.power_floor_dbm;
        v[3] = v[4] = options.max_distance_ghz;
        v[5] = 0.0;
        return v;
    }

    // Aggregates run over sorted copies so reordering the input cannot change
    // the floating-point summation order.
    std::vector<double> powers = set.powers_dbm();
    std::sort(powers.begin(), powers.end());
    double sum = 0.0;
    for (double p : powers) sum += p;
    v[1] = std::max(options.power_floor_dbm, sum / static_cast<double>(n));
    v[2] = std::max(options.power_floor_dbm, total_power_dbm(powers));

    std::vector<double> f = set.frequencies_thz();
    std::sort(f.begin(), f.end());
    double min_spacing = options.max_distance_ghz;
    for (std::size_t i = 1; i < n; ++i) min_spacing = std::min(min_spacing, (f[i] - f[i - 1]) * 1e3);
    v[3] = min_spacing;

    const double fq = q.center_frequency_thz();
    double min_distance = options.max_distance_ghz;
    for (double fc : f) min_distance = std::min(min_distance, std::abs(fc - fq) * 1e3);
    v[4] = min_distance;

    v[5] = static_cast<double>(count_inband_fwm_products(set, q));
    return v;
}

InstanceSet DatasetBundle::all_training() const {
    InstanceSet out;
    for (const auto& s : training) out.insert(out.end(), s.begin(), s.end());
    return out;
}

void CampaignConfig::validate(const GridSpec& grid) const {
    if (n_values.empty()) throw ConfigError("dataset: n_values must not be empty");
    for (int n : n_values) {
        if (n < 1) throw ConfigError("dataset: n_values entries must be >= 1");
    }
    for (double s : spacings_ghz) {
        const double steps = s / grid.spacing_ghz();
        if (!(s > 0.0) || std::abs(steps - std::round(steps)) > 1e-9) {
            throw ConfigError("dataset: spacing " + std::to_string(s) +
                              " GHz is not a multiple of the grid spacing");
        }
    }
    if (!(tp_step_db > 0.0) || !(tp_min_dbm <= tp_max_dbm)) {
        throw ConfigError("dataset: total-power sweep needs tp_min <= tp_max and tp_step > 0");
    }
    if (min_channel_index < 0 || max_channel_index < min_channel_index) {
        throw ConfigError("dataset: invalid channel index range");
    }
    if (set_count < 1 || training_size < 1 || validation_size < 1) {
        throw ConfigError("dataset: set_count, training_size and validation_size must be >= 1");
    }
    if (scatter_variants < 0) throw ConfigError("dataset: scatter_variants must be >= 0");
    if (configurations_per_stratum < 1) {
        throw ConfigError("dataset: configurations_per_stratum must be >= 1");
    }
}

namespace {

struct Placement {
    std::string key;
    std::vector<int> indices;
};

struct Combination {
    const FiberProfile* fiber = nullptr;
    std::string key;
    std::vector<int> indices;
    double tilt_db = 0.0;
    double tp_dbm = 0.0;
};

std::string fmt_signed(double v) {
    std::ostringstream os;
    os << std::showpos << std::fixed << std::setprecision(1) << v;
    return os.str();
}

class PlacementBuilder {
public:
    PlacementBuilder(const CampaignConfig& cfg, const LinkSetup& link, std::uint64_t seed)
        : cfg_(cfg), link_(link), seed_(seed) {
        center_ = nearest_channel(Thz{link.quantum.center_frequency_thz()}, link.grid);
    }

    std::vector<Placement> build(int n) const {
        std::vector<Placement> raw;
        if (n == 1) {
            for (int d : cfg_.single_offsets) {
                raw.push_back({"single-o-" + std::to_string(d), {center_ - d}});
                raw.push_back({"single-o+" + std::to_string(d), {center_ + d}});
            }
        } else {
            for (double s_ghz : cfg_.spacings_ghz) {
                const int s = steps(s_ghz);
                const std::string tag = "s" + std::to_string(static_cast<int>(s_ghz));
                for (int g : cfg_.straddle_gaps) {
                    std::vector<int> idx;
                    for (int m = 0; m < n / 2; ++m) idx.push_back(center_ - g - s * m);
                    for (int m = 0; m < n - n / 2; ++m) idx.push_back(center_ + g + s * m);
                    raw.push_back({"straddle-" + tag + "-g" + std::to_string(g), idx});
                }
                for (int side : {+1, -1}) {
                    for (int start : cfg_.block_starts) {
                        std::vector<int> idx;
                        for (int m = 0; m < n; ++m) idx.push_back(center_ + side * (start + s * m));
                        raw.push_back({std::string("block-") + (side > 0 ? "up" : "down") + "-" +
                                           tag + "-o" + std::to_string(start),
                                       idx});
                    }
                }
            }
            for (int v = 0; v < cfg_.scatter_variants; ++v) {
                raw.push_back({"scatter-v" + std::to_string(v), scatter(n, v)});
            }
        }

        std::vector<Placement> out;
        std::set<std::vector<int>> seen;
        for (auto& p : raw) {
            std::sort(p.indices.begin(), p.indices.end());
            if (!usable(p.indices)) continue;
            if (!seen.insert(p.indices).second) continue;
            out.push_back(std::move(p));
        }
        return out;
    }

private:
    int steps(double ghz) const {
        return static_cast<int>(std::lround(ghz / link_.grid.spacing_ghz()));
    }

    bool allowed(int idx) const {
        if (idx < cfg_.min_channel_index || idx > cfg_.max_channel_index) return false;
        return !link_.quantum.in_band(channel_to_frequency(idx, link_.grid).value);
    }

    bool usable(const std::vector<int>& sorted_idx) const {
        if (sorted_idx.empty()) return false;
        if (std::adjacent_find(sorted_idx.begin(), sorted_idx.end()) != sorted_idx.end()) {
            return false;
        }
        return std::all_of(sorted_idx.begin(), sorted_idx.end(),
                           [&](int i) { return allowed(i); });
    }

    std::vector<int> scatter(int n, int variant) const {
        std::vector<int> candidates;
        for (int i = cfg_.min_channel_index; i <= cfg_.max_channel_index; ++i) {
            if (allowed(i)) candidates.push_back(i);
        }
        std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                          static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(variant)};
        std::mt19937_64 rng(seq);
        std::shuffle(candidates.begin(), candidates.end(), rng);
        candidates.resize(std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(n)));
        return candidates;
    }

    const CampaignConfig& cfg_;
    const LinkSetup& link_;
    std::uint64_t seed_;
    int center_ = 0;
};

// Linear tilt across the band, shifted so the channels sum to `tp_dbm`.
std::vector<double> channel_powers(std::size_t n, double tilt_db, double tp_dbm) {
    std::vector<double> p(n, 0.0);
    if (n > 1) {
        for (std::size_t m = 0; m < n; ++m) {
            p[m] = tilt_db * (static_cast<double>(m) / static_cast<double>(n - 1) - 0.5);
        }
    }
    const double shift = tp_dbm - total_power_dbm(p);
    for (double& x : p) x += shift;
    return p;
}

std::vector<int> quotas(int total, std::size_t strata, int set_index) {
    const int t = static_cast<int>(strata);
    const int base = total / t;
    const int rem = total % t;
    std::vector<int> q(strata, base);
    for (int i = 0; i < t; ++i) {
        if ((i + set_index * rem) % t < rem) ++q[i];
    }
    return q;
}

void apply_jitter(Instance& inst, double sigma, std::uint64_t seed) {
    if (sigma <= 0.0) return;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(inst.id), 0x6a177e5u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> z(0.0, sigma);
    for (double& t : inst.targets) t = std::max(0.0, t * (1.0 + z(rng)));
    auto& qber = inst.targets[static_cast<std::size_t>(Target::Qber)];
    qber = std::min(qber, 0.5);
}

}  // namespace

DatasetBundle generate_campaign(const CampaignConfig& cfg, const LinkSetup& link,
                                std::uint64_t seed) {
    link.validate();
    cfg.validate(link.grid);

    std::vector<double> train_tps, val_tps;
    const int tp_points =
        static_cast<int>(std::floor((cfg.tp_max_dbm - cfg.tp_min_dbm) / cfg.tp_step_db + 1e-9)) + 1;
    for (int i = 0; i < tp_points; ++i) {
        (i % 2 == 0 ? train_tps : val_tps).push_back(cfg.tp_min_dbm + i * cfg.tp_step_db);
    }

    const PlacementBuilder builder(cfg, link, seed);
    std::mt19937_64 rng(seed);

    // A configuration is a placement with a power tilt. Every set owns a few
    // configurations per stratum and sees them at the training TP points;
    // its validation rows revisit the same configurations at the held-out TP
    // points.
    struct Configuration {
        std::vector<Combination> train, val;
    };
    std::vector<std::vector<Configuration>> strata;
    for (const auto& fiber : link.fibers) {
        for (int n : cfg.n_values) {
            std::vector<Configuration> configs;
            const std::vector<double> tilts =
                n == 1 ? std::vector<double>{0.0} : cfg.power_tilts_db;
            for (const auto& pl : builder.build(n)) {
                for (double tilt : tilts) {
                    Configuration conf;
                    for (int split = 0; split < 2; ++split) {
                        for (double tp : split == 0 ? train_tps : val_tps) {
                            Combination c;
                            c.fiber = &fiber;
                            c.indices = pl.indices;
                            c.tilt_db = tilt;
                            c.tp_dbm = tp;
                            c.key = fiber.name + "/n" + std::to_string(n) + "/" + pl.key +
                                    "/tilt" + fmt_signed(tilt) + "/tp" + fmt_signed(tp);
                            (split == 0 ? conf.train : conf.val).push_back(std::move(c));
                        }
                    }
                    configs.push_back(std::move(conf));
                }
            }
            std::shuffle(configs.begin(), configs.end(), rng);
            strata.push_back(std::move(configs));
        }
    }

    const auto per_set = static_cast<std::size_t>(cfg.configurations_per_stratum);
    std::vector<std::vector<const Combination*>> train_sets(cfg.set_count), val_sets(cfg.set_count);
    for (int s = 0; s < cfg.set_count; ++s) {
        const auto tq = quotas(cfg.training_size, strata.size(), s);
        const auto vq = quotas(cfg.validation_size, strata.size(), s);
        for (std::size_t t = 0; t < strata.size(); ++t) {
            const std::size_t first = static_cast<std::size_t>(s) * per_set;
            if (first + per_set > strata[t].size()) {
                throw ConfigError("dataset: sweep yields too few distinct configurations (need " +
                                  std::to_string(per_set) + " per stratum for each of " +
                                  std::to_string(cfg.set_count) + " disjoint sets)");
            }
            std::vector<const Combination*> train_pool, val_pool;
            for (std::size_t c = first; c < first + per_set; ++c) {
                for (const auto& comb : strata[t][c].train) train_pool.push_back(&comb);
                for (const auto& comb : strata[t][c].val) val_pool.push_back(&comb);
            }
            auto take = [&](std::vector<const Combination*>& pool, int want,
                            std::vector<const Combination*>& dst, const char* what) {
                if (static_cast<std::size_t>(want) > pool.size()) {
                    throw ConfigError(std::string("dataset: sweep yields too few distinct ") + what +
                                      " combinations (need " +
                                      std::to_string(cfg.training_size + cfg.validation_size) +
                                      " per set across " + std::to_string(cfg.set_count) +
                                      " disjoint sets)");
                }
                std::shuffle(pool.begin(), pool.end(), rng);
                dst.insert(dst.end(), pool.begin(), pool.begin() + want);
            };
            take(train_pool, tq[t], train_sets[s], "training");
            take(val_pool, vq[t], val_sets[s], "validation");
        }
    }

    std::vector<const Combination*> flat;
    for (const auto& s : train_sets) flat.insert(flat.end(), s.begin(), s.end());
    for (const auto& s : val_sets) flat.insert(flat.end(), s.begin(), s.end());

    std::vector<Instance> instances(flat.size());
    detail::parallel_for(flat.size(), [&](std::size_t i) {
        const Combination& c = *flat[i];
        Instance inst;
        inst.id = i;
        inst.fiber = c.fiber->name;
        inst.seed = seed;
        inst.combination = c.key;
        const auto powers = channel_powers(c.indices.size(), c.tilt_db, c.tp_dbm);
        inst.channels = ClassicalChannelSet::from_indices(c.indices, powers, link.grid);
        inst.features = featurize(inst.channels, link.quantum, *c.fiber, cfg.features);
        const QkdPerformance perf = evaluate_link(inst.channels, link.quantum, *c.fiber, link.physics);
        inst.targets = {perf.noise.total_rate, perf.skr, perf.qber};
        apply_jitter(inst, link.physics.label_jitter_sigma, seed);
        instances[i] = std::move(inst);
    });

    DatasetBundle bundle;
    bundle.seed = seed;
    std::size_t next = 0;
    auto slice = [&](std::size_t count) {
        InstanceSet out(std::make_move_iterator(instances.begin() + next),
                        std::make_move_iterator(instances.begin() + next + count));
        next += count;
        return out;
    };
    for (const auto& s : train_sets) bundle.training.push_back(slice(s.size()));
    for (const auto& s : val_sets) bundle.validation.push_back(slice(s.size()));
    return bundle;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr int kBundleFormatVersion = 1;
constexpr std::array<std::string_view, 6> kBookkeepingColumns = {"id",   "split", "set",
                                                                  "fiber", "seed", "combination"};

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

double parse_double(const std::string& s, std::size_t row, std::string_view column) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError(row, "malformed number '" + s + "' in column '" + std::string(column) + "'");
    }
    return v;
}

std::uint64_t parse_uint(const std::string& s, std::size_t row, std::string_view column) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError(row, "malformed integer '" + s + "' in column '" + std::string(column) + "'");
    }
    return v;
}

}  // namespace

std::filesystem::path bundle_table_path(const std::filesystem::path& prefix) {
    return std::filesystem::path(prefix.string() + ".csv");
}

std::filesystem::path bundle_channels_path(const std::filesystem::path& prefix) {
    return std::filesystem::path(prefix.string() + ".channels.json");
}

void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& prefix) {
    std::ofstream table(bundle_table_path(prefix), std::ios::trunc);
    if (!table) throw DataError("cannot write " + bundle_table_path(prefix).string());

    bool first = true;
    auto col = [&](std::string_view name) {
        if (!first) table << ',';
        table << name;
        first = false;
    };
    for (auto c : kBookkeepingColumns) col(c);
    for (auto c : kFeatureNames) col(c);
    for (auto c : kTargetNames) col(c);
    table << '\n';

    json channels = json::array();
    auto emit = [&](const InstanceSet& set, std::string_view split, std::size_t set_index) {
        for (const auto& inst : set) {
            table << inst.id << ',' << split << ',' << set_index << ',' << inst.fiber << ','
                  << inst.seed << ',' << inst.combination;
            for (double v : inst.features) table << ',' << format_double(v);
            for (double v : inst.targets) table << ',' << format_double(v);
            table << '\n';
            channels.push_back({{"id", inst.id},
                                {"frequencies_thz", inst.channels.frequencies_thz()},
                                {"powers_dbm", inst.channels.powers_dbm()}});
        }
    };
    for (std::size_t s = 0; s < bundle.training.size(); ++s) emit(bundle.training[s], "training", s);
    for (std::size_t s = 0; s < bundle.validation.size(); ++s) {
        emit(bundle.validation[s], "validation", s);
    }
    if (!table.flush()) throw DataError("write failed: " + bundle_table_path(prefix).string());

    json doc = {{"format_version", kBundleFormatVersion},
                {"seed", bundle.seed},
                {"set_count", bundle.set_count()},
                {"instances", std::move(channels)}};
    std::ofstream js(bundle_channels_path(prefix), std::ios::trunc);
    if (!js) throw DataError("cannot write " + bundle_channels_path(prefix).string());
    js << doc.dump(1) << '\n';
    if (!js.flush()) throw DataError("write failed: " + bundle_channels_path(prefix).string());
}

DatasetBundle load_bundle(const std::filesystem::path& prefix) {
    const auto table_path = bundle_table_path(prefix);
    std::ifstream table(table_path);
    if (!table) throw DataError("cannot open " + table_path.string());

    std::string line;
    if (!std::getline(table, line)) throw ParseError(1, "missing header row");
    const auto header = split_csv(line);
    std::map<std::string, std::size_t, std::less<>> column;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!column.emplace(header[i], i).second) {
            throw ParseError(1, "duplicate column '" + header[i] + "'");
        }
    }
    auto require = [&](std::string_view name) {
        auto it = column.find(name);
        if (it == column.end()) throw ParseError(1, "missing column '" + std::string(name) + "'");
        return it->second;
    };
    std::array<std::size_t, kBookkeepingColumns.size()> book{};
    std::array<std::size_t, kFeatureCount> feat{};
    std::array<std::size_t, kTargetCount> targ{};
    for (std::size_t i = 0; i < book.size(); ++i) book[i] = require(kBookkeepingColumns[i]);
    for (std::size_t i = 0; i < kFeatureCount; ++i) feat[i] = require(kFeatureNames[i]);
    for (std::size_t i = 0; i < kTargetCount; ++i) targ[i] = require(kTargetNames[i]);
    if (header.size() != book.size() + kFeatureCount + kTargetCount) {
        throw ParseError(1, "unexpected extra columns in header");
    }

    struct Row {
        Instance inst;
        bool training = true;
        std::size_t set = 0;
        std::size_t row = 0;
    };
    std::vector<Row> rows;
    std::size_t row_no = 1;
    while (std::getline(table, line)) {
        ++row_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size()) {
            throw ParseError(row_no, "expected " + std::to_string(header.size()) + " cells, found " +
                                         std::to_string(cells.size()));
        }
        Row r;
        r.row = row_no;
        r.inst.id = parse_uint(cells[book[0]], row_no, "id");
        const std::string& split = cells[book[1]];
        if (split != "training" && split != "validation") {
            throw ParseError(row_no, "split must be 'training' or 'validation', got '" + split + "'");
        }
        r.training = split == "training";
        r.set = parse_uint(cells[book[2]], row_no, "set");
        r.inst.fiber = cells[book[3]];
        r.inst.seed = parse_uint(cells[book[4]], row_no, "seed");
        r.inst.combination = cells[book[5]];
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            r.inst.features[i] = parse_double(cells[feat[i]], row_no, kFeatureNames[i]);
        }
        for (std::size_t i = 0; i < kTargetCount; ++i) {
            r.inst.targets[i] = parse_double(cells[targ[i]], row_no, kTargetNames[i]);
        }
        rows.push_back(std::move(r));
    }

    const auto channels_path = bundle_channels_path(prefix);
    std::ifstream js(channels_path);
    if (!js) throw DataError("cannot open " + channels_path.string());
    json doc;
    try {
        doc = json::parse(js);
    } catch (const json::exception& e) {
        throw DataError(channels_path.string() + ": " + e.what());
    }

    DatasetBundle bundle;
    std::map<std::size_t, ClassicalChannelSet> sets_by_id;
    try {
        if (doc.at("format_version").get<int>() != kBundleFormatVersion) {
            throw DataError(channels_path.string() + ": unsupported format_version");
        }
        bundle.seed = doc.at("seed").get<std::uint64_t>();
        const auto set_count = doc.at("set_count").get<std::size_t>();
        bundle.training.resize(set_count);
        bundle.validation.resize(set_count);
        for (const auto& e : doc.at("instances")) {
            sets_by_id[e.at("id").get<std::size_t>()] =
                ClassicalChannelSet(e.at("frequencies_thz").get<std::vector<double>>(),
                                    e.at("powers_dbm").get<std::vector<double>>());
        }
    } catch (const json::exception& e) {
        throw DataError(channels_path.string() + ": " + e.what());
    }

    for (auto& r : rows) {
        auto it = sets_by_id.find(r.inst.id);
        if (it == sets_by_id.end()) {
            throw ParseError(r.row, "instance " + std::to_string(r.inst.id) +
                                         " has no channel set in " + channels_path.string());
        }
        r.inst.channels = it->second;
        if (r.set >= bundle.set_count()) {
            throw ParseError(r.row, "set index " + std::to_string(r.set) + " out of range");
        }
        (r.training ? bundle.training : bundle.validation)[r.set].push_back(std::move(r.inst));
    }
    return bundle;
}

}  // namespace qkdcoex
