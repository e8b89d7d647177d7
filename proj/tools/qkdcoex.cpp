// Command-line driver: gen-data, train, eval, scenario, report.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qkdcoex/config.hpp"
#include "qkdcoex/controller.hpp"
#include "qkdcoex/dataset.hpp"
#include "qkdcoex/ml.hpp"
#include "qkdcoex/wire.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qkdcoex;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

// Bad flag values; reported with the usage exit code.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Files are written under temporary names and renamed once the whole
// subcommand has succeeded; on failure the temporaries are removed and any
// earlier outputs stay untouched.
class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}
    Outputs(const Outputs&) = delete;
    Outputs& operator=(const Outputs&) = delete;

    ~Outputs() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& [tmp, final] : files_) fs::remove(tmp, ec);
    }

    void prepare() {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec || !fs::is_directory(dir_)) {
            throw DataError("cannot create output directory '" + dir_.string() + "'");
        }
    }

    fs::path file(const std::string& name) {
        fs::path tmp = dir_ / ("." + name + ".partial");
        fs::remove(tmp);
        files_.emplace_back(tmp, dir_ / name);
        return tmp;
    }

    void add(const fs::path& tmp, const std::string& name) { files_.emplace_back(tmp, dir_ / name); }

    std::vector<fs::path> commit() {
        std::vector<fs::path> out;
        for (const auto& [tmp, final] : files_) {
            fs::rename(tmp, final);
            out.push_back(final);
        }
        committed_ = true;
        return out;
    }

private:
    fs::path dir_;
    std::vector<std::pair<fs::path, fs::path>> files_;
    bool committed_ = false;
};

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string model;
    std::optional<int> k;
    std::optional<double> lambda;
    std::optional<int> trees;
    std::optional<double> threshold_skr;
    std::optional<double> threshold_qber;
    std::vector<std::string> plans;
    std::string data;
    std::string models_dir;
    std::string log;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    out << text;
    if (!out.flush()) throw DataError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::optional<ml::ModelKind> selected_model(const Options& o) {
    if (o.model.empty()) return std::nullopt;
    try {
        return ml::parse_model_kind(o.model);
    } catch (const DataError& e) {
        throw UsageError(e.what());
    }
}

controller::Plan parse_plan(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
        try {
            return controller::preset_plan(text);
        } catch (const ConfigError& e) {
            throw UsageError(std::string("--plan: ") + e.what());
        }
    }
    controller::Plan plan{text.substr(0, eq), {}};
    std::stringstream ss(text.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            plan.channels.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("--plan: bad channel index '" + item + "' in '" + text + "'");
        }
    }
    if (plan.name.empty() || plan.channels.empty()) {
        throw UsageError("--plan: expected a preset name or NAME=CH,CH,...");
    }
    return plan;
}

AppConfig build_config(const Options& o) {
    AppConfig c = o.config_path.empty() ? AppConfig{} : load_config(o.config_path);
    if (o.config_path.empty()) c.validate();

    try {
        if (o.seed) c.seed = *o.seed;
        const auto only = selected_model(o);
        if (o.k) c.model(ml::ModelKind::KNeighbors).k = *o.k;
        if (o.trees) c.model(ml::ModelKind::RandomForest).trees = *o.trees;
        if (o.lambda) {
            // Without --model the penalty applies to both penalised models.
            if (!only || *only == ml::ModelKind::Lasso) c.model(ml::ModelKind::Lasso).lambda = *o.lambda;
            if (!only || *only == ml::ModelKind::Ridge) c.model(ml::ModelKind::Ridge).lambda = *o.lambda;
        }
        if (o.threshold_skr) c.scenario.thresholds.min_skr = *o.threshold_skr;
        if (o.threshold_qber) c.scenario.thresholds.max_qber = *o.threshold_qber;
        if (!o.plans.empty()) {
            c.scenario.plans.clear();
            for (const auto& p : o.plans) c.scenario.plans.push_back(parse_plan(p));
            // Expectations name the default plans; drop them with a custom list.
            for (auto& st : c.scenario.stages) {
                st.expected_action.reset();
                st.expected_plan.clear();
            }
        }
        c.validate();
    } catch (const UsageError&) {
        throw;
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    return c;
}

json echo(const std::string& subcommand, const Options& o, const AppConfig& c) {
    json inputs = json::object();
    if (!o.config_path.empty()) inputs["config"] = o.config_path;
    if (!o.data.empty()) inputs["data"] = o.data;
    if (!o.models_dir.empty()) inputs["models"] = o.models_dir;
    if (!o.log.empty()) inputs["log"] = o.log;
    if (!o.model.empty()) inputs["model"] = o.model;
    return {{"subcommand", subcommand}, {"inputs", inputs}, {"config", to_json(c)}};
}

fs::path dataset_prefix(const std::string& dir) { return fs::path(dir) / "dataset"; }

std::string model_file_name(ml::ModelKind kind) { return "model-" + std::string(ml::to_string(kind)) + ".json"; }

void require_input(const std::string& value, const char* flag) {
    if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

void print_written(const std::vector<fs::path>& files) {
    for (const auto& f : files) std::cerr << "wrote " << f.string() << '\n';
}

int run_gen_data(const Options& o) {
    const AppConfig c = build_config(o);
    Outputs out(o.out);
    out.prepare();
    const DatasetBundle bundle = generate_campaign(c.campaign, c.link, c.seed);
    const fs::path tmp = fs::path(o.out) / ".dataset.partial";
    out.add(bundle_table_path(tmp), bundle_table_path("dataset").string());
    out.add(bundle_channels_path(tmp), bundle_channels_path("dataset").string());
    save_bundle(bundle, tmp);
    write_json(out.file("gen-data.config.json"), echo("gen-data", o, c));
    print_written(out.commit());
    return kExitOk;
}

int run_train(const Options& o) {
    require_input(o.data, "--data");
    const AppConfig c = build_config(o);
    const DatasetBundle bundle = load_bundle(dataset_prefix(o.data));
    const InstanceSet rows = bundle.all_training();
    Outputs out(o.out);
    out.prepare();
    std::vector<ml::ModelKind> kinds(ml::kAllModelKinds.begin(), ml::kAllModelKinds.end());
    if (const auto only = selected_model(o)) kinds = {*only};
    for (auto kind : kinds) {
        ml::save_models(ml::fit_targets(c.model_spec(kind), rows), out.file(model_file_name(kind)));
    }
    write_json(out.file("train.config.json"), echo("train", o, c));
    print_written(out.commit());
    return kExitOk;
}

int run_eval(const Options& o) {
    require_input(o.data, "--data");
    const AppConfig c = build_config(o);
    const DatasetBundle bundle = load_bundle(dataset_prefix(o.data));
    std::vector<ml::ModelSpec> specs;
    if (const auto only = selected_model(o)) {
        specs.push_back(c.model_spec(*only));
    } else {
        for (auto k : ml::kAllModelKinds) specs.push_back(c.model_spec(k));
    }
    const ml::ComparisonTable table = ml::compare_models(bundle, specs);
    Outputs out(o.out);
    out.prepare();
    write_text(out.file("eval.txt"), table.to_text());
    write_text(out.file("eval.csv"), table.to_csv());
    write_json(out.file("eval.config.json"), echo("eval", o, c));
    std::cout << table.to_text();
    print_written(out.commit());
    return kExitOk;
}

controller::ModelPredictor scenario_predictor(const Options& o, const AppConfig& c) {
    const ml::ModelKind kind = selected_model(o).value_or(c.scenario_model);
    if (!o.models_dir.empty()) {
        return controller::ModelPredictor(ml::load_models(fs::path(o.models_dir) / model_file_name(kind)),
                                          c.link.quantum, c.campaign.features);
    }
    if (!o.data.empty()) {
        const DatasetBundle bundle = load_bundle(dataset_prefix(o.data));
        return controller::ModelPredictor(ml::fit_targets(c.model_spec(kind), bundle.all_training()),
                                          c.link.quantum, c.campaign.features);
    }
    throw UsageError("scenario needs --models DIR (trained models) or --data DIR (dataset to train on)");
}

int run_scenario(const Options& o) {
    const AppConfig c = build_config(o);
    const controller::ModelPredictor predictor = scenario_predictor(o, c);
    Outputs out(o.out);
    out.prepare();
    controller::ScenarioReport report;
    {
        wire::RecordLog log(out.file("records.log"));
        report = controller::run_scenario(c.scenario, c.link, predictor, &log);
    }
    const std::string text = report.to_text();
    write_text(out.file("scenario.txt"), text);
    write_json(out.file("scenario.json"), report.to_json());
    write_json(out.file("scenario.config.json"), echo("scenario", o, c));
    std::cout << text;
    if (!report.all_expected()) std::cout << "note: some stages did not match their expected action\n";
    print_written(out.commit());
    return kExitOk;
}

std::string summarize_log(const wire::ReplayResult& log) {
    std::ostringstream os;
    std::map<wire::RecordKind, int> counts;
    std::string stage;
    for (const auto& r : log.records) {
        ++counts[r.kind];
        const std::string s = r.payload.value("stage", "");
        if (s != stage) {
            stage = s;
            os << "== " << stage << '\n';
        }
        switch (r.kind) {
            case wire::RecordKind::Snapshot: {
                const auto snap = controller::snapshot_from_json(r.payload.at("snapshot"));
                os << "  #" << r.seq << " snapshot t=" << snap.timestamp_ms << "ms link=" << snap.link_id
                   << " channels=" << json(snap.channels).dump();
                if (!snap.blocked_channels.empty()) os << " blocked=" << json(snap.blocked_channels).dump();
                os << '\n';
                break;
            }
            case wire::RecordKind::Prediction: {
                const json& p = r.payload.at("predicted");
                const json& m = r.payload.at("monitored");
                os << "  #" << r.seq << " predicted noise=" << p.at("noise_rate").get<double>()
                   << " skr=" << p.at("skr").get<double>() << " qber=" << p.at("qber").get<double>()
                   << " | monitored noise=" << m.at("noise_rate").get<double>()
                   << " skr=" << m.at("skr").get<double>() << " qber=" << m.at("qber").get<double>() << '\n';
                break;
            }
            case wire::RecordKind::Action: {
                const auto a = controller::action_from_json(r.payload.at("action"));
                os << "  #" << r.seq << " action " << controller::to_string(a.kind);
                if (!a.plan.empty()) os << " plan=" << a.plan;
                if (!a.path.empty()) os << " path=" << a.path;
                os << " reason=" << controller::to_string(a.reason);
                if (!a.backup_plan.empty()) os << " backup=" << a.backup_plan;
                if (a.warning) os << " WARNING";
                os << '\n';
                break;
            }
            case wire::RecordKind::Message: {
                const auto m = wire::decode(r.payload.at("line").get<std::string>());
                os << "  #" << r.seq << " message " << wire::encode(m) << '\n';
                break;
            }
        }
    }
    os << "records: " << log.records.size() << " (snapshot " << counts[wire::RecordKind::Snapshot]
       << ", prediction " << counts[wire::RecordKind::Prediction] << ", action "
       << counts[wire::RecordKind::Action] << ", message " << counts[wire::RecordKind::Message] << ")\n";
    for (const auto& w : log.warnings) os << "warning: " << w << '\n';
    return os.str();
}

int run_report(const Options& o) {
    require_input(o.log, "--log");
    const AppConfig c = build_config(o);
    if (!fs::exists(o.log)) throw DataError("log '" + o.log + "' does not exist");
    const wire::ReplayResult log = wire::replay(o.log);
    std::string text = summarize_log(log);
    bool mismatch = false;
    if (!o.models_dir.empty() || !o.data.empty()) {
        const auto predictor = scenario_predictor(o, c);
        const auto check = controller::replay_decisions(log.records, c.scenario, c.link, predictor);
        mismatch = !check.identical();
        text += mismatch ? "replay: re-derived actions DIFFER from the log\n"
                         : "replay: " + std::to_string(check.rederived.size()) + " actions re-derived identically\n";
    }
    Outputs out(o.out);
    out.prepare();
    write_text(out.file("report.txt"), text);
    write_json(out.file("report.config.json"), echo("report", o, c));
    std::cout << text;
    if (mismatch) throw DataError("replayed decisions do not match the log");
    print_written(out.commit());
    return kExitOk;
}

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Campaign and RF bootstrap seed (default 42)");
    sub->add_option("--out", o.out, "Output directory")->required();
}

void add_model_flags(CLI::App* sub, Options& o) {
    sub->add_option("--model", o.model, "Model kind: RF, LS, KN, Lasso, Ridge");
    sub->add_option("--k", o.k, "KN neighbour count");
    sub->add_option("--lambda", o.lambda, "Lasso/Ridge penalty");
    sub->add_option("--trees", o.trees, "RF tree count");
}

void add_scenario_flags(CLI::App* sub, Options& o) {
    sub->add_option("--models", o.models_dir, "Directory with trained model-<KIND>.json files");
    sub->add_option("--data", o.data, "Dataset directory; the scenario model is trained on it");
    sub->add_option("--threshold-skr", o.threshold_skr, "Absolute minimum SKR in bit/s");
    sub->add_option("--threshold-qber", o.threshold_qber, "Maximum QBER");
    sub->add_option("--plan", o.plans, "Reallocation plan: preset name or NAME=CH,CH,... (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"QKD/classical coexistence: dataset generation, regressors and SDN scenario"};
    app.require_subcommand(1);
    Options o;

    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic measurement campaign");
    add_common(gen, o);

    auto* train = app.add_subcommand("train", "Fit models on all training sets");
    add_common(train, o);
    add_model_flags(train, o);
    train->add_option("--data", o.data, "Dataset directory (from gen-data)")->required();

    auto* eval = app.add_subcommand("eval", "Validation MSE table per model and target");
    add_common(eval, o);
    add_model_flags(eval, o);
    eval->add_option("--data", o.data, "Dataset directory (from gen-data)")->required();

    auto* scen = app.add_subcommand("scenario", "Run the staged reallocation scenario");
    add_common(scen, o);
    add_model_flags(scen, o);
    add_scenario_flags(scen, o);

    auto* report = app.add_subcommand("report", "Summarize a scenario record log");
    add_common(report, o);
    add_model_flags(report, o);
    report->add_option("--log", o.log, "records.log from a scenario run")->required();
    report->add_option("--models", o.models_dir, "Re-derive decisions with these trained models");
    report->add_option("--data", o.data, "Re-derive decisions with a model trained on this dataset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen) return run_gen_data(o);
        if (*train) return run_train(o);
        if (*eval) return run_eval(o);
        if (*scen) return run_scenario(o);
        if (*report) return run_report(o);
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}
