#include "sud/commands.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sud/io.hpp"
#include "sud/report.hpp"

namespace sud {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const MissingArtifact*>(&e)) return kExitMissingLog;
    if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
    if (dynamic_cast<const IoError*>(&e)) return kExitIo;
    if (dynamic_cast<const TrainingDiverged*>(&e)) return kExitDiverged;
    return kExitFailure;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    if (seed) j["seed"] = *seed;
    if (dataset_dir)
        j["dataset_dir"] = dataset_dir->generic_string();
    else
        j["dataset"] = sud::to_json(dataset);
    j["train"] = sud::to_json(train);
    nlohmann::json names = nlohmann::json::array();
    for (Strategy s : strategies) names.push_back(to_string(s));
    j["strategies"] = names;
    return j;
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j, const fs::path& base_dir,
                                         std::optional<std::uint64_t> seed_override) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    static const std::vector<std::string> known = {"seed", "dataset", "dataset_dir", "train",
                                                   "strategies"};
    for (const auto& [key, value] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("config: unknown key '" + key + "'");
    if (j.contains("dataset") && j.contains("dataset_dir"))
        throw ConfigError("config: give either 'dataset' or 'dataset_dir', not both");

    ExperimentConfig c;
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned())
            throw ConfigError("config: 'seed' must be a non-negative integer");
        c.seed = j.at("seed").get<std::uint64_t>();
    }
    if (seed_override) c.seed = seed_override;

    if (j.contains("dataset")) c.dataset = dataset_spec_from_json(j.at("dataset"));
    if (j.contains("dataset_dir")) {
        if (!j.at("dataset_dir").is_string())
            throw ConfigError("config: 'dataset_dir' must be a string");
        fs::path dir = j.at("dataset_dir").get<std::string>();
        c.dataset_dir = dir.is_absolute() ? dir : base_dir / dir;
    }
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));

    if (j.contains("strategies")) {
        const auto& s = j.at("strategies");
        if (!s.is_array() || s.empty())
            throw ConfigError("config: 'strategies' must be a non-empty array of names");
        for (const auto& name : s) {
            if (!name.is_string()) throw ConfigError("config: strategy names must be strings");
            const Strategy st = strategy_from_string(name.get<std::string>());
            if (std::find(c.strategies.begin(), c.strategies.end(), st) != c.strategies.end())
                throw ConfigError("config: duplicate strategy '" + name.get<std::string>() + "'");
            c.strategies.push_back(st);
        }
    } else {
        c.strategies = {Strategy::None, Strategy::GlobalProbCE, Strategy::GlobalLossCE,
                        Strategy::MinibatchProbCE};
    }

    if (c.seed) {
        c.dataset.seed = *c.seed;
        c.train.seed = *c.seed;
    }
    return c;
}

namespace {

struct Loaded {
    ExperimentConfig config;
    std::string config_path;
};

Loaded load(const CommandOptions& opts) {
    Loaded l;
    nlohmann::json j = nlohmann::json::object();
    fs::path base = fs::current_path();
    if (opts.config) {
        l.config_path = opts.config->generic_string();
        j = read_json(*opts.config);
        base = opts.config->parent_path();
    }
    l.config = parse_experiment_config(j, base, opts.seed);
    return l;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

fs::path write_manifest(const fs::path& out, const std::string& command,
                        const std::string& config_path, const nlohmann::json& snapshot,
                        std::optional<std::uint64_t> seed, std::vector<fs::path> files) {
    std::sort(files.begin(), files.end());
    nlohmann::json artifacts = nlohmann::json::array();
    for (const auto& f : files) {
        const std::string bytes = read_text(f);
        artifacts.push_back({{"path", f.lexically_relative(out).generic_string()},
                             {"bytes", bytes.size()},
                             {"sha256", sha256_hex(bytes)}});
    }
    nlohmann::json m = {{"command", command},
                        {"config_path", config_path},
                        {"config", snapshot},
                        {"seed", seed ? nlohmann::json(*seed) : nlohmann::json(nullptr)},
                        {"output_dir", out.generic_string()},
                        {"artifacts", artifacts}};
    const fs::path path = out / "manifest.json";
    write_text(path, dump_json(m));
    return path;
}

std::string describe(const char* name, const Dataset& d) {
    std::ostringstream s;
    s << name << ": " << d.size() << " samples (" << d.count(Provenance::Clean) << " clean, "
      << d.count(Provenance::CloseNoise) << " close, " << d.count(Provenance::OpenNoise)
      << " open)\n";
    return s.str();
}

DatasetBundle obtain_data(const ExperimentConfig& c) {
    return c.dataset_dir ? read_bundle(*c.dataset_dir) : generate(c.dataset);
}

// Writes one run's artifacts into `dir`; returns the files written.
std::vector<fs::path> write_run(const fs::path& dir, const TrainResult& r, bool per_sample_log) {
    ensure_dir(dir);
    std::vector<fs::path> files = {dir / "epochs.csv", dir / "summary.json", dir / "best_model.json"};
    write_text(files[0], epochs_csv(r));
    write_text(files[1], dump_json(summary_json(r)));
    write_text(files[2], dump_json(checkpoint_to_json(r.best_model, r.config.seed, r.best_epoch)));
    if (per_sample_log) {
        files.push_back(dir / "selection.csv");
        write_text(files.back(), selection_csv(r));
    }
    return files;
}

TrainResult train_or_checkpoint(const DatasetBundle& data, const TrainConfig& cfg,
                                const fs::path& dir) {
    try {
        return run_training(data, cfg);
    } catch (const RunDiverged& e) {
        ensure_dir(dir);
        write_text(dir / "best_model.json",
                   dump_json(checkpoint_to_json(e.last_good(), cfg.seed, e.epoch())));
        throw;
    }
}

std::string describe_run(const TrainResult& r) {
    std::ostringstream s;
    s << to_string(r.config.strategy) << ": best epoch " << r.best_epoch << ", val "
      << format_number(r.best_val_acc) << ", test " << format_number(r.best_test_acc) << '\n';
    return s.str();
}

}  // namespace

CommandOutput cmd_generate(const CommandOptions& opts) {
    const Loaded l = load(opts);
    if (l.config.dataset_dir) throw ConfigError("generate: needs a 'dataset' section, not 'dataset_dir'");
    const DatasetBundle b = generate(l.config.dataset);
    ensure_dir(opts.out);
    const auto files = write_bundle(opts.out, b);
    nlohmann::json snapshot = {{"dataset", to_json(b.spec)}};
    CommandOutput o;
    o.manifest = write_manifest(opts.out, "generate", l.config_path, snapshot, b.spec.seed, files);
    o.summary = describe("train", b.train) + describe("validation", b.validation) +
                describe("test", b.test);
    return o;
}

CommandOutput cmd_train(const CommandOptions& opts) {
    const Loaded l = load(opts);
    const DatasetBundle data = obtain_data(l.config);
    const TrainResult r = train_or_checkpoint(data, l.config.train, opts.out);
    const auto files = write_run(opts.out, r, opts.per_sample_log);
    nlohmann::json snapshot = l.config.to_json();
    snapshot.erase("strategies");
    CommandOutput o;
    o.manifest = write_manifest(opts.out, "train", l.config_path, snapshot, l.config.train.seed, files);
    o.summary = describe("train", data.train) + describe_run(r);
    return o;
}

CommandOutput cmd_compare(const CommandOptions& opts) {
    const Loaded l = load(opts);
    const DatasetBundle data = obtain_data(l.config);
    std::vector<fs::path> files;
    std::string table = "strategy,best_epoch,best_val_acc,best_train_acc,best_test_acc,final_test_acc\n";
    CommandOutput o;
    o.summary = describe("train", data.train);
    for (Strategy s : l.config.strategies) {
        TrainConfig cfg = l.config.train;
        cfg.strategy = s;
        const fs::path dir = opts.out / to_string(s);
        const TrainResult r = train_or_checkpoint(data, cfg, dir);
        const auto run_files = write_run(dir, r, opts.per_sample_log);
        files.insert(files.end(), run_files.begin(), run_files.end());
        const double final_test = r.epochs.empty() ? std::nan("") : r.epochs.back().test_acc;
        table += to_string(s) + ',' + std::to_string(r.best_epoch) + ',' +
                 format_number(r.best_val_acc) + ',' + format_number(r.best_train_acc) + ',' +
                 format_number(r.best_test_acc) + ',' + format_number(final_test) + '\n';
        o.summary += describe_run(r);
    }
    files.push_back(opts.out / "comparison.csv");
    write_text(files.back(), table);
    o.manifest = write_manifest(opts.out, "compare", l.config_path, l.config.to_json(),
                                l.config.train.seed, files);
    return o;
}

CommandOutput cmd_report(const CommandOptions& opts) {
    const fs::path run = opts.run_dir;
    const CsvTable epochs = read_csv(run / "epochs.csv");
    const nlohmann::json summary = read_json(run / "summary.json");
    if (!summary.contains("config")) throw IoError((run / "summary.json").string() + ": no config");
    const TrainConfig cfg = train_config_from_json(summary.at("config"));
    const SelectionLog log = read_selection_log(run / "selection.csv");

    const fs::path out = opts.out.empty() ? run / "report" : opts.out;
    ensure_dir(out);
    const std::vector<std::pair<std::string, std::string>> tables = {
        {"accuracy_vs_epoch.csv", accuracy_table(epochs)},
        {"overlap_vs_epoch.csv", overlap_table(log, epochs, cfg.schedule)},
        {"score_by_provenance.csv", score_table(epochs)},
        {"noise_histogram.csv",
         noise_histogram_table(log.provenance, std::min(cfg.batch_size, log.provenance.size()),
                               static_cast<std::size_t>(cfg.optimizer.max_epochs), cfg.seed)},
        {"identification_vs_epoch.csv", identification_table(log)}};
    std::vector<fs::path> files;
    for (const auto& [name, text] : tables) {
        files.push_back(out / name);
        write_text(files.back(), text);
    }
    nlohmann::json snapshot = {{"run_dir", run.generic_string()}, {"train", to_json(cfg)}};
    CommandOutput o;
    o.manifest = write_manifest(out, "report", "", snapshot, cfg.seed, files);
    o.summary = "report: " + std::to_string(tables.size()) + " tables for " +
                std::to_string(epochs.rows.size()) + " epochs\n";
    return o;
}

}  // namespace sud
