#include "sud/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "json_util.hpp"

namespace sud {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Independent streams derived from the run seed.
constexpr std::uint64_t kShuffleStream = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kHoldoutStream = 0xD1B54A32D192ED03ULL;

}  // namespace

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::None: return "none";
        case Strategy::GlobalProbCE: return "global-probCE";
        case Strategy::GlobalLossCE: return "global-lossCE";
        case Strategy::MinibatchProbCE: return "minibatch-probCE";
    }
    return "none";
}

Strategy strategy_from_string(const std::string& s) {
    for (Strategy st : {Strategy::None, Strategy::GlobalProbCE, Strategy::GlobalLossCE,
                        Strategy::MinibatchProbCE})
        if (to_string(st) == s) return st;
    throw ConfigError("unknown strategy '" + s +
                      "' (expected none, global-probCE, global-lossCE or minibatch-probCE)");
}

void TrainConfig::validate(std::size_t train_size) const {
    auto check = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError("train: " + msg);
    };
    check(schedule.max_rate >= 0.0 && schedule.max_rate < 1.0, "tau must be in [0,1)");
    check(schedule.ramp_epoch >= 1, "t_k must be >= 1");
    check(label_weight > 0.0 && label_weight <= 1.0, "label_weight must be in (0,1]");
    check(optimizer.base_lr > 0.0, "base_lr must be positive");
    check(optimizer.momentum >= 0.0 && optimizer.momentum < 1.0, "momentum must be in [0,1)");
    check(optimizer.max_epochs >= 1, "max_epochs must be >= 1");
    check(optimizer.warmup_epochs >= 0 && optimizer.warmup_epochs < optimizer.max_epochs,
          "warmup_epochs must be in [0, max_epochs)");
    check(optimizer.max_epochs >= schedule.ramp_epoch, "max_epochs must be >= t_k");
    check(batch_size >= 1, "batch_size must be >= 1");
    check(train_size == 0 || batch_size <= train_size, "batch_size exceeds training set size");
    check(validation_fraction >= 0.0 && validation_fraction <= 0.5,
          "validation_fraction must be in [0, 0.5]");
    check(feature_dim >= 1, "feature_dim must be >= 1");
    check(scale > 0.0, "scale must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"max_drop_rate", c.schedule.max_rate},
            {"ramp_epoch", c.schedule.ramp_epoch},
            {"label_weight", c.label_weight},
            {"base_lr", c.optimizer.base_lr},
            {"momentum", c.optimizer.momentum},
            {"warmup_epochs", c.optimizer.warmup_epochs},
            {"max_epochs", c.optimizer.max_epochs},
            {"batch_size", c.batch_size},
            {"strategy", to_string(c.strategy)},
            {"validation_fraction", c.validation_fraction},
            {"hidden", c.hidden},
            {"feature_dim", c.feature_dim},
            {"scale", c.scale},
            {"seed", c.seed},
            {"backend", c.backend == Backend::Serial ? "serial" : "openmp"}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    detail::check_schema(j, to_json(c), "train");
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("max_drop_rate", c.schedule.max_rate);
        get("ramp_epoch", c.schedule.ramp_epoch);
        get("label_weight", c.label_weight);
        get("base_lr", c.optimizer.base_lr);
        get("momentum", c.optimizer.momentum);
        get("warmup_epochs", c.optimizer.warmup_epochs);
        get("max_epochs", c.optimizer.max_epochs);
        get("batch_size", c.batch_size);
        get("validation_fraction", c.validation_fraction);
        get("hidden", c.hidden);
        get("feature_dim", c.feature_dim);
        get("scale", c.scale);
        get("seed", c.seed);
        if (j.contains("strategy")) c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
        if (j.contains("backend")) {
            const auto b = j.at("backend").get<std::string>();
            if (b == "serial")
                c.backend = Backend::Serial;
            else if (b == "openmp")
                c.backend = Backend::OpenMP;
            else
                throw ConfigError("train: backend must be 'serial' or 'openmp'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train: ") + e.what());
    }
    c.validate(0);
    return c;
}

Evaluation evaluate(const Model& model, const Dataset& dataset, Backend backend) {
    detail::require(!dataset.empty(), "evaluate: empty dataset");
    auto inf = infer(backend, model, dataset.features(), {});
    std::size_t correct = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (inf.predictions[i] == dataset.labels()[i]) ++correct;
    return {static_cast<double>(correct) / static_cast<double>(dataset.size()),
            std::move(inf.probabilities), std::move(inf.predictions)};
}

namespace {

GroupMeans group_means(std::span<const double> values, std::span<const Provenance> prov) {
    std::array<double, 3> sum{};
    std::array<std::size_t, 3> count{};
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto g = static_cast<std::size_t>(prov[i]);
        sum[g] += values[i];
        ++count[g];
    }
    auto mean = [&](Provenance p) {
        const auto g = static_cast<std::size_t>(p);
        return count[g] ? sum[g] / static_cast<double>(count[g]) : kNaN;
    };
    return {mean(Provenance::Clean), mean(Provenance::CloseNoise), mean(Provenance::OpenNoise)};
}

struct Splits {
    Dataset train;
    Dataset validation;
};

Splits resolve_splits(const DatasetBundle& data, const TrainConfig& config) {
    if (!data.validation.empty() || config.validation_fraction == 0.0)
        return {data.train, data.validation};
    std::mt19937_64 rng(config.seed ^ kHoldoutStream);
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_val = static_cast<std::size_t>(
        std::llround(config.validation_fraction * static_cast<double>(order.size())));
    std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(val.begin(), val.end());
    std::sort(train.begin(), train.end());
    return {data.train.subset(train), data.train.subset(val)};
}

}  // namespace

TrainResult run_training(const DatasetBundle& data, const TrainConfig& config) {
    detail::require(!data.train.empty(), "run_training: empty training set");
    Splits splits = resolve_splits(data, config);
    const Dataset& train = splits.train;
    const Dataset& validation = splits.validation;
    config.validate(train.size());

    const std::size_t n = train.size();
    const std::size_t m = train.classes();
    const ModelDims dims{train.feature_dim(), config.hidden, config.feature_dim, m, config.scale};
    const SmoothingConfig smoothing{config.label_weight, m};
    const Backend backend = config.backend;

    TrainResult result;
    result.config = config;
    result.sample_ids.assign(train.ids().begin(), train.ids().end());
    result.provenance.assign(train.provenance().begin(), train.provenance().end());

    Model model = Model::initialize(dims, config.seed);
    OptimizerState optimizer(config.optimizer, model.parameter_count());
    ProbabilityHistory history(n, m);
    std::mt19937_64 shuffle_rng(config.seed ^ kShuffleStream);
    std::map<int, std::vector<std::size_t>> dropped_by_epoch;

    result.best_model = model;
    result.best_val_acc = -1.0;

    for (int t = 1; t <= config.optimizer.max_epochs; ++t) {
        EpochRecord rec;
        rec.epoch = t;
        rec.lr = optimizer.lr_at_epoch(t);
        rec.drop_rate = drop_rate(t, config.schedule);

        // Probability pass over every training sample, including previously dropped ones.
        const InferenceResult inf = infer(backend, model, train.features(), train.labels());
        std::vector<double> prob_ce;
        if (history.ready()) prob_ce = history.scores();
        history.push(inf.probabilities);

        rec.mean_loss = group_means(inf.losses, train.provenance());
        rec.mean_prob_ce = prob_ce.empty() ? GroupMeans{kNaN, kNaN, kNaN}
                                           : group_means(prob_ce, train.provenance());

        rec.selection_active = t > 2 && config.strategy != Strategy::None;
        std::vector<std::vector<std::size_t>> batches;
        if (!rec.selection_active) {
            rec.selection = keep_all(n, t);
            rec.selection.scores = prob_ce;
        } else if (config.strategy == Strategy::GlobalProbCE) {
            rec.selection = select_global(prob_ce, rec.drop_rate, t);
        } else if (config.strategy == Strategy::GlobalLossCE) {
            rec.selection = select_by_loss(inf.losses, rec.drop_rate, t);
        } else {
            const auto partition = shuffled_batches(n, config.batch_size, shuffle_rng);
            rec.selection = select_minibatch(prob_ce, rec.drop_rate, partition, t);
            std::vector<char> kept(n, 0);
            for (std::size_t i : rec.selection.kept) kept[i] = 1;
            for (const auto& batch : partition) {
                std::vector<std::size_t> b;
                for (std::size_t i : batch)
                    if (kept[i]) b.push_back(i);
                if (!b.empty()) batches.push_back(std::move(b));
            }
        }
        rec.selection.rate = rec.selection_active ? rec.drop_rate : 0.0;
        if (batches.empty()) {
            std::vector<std::size_t> order = rec.selection.kept;
            std::shuffle(order.begin(), order.end(), shuffle_rng);
            batches = chunk_batches(order, config.batch_size);
        }

        const Model epoch_start = model;
        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        try {
            for (const auto& batch : batches) {
                const ModelLoss step =
                    batch_gradient(backend, model, train.features(), train.labels(), batch, smoothing);
                if (!std::isfinite(step.loss)) throw TrainingDiverged("non-finite training loss");
                sgd_step(optimizer, model, step.grad_params, rec.lr);
                loss_sum += step.loss * static_cast<double>(batch.size());
                loss_count += batch.size();
            }
            if (!model.parameters().empty() &&
                !std::all_of(model.parameters().begin(), model.parameters().end(),
                             [](double v) { return std::isfinite(v); }))
                throw TrainingDiverged("non-finite parameters");
        } catch (const TrainingDiverged& e) {
            const Model& last_good = t > 1 ? result.best_model : epoch_start;
            throw RunDiverged(std::string(e.what()) + " at epoch " + std::to_string(t), last_good, t);
        } catch (const DegenerateInput& e) {
            throw RunDiverged(std::string(e.what()) + " at epoch " + std::to_string(t),
                              result.best_model, t);
        }
        rec.train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : kNaN;

        rec.train_acc = evaluate(model, train, backend).accuracy;
        rec.val_acc = validation.empty() ? kNaN : evaluate(model, validation, backend).accuracy;
        rec.test_acc = data.test.empty() ? kNaN : evaluate(model, data.test, backend).accuracy;

        dropped_by_epoch[t] = rec.selection.dropped;
        // Undefined while any epoch of the window predates selection (t <= 2).
        if (config.strategy != Strategy::None && t > config.schedule.ramp_epoch && rec.drop_rate > 0.0) {
            if (config.schedule.ramp_epoch + 1 > 2)
                rec.overlap_all = overlap_rate(dropped_by_epoch, OverlapMode::AllEpochs, t,
                                               config.schedule, n);
            if (t - 2 > 2)
                rec.overlap_window3 = overlap_rate(dropped_by_epoch, OverlapMode::Window3, t,
                                                   config.schedule, n);
        }

        // Model selection on validation accuracy; without a validation split the last epoch wins.
        const bool better = validation.empty() || rec.val_acc > result.best_val_acc;
        if (better) {
            result.best_model = model;
            result.best_epoch = t;
            result.best_val_acc = rec.val_acc;
            result.best_train_acc = rec.train_acc;
            result.best_test_acc = rec.test_acc;
        }
        rec.prob_ce = std::move(prob_ce);
        rec.losses = inf.losses;
        result.epochs.push_back(std::move(rec));
    }
    result.final_model = std::move(model);
    return result;
}

ComparisonReport run_comparison(const DatasetBundle& data, const std::vector<TrainConfig>& configs) {
    detail::require(!configs.empty(), "run_comparison: no configs");
    for (const auto& c : configs)
        detail::require(c.seed == configs.front().seed, "run_comparison: configs must share the seed");
    ComparisonReport report;
    for (const auto& c : configs) report.runs.push_back(run_training(data, c));
    return report;
}

}  // namespace sud
