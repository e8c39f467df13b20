#include "sud/model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "sud/error.hpp"

namespace sud {

ParamLayout ParamLayout::of(const ModelDims& dims) {
    detail::require(dims.input_dim > 0 && dims.feature_dim > 0, "ModelDims: zero dimension");
    detail::require(dims.classes >= 2, "ModelDims: need at least two classes");
    detail::require(dims.scale > 0.0, "ModelDims: scale must be positive");
    ParamLayout l;
    l.w1 = 0;
    l.b1 = l.w1 + dims.hidden * dims.input_dim;
    l.w2 = l.b1 + dims.hidden;
    l.w2_cols = dims.hidden > 0 ? dims.hidden : dims.input_dim;
    l.b2 = l.w2 + dims.feature_dim * l.w2_cols;
    l.head = l.b2 + dims.feature_dim;
    l.total = l.head + dims.classes * dims.feature_dim;
    return l;
}

Model::Model(const ModelDims& dims, std::vector<double> params)
    : dims_(dims), layout_(ParamLayout::of(dims)), params_(std::move(params)) {
    detail::require(params_.size() == layout_.total,
                    "Model: expected " + std::to_string(layout_.total) + " parameters, got " +
                        std::to_string(params_.size()));
}

Model Model::initialize(const ModelDims& dims, std::uint64_t seed) {
    Model m;
    m.dims_ = dims;
    m.layout_ = ParamLayout::of(dims);
    m.params_.assign(m.layout_.total, 0.0);

    std::mt19937_64 rng(seed);
    auto fill = [&](std::size_t begin, std::size_t end, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t i = begin; i < end; ++i) m.params_[i] = dist(rng);
    };
    const auto& l = m.layout_;
    if (dims.hidden > 0) fill(l.w1, l.w2, dims.input_dim);  // W1 and b1
    fill(l.w2, l.head, l.w2_cols);                           // W2 and b2
    fill(l.head, l.total, dims.feature_dim);
    m.renormalize_classifier();
    return m;
}

std::span<const double> Model::class_row(std::size_t j) const noexcept {
    return std::span<const double>(params_).subspan(layout_.head + j * dims_.feature_dim,
                                                    dims_.feature_dim);
}

std::span<double> Model::class_row(std::size_t j) noexcept {
    return std::span<double>(params_).subspan(layout_.head + j * dims_.feature_dim,
                                              dims_.feature_dim);
}

void Model::renormalize_classifier() {
    for (std::size_t j = 0; j < dims_.classes; ++j) {
        auto row = class_row(j);
        const double n = l2_norm(row);
        if (!(n > kNormEpsilon)) throw DegenerateInput("classifier row collapsed to zero");
        for (double& w : row) w /= n;
    }
}

void forward_one(const Model& model, std::span<const double> input, ForwardCache& cache) {
    const auto& dims = model.dims();
    const auto& l = model.layout();
    const auto p = model.parameters();
    detail::require(input.size() == dims.input_dim, "forward: input dimension mismatch");

    std::span<const double> layer_in = input;
    if (dims.hidden > 0) {
        cache.hidden.resize(dims.hidden);
        for (std::size_t h = 0; h < dims.hidden; ++h) {
            double a = p[l.b1 + h];
            const double* w = &p[l.w1 + h * dims.input_dim];
            for (std::size_t i = 0; i < dims.input_dim; ++i) a += w[i] * input[i];
            cache.hidden[h] = std::tanh(a);
        }
        layer_in = cache.hidden;
    } else {
        cache.hidden.clear();
    }

    cache.feature.resize(dims.feature_dim);
    for (std::size_t k = 0; k < dims.feature_dim; ++k) {
        double f = p[l.b2 + k];
        const double* w = &p[l.w2 + k * l.w2_cols];
        for (std::size_t i = 0; i < l.w2_cols; ++i) f += w[i] * layer_in[i];
        cache.feature[k] = f;
    }
    cache.feature_norm = l2_norm(cache.feature);
    if (!(cache.feature_norm > kNormEpsilon))
        throw DegenerateInput("forward: encoder output has near-zero norm");
    cache.unit_feature.resize(dims.feature_dim);
    for (std::size_t k = 0; k < dims.feature_dim; ++k)
        cache.unit_feature[k] = cache.feature[k] / cache.feature_norm;

    cache.unit_rows.resize(dims.classes * dims.feature_dim);
    cache.row_norms.resize(dims.classes);
    cache.logits.resize(dims.classes);
    for (std::size_t j = 0; j < dims.classes; ++j) {
        const auto row = model.class_row(j);
        const double n = l2_norm(row);
        if (!(n > kNormEpsilon)) throw DegenerateInput("forward: classifier row has near-zero norm");
        cache.row_norms[j] = n;
        double c = 0.0;
        for (std::size_t k = 0; k < dims.feature_dim; ++k) {
            const double u = row[k] / n;
            cache.unit_rows[j * dims.feature_dim + k] = u;
            c += u * cache.unit_feature[k];
        }
        cache.logits[j] = dims.scale * c;
    }
}

std::vector<double> forward_logits(const Model& model, std::span<const double> input) {
    ForwardCache cache;
    forward_one(model, input, cache);
    return std::move(cache.logits);
}

DenseMatrix forward(const Model& model, const DenseMatrix& inputs) {
    DenseMatrix out(inputs.rows(), model.dims().classes);
    ForwardCache cache;
    for (std::size_t r = 0; r < inputs.rows(); ++r) {
        forward_one(model, inputs.row(r), cache);
        std::copy(cache.logits.begin(), cache.logits.end(), out.row(r).begin());
    }
    return out;
}

void backward_one(const Model& model, std::span<const double> input, const ForwardCache& cache,
                  std::span<const double> grad_logits, std::span<double> grad_params,
                  std::span<double> grad_feature) {
    const auto& dims = model.dims();
    const auto& l = model.layout();
    const auto p = model.parameters();
    const std::size_t d = dims.feature_dim;
    detail::require(grad_logits.size() == dims.classes, "backward: grad_logits size mismatch");
    detail::require(grad_params.size() == l.total, "backward: grad_params size mismatch");
    const double s = dims.scale;

    // Classifier rows: d/dc_j through u_j = c_j / |c_j|.
    std::vector<double> g_unit_feature(d, 0.0);
    for (std::size_t j = 0; j < dims.classes; ++j) {
        const double g = grad_logits[j];
        if (g == 0.0) continue;
        const double* u = &cache.unit_rows[j * d];
        double proj = 0.0;  // <u_j, s g n>
        for (std::size_t k = 0; k < d; ++k) {
            g_unit_feature[k] += s * g * u[k];
            proj += u[k] * s * g * cache.unit_feature[k];
        }
        double* gc = &grad_params[l.head + j * d];
        for (std::size_t k = 0; k < d; ++k)
            gc[k] += (s * g * cache.unit_feature[k] - u[k] * proj) / cache.row_norms[j];
    }

    // Feature: d/df through n = f / |f|; orthogonal to f by construction.
    double proj = 0.0;
    for (std::size_t k = 0; k < d; ++k) proj += cache.unit_feature[k] * g_unit_feature[k];
    std::vector<double> g_feature(d);
    for (std::size_t k = 0; k < d; ++k)
        g_feature[k] = (g_unit_feature[k] - cache.unit_feature[k] * proj) / cache.feature_norm;
    if (!grad_feature.empty()) {
        detail::require(grad_feature.size() == d, "backward: grad_feature size mismatch");
        std::copy(g_feature.begin(), g_feature.end(), grad_feature.begin());
    }

    const std::span<const double> layer_in =
        dims.hidden > 0 ? std::span<const double>(cache.hidden) : input;
    for (std::size_t k = 0; k < d; ++k) {
        grad_params[l.b2 + k] += g_feature[k];
        double* gw = &grad_params[l.w2 + k * l.w2_cols];
        for (std::size_t i = 0; i < l.w2_cols; ++i) gw[i] += g_feature[k] * layer_in[i];
    }
    if (dims.hidden == 0) return;

    for (std::size_t h = 0; h < dims.hidden; ++h) {
        double g_h = 0.0;
        for (std::size_t k = 0; k < d; ++k) g_h += p[l.w2 + k * l.w2_cols + h] * g_feature[k];
        const double g_pre = g_h * (1.0 - cache.hidden[h] * cache.hidden[h]);
        grad_params[l.b1 + h] += g_pre;
        double* gw = &grad_params[l.w1 + h * dims.input_dim];
        for (std::size_t i = 0; i < dims.input_dim; ++i) gw[i] += g_pre * input[i];
    }
}

std::vector<double> backward(const Model& model, const DenseMatrix& inputs,
                             const DenseMatrix& grad_logits) {
    detail::require(inputs.rows() == grad_logits.rows(), "backward: batch size mismatch");
    std::vector<double> grads(model.parameter_count(), 0.0);
    ForwardCache cache;
    for (std::size_t r = 0; r < inputs.rows(); ++r) {
        forward_one(model, inputs.row(r), cache);
        backward_one(model, inputs.row(r), cache, grad_logits.row(r), grads);
    }
    return grads;
}

OptimizerState::OptimizerState(const OptimizerSettings& settings, std::size_t parameter_count)
    : settings_(settings), velocity_(parameter_count, 0.0) {
    detail::require(settings.momentum >= 0.0 && settings.momentum < 1.0,
                    "optimizer: momentum must be in [0,1)");
    detail::require(settings.max_epochs >= 1, "optimizer: max_epochs must be >= 1");
    detail::require(settings.warmup_epochs >= 0 && settings.warmup_epochs < settings.max_epochs,
                    "optimizer: warmup must be in [0, max_epochs)");
}

void OptimizerState::step(std::span<double> params, std::span<const double> grads, double lr) {
    detail::require(params.size() == velocity_.size() && grads.size() == velocity_.size(),
                    "optimizer: parameter/gradient shape mismatch");
    for (double g : grads)
        if (!std::isfinite(g)) throw TrainingDiverged("non-finite gradient");
    const double mu = settings_.momentum;
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity_[i] = mu * velocity_[i] + grads[i];
        params[i] -= lr * velocity_[i];
    }
}

double OptimizerState::lr_at_epoch(int epoch) const {
    const int warmup = settings_.warmup_epochs;
    const int t_max = settings_.max_epochs;
    detail::require(epoch >= 1 && epoch <= t_max, "lr_at_epoch: epoch out of range");
    const double base = settings_.base_lr;
    if (epoch <= warmup) return base * static_cast<double>(epoch) / warmup;
    const double progress = static_cast<double>(epoch - warmup) / (t_max - warmup);
    return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void sgd_step(OptimizerState& state, Model& model, std::span<const double> grads, double lr) {
    state.step(model.parameters(), grads, lr);
    model.renormalize_classifier();
}

namespace {

std::vector<double> slice(std::span<const double> p, std::size_t begin, std::size_t end) {
    return {p.begin() + static_cast<std::ptrdiff_t>(begin),
            p.begin() + static_cast<std::ptrdiff_t>(end)};
}

}  // namespace

nlohmann::json checkpoint_to_json(const Model& model, std::uint64_t seed, int epoch) {
    const auto& d = model.dims();
    const auto& l = model.layout();
    const auto p = model.parameters();
    nlohmann::json j;
    j["dims"] = {{"input_dim", d.input_dim},
                 {"hidden", d.hidden},
                 {"feature_dim", d.feature_dim},
                 {"classes", d.classes},
                 {"scale", d.scale}};
    j["seed"] = seed;
    j["epoch"] = epoch;
    j["params"] = {{"w1", slice(p, l.w1, l.b1)},
                   {"b1", slice(p, l.b1, l.w2)},
                   {"w2", slice(p, l.w2, l.b2)},
                   {"b2", slice(p, l.b2, l.head)},
                   {"classifier", slice(p, l.head, l.total)}};
    return j;
}

Model checkpoint_from_json(const nlohmann::json& j) {
    try {
        ModelDims d;
        const auto& jd = j.at("dims");
        d.input_dim = jd.at("input_dim").get<std::size_t>();
        d.hidden = jd.at("hidden").get<std::size_t>();
        d.feature_dim = jd.at("feature_dim").get<std::size_t>();
        d.classes = jd.at("classes").get<std::size_t>();
        d.scale = jd.at("scale").get<double>();
        std::vector<double> params;
        for (const char* key : {"w1", "b1", "w2", "b2", "classifier"}) {
            const auto part = j.at("params").at(key).get<std::vector<double>>();
            params.insert(params.end(), part.begin(), part.end());
        }
        return Model(d, std::move(params));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed checkpoint: ") + e.what());
    }
}

}  // namespace sud
