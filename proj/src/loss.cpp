#include "sud/loss.hpp"

#include <algorithm>
#include <cmath>

#include "sud/error.hpp"

namespace sud {

namespace {

/// log-softmax via max-subtraction.
std::vector<double> log_softmax(std::span<const double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double h : logits) sum += std::exp(h - mx);
    const double log_sum = std::log(sum);
    std::vector<double> out(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) out[j] = (logits[j] - mx) - log_sum;
    return out;
}

}  // namespace

double SmoothingConfig::off_target_weight() const {
    return (1.0 - label_weight) / static_cast<double>(classes - 1);
}

void SmoothingConfig::validate() const {
    detail::require(label_weight > 0.0 && label_weight <= 1.0,
                    "SmoothingConfig: label weight must be in (0,1]");
    detail::require(classes >= 2, "SmoothingConfig: need at least two classes");
}

namespace {

// -log p_j, accurate when p_j is close to one.
double neg_log_prob(std::span<const double> logits, std::span<const double> logp, std::size_t j) {
    const double top = logits[j];
    double rest = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        if (k == j) continue;
        if (logits[k] > top) return -logp[j];
        rest += std::exp(logits[k] - top);
    }
    return std::log1p(rest);
}

// p_j - 1 as minus the mass on the other classes.
double minus_rest(std::span<const double> prob, std::size_t j) {
    double rest = 0.0;
    for (std::size_t k = 0; k < prob.size(); ++k)
        if (k != j) rest += prob[k];
    return -rest;
}

}  // namespace

LogitLoss softmax_ce(std::span<const double> logits, std::size_t label) {
    detail::require(label < logits.size(), "softmax_ce: label out of range");
    const auto logp = log_softmax(logits);
    LogitLoss out;
    out.loss = neg_log_prob(logits, logp, label);
    out.grad_logits.resize(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) out.grad_logits[j] = std::exp(logp[j]);
    out.grad_logits[label] = minus_rest(out.grad_logits, label);
    return out;
}

LogitLoss smooth_ce(std::span<const double> logits, std::size_t label, const SmoothingConfig& cfg) {
    cfg.validate();
    detail::require(cfg.classes == logits.size(), "smooth_ce: class count mismatch");
    detail::require(label < logits.size(), "smooth_ce: label out of range");
    const auto logp = log_softmax(logits);
    const double off = cfg.off_target_weight();
    const std::size_t m = logits.size();

    std::vector<double> prob(m);
    for (std::size_t k = 0; k < m; ++k) prob[k] = std::exp(logp[k]);

    LogitLoss out;
    out.grad_logits = prob;
    // Each CE(j) term contributes -log p_j; the weighted sum of their gradients is p - q.
    for (std::size_t j = 0; j < m; ++j) {
        const double w = j == label ? cfg.label_weight : off;
        if (w == 0.0) continue;
        out.loss += w * (j == label ? neg_log_prob(logits, logp, j) : -logp[j]);
        if (j != label) out.grad_logits[j] -= w;
    }
    out.grad_logits[label] = (1.0 - cfg.label_weight) + minus_rest(prob, label);
    return out;
}

namespace {

template <typename LogitLossFn>
ModelLoss through_model(const Model& model, std::span<const double> input, LogitLossFn&& fn) {
    ForwardCache cache;
    forward_one(model, input, cache);
    const LogitLoss ll = fn(std::span<const double>(cache.logits));
    ModelLoss out;
    out.loss = ll.loss;
    out.grad_params.assign(model.parameter_count(), 0.0);
    backward_one(model, input, cache, ll.grad_logits, out.grad_params);
    return out;
}

}  // namespace

ModelLoss normalized_loss(const Model& model, std::span<const double> input, std::size_t label) {
    return through_model(model, input,
                         [&](std::span<const double> logits) { return softmax_ce(logits, label); });
}

ModelLoss smooth_loss(const Model& model, std::span<const double> input, std::size_t label,
                      const SmoothingConfig& cfg) {
    return through_model(model, input, [&](std::span<const double> logits) {
        return smooth_ce(logits, label, cfg);
    });
}

ModelLoss final_loss(const Model& model, const DenseMatrix& inputs,
                     std::span<const std::size_t> labels, std::span<const std::size_t> selected,
                     const SmoothingConfig& cfg) {
    detail::require(!selected.empty(), "final_loss: empty selected set");
    detail::require(labels.size() == inputs.rows(), "final_loss: labels/inputs size mismatch");
    ModelLoss out;
    out.grad_params.assign(model.parameter_count(), 0.0);
    ForwardCache cache;
    for (std::size_t idx : selected) {
        detail::require(idx < inputs.rows(), "final_loss: selected index out of range");
        forward_one(model, inputs.row(idx), cache);
        const LogitLoss ll = smooth_ce(cache.logits, labels[idx], cfg);
        out.loss += ll.loss;
        backward_one(model, inputs.row(idx), cache, ll.grad_logits, out.grad_params);
    }
    const double n = static_cast<double>(selected.size());
    out.loss /= n;
    for (double& g : out.grad_params) g /= n;
    return out;
}

}  // namespace sud
