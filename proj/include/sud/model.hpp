#pragma once

// Trainable model: an optional tanh hidden layer feeding a linear feature map,
// followed by a cosine classifier (unit feature, unit class rows, scale s).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sud/tensor.hpp"

namespace sud {

struct ModelDims {
    std::size_t input_dim = 16;
    std::size_t hidden = 32;  ///< 0 means no hidden layer: f = W2 x + b2
    std::size_t feature_dim = 16;
    std::size_t classes = 20;
    double scale = 30.0;

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Offsets of each tensor inside the flat parameter vector.
struct ParamLayout {
    std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0, head = 0, total = 0;
    std::size_t w2_cols = 0;  ///< fan-in of the feature layer

    static ParamLayout of(const ModelDims& dims);

    friend bool operator==(const ParamLayout&, const ParamLayout&) = default;
};

class Model {
public:
    Model() = default;
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights from `seed`; classifier rows normalized.
    static Model initialize(const ModelDims& dims, std::uint64_t seed);
    /// Wraps existing parameters; classifier rows are left as given.
    Model(const ModelDims& dims, std::vector<double> params);

    const ModelDims& dims() const noexcept { return dims_; }
    const ParamLayout& layout() const noexcept { return layout_; }
    std::size_t parameter_count() const noexcept { return params_.size(); }

    std::span<const double> parameters() const noexcept { return params_; }
    std::span<double> parameters() noexcept { return params_; }

    /// Row j of the classifier (class-center direction, unnormalized storage).
    std::span<const double> class_row(std::size_t j) const noexcept;
    std::span<double> class_row(std::size_t j) noexcept;

    /// Rescales every classifier row to unit norm.
    void renormalize_classifier();

    friend bool operator==(const Model&, const Model&) = default;

private:
    ModelDims dims_;
    ParamLayout layout_;
    std::vector<double> params_;
};

/// Intermediates from one forward pass, reused by backward.
struct ForwardCache {
    std::vector<double> hidden;   ///< tanh activations (empty without hidden layer)
    std::vector<double> feature;  ///< f before normalization
    std::vector<double> unit_feature;
    double feature_norm = 0.0;
    std::vector<double> unit_rows;  ///< M x d normalized classifier rows, row-major
    std::vector<double> row_norms;
    std::vector<double> logits;
};

/// Single-sample forward pass; logits_j = s * <W_j/|W_j|, f/|f|>.
/// Throws DegenerateInput if the encoder output (or a class row) has near-zero norm.
void forward_one(const Model& model, std::span<const double> input, ForwardCache& cache);

std::vector<double> forward_logits(const Model& model, std::span<const double> input);

/// Batch forward: one row of logits per input row.
DenseMatrix forward(const Model& model, const DenseMatrix& inputs);

/// Accumulates d(loss)/d(params) into grad_params given d(loss)/d(logits).
/// When grad_feature is non-empty it receives d(loss)/df for the pre-normalization feature.
void backward_one(const Model& model, std::span<const double> input, const ForwardCache& cache,
                  std::span<const double> grad_logits, std::span<double> grad_params,
                  std::span<double> grad_feature = {});

/// Batch backward: gradients summed over rows in ascending row order.
std::vector<double> backward(const Model& model, const DenseMatrix& inputs,
                             const DenseMatrix& grad_logits);

struct OptimizerSettings {
    double base_lr = 0.01;
    double momentum = 0.9;
    int warmup_epochs = 5;
    int max_epochs = 80;
};

class OptimizerState {
public:
    OptimizerState(const OptimizerSettings& settings, std::size_t parameter_count);

    const OptimizerSettings& settings() const noexcept { return settings_; }
    std::span<const double> velocity() const noexcept { return velocity_; }

    /// v <- mu v + g ; p <- p - lr v. Throws TrainingDiverged on non-finite gradients.
    void step(std::span<double> params, std::span<const double> grads, double lr);

    /// Linear warm-up to base_lr over warmup_epochs, then cosine annealing to 0 at max_epochs.
    double lr_at_epoch(int epoch) const;

private:
    OptimizerSettings settings_;
    std::vector<double> velocity_;
};

/// Optimizer step on a model followed by classifier row re-normalization.
void sgd_step(OptimizerState& state, Model& model, std::span<const double> grads, double lr);

/// Checkpoint: {"dims": {...}, "seed", "epoch", "params": {"w1": [...], ...}}.
nlohmann::json checkpoint_to_json(const Model& model, std::uint64_t seed, int epoch);
Model checkpoint_from_json(const nlohmann::json& j);

}  // namespace sud
