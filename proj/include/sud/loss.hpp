#pragma once

// Softmax cross-entropy, the cosine-normalized loss, its label-smoothed form,
// and the mean loss over a selected subset.

#include <cstddef>
#include <span>
#include <vector>

#include "sud/model.hpp"
#include "sud/tensor.hpp"

namespace sud {

struct SmoothingConfig {
    double label_weight = 0.5;  ///< omega: mass on the assigned label, in (0,1]
    std::size_t classes = 20;

    /// (1 - omega) / (M - 1)
    double off_target_weight() const;
    /// Throws ContractViolation unless 0 < omega <= 1 and M >= 2.
    void validate() const;
};

/// Loss value and its gradient with respect to the logits.
struct LogitLoss {
    double loss = 0.0;
    std::vector<double> grad_logits;
};

/// Loss value and its gradient with respect to the flat model parameters.
struct ModelLoss {
    double loss = 0.0;
    std::vector<double> grad_params;
};

/// -log softmax(logits)_y, gradient softmax(logits) - onehot(y).
LogitLoss softmax_ce(std::span<const double> logits, std::size_t label);

/// omega * CE(y) + (1-omega)/(M-1) * sum_{j != y} CE(j), evaluated as that weighted sum.
LogitLoss smooth_ce(std::span<const double> logits, std::size_t label, const SmoothingConfig& cfg);

/// softmax_ce on the cosine logits of `model`.
ModelLoss normalized_loss(const Model& model, std::span<const double> input, std::size_t label);

ModelLoss smooth_loss(const Model& model, std::span<const double> input, std::size_t label,
                      const SmoothingConfig& cfg);

/// Mean smooth_loss over rows `selected` of `inputs`; gradients averaged the same way.
/// Throws ContractViolation when `selected` is empty.
ModelLoss final_loss(const Model& model, const DenseMatrix& inputs,
                     std::span<const std::size_t> labels, std::span<const std::size_t> selected,
                     const SmoothingConfig& cfg);

}  // namespace sud
