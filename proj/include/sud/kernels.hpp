#pragma once

// Data-parallel hot loops of a training epoch. Each kernel has a serial
// reference in `sud::serial` and an OpenMP version in `sud::parallel`; the two
// produce bit-identical results because per-sample work is written to private
// slots and reduced in ascending sample order.

#include <cstddef>
#include <span>
#include <vector>

#include "sud/loss.hpp"
#include "sud/model.hpp"
#include "sud/tensor.hpp"

namespace sud {

enum class Backend { Serial, OpenMP };

/// Inference-mode outputs for every row of a dataset.
struct InferenceResult {
    DenseMatrix probabilities;         ///< rows x classes softmax outputs
    std::vector<double> losses;        ///< -log p_label (cosine-normalized cross-entropy)
    std::vector<std::size_t> predictions;  ///< argmax logit, lowest index on ties
};

namespace serial {

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

/// `labels` may be empty, in which case `losses` is left empty.
InferenceResult infer(const Model& model, const DenseMatrix& inputs,
                      std::span<const std::size_t> labels);

/// Mean smooth loss and gradient over rows `batch` of `inputs`.
ModelLoss batch_gradient(const Model& model, const DenseMatrix& inputs,
                         std::span<const std::size_t> labels, std::span<const std::size_t> batch,
                         const SmoothingConfig& cfg);

}  // namespace serial

namespace parallel {

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

InferenceResult infer(const Model& model, const DenseMatrix& inputs,
                      std::span<const std::size_t> labels);

ModelLoss batch_gradient(const Model& model, const DenseMatrix& inputs,
                         std::span<const std::size_t> labels, std::span<const std::size_t> batch,
                         const SmoothingConfig& cfg);

}  // namespace parallel

InferenceResult infer(Backend backend, const Model& model, const DenseMatrix& inputs,
                      std::span<const std::size_t> labels);

ModelLoss batch_gradient(Backend backend, const Model& model, const DenseMatrix& inputs,
                         std::span<const std::size_t> labels, std::span<const std::size_t> batch,
                         const SmoothingConfig& cfg);

/// Worker threads the OpenMP backend will use (1 when built without OpenMP).
int parallel_threads();

}  // namespace sud
