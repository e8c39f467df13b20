#include <algorithm>
#include <cmath>

#include "sud/error.hpp"
#include "sud/kernels.hpp"

namespace sud {

namespace serial {

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) { return sud::matmul(a, b); }

InferenceResult infer(const Model& model, const DenseMatrix& inputs,
                      std::span<const std::size_t> labels) {
    detail::require(labels.empty() || labels.size() == inputs.rows(), "infer: label count mismatch");
    const std::size_t m = model.dims().classes;
    InferenceResult out{DenseMatrix(inputs.rows(), m), {}, std::vector<std::size_t>(inputs.rows())};
    if (!labels.empty()) out.losses.resize(inputs.rows());
    ForwardCache cache;
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
        forward_one(model, inputs.row(i), cache);
        auto p = out.probabilities.row(i);
        softmax_into(cache.logits, p);
        out.predictions[i] = static_cast<std::size_t>(
            std::max_element(cache.logits.begin(), cache.logits.end()) - cache.logits.begin());
        if (!labels.empty()) out.losses[i] = softmax_ce(cache.logits, labels[i]).loss;
    }
    return out;
}

ModelLoss batch_gradient(const Model& model, const DenseMatrix& inputs,
                         std::span<const std::size_t> labels, std::span<const std::size_t> batch,
                         const SmoothingConfig& cfg) {
    return final_loss(model, inputs, labels, batch, cfg);
}

}  // namespace serial

InferenceResult infer(Backend backend, const Model& model, const DenseMatrix& inputs,
                      std::span<const std::size_t> labels) {
    return backend == Backend::Serial ? serial::infer(model, inputs, labels)
                                      : parallel::infer(model, inputs, labels);
}

ModelLoss batch_gradient(Backend backend, const Model& model, const DenseMatrix& inputs,
                         std::span<const std::size_t> labels, std::span<const std::size_t> batch,
                         const SmoothingConfig& cfg) {
    return backend == Backend::Serial ? serial::batch_gradient(model, inputs, labels, batch, cfg)
                                      : parallel::batch_gradient(model, inputs, labels, batch, cfg);
}

}  // namespace sud
