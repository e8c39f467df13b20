#include <algorithm>
#include <cmath>
#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sud/error.hpp"
#include "sud/kernels.hpp"

namespace sud {

int parallel_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace parallel {

namespace {

// Exceptions must not escape an OpenMP region; the first one is captured and rethrown.
class ErrorSlot {
public:
    template <typename Fn>
    void run(Fn&& fn) noexcept {
        try {
            fn();
        } catch (...) {
#pragma omp critical(sud_error_slot)
            if (!error_) error_ = std::current_exception();
        }
    }
    void rethrow() const {
        if (error_) std::rethrow_exception(error_);
    }

private:
    std::exception_ptr error_;
};

}  // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require(a.cols() == b.rows(), "matmul: a.cols != b.rows");
    DenseMatrix out(a.rows(), b.cols());
    const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        const auto r = static_cast<std::size_t>(i);
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a(r, k) * b(k, j);
            out(r, j) = acc;
        }
    }
    return out;
}

InferenceResult infer(const Model& model, const DenseMatrix& inputs,
                      std::span<const std::size_t> labels) {
    detail::require(labels.empty() || labels.size() == inputs.rows(), "infer: label count mismatch");
    const std::size_t m = model.dims().classes;
    InferenceResult out{DenseMatrix(inputs.rows(), m), {}, std::vector<std::size_t>(inputs.rows())};
    if (!labels.empty()) out.losses.resize(inputs.rows());
    const auto n = static_cast<std::ptrdiff_t>(inputs.rows());
    ErrorSlot errors;

#pragma omp parallel
    {
        ForwardCache cache;
#pragma omp for schedule(static)
        for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
            errors.run([&] {
                const auto i = static_cast<std::size_t>(ii);
                forward_one(model, inputs.row(i), cache);
                softmax_into(cache.logits, out.probabilities.row(i));
                out.predictions[i] = static_cast<std::size_t>(
                    std::max_element(cache.logits.begin(), cache.logits.end()) -
                    cache.logits.begin());
                if (!labels.empty()) out.losses[i] = softmax_ce(cache.logits, labels[i]).loss;
            });
        }
    }
    errors.rethrow();
    return out;
}

ModelLoss batch_gradient(const Model& model, const DenseMatrix& inputs,
                         std::span<const std::size_t> labels, std::span<const std::size_t> batch,
                         const SmoothingConfig& cfg) {
    detail::require(!batch.empty(), "final_loss: empty selected set");
    detail::require(labels.size() == inputs.rows(), "final_loss: labels/inputs size mismatch");
    const std::size_t p = model.parameter_count();
    const std::size_t nb = batch.size();
    const auto nb_signed = static_cast<std::ptrdiff_t>(nb);

    // One private gradient slot per sample; each parameter receives exactly one
    // contribution per sample, so the ordered reduction below reproduces the
    // serial accumulation bit for bit.
    std::vector<double> per_sample(nb * p, 0.0);
    std::vector<double> losses(nb, 0.0);
    ErrorSlot errors;

#pragma omp parallel
    {
        ForwardCache cache;
#pragma omp for schedule(static)
        for (std::ptrdiff_t bb = 0; bb < nb_signed; ++bb) {
            errors.run([&] {
                const auto b = static_cast<std::size_t>(bb);
                const std::size_t idx = batch[b];
                detail::require(idx < inputs.rows(), "final_loss: selected index out of range");
                forward_one(model, inputs.row(idx), cache);
                const LogitLoss ll = smooth_ce(cache.logits, labels[idx], cfg);
                losses[b] = ll.loss;
                backward_one(model, inputs.row(idx), cache, ll.grad_logits,
                             std::span<double>(per_sample).subspan(b * p, p));
            });
        }
    }
    errors.rethrow();

    ModelLoss out;
    out.grad_params.assign(p, 0.0);
    const double count = static_cast<double>(nb);
    const auto p_signed = static_cast<std::ptrdiff_t>(p);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t kk = 0; kk < p_signed; ++kk) {
        const auto k = static_cast<std::size_t>(kk);
        double acc = 0.0;
        for (std::size_t b = 0; b < nb; ++b) acc += per_sample[b * p + k];
        out.grad_params[k] = acc / count;
    }
    for (double l : losses) out.loss += l;
    out.loss /= count;
    return out;
}

}  // namespace parallel

}  // namespace sud
