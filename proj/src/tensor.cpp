#include "sud/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sud/error.hpp"

namespace sud {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    detail::require(data_.size() == rows * cols,
                    "DenseMatrix: data length " + std::to_string(data_.size()) +
                        " != rows*cols " + std::to_string(rows * cols));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool DenseMatrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

ProbVector::ProbVector(std::vector<double> values) : values_(std::move(values)) {
    detail::require(values_.size() >= 2, "ProbVector: need at least two classes");
    double sum = 0.0;
    for (double v : values_) {
        detail::require(v >= 0.0 && v <= 1.0, "ProbVector: entry outside [0,1]");
        sum += v;
    }
    detail::require(std::abs(sum - 1.0) <= 1e-9, "ProbVector: entries do not sum to 1");
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require(a.cols() == b.rows(), "matmul: a.cols != b.rows");
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    detail::require(a.size() == b.size(), "dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

std::vector<double> l2_normalize(std::span<const double> v) {
    const double n = l2_norm(v);
    if (!(n > kNormEpsilon)) throw DegenerateInput("l2_normalize: vector norm below threshold");
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x /= n;
    return out;
}

void softmax_into(std::span<const double> logits, std::span<double> out) noexcept {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        out[j] = std::exp(logits[j] - mx);
        sum += out[j];
    }
    for (std::size_t j = 0; j < logits.size(); ++j) out[j] /= sum;
}

ProbVector softmax(std::span<const double> logits) {
    detail::require(logits.size() >= 2, "softmax: need at least two logits");
    for (double h : logits) detail::require(std::isfinite(h), "softmax: non-finite logit");
    std::vector<double> p(logits.size());
    softmax_into(logits, p);
    return ProbVector(std::move(p));
}

std::vector<double> finite_diff_gradient(const ScalarFunction& f, std::span<const double> x,
                                         double h) {
    detail::require(h > 0.0, "finite_diff_gradient: step must be positive");
    std::vector<double> probe(x.begin(), x.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double up = f(probe);
        probe[i] = orig - h;
        const double down = f(probe);
        probe[i] = orig;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

}  // namespace sud
