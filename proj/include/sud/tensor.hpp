#pragma once

// Dense numeric core: row-major matrices, normalization, softmax and a
// central-difference gradient used as a test oracle.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace sud {

/// Zero-vector threshold for l2_normalize.
inline constexpr double kNormEpsilon = 1e-12;

class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    /// Takes ownership of row-major `data`; throws ContractViolation if the size is off.
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool all_finite() const noexcept;

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Probability vector over M >= 2 classes: entries in [0,1] summing to 1 within 1e-9.
class ProbVector {
public:
    /// Validates the invariants; throws ContractViolation otherwise.
    explicit ProbVector(std::vector<double> values);

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }
    operator std::span<const double>() const noexcept { return values_; }

private:
    std::vector<double> values_;
};

/// Row-major product; the k-loop accumulates in ascending order for every entry.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// Unit-norm copy of v. Throws DegenerateInput when ||v|| <= kNormEpsilon.
std::vector<double> l2_normalize(std::span<const double> v);

/// Max-subtracted softmax. Throws ContractViolation on non-finite logits or fewer than two entries.
ProbVector softmax(std::span<const double> logits);

/// Writes softmax(logits) into out without validation; the hot-path variant used by the kernels.
void softmax_into(std::span<const double> logits, std::span<double> out) noexcept;

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
std::vector<double> finite_diff_gradient(const ScalarFunction& f, std::span<const double> x,
                                         double h = 1e-6);

}  // namespace sud
