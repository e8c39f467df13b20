#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sud/model.hpp"
#include "sud/tensor.hpp"

namespace testing {

/// ||a - b|| / max(||a||, ||b||, 1e-12)
inline double relative_error(std::span<const double> a, std::span<const double> b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    std::vector<double> v(n);
    for (double& x : v) x = g(rng);
    return v;
}

inline sud::DenseMatrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    return sud::DenseMatrix(r, c, random_vector(r * c, rng));
}

inline sud::ModelDims small_dims(std::size_t hidden = 6) {
    return sud::ModelDims{5, hidden, 4, 3, 30.0};
}

}  // namespace testing
