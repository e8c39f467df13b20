#include <doctest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"
#include "sud/error.hpp"
#include "sud/tensor.hpp"

using namespace sud;

namespace {

DenseMatrix naive_matmul(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

}  // namespace

TEST_CASE("matmul: identity and small product") {
    std::mt19937_64 rng(1);
    const auto a = testing::random_matrix(3, 4, rng);
    CHECK(matmul(DenseMatrix::identity(3), a) == a);

    const DenseMatrix m(2, 2, {1, 2, 3, 4});
    const DenseMatrix ones(2, 1, {1, 1});
    const auto c = matmul(m, ones);
    CHECK(c(0, 0) == 3.0);
    CHECK(c(1, 0) == 7.0);
}

TEST_CASE("matmul: agrees with a triple loop") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        const auto a = testing::random_matrix(5, 4, rng);
        const auto b = testing::random_matrix(4, 3, rng);
        const auto got = matmul(a, b);
        const auto want = naive_matmul(a, b);
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(std::abs(got.data()[i] - want.data()[i]) <= 1e-12);
    }
}

TEST_CASE("matmul: associativity") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed + 100);
        const auto a = testing::random_matrix(3, 4, rng);
        const auto b = testing::random_matrix(4, 2, rng);
        const auto c = testing::random_matrix(2, 5, rng);
        const auto left = matmul(matmul(a, b), c);
        const auto right = matmul(a, matmul(b, c));
        for (std::size_t i = 0; i < left.size(); ++i)
            CHECK(std::abs(left.data()[i] - right.data()[i]) <= 1e-9);
    }
}

TEST_CASE("matmul: shape mismatch") {
    CHECK_THROWS_AS(matmul(DenseMatrix(2, 3), DenseMatrix(2, 3)), ContractViolation);
}

TEST_CASE("DenseMatrix: data length must match shape") {
    CHECK_THROWS_AS(DenseMatrix(2, 2, std::vector<double>{1, 2, 3}), ContractViolation);
}

TEST_CASE("l2_normalize") {
    const std::vector<double> v{3, 4};
    const auto u = l2_normalize(v);
    CHECK(u[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(u[1] == doctest::Approx(0.8).epsilon(1e-15));

    const std::vector<double> unit{0, 1, 0};
    CHECK(l2_normalize(unit) == unit);

    CHECK_THROWS_AS(l2_normalize(std::vector<double>{0, 0}), DegenerateInput);
    CHECK_THROWS_AS(l2_normalize(std::vector<double>{1e-13, 0}), DegenerateInput);
}

TEST_CASE("l2_normalize: unit norm, same direction, idempotent") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const auto v = testing::random_vector(6, rng, 10.0);
        const auto u = l2_normalize(v);
        CHECK(std::abs(l2_norm(u) - 1.0) <= 1e-12);
        CHECK(std::abs(dot(u, v) - l2_norm(v)) <= 1e-12 * l2_norm(v));
        const auto uu = l2_normalize(u);
        for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(uu[i] - u[i]) <= 1e-12);
    }
}

TEST_CASE("softmax: worked values") {
    const auto p = softmax(std::vector<double>{0, 0, 0});
    for (std::size_t i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    const auto q = softmax(std::vector<double>{std::log(2.0), 0, 0});
    CHECK(q[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(q[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(q[2] == doctest::Approx(0.25).epsilon(1e-15));

    const auto big = softmax(std::vector<double>{1000, 0});
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] == 1.0);
    CHECK(big[1] == doctest::Approx(0.0));
}

TEST_CASE("softmax: rejects bad input") {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(softmax(std::vector<double>{inf, 0}), ContractViolation);
    CHECK_THROWS_AS(softmax(std::vector<double>{std::nan(""), 0}), ContractViolation);
    CHECK_THROWS_AS(softmax(std::vector<double>{1.0}), ContractViolation);
}

TEST_CASE("softmax: normalized and shift invariant") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> shift(-50.0, 50.0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto v = testing::random_vector(7, rng, 5.0);
        const auto p = softmax(v);
        const auto values = p.values();
        CHECK(std::abs(std::accumulate(values.begin(), values.end(), 0.0) - 1.0) <= 1e-9);
        const double c = shift(rng);
        auto w = v;
        for (double& x : w) x += c;
        const auto q = softmax(w);
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-12);
    }
}

TEST_CASE("ProbVector invariants") {
    CHECK_NOTHROW(ProbVector({0.25, 0.75}));
    CHECK_THROWS_AS(ProbVector({0.5, 0.6}), ContractViolation);
    CHECK_THROWS_AS(ProbVector({1.0}), ContractViolation);
    CHECK_THROWS_AS(ProbVector({1.5, -0.5}), ContractViolation);
}

TEST_CASE("finite_diff_gradient") {
    const ScalarFunction sq = [](std::span<const double> x) { return dot(x, x); };
    const auto g = finite_diff_gradient(sq, std::vector<double>{1, 2});
    CHECK(std::abs(g[0] - 2.0) <= 1e-6);
    CHECK(std::abs(g[1] - 4.0) <= 1e-6);

    const ScalarFunction flat = [](std::span<const double>) { return 3.5; };
    for (double d : finite_diff_gradient(flat, std::vector<double>{1, -2, 3})) CHECK(d == 0.0);
}
