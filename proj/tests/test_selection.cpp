#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "support.hpp"
#include "sud/error.hpp"
#include "sud/selection.hpp"

using namespace sud;

namespace {

// Minimum score-sum over all subsets of exactly k indices.
double brute_force_min_sum(const std::vector<double>& scores, std::size_t k) {
    const std::size_t n = scores.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != k) continue;
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) s += scores[i];
        best = std::min(best, s);
    }
    return best;
}

double sum_at(const std::vector<double>& scores, const std::vector<std::size_t>& idx) {
    double s = 0.0;
    for (std::size_t i : idx) s += scores[i];
    return s;
}

double mean_at(std::span<const double> scores, const std::vector<std::size_t>& idx) {
    double s = 0.0;
    for (std::size_t i : idx) s += scores[i];
    return s / static_cast<double>(idx.size());
}

void check_outcome_invariants(const SelectionOutcome& out, std::span<const double> scores, double r) {
    const std::size_t n = scores.size();
    CHECK(out.kept.size() + out.dropped.size() == n);
    CHECK(out.kept.size() == kept_count(n, r));
    CHECK(std::is_sorted(out.kept.begin(), out.kept.end()));
    CHECK(std::is_sorted(out.dropped.begin(), out.dropped.end()));
    std::vector<std::size_t> all;
    std::merge(out.kept.begin(), out.kept.end(), out.dropped.begin(), out.dropped.end(),
               std::back_inserter(all));
    for (std::size_t i = 0; i < n; ++i) CHECK(all[i] == i);
    if (!out.kept.empty() && !out.dropped.empty()) {
        double max_kept = -1e300, min_dropped = 1e300;
        for (std::size_t i : out.kept) max_kept = std::max(max_kept, scores[i]);
        for (std::size_t i : out.dropped) min_dropped = std::min(min_dropped, scores[i]);
        CHECK(max_kept <= min_dropped);
        CHECK(mean_at(scores, out.dropped) >= mean_at(scores, out.kept));
    }
}

}  // namespace

TEST_CASE("prob_cross_entropy: worked values") {
    const std::vector<double> u(4, 0.25);
    CHECK(prob_cross_entropy(u, u) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    const std::vector<double> one{1.0, 0.0};
    CHECK(prob_cross_entropy(one, one) == 0.0);
    const std::vector<double> a{0.5, 0.5}, b{0.9, 0.1};
    CHECK(prob_cross_entropy(a, b) == doctest::Approx(-(0.5 * std::log(0.9) + 0.5 * std::log(0.1))).epsilon(1e-14));
    CHECK(prob_cross_entropy(a, b) == doctest::Approx(1.20397).epsilon(1e-5));
    CHECK_THROWS_AS(prob_cross_entropy(a, u), ContractViolation);
}

TEST_CASE("prob_cross_entropy: clamps zero probabilities, self cross-entropy is entropy") {
    const std::vector<double> p{0.5, 0.5, 0.0}, q{1.0, 0.0, 0.0};
    CHECK(std::isfinite(prob_cross_entropy(p, q)));
    CHECK(prob_cross_entropy(p, q) == doctest::Approx(-0.5 * std::log(1e-12)));

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p2 = softmax(testing::random_vector(6, rng, 3.0));
        double h = 0.0;
        for (double v : p2.values()) h -= v * std::log(v);
        CHECK(std::abs(prob_cross_entropy(p2, p2) - h) <= 1e-9);
        CHECK(prob_cross_entropy(p2, p2) >= 0.0);
    }
}

TEST_CASE("drop_rate") {
    const DropSchedule s{0.25, 10};
    CHECK(drop_rate(10, s) == 0.25);
    CHECK(drop_rate(5, s) == 0.125);
    CHECK(drop_rate(50, s) == 0.25);
    CHECK(drop_rate(1, s) == 0.025);
    CHECK_THROWS_AS(drop_rate(0, s), ContractViolation);
    for (int t = 2; t <= 100; ++t) {
        CHECK(drop_rate(t, s) >= drop_rate(t - 1, s));
        CHECK(drop_rate(t, s) <= 0.25);
        if (t >= 10) CHECK(drop_rate(t, s) == 0.25);
    }
}

TEST_CASE("kept_count: ceiling with float-noise guard") {
    CHECK(kept_count(10, 0.3) == 7);
    CHECK(kept_count(10, 0.25) == 8);
    CHECK(kept_count(2000, 0.25) == 1500);
    CHECK(kept_count(5, 0.0) == 5);
    CHECK(kept_count(100, 0.1 + 0.2) == 70);
}

TEST_CASE("select_global: worked example") {
    const std::vector<double> c{0.1, 0.9, 0.3, 0.8, 0.2};
    const auto out = select_global(c, 0.4);
    CHECK(out.kept == std::vector<std::size_t>{0, 2, 4});
    CHECK(out.dropped == std::vector<std::size_t>{1, 3});
    CHECK(select_global(c, 0.0).kept.size() == 5);
    CHECK_THROWS_AS(select_global(std::vector<double>{}, 0.1), ContractViolation);
}

TEST_CASE("select_global: ties at the cut favour the lower index") {
    const std::vector<double> c{0.5, 0.5, 0.5, 0.1};
    const auto out = select_global(c, 0.5);
    CHECK(out.kept == std::vector<std::size_t>{0, 3});
}

TEST_CASE("select_global and select_by_loss: optimal against exhaustive enumeration") {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<std::size_t> size(1, 12);
    std::uniform_real_distribution<double> rate(0.0, 0.9);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = size(rng);
        const double r = rate(rng);
        std::vector<double> scores = testing::random_vector(n, rng);
        if (trial % 5 == 0)
            for (double& v : scores) v = std::round(v * 2.0) / 2.0;  // force ties
        const std::size_t k = kept_count(n, r);
        const double best = brute_force_min_sum(scores, k);
        for (const auto& out : {select_global(scores, r), select_by_loss(scores, r)}) {
            check_outcome_invariants(out, scores, r);
            CHECK(std::abs(sum_at(scores, out.kept) - best) <= 1e-12);
        }
    }
}

TEST_CASE("select_global: invariant under strictly increasing transforms") {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = testing::random_vector(30, rng);
        std::vector<double> t(s.size());
        std::transform(s.begin(), s.end(), t.begin(), [](double v) { return std::exp(3.0 * v) + 7.0; });
        CHECK(select_global(s, 0.3).kept == select_global(t, 0.3).kept);
    }
}

TEST_CASE("select_minibatch: whole set as one batch equals select_global") {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 50; ++trial) {
        const auto s = testing::random_vector(40, rng);
        std::vector<std::size_t> all(40);
        std::iota(all.begin(), all.end(), std::size_t{0});
        std::shuffle(all.begin(), all.end(), rng);
        const auto a = select_minibatch(s, 0.25, {all});
        const auto b = select_global(s, 0.25);
        CHECK(a.kept == b.kept);
        CHECK(a.dropped == b.dropped);
    }
}

TEST_CASE("select_minibatch: noise concentrated in one batch forces clean drops elsewhere") {
    // Indices 0..4 are noisy (high score) and all sit in batch 1; batch 2 is clean.
    std::vector<double> s{5, 6, 7, 8, 9, 0.1, 0.2, 0.3, 0.4, 0.5};
    const std::vector<std::vector<std::size_t>> partition{{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}};
    const auto mb = select_minibatch(s, 0.4, partition);
    CHECK(mb.kept == std::vector<std::size_t>{0, 1, 2, 5, 6, 7});
    CHECK(mb.dropped == std::vector<std::size_t>{3, 4, 8, 9});
    const auto gl = select_global(s, 0.4);
    CHECK(gl.dropped == std::vector<std::size_t>{1, 2, 3, 4});
}

TEST_CASE("select_minibatch: partition must cover every index once") {
    const std::vector<double> s{1, 2, 3, 4};
    CHECK_THROWS_AS(select_minibatch(s, 0.5, {{0, 1}, {1, 2, 3}}), ContractViolation);
    CHECK_THROWS_AS(select_minibatch(s, 0.5, {{0, 1}, {2}}), ContractViolation);
    std::mt19937_64 rng(4);
    auto batches = std::vector<std::vector<std::size_t>>{{3, 1}, {0, 2}};
    CHECK(select_minibatch(s, 0.0, batches).kept.size() == 4);
}

TEST_CASE("ProbabilityHistory: scores use the two most recent epochs") {
    ProbabilityHistory h(2, 2);
    CHECK_FALSE(h.ready());
    h.push(DenseMatrix(2, 2, {0.9, 0.1, 0.5, 0.5}));
    h.push(DenseMatrix(2, 2, {0.5, 0.5, 0.5, 0.5}));
    CHECK(h.ready());
    auto s = h.scores();
    CHECK(s[0] == doctest::Approx(-(0.5 * std::log(0.9) + 0.5 * std::log(0.1))));
    CHECK(s[1] == doctest::Approx(std::log(2.0)));
    h.push(DenseMatrix(2, 2, {1.0, 0.0, 0.5, 0.5}));
    CHECK(h.recorded() == 3);
    s = h.scores();
    CHECK(s[0] == doctest::Approx(-std::log(0.5)));
    CHECK_THROWS_AS(h.push(DenseMatrix(3, 2, 0.5)), ContractViolation);
    CHECK_THROWS_AS(h.push(DenseMatrix(2, 2, {0.7, 0.7, 0.5, 0.5})), ContractViolation);
}

TEST_CASE("overlap_rate") {
    const std::vector<std::vector<std::size_t>> same(3, {1, 5, 9, 20, 33, 40, 41, 50, 60, 70,
                                                         71, 72, 73, 74, 75, 76, 77, 78, 79, 80});
    CHECK(overlap_rate(same, 0.2, 100) == doctest::Approx(1.0));
    const std::vector<std::vector<std::size_t>> disjoint{{0, 1}, {2, 3}};
    CHECK(overlap_rate(disjoint, 0.1, 20) == 0.0);
    const std::vector<std::vector<std::size_t>> three{{1, 2, 3, 4}, {3, 4, 5, 6}, {2, 3, 4, 7}};
    CHECK(overlap_rate(three, 0.2, 20) == doctest::Approx(0.5));
}

TEST_CASE("overlap_rate: epoch windows") {
    const DropSchedule s{0.2, 2};
    std::map<int, std::vector<std::size_t>> d{
        {3, {1, 2, 3, 4}}, {4, {3, 4, 5, 6}}, {5, {2, 3, 4, 7}}, {6, {3, 8, 9, 10}}};
    CHECK(overlap_rate(d, OverlapMode::Window3, 5, s, 20) == doctest::Approx(0.5));
    CHECK(overlap_rate(d, OverlapMode::AllEpochs, 6, s, 20) == doctest::Approx(0.25));
    CHECK(overlap_rate(d, OverlapMode::Window3, 6, s, 20) == doctest::Approx(0.25));
    CHECK_THROWS_AS(overlap_rate(d, OverlapMode::Window3, 2, s, 20), ContractViolation);
    CHECK_THROWS_AS(overlap_rate(d, OverlapMode::AllEpochs, 7, s, 20), ContractViolation);
}
