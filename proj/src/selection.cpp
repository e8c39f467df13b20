#include "sud/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sud/error.hpp"

namespace sud {

double prob_cross_entropy(std::span<const double> p_prev1, std::span<const double> p_prev2) {
    detail::require(p_prev1.size() == p_prev2.size(), "prob_cross_entropy: length mismatch");
    double c = 0.0;
    for (std::size_t j = 0; j < p_prev1.size(); ++j)
        c -= p_prev1[j] * std::log(std::max(p_prev2[j], kLogEpsilon));
    return c;
}

void DropSchedule::validate() const {
    detail::require(max_rate >= 0.0 && max_rate < 1.0, "DropSchedule: tau must be in [0,1)");
    detail::require(ramp_epoch >= 1, "DropSchedule: t_k must be >= 1");
}

double drop_rate(int epoch, const DropSchedule& schedule) {
    detail::require(epoch >= 1, "drop_rate: epoch must be >= 1");
    return schedule.max_rate *
           std::min(static_cast<double>(epoch) / static_cast<double>(schedule.ramp_epoch), 1.0);
}

std::size_t kept_count(std::size_t n, double rate) {
    detail::require(rate >= 0.0 && rate < 1.0, "kept_count: rate must be in [0,1)");
    const double exact = (1.0 - rate) * static_cast<double>(n);
    const auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9));
    return std::min(k, n);
}

SelectionOutcome keep_all(std::size_t n, int epoch) {
    SelectionOutcome out;
    out.epoch = epoch;
    out.kept.resize(n);
    std::iota(out.kept.begin(), out.kept.end(), std::size_t{0});
    return out;
}

namespace {

/// Indices of `members` ordered by (score, index).
std::vector<std::size_t> rank_by_score(std::span<const double> scores,
                                       std::vector<std::size_t> members) {
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] < scores[b];
        return a < b;
    });
    return members;
}

void check_scores(std::span<const double> scores, double rate) {
    detail::require(!scores.empty(), "selection: empty dataset");
    detail::require(rate >= 0.0 && rate < 1.0, "selection: rate must be in [0,1)");
    for (double s : scores) detail::require(std::isfinite(s), "selection: non-finite score");
}

}  // namespace

SelectionOutcome select_global(std::span<const double> scores, double rate, int epoch) {
    check_scores(scores, rate);
    std::vector<std::size_t> all(scores.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto ranked = rank_by_score(scores, std::move(all));
    const std::size_t k = kept_count(scores.size(), rate);

    SelectionOutcome out;
    out.epoch = epoch;
    out.rate = rate;
    out.kept.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k));
    out.dropped.assign(ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end());
    std::sort(out.kept.begin(), out.kept.end());
    std::sort(out.dropped.begin(), out.dropped.end());
    out.scores.assign(scores.begin(), scores.end());
    return out;
}

SelectionOutcome select_by_loss(std::span<const double> losses, double rate, int epoch) {
    return select_global(losses, rate, epoch);
}

SelectionOutcome select_minibatch(std::span<const double> scores, double rate,
                                  const std::vector<std::vector<std::size_t>>& partition,
                                  int epoch) {
    check_scores(scores, rate);
    std::vector<char> seen(scores.size(), 0);
    std::size_t covered = 0;
    for (const auto& batch : partition) {
        for (std::size_t i : batch) {
            detail::require(i < scores.size(), "select_minibatch: index out of range");
            detail::require(!seen[i], "select_minibatch: partition is not disjoint");
            seen[i] = 1;
            ++covered;
        }
    }
    detail::require(covered == scores.size(), "select_minibatch: partition does not cover all");

    SelectionOutcome out;
    out.epoch = epoch;
    out.rate = rate;
    for (const auto& batch : partition) {
        if (batch.empty()) continue;
        const auto ranked = rank_by_score(scores, batch);
        const std::size_t k = kept_count(batch.size(), rate);
        out.kept.insert(out.kept.end(), ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k));
        out.dropped.insert(out.dropped.end(), ranked.begin() + static_cast<std::ptrdiff_t>(k),
                           ranked.end());
    }
    std::sort(out.kept.begin(), out.kept.end());
    std::sort(out.dropped.begin(), out.dropped.end());
    out.scores.assign(scores.begin(), scores.end());
    return out;
}

ProbabilityHistory::ProbabilityHistory(std::size_t samples, std::size_t classes)
    : samples_(samples), classes_(classes), latest_(samples, classes), previous_(samples, classes) {
    detail::require(classes >= 2, "ProbabilityHistory: need at least two classes");
}

void ProbabilityHistory::push(const DenseMatrix& probabilities) {
    detail::require(probabilities.rows() == samples_ && probabilities.cols() == classes_,
                    "ProbabilityHistory: shape mismatch");
    for (std::size_t i = 0; i < samples_; ++i) {
        double sum = 0.0;
        for (double p : probabilities.row(i)) {
            detail::require(p >= 0.0 && p <= 1.0, "ProbabilityHistory: entry outside [0,1]");
            sum += p;
        }
        detail::require(std::abs(sum - 1.0) <= 1e-9, "ProbabilityHistory: row does not sum to 1");
    }
    previous_ = std::move(latest_);
    latest_ = probabilities;
    ++recorded_;
}

std::span<const double> ProbabilityHistory::latest(std::size_t i) const {
    detail::require(recorded_ >= 1 && i < samples_, "ProbabilityHistory: no such entry");
    return latest_.row(i);
}

std::span<const double> ProbabilityHistory::previous(std::size_t i) const {
    detail::require(recorded_ >= 2 && i < samples_, "ProbabilityHistory: no such entry");
    return previous_.row(i);
}

std::vector<double> ProbabilityHistory::scores() const {
    detail::require(ready(), "ProbabilityHistory: need two recorded epochs");
    std::vector<double> out(samples_);
    for (std::size_t i = 0; i < samples_; ++i)
        out[i] = prob_cross_entropy(latest_.row(i), previous_.row(i));
    return out;
}

double overlap_rate(std::span<const std::vector<std::size_t>> dropped_sets, double rate,
                    std::size_t n) {
    detail::require(!dropped_sets.empty(), "overlap_rate: no dropped sets");
    detail::require(rate > 0.0 && n > 0, "overlap_rate: need positive rate and size");
    std::vector<std::size_t> common = dropped_sets.front();
    std::vector<std::size_t> next;
    for (std::size_t s = 1; s < dropped_sets.size(); ++s) {
        next.clear();
        std::set_intersection(common.begin(), common.end(), dropped_sets[s].begin(),
                              dropped_sets[s].end(), std::back_inserter(next));
        common.swap(next);
    }
    return static_cast<double>(common.size()) / (static_cast<double>(n) * rate);
}

double overlap_rate(const std::map<int, std::vector<std::size_t>>& dropped_by_epoch,
                    OverlapMode mode, int epoch, const DropSchedule& schedule, std::size_t n) {
    detail::require(epoch > schedule.ramp_epoch, "overlap_rate: epoch must exceed t_k");
    const int first = mode == OverlapMode::AllEpochs ? schedule.ramp_epoch + 1 : epoch - 2;
    std::vector<std::vector<std::size_t>> sets;
    for (int t = first; t <= epoch; ++t) {
        const auto it = dropped_by_epoch.find(t);
        if (it == dropped_by_epoch.end())
            throw ContractViolation("overlap_rate: no selection recorded for epoch " +
                                    std::to_string(t));
        sets.push_back(it->second);
    }
    return overlap_rate(sets, drop_rate(epoch, schedule), n);
}

}  // namespace sud
