#pragma once

// Denoising: probability cross-entropy scores from a two-epoch probability
// history, the ramped drop-rate schedule, global and per-mini-batch selection,
// and the overlap-rate stability metric.

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "sud/tensor.hpp"

namespace sud {

/// Clamp applied to probabilities before taking their log in prob_cross_entropy.
inline constexpr double kLogEpsilon = 1e-12;

/// C = -sum_j p_prev1[j] * log(max(p_prev2[j], kLogEpsilon)).
double prob_cross_entropy(std::span<const double> p_prev1, std::span<const double> p_prev2);

struct DropSchedule {
    double max_rate = 0.25;  ///< tau, in [0,1)
    int ramp_epoch = 10;     ///< t_k, >= 1

    void validate() const;
};

/// r(t) = tau * min(t / t_k, 1). Requires t >= 1.
double drop_rate(int epoch, const DropSchedule& schedule);

/// ceil((1 - r) * n), robust to floating-point noise in the product.
std::size_t kept_count(std::size_t n, double rate);

struct SelectionOutcome {
    int epoch = 0;
    double rate = 0.0;
    std::vector<std::size_t> kept;     ///< ascending sample indices
    std::vector<std::size_t> dropped;  ///< ascending sample indices
    std::vector<double> scores;        ///< per-sample score used by the selector (may be empty)
};

/// Every sample kept; used before scores exist (t <= 2) and by the no-correction pipeline.
SelectionOutcome keep_all(std::size_t n, int epoch = 0);

/// Keeps the kept_count(N, r) smallest scores; ties at the cut go to the lower index.
SelectionOutcome select_global(std::span<const double> scores, double rate, int epoch = 0);

/// Same contract as select_global, scored by current per-sample loss.
SelectionOutcome select_by_loss(std::span<const double> losses, double rate, int epoch = 0);

/// Applies the global rule independently inside each batch; `partition` must cover
/// every index exactly once.
SelectionOutcome select_minibatch(std::span<const double> scores, double rate,
                                  const std::vector<std::vector<std::size_t>>& partition,
                                  int epoch = 0);

/// Per-sample softmax outputs of the two most recent epochs.
class ProbabilityHistory {
public:
    ProbabilityHistory(std::size_t samples, std::size_t classes);

    std::size_t samples() const noexcept { return samples_; }
    std::size_t classes() const noexcept { return classes_; }
    /// Number of epochs recorded so far (not capped at two).
    int recorded() const noexcept { return recorded_; }
    /// True once two epochs are stored.
    bool ready() const noexcept { return recorded_ >= 2; }

    /// Appends one epoch of probabilities (samples x classes); the oldest epoch is discarded.
    void push(const DenseMatrix& probabilities);

    /// Most recent and second most recent stored distributions of sample i.
    std::span<const double> latest(std::size_t i) const;
    std::span<const double> previous(std::size_t i) const;

    /// prob_cross_entropy(latest, previous) per sample. Requires ready().
    std::vector<double> scores() const;

private:
    std::size_t samples_;
    std::size_t classes_;
    int recorded_ = 0;
    DenseMatrix latest_;
    DenseMatrix previous_;
};

enum class OverlapMode { AllEpochs, Window3 };

/// |intersection of sets| / (n * rate). Sets must be sorted ascending.
double overlap_rate(std::span<const std::vector<std::size_t>> dropped_sets, double rate,
                    std::size_t n);

/// Overlap at epoch t > t_k over `dropped_by_epoch`: AllEpochs intersects epochs t_k+1..t,
/// Window3 intersects t-2..t. Throws ContractViolation if a needed epoch is missing.
double overlap_rate(const std::map<int, std::vector<std::size_t>>& dropped_by_epoch,
                    OverlapMode mode, int epoch, const DropSchedule& schedule, std::size_t n);

}  // namespace sud
