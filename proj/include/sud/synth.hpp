#pragma once

// Synthetic fine-grained classification data with controlled close-set and
// open-set label noise, and the per-batch noise-count statistics used to study
// noise-rate imbalance across mini-batches.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sud/tensor.hpp"

namespace sud {

enum class Provenance { Clean, CloseNoise, OpenNoise };

std::string to_string(Provenance p);
/// Accepts "clean", "close", "open"; throws IoError otherwise.
Provenance provenance_from_string(const std::string& s);

struct Sample {
    std::size_t id = 0;
    std::span<const double> features;
    std::size_t label = 0;
    Provenance provenance = Provenance::Clean;
    int true_label = 0;  ///< -1 for open-set noise
};

/// Struct-of-arrays dataset; provenance and true labels are for evaluation only.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::size_t classes, DenseMatrix features, std::vector<std::size_t> labels,
            std::vector<Provenance> provenance, std::vector<int> true_labels,
            std::vector<std::size_t> ids);

    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    std::size_t classes() const noexcept { return classes_; }
    std::size_t feature_dim() const noexcept { return features_.cols(); }

    const DenseMatrix& features() const noexcept { return features_; }
    std::span<const std::size_t> labels() const noexcept { return labels_; }
    std::span<const Provenance> provenance() const noexcept { return provenance_; }
    std::span<const int> true_labels() const noexcept { return true_labels_; }
    std::span<const std::size_t> ids() const noexcept { return ids_; }

    Sample sample(std::size_t i) const;
    std::size_t count(Provenance p) const;
    /// Fraction of samples whose provenance is not clean.
    double noise_rate() const;

    /// Rows `indices` in the given order.
    Dataset subset(std::span<const std::size_t> indices) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::size_t classes_ = 0;
    DenseMatrix features_;
    std::vector<std::size_t> labels_;
    std::vector<Provenance> provenance_;
    std::vector<int> true_labels_;
    std::vector<std::size_t> ids_;
};

struct DatasetSpec {
    std::size_t classes = 20;
    std::size_t input_dim = 16;
    std::size_t train_per_class = 100;  ///< training set size is classes * train_per_class
    std::size_t validation_per_class = 20;
    std::size_t test_per_class = 30;
    double close_rate = 0.0;  ///< fraction of training samples relabeled to the paired class
    double open_rate = 0.0;   ///< fraction of training samples replaced by out-of-class features
    double pair_angle_deg = 15.0;
    double pair_separation_deg = 60.0;  ///< minimum angle between different pairs' axes
    double open_margin_deg = 45.0;      ///< minimum angle from an open-set sample to any center
    double within_class_std = 0.1;
    double radius_min = 0.5;
    double radius_max = 1.5;
    std::uint64_t seed = 0;

    /// Throws ConfigError on invalid values.
    void validate() const;

    friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

nlohmann::json to_json(const DatasetSpec& spec);
/// Fills defaults for absent keys; unknown keys or wrong types throw ConfigError.
DatasetSpec dataset_spec_from_json(const nlohmann::json& j);

struct DatasetBundle {
    DatasetSpec spec;
    Dataset train;
    Dataset validation;
    Dataset test;
    DenseMatrix centers;  ///< unit class-center directions, one row per class
};

/// Deterministic per spec.seed. Throws ConfigError when the class geometry cannot be placed.
DatasetBundle generate(const DatasetSpec& spec);

/// Class sharing the confusable pair with `c`.
std::size_t partner_class(std::size_t c, std::size_t classes);

/// P[k successes in n draws without replacement from N items with K successes], via lgamma.
double hypergeometric_pmf(std::size_t population, std::size_t successes, std::size_t draws,
                          std::size_t k);

struct NoiseRateStats {
    std::size_t dataset_size = 0;
    double dataset_noise_rate = 0.0;
    std::size_t batch_size = 0;
    std::vector<std::size_t> batch_noise_counts;

    double mean_count() const;
    /// Population variance of the per-batch counts.
    double count_variance() const;
    /// Counts of R_i = N_i / N_b in `bins` equal-width bins over [0,1].
    std::vector<std::size_t> rate_histogram(std::size_t bins) const;
};

/// Per-batch noisy-sample counts for a partition of `dataset`. The nominal batch size is the
/// largest batch in the partition.
NoiseRateStats batch_noise_stats(const Dataset& dataset,
                                 const std::vector<std::vector<std::size_t>>& partition);

/// Splits `order` into consecutive batches of `batch_size` (last one may be short).
std::vector<std::vector<std::size_t>> chunk_batches(std::span<const std::size_t> order,
                                                    std::size_t batch_size);

/// Uniform random permutation of 0..n-1 split into batches.
std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size,
                                                       std::mt19937_64& rng);

}  // namespace sud
