#pragma once

// Figure data derived from a finished run: accuracy and overlap trajectories,
// per-provenance score means, batch noise-rate histogram, and how well the
// dropped set and the scores identify noisy samples.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sud/io.hpp"
#include "sud/selection.hpp"
#include "sud/synth.hpp"

namespace sud {

/// Area under the ROC curve of `scores` for separating positives from negatives,
/// larger score meaning "more positive". Ties count one half (average ranks).
/// NaN when either class is empty.
double auroc(std::span<const double> scores, std::span<const char> positive);

struct EpochSelectionLog {
    std::vector<double> prob_ce;  ///< NaN where undefined
    std::vector<double> losses;
    std::vector<char> kept;
};

/// Parsed selection.csv. Samples appear in the order of the first logged epoch.
struct SelectionLog {
    std::vector<std::size_t> sample_ids;
    std::vector<Provenance> provenance;
    std::map<int, EpochSelectionLog> epochs;
};

SelectionLog parse_selection_log(const CsvTable& table);
/// Throws MissingArtifact when the file does not exist.
SelectionLog read_selection_log(const std::filesystem::path& path);

/// epoch,train_acc,val_acc,test_acc,lr,drop_rate
std::string accuracy_table(const CsvTable& epochs);
/// epoch,overlap_all,overlap_window3 recomputed from the logged dropped sets; empty cells
/// where the overlap is undefined (t <= t_k or selection inactive in the window).
std::string overlap_table(const SelectionLog& log, const CsvTable& epochs,
                          const DropSchedule& schedule);
/// epoch and mean prob_ce / loss per provenance group.
std::string score_table(const CsvTable& epochs);

inline constexpr std::size_t kHistogramBins = 24;

/// Noise-rate histogram of full mini-batches over `shuffles` uniform reshuffles, with the
/// hypergeometric expected count per bin: bin_lo,bin_hi,count,expected.
std::string noise_histogram_table(std::span<const Provenance> provenance, std::size_t batch_size,
                                  std::size_t shuffles, std::uint64_t seed);

/// Dropped-set precision/recall and score AUROC against provenance, one row per epoch.
std::string identification_table(const SelectionLog& log);

}  // namespace sud
