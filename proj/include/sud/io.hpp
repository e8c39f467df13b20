#pragma once

// On-disk formats: dataset CSVs with a dataset_spec.json, run artifacts
// (epochs.csv, selection.csv, summary.json, best_model.json) and checksums.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sud/synth.hpp"
#include "sud/training.hpp"

namespace sud {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of `name` in the header; throws IoError if absent.
    std::size_t column(const std::string& name) const;
};

/// Plain comma-separated values, no quoting. Ragged rows throw IoError.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text, const std::string& origin);

/// Shortest round-trip decimal; NaN becomes an empty cell.
std::string format_number(double v);
/// Inverse of format_number. Throws IoError on malformed text.
double parse_number(const std::string& cell, const std::string& context);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
/// Pretty-printed with sorted keys and a trailing newline.
std::string dump_json(const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// Header `sample_id,label,provenance,true_label,f0..f{d-1}`.
std::string dataset_csv(const Dataset& dataset);
Dataset parse_dataset_csv(const std::string& text, std::size_t classes, const std::string& origin);
Dataset read_dataset_csv(const std::filesystem::path& path, std::size_t classes);

inline constexpr const char* kSpecFile = "dataset_spec.json";
inline constexpr const char* kTrainFile = "train.csv";
inline constexpr const char* kValidationFile = "validation.csv";
inline constexpr const char* kTestFile = "test.csv";

/// Writes the three splits and dataset_spec.json; returns the files written.
std::vector<std::filesystem::path> write_bundle(const std::filesystem::path& dir,
                                                const DatasetBundle& bundle);
/// Missing validation/test files yield empty splits. Class centers are not stored.
DatasetBundle read_bundle(const std::filesystem::path& dir);

/// One row per epoch; undefined values are empty cells.
std::string epochs_csv(const TrainResult& result);
/// One row per (epoch, training sample): epoch,sample_id,score,kept,true_provenance,loss.
/// score is the probability cross-entropy (empty for t <= 2); loss is the start-of-epoch
/// cross-entropy against the assigned label.
std::string selection_csv(const TrainResult& result);
nlohmann::json summary_json(const TrainResult& result);

/// Lowercase hex SHA-256 of the file contents.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(const std::string& bytes);

}  // namespace sud
