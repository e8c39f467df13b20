#include "sud/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace sud {

namespace fs = std::filesystem;

double auroc(std::span<const double> scores, std::span<const char> positive) {
    detail::require(scores.size() == positive.size(), "auroc: size mismatch");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Mann-Whitney U from average ranks.
    double rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            if (positive[order[k]]) {
                rank_sum += avg_rank;
                ++pos;
            }
        i = j;
    }
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) return std::numeric_limits<double>::quiet_NaN();
    const double p = static_cast<double>(pos);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

SelectionLog parse_selection_log(const CsvTable& t) {
    const std::size_t c_epoch = t.column("epoch"), c_id = t.column("sample_id"),
                      c_pce = t.column("score"), c_loss = t.column("loss"),
                      c_kept = t.column("kept"), c_prov = t.column("true_provenance");
    SelectionLog log;
    std::map<std::size_t, std::size_t> position;
    int first_epoch = 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string ctx = "selection.csv row " + std::to_string(r + 1);
        const double e = parse_number(row[c_epoch], ctx);
        const double id = parse_number(row[c_id], ctx);
        if (!(e >= 1.0) || e != std::floor(e) || !(id >= 0.0) || id != std::floor(id))
            throw IoError(ctx + ": bad epoch or sample id");
        const int epoch = static_cast<int>(e);
        const auto sample = static_cast<std::size_t>(id);
        if (log.epochs.empty()) first_epoch = epoch;
        if (epoch == first_epoch) {
            if (!position.emplace(sample, log.sample_ids.size()).second)
                throw IoError(ctx + ": duplicate sample id");
            log.sample_ids.push_back(sample);
            log.provenance.push_back(provenance_from_string(row[c_prov]));
        }
        auto& ep = log.epochs[epoch];
        const auto it = position.find(sample);
        if (it == position.end()) throw IoError(ctx + ": sample absent from the first epoch");
        const std::size_t n = log.sample_ids.size();
        if (epoch != first_epoch && ep.kept.empty()) {
            ep.prob_ce.assign(n, std::numeric_limits<double>::quiet_NaN());
            ep.losses.assign(n, std::numeric_limits<double>::quiet_NaN());
            ep.kept.assign(n, 2);
        }
        if (epoch == first_epoch) {
            ep.prob_ce.push_back(0.0);
            ep.losses.push_back(0.0);
            ep.kept.push_back(2);
        }
        const std::size_t i = it->second;
        if (ep.kept[i] != 2) throw IoError(ctx + ": duplicate row for sample");
        ep.prob_ce[i] = parse_number(row[c_pce], ctx);
        ep.losses[i] = parse_number(row[c_loss], ctx);
        if (row[c_kept] != "0" && row[c_kept] != "1") throw IoError(ctx + ": kept must be 0 or 1");
        ep.kept[i] = row[c_kept] == "1" ? 1 : 0;
    }
    for (const auto& [epoch, ep] : log.epochs)
        if (ep.kept.size() != log.sample_ids.size() ||
            std::find(ep.kept.begin(), ep.kept.end(), 2) != ep.kept.end())
            throw IoError("selection.csv: epoch " + std::to_string(epoch) +
                          " does not cover every sample");
    return log;
}

SelectionLog read_selection_log(const fs::path& path) {
    if (!fs::exists(path))
        throw MissingArtifact(path.string() +
                              " not found; rerun training with --per-sample-log to record it");
    return parse_selection_log(read_csv(path));
}

namespace {

std::string join(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) out += ',';
        out += cells[k];
    }
    return out + '\n';
}

std::string project(const CsvTable& table, const std::vector<std::string>& columns) {
    std::vector<std::size_t> idx;
    for (const auto& c : columns) idx.push_back(table.column(c));
    std::string out = join(columns);
    for (const auto& row : table.rows) {
        std::vector<std::string> cells;
        for (std::size_t i : idx) cells.push_back(row[i]);
        out += join(cells);
    }
    return out;
}

std::vector<std::size_t> dropped_indices(const EpochSelectionLog& ep) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ep.kept.size(); ++i)
        if (!ep.kept[i]) out.push_back(i);
    return out;
}

}  // namespace

std::string accuracy_table(const CsvTable& epochs) {
    return project(epochs, {"epoch", "train_acc", "val_acc", "test_acc", "lr", "drop_rate"});
}

std::string score_table(const CsvTable& epochs) {
    return project(epochs, {"epoch", "prob_ce_clean", "prob_ce_close", "prob_ce_open", "loss_clean",
                            "loss_close", "loss_open"});
}

std::string overlap_table(const SelectionLog& log, const CsvTable& epochs,
                          const DropSchedule& schedule) {
    const std::size_t c_epoch = epochs.column("epoch"), c_active = epochs.column("selection_active");
    std::map<int, bool> active;
    std::vector<int> order;
    for (const auto& row : epochs.rows) {
        const int t = static_cast<int>(parse_number(row[c_epoch], "epochs.csv"));
        active[t] = row[c_active] == "1";
        order.push_back(t);
    }
    std::map<int, std::vector<std::size_t>> dropped;
    for (const auto& [t, ep] : log.epochs) dropped[t] = dropped_indices(ep);

    const std::size_t n = log.sample_ids.size();
    auto defined = [&](int first, int last) {
        for (int t = first; t <= last; ++t)
            if (!active.contains(t) || !active.at(t) || !dropped.contains(t)) return false;
        return true;
    };
    std::string out = "epoch,overlap_all,overlap_window3\n";
    for (int t : order) {
        std::string all, win;
        if (t > schedule.ramp_epoch && n > 0 && drop_rate(t, schedule) > 0.0) {
            if (defined(schedule.ramp_epoch + 1, t))
                all = format_number(overlap_rate(dropped, OverlapMode::AllEpochs, t, schedule, n));
            if (defined(t - 2, t))
                win = format_number(overlap_rate(dropped, OverlapMode::Window3, t, schedule, n));
        }
        out += std::to_string(t) + ',' + all + ',' + win + '\n';
    }
    return out;
}

std::string noise_histogram_table(std::span<const Provenance> provenance, std::size_t batch_size,
                                  std::size_t shuffles, std::uint64_t seed) {
    const std::size_t n = provenance.size();
    detail::require(batch_size >= 1 && batch_size <= n, "noise_histogram_table: bad batch size");
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> counts(kHistogramBins, 0);
    std::size_t full_batches = 0;
    for (std::size_t s = 0; s < shuffles; ++s) {
        auto batches = shuffled_batches(n, batch_size, rng);
        std::erase_if(batches, [&](const auto& b) { return b.size() != batch_size; });
        full_batches += batches.size();
        NoiseRateStats stats;
        stats.batch_size = batch_size;
        for (const auto& batch : batches) {
            std::size_t noisy = 0;
            for (std::size_t i : batch) noisy += provenance[i] != Provenance::Clean;
            stats.batch_noise_counts.push_back(noisy);
        }
        const auto h = stats.rate_histogram(kHistogramBins);
        for (std::size_t b = 0; b < kHistogramBins; ++b) counts[b] += h[b];
    }

    std::size_t noisy = 0;
    for (Provenance p : provenance) noisy += p != Provenance::Clean;
    std::vector<double> expected(kHistogramBins, 0.0);
    for (std::size_t k = 0; k <= batch_size; ++k) {
        const double r = static_cast<double>(k) / static_cast<double>(batch_size);
        const auto bin = std::min(kHistogramBins - 1,
                                  static_cast<std::size_t>(r * static_cast<double>(kHistogramBins)));
        expected[bin] += static_cast<double>(full_batches) * hypergeometric_pmf(n, noisy, batch_size, k);
    }

    std::string out = "bin_lo,bin_hi,count,expected\n";
    for (std::size_t b = 0; b < kHistogramBins; ++b) {
        const double lo = static_cast<double>(b) / static_cast<double>(kHistogramBins);
        const double hi = static_cast<double>(b + 1) / static_cast<double>(kHistogramBins);
        out += format_number(lo) + ',' + format_number(hi) + ',' + std::to_string(counts[b]) + ',' +
               format_number(expected[b]) + '\n';
    }
    return out;
}

std::string identification_table(const SelectionLog& log) {
    const std::size_t n = log.sample_ids.size();
    std::string out =
        "epoch,dropped,precision_open,recall_open,precision_noise,recall_noise,"
        "auroc_open_prob_ce,auroc_noise_prob_ce,auroc_open_loss,auroc_noise_loss\n";
    std::size_t n_open = 0, n_noise = 0;
    for (Provenance p : log.provenance) {
        n_open += p == Provenance::OpenNoise;
        n_noise += p != Provenance::Clean;
    }
    auto ratio = [](std::size_t a, std::size_t b) {
        return b ? format_number(static_cast<double>(a) / static_cast<double>(b)) : std::string();
    };
    // Open-vs-clean AUROC excludes close-set samples; noise-vs-clean uses every sample.
    auto detector = [&](const std::vector<double>& scores, bool open_only) {
        std::vector<double> s;
        std::vector<char> pos;
        for (std::size_t i = 0; i < n; ++i) {
            const Provenance p = log.provenance[i];
            if (open_only && p == Provenance::CloseNoise) continue;
            if (std::isnan(scores[i])) return std::string();
            s.push_back(scores[i]);
            pos.push_back(p != Provenance::Clean);
        }
        return format_number(auroc(s, pos));
    };
    for (const auto& [t, ep] : log.epochs) {
        std::size_t dropped = 0, open_hit = 0, noise_hit = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (ep.kept[i]) continue;
            ++dropped;
            open_hit += log.provenance[i] == Provenance::OpenNoise;
            noise_hit += log.provenance[i] != Provenance::Clean;
        }
        out += join({std::to_string(t), std::to_string(dropped), ratio(open_hit, dropped),
                     ratio(open_hit, n_open), ratio(noise_hit, dropped), ratio(noise_hit, n_noise),
                     detector(ep.prob_ce, true), detector(ep.prob_ce, false),
                     detector(ep.losses, true), detector(ep.losses, false)});
    }
    return out;
}

}  // namespace sud
