#include "sud/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace sud {

namespace fs = std::filesystem;

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw IoError("csv: missing column '" + name + "'");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.push_back(line.substr(start));
            return cells;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

template <typename T>
T parse_integer(const std::string& cell, const std::string& context) {
    T v{};
    const auto* end = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
    if (ec != std::errc{} || ptr != end || cell.empty())
        throw IoError(context + ": expected an integer, got '" + cell + "'");
    return v;
}

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& origin) {
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (table.header.empty()) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size())
            throw IoError(origin + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(table.header.size()) + " fields, got " +
                          std::to_string(cells.size()));
        table.rows.push_back(std::move(cells));
    }
    if (table.header.empty()) throw IoError(origin + ": empty file");
    return table;
}

CsvTable read_csv(const fs::path& path) { return parse_csv(read_text(path), path.string()); }

std::string format_number(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw IoError("format_number: conversion failed");
    return std::string(buf, ptr);
}

double parse_number(const std::string& cell, const std::string& context) {
    if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto* end = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
    if (ec != std::errc{} || ptr != end)
        throw IoError(context + ": expected a number, got '" + cell + "'");
    return v;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.close();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

nlohmann::json read_json(const fs::path& path) {
    const std::string text = read_text(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string dataset_csv(const Dataset& d) {
    std::string out = "sample_id,label,provenance,true_label";
    for (std::size_t k = 0; k < d.feature_dim(); ++k) out += ",f" + std::to_string(k);
    out += '\n';
    for (std::size_t i = 0; i < d.size(); ++i) {
        out += std::to_string(d.ids()[i]) + ',' + std::to_string(d.labels()[i]) + ',' +
               to_string(d.provenance()[i]) + ',' + std::to_string(d.true_labels()[i]);
        for (double v : d.features().row(i)) out += ',' + format_number(v);
        out += '\n';
    }
    return out;
}

Dataset parse_dataset_csv(const std::string& text, std::size_t classes, const std::string& origin) {
    const CsvTable t = parse_csv(text, origin);
    const std::vector<std::string> fixed = {"sample_id", "label", "provenance", "true_label"};
    if (t.header.size() < fixed.size() ||
        !std::equal(fixed.begin(), fixed.end(), t.header.begin()))
        throw IoError(origin + ": header must start with sample_id,label,provenance,true_label");
    if (t.header.size() == fixed.size()) {
        if (!t.rows.empty()) throw IoError(origin + ": no feature columns");
        return {};
    }
    const std::size_t d = t.header.size() - fixed.size();
    for (std::size_t k = 0; k < d; ++k)
        if (t.header[fixed.size() + k] != "f" + std::to_string(k))
            throw IoError(origin + ": feature column " + std::to_string(k) + " must be named f" +
                          std::to_string(k));

    const std::size_t n = t.rows.size();
    DenseMatrix feats(n, d);
    std::vector<std::size_t> labels(n), ids(n);
    std::vector<Provenance> prov(n);
    std::vector<int> truth(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = t.rows[i];
        const std::string ctx = origin + " row " + std::to_string(i + 1);
        ids[i] = parse_integer<std::size_t>(r[0], ctx);
        labels[i] = parse_integer<std::size_t>(r[1], ctx);
        prov[i] = provenance_from_string(r[2]);
        truth[i] = parse_integer<int>(r[3], ctx);
        if (labels[i] >= classes) throw IoError(ctx + ": label out of range");
        for (std::size_t k = 0; k < d; ++k) {
            const double v = parse_number(r[fixed.size() + k], ctx);
            if (!std::isfinite(v)) throw IoError(ctx + ": non-finite feature");
            feats(i, k) = v;
        }
    }
    try {
        return Dataset(classes, std::move(feats), std::move(labels), std::move(prov),
                       std::move(truth), std::move(ids));
    } catch (const ContractViolation& e) {
        throw IoError(origin + ": " + e.what());
    }
}

Dataset read_dataset_csv(const fs::path& path, std::size_t classes) {
    return parse_dataset_csv(read_text(path), classes, path.string());
}

std::vector<fs::path> write_bundle(const fs::path& dir, const DatasetBundle& bundle) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    const std::vector<fs::path> files = {dir / kSpecFile, dir / kTrainFile, dir / kValidationFile,
                                         dir / kTestFile};
    write_text(files[0], dump_json(to_json(bundle.spec)));
    write_text(files[1], dataset_csv(bundle.train));
    write_text(files[2], dataset_csv(bundle.validation));
    write_text(files[3], dataset_csv(bundle.test));
    return files;
}

DatasetBundle read_bundle(const fs::path& dir) {
    DatasetBundle b;
    b.spec = dataset_spec_from_json(read_json(dir / kSpecFile));
    b.train = read_dataset_csv(dir / kTrainFile, b.spec.classes);
    if (fs::exists(dir / kValidationFile))
        b.validation = read_dataset_csv(dir / kValidationFile, b.spec.classes);
    if (fs::exists(dir / kTestFile)) b.test = read_dataset_csv(dir / kTestFile, b.spec.classes);
    if (b.train.empty()) throw IoError(dir.string() + ": training split is empty");
    return b;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

}  // namespace

std::string epochs_csv(const TrainResult& r) {
    std::string out =
        "epoch,lr,drop_rate,selection_active,kept,dropped,train_loss,train_acc,val_acc,test_acc,"
        "prob_ce_clean,prob_ce_close,prob_ce_open,loss_clean,loss_close,loss_open,"
        "overlap_all,overlap_window3\n";
    for (const auto& e : r.epochs) {
        const std::vector<std::string> cells = {
            std::to_string(e.epoch),
            format_number(e.lr),
            format_number(e.drop_rate),
            e.selection_active ? "1" : "0",
            std::to_string(e.selection.kept.size()),
            std::to_string(e.selection.dropped.size()),
            format_number(e.train_loss),
            format_number(e.train_acc),
            format_number(e.val_acc),
            format_number(e.test_acc),
            format_number(e.mean_prob_ce.clean),
            format_number(e.mean_prob_ce.close),
            format_number(e.mean_prob_ce.open),
            format_number(e.mean_loss.clean),
            format_number(e.mean_loss.close),
            format_number(e.mean_loss.open),
            opt(e.overlap_all),
            opt(e.overlap_window3)};
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (k) out += ',';
            out += cells[k];
        }
        out += '\n';
    }
    return out;
}

std::string selection_csv(const TrainResult& r) {
    std::string out = "epoch,sample_id,score,kept,true_provenance,loss\n";
    const std::size_t n = r.sample_ids.size();
    for (const auto& e : r.epochs) {
        std::vector<char> kept(n, 0);
        for (std::size_t i : e.selection.kept) kept[i] = 1;
        const std::string epoch = std::to_string(e.epoch) + ',';
        for (std::size_t i = 0; i < n; ++i) {
            out += epoch;
            out += std::to_string(r.sample_ids[i]);
            out += ',';
            if (!e.prob_ce.empty()) out += format_number(e.prob_ce[i]);
            out += kept[i] ? ",1," : ",0,";
            out += to_string(r.provenance[i]);
            out += ',';
            if (!e.losses.empty()) out += format_number(e.losses[i]);
            out += '\n';
        }
    }
    return out;
}

nlohmann::json summary_json(const TrainResult& r) {
    auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
    std::size_t close = 0, open = 0;
    for (Provenance p : r.provenance) {
        if (p == Provenance::CloseNoise) ++close;
        if (p == Provenance::OpenNoise) ++open;
    }
    const EpochRecord* last = r.epochs.empty() ? nullptr : &r.epochs.back();
    return {{"config", to_json(r.config)},
            {"seed", r.config.seed},
            {"strategy", to_string(r.config.strategy)},
            {"epochs", r.epochs.size()},
            {"train_size", r.sample_ids.size()},
            {"train_close_noise", close},
            {"train_open_noise", open},
            {"best_epoch", r.best_epoch},
            {"best_val_acc", num(r.best_val_acc)},
            {"best_train_acc", num(r.best_train_acc)},
            {"best_test_acc", num(r.best_test_acc)},
            {"final_val_acc", num(last ? last->val_acc : std::nan(""))},
            {"final_test_acc", num(last ? last->test_acc : std::nan(""))}};
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("sha256: digest failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[md[i] >> 4];
        out += kHex[md[i] & 0xF];
    }
    return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

}  // namespace sud
