#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <nlohmann/json.hpp>

#include "support.hpp"
#include "sud/error.hpp"
#include "sud/io.hpp"
#include "sud/report.hpp"

using namespace sud;
namespace fs = std::filesystem;

namespace {

// Pairwise definition: P[score(pos) > score(neg)] + 0.5 P[tie].
double pairwise_auroc(const std::vector<double>& s, const std::vector<char>& pos) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!pos[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (pos[j]) continue;
            pairs += 1.0;
            wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    return wins / pairs;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("sud_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

TrainResult tiny_run(std::uint64_t seed) {
    DatasetSpec spec;
    spec.classes = 4;
    spec.input_dim = 6;
    spec.train_per_class = 20;
    spec.validation_per_class = 5;
    spec.test_per_class = 5;
    spec.open_rate = 0.2;
    spec.close_rate = 0.1;
    spec.seed = seed;
    TrainConfig cfg;
    cfg.hidden = 6;
    cfg.feature_dim = 4;
    cfg.batch_size = 10;
    cfg.schedule = {0.25, 3};
    cfg.optimizer = {0.05, 0.9, 1, 8};
    cfg.seed = seed;
    return run_training(generate(spec), cfg);
}

}  // namespace

TEST_CASE("format_number and parse_number round trip") {
    std::mt19937_64 rng(1);
    for (double v : testing::random_vector(200, rng, 1e3)) CHECK(parse_number(format_number(v), "t") == v);
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(std::nan("")).empty());
    CHECK(std::isnan(parse_number("", "t")));
    CHECK_THROWS_AS(parse_number("1.5x", "t"), IoError);
}

TEST_CASE("parse_csv: header, rows, ragged input") {
    const auto t = parse_csv("a,b\n1,2\n3,\n", "t");
    CHECK(t.header == std::vector<std::string>{"a", "b"});
    CHECK(t.rows.size() == 2);
    CHECK(t.rows[1][1].empty());
    CHECK(t.column("b") == 1);
    CHECK_THROWS_AS(t.column("c"), IoError);
    CHECK_THROWS_AS(parse_csv("a,b\n1,2,3\n", "t"), IoError);
    CHECK_THROWS_AS(read_csv("/nonexistent/file.csv"), IoError);
}

TEST_CASE("dataset bundle round trip preserves every field") {
    DatasetSpec spec;
    spec.classes = 4;
    spec.input_dim = 5;
    spec.train_per_class = 10;
    spec.open_rate = 0.2;
    spec.close_rate = 0.2;
    spec.seed = 3;
    const auto b = generate(spec);
    const auto dir = scratch("bundle");
    CHECK(write_bundle(dir, b).size() == 4);
    const auto back = read_bundle(dir);
    CHECK(back.spec == b.spec);
    CHECK(back.train == b.train);
    CHECK(back.validation == b.validation);
    CHECK(back.test == b.test);

    fs::remove(dir / kValidationFile);
    CHECK(read_bundle(dir).validation.empty());
    CHECK_THROWS_AS(parse_dataset_csv("sample_id,label,provenance,true_label,f0\n0,9,clean,9,1.0\n", 4, "t"),
                    IoError);
}

TEST_CASE("read_json: parse errors are config errors") {
    const auto dir = scratch("json");
    write_text(dir / "bad.json", "{ not json");
    CHECK_THROWS_AS(read_json(dir / "bad.json"), ConfigError);
    CHECK(dump_json(nlohmann::json{{"b", 1}, {"a", 2}}) == "{\n  \"a\": 2,\n  \"b\": 1\n}\n");
}

TEST_CASE("sha256_hex: known digests") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("auroc: agrees with the pairwise definition") {
    std::mt19937_64 rng(9);
    std::bernoulli_distribution coin(0.3);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = testing::random_vector(60, rng);
        if (trial % 3 == 0)
            for (double& v : s) v = std::round(v);
        std::vector<char> pos(60);
        for (auto& p : pos) p = coin(rng);
        pos[0] = 1;
        pos[1] = 0;
        CHECK(std::abs(auroc(s, pos) - pairwise_auroc(s, pos)) <= 1e-9);
    }
}

TEST_CASE("auroc: perfect, reversed, constant and one-class detectors") {
    const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
    const std::vector<char> pos{0, 0, 1, 1};
    CHECK(auroc(s, pos) == 1.0);
    const std::vector<char> rev{1, 1, 0, 0};
    CHECK(auroc(s, rev) == 0.0);
    CHECK(auroc(std::vector<double>(4, 1.0), pos) == 0.5);
    CHECK(std::isnan(auroc(s, std::vector<char>(4, 0))));
}

TEST_CASE("run artifacts: epochs.csv, selection.csv and summary.json shapes") {
    const auto r = tiny_run(2);
    const auto epochs = parse_csv(epochs_csv(r), "epochs");
    CHECK(epochs.rows.size() == 8);
    CHECK(epochs.header.front() == "epoch");
    CHECK(epochs.rows[0][epochs.column("prob_ce_clean")].empty());
    CHECK_FALSE(epochs.rows[2][epochs.column("prob_ce_clean")].empty());
    CHECK(epochs.rows[2][epochs.column("overlap_all")].empty());
    CHECK_FALSE(epochs.rows[3][epochs.column("overlap_all")].empty());

    const auto sel = parse_csv(selection_csv(r), "selection");
    CHECK(sel.rows.size() == 8 * r.sample_ids.size());
    const auto log = parse_selection_log(sel);
    CHECK(log.sample_ids == r.sample_ids);
    CHECK(log.provenance == r.provenance);
    CHECK(log.epochs.size() == 8);
    for (const auto& e : r.epochs) {
        const auto& le = log.epochs.at(e.epoch);
        for (std::size_t i = 0; i < r.sample_ids.size(); ++i) {
            if (e.prob_ce.empty())
                CHECK(std::isnan(le.prob_ce[i]));
            else
                CHECK(le.prob_ce[i] == e.prob_ce[i]);
            CHECK(le.losses[i] == e.losses[i]);
        }
        std::size_t kept = 0;
        for (char k : le.kept) kept += k != 0;
        CHECK(kept == e.selection.kept.size());
    }

    const auto s = summary_json(r);
    CHECK(s.at("best_epoch") == r.best_epoch);
    CHECK(s.at("train_size") == r.sample_ids.size());
    CHECK(train_config_from_json(s.at("config")).seed == r.config.seed);
}

TEST_CASE("report tables: row counts, overlap recomputation and identification") {
    const auto r = tiny_run(4);
    const auto epochs = parse_csv(epochs_csv(r), "epochs");
    const auto log = parse_selection_log(parse_csv(selection_csv(r), "selection"));

    const auto acc = parse_csv(accuracy_table(epochs), "acc");
    CHECK(acc.rows.size() == r.epochs.size());
    const auto score = parse_csv(score_table(epochs), "score");
    CHECK(score.rows.size() == r.epochs.size());

    const auto ov = parse_csv(overlap_table(log, epochs, r.config.schedule), "ov");
    CHECK(ov.rows.size() == r.epochs.size());
    for (std::size_t i = 0; i < r.epochs.size(); ++i) {
        const auto& e = r.epochs[i];
        const auto& cell = ov.rows[i][ov.column("overlap_window3")];
        if (e.overlap_window3)
            CHECK(parse_number(cell, "ov") == *e.overlap_window3);
        else
            CHECK(cell.empty());
    }

    const auto id = parse_csv(identification_table(log), "id");
    CHECK(id.rows.size() == r.epochs.size());
    CHECK(id.rows[0][id.column("precision_open")].empty());
    CHECK(id.rows[0][id.column("auroc_open_prob_ce")].empty());
    CHECK_FALSE(id.rows[0][id.column("auroc_open_loss")].empty());
    const double prec = parse_number(id.rows.back()[id.column("precision_noise")], "id");
    CHECK(prec >= 0.0);
    CHECK(prec <= 1.0);
}

TEST_CASE("overlap_table: identical dropped sets give overlap one") {
    SelectionLog log;
    const std::size_t n = 8;
    for (std::size_t i = 0; i < n; ++i) {
        log.sample_ids.push_back(i);
        log.provenance.push_back(i < 2 ? Provenance::OpenNoise : Provenance::Clean);
    }
    const DropSchedule sched{0.25, 1};
    std::string epochs_text = "epoch,selection_active,drop_rate\n";
    for (int t = 1; t <= 5; ++t) {
        EpochSelectionLog e;
        e.prob_ce.assign(n, t <= 2 ? std::nan("") : 0.0);
        e.losses.assign(n, 0.0);
        e.kept.assign(n, 1);
        if (t > 2) e.kept[0] = e.kept[1] = 0;
        log.epochs[t] = e;
        epochs_text += std::to_string(t) + (t > 2 ? ",1," : ",0,") + format_number(drop_rate(t, sched)) + "\n";
    }
    const auto ov = parse_csv(overlap_table(log, parse_csv(epochs_text, "e"), sched), "ov");
    CHECK(ov.rows[4][ov.column("overlap_window3")] == "1");
    CHECK(ov.rows[4][ov.column("overlap_all")].empty());
    CHECK(ov.rows[1][ov.column("overlap_window3")].empty());

    const auto id = parse_csv(identification_table(log), "id");
    CHECK(id.rows[4][id.column("precision_open")] == "1");
    CHECK(id.rows[4][id.column("recall_open")] == "1");
}

TEST_CASE("noise_histogram_table: bin count and expected totals") {
    std::vector<Provenance> prov(200, Provenance::Clean);
    for (std::size_t i = 0; i < 40; ++i) prov[i * 5] = Provenance::OpenNoise;
    const auto h = parse_csv(noise_histogram_table(prov, 32, 50, 7), "h");
    CHECK(h.rows.size() == kHistogramBins);
    double count = 0.0, expected = 0.0;
    for (const auto& row : h.rows) {
        count += parse_number(row[h.column("count")], "h");
        expected += parse_number(row[h.column("expected")], "h");
    }
    CHECK(count == 50.0 * 6.0);
    CHECK(std::abs(expected - count) <= 1e-9 * count);
}

TEST_CASE("read_selection_log: missing file") {
    CHECK_THROWS_AS(read_selection_log("/nonexistent/selection.csv"), MissingArtifact);
}
