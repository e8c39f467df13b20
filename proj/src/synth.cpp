#include "sud/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "json_util.hpp"
#include "sud/error.hpp"

namespace sud {

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::Clean: return "clean";
        case Provenance::CloseNoise: return "close";
        case Provenance::OpenNoise: return "open";
    }
    return "clean";
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "clean") return Provenance::Clean;
    if (s == "close") return Provenance::CloseNoise;
    if (s == "open") return Provenance::OpenNoise;
    throw IoError("unknown provenance tag '" + s + "'");
}

Dataset::Dataset(std::size_t classes, DenseMatrix features, std::vector<std::size_t> labels,
                 std::vector<Provenance> provenance, std::vector<int> true_labels,
                 std::vector<std::size_t> ids)
    : classes_(classes),
      features_(std::move(features)),
      labels_(std::move(labels)),
      provenance_(std::move(provenance)),
      true_labels_(std::move(true_labels)),
      ids_(std::move(ids)) {
    const std::size_t n = labels_.size();
    detail::require(classes_ >= 2, "Dataset: need at least two classes");
    detail::require(features_.rows() == n && provenance_.size() == n && true_labels_.size() == n &&
                        ids_.size() == n,
                    "Dataset: column lengths differ");
    for (std::size_t i = 0; i < n; ++i) {
        detail::require(labels_[i] < classes_, "Dataset: label out of range");
        switch (provenance_[i]) {
            case Provenance::Clean:
                detail::require(true_labels_[i] == static_cast<int>(labels_[i]),
                                "Dataset: clean sample with differing true label");
                break;
            case Provenance::CloseNoise:
                detail::require(true_labels_[i] >= 0 &&
                                    true_labels_[i] < static_cast<int>(classes_) &&
                                    true_labels_[i] != static_cast<int>(labels_[i]),
                                "Dataset: close-set sample needs a different in-range true label");
                break;
            case Provenance::OpenNoise:
                detail::require(true_labels_[i] == -1, "Dataset: open-set sample must have true label -1");
                break;
        }
    }
}

Sample Dataset::sample(std::size_t i) const {
    detail::require(i < size(), "Dataset::sample: index out of range");
    return {ids_[i], features_.row(i), labels_[i], provenance_[i], true_labels_[i]};
}

std::size_t Dataset::count(Provenance p) const {
    return static_cast<std::size_t>(std::count(provenance_.begin(), provenance_.end(), p));
}

double Dataset::noise_rate() const {
    if (empty()) return 0.0;
    return static_cast<double>(size() - count(Provenance::Clean)) / static_cast<double>(size());
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    DenseMatrix feats(indices.size(), feature_dim());
    std::vector<std::size_t> labels, ids;
    std::vector<Provenance> prov;
    std::vector<int> truth;
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t i = indices[r];
        detail::require(i < size(), "Dataset::subset: index out of range");
        std::copy(features_.row(i).begin(), features_.row(i).end(), feats.row(r).begin());
        labels.push_back(labels_[i]);
        prov.push_back(provenance_[i]);
        truth.push_back(true_labels_[i]);
        ids.push_back(ids_[i]);
    }
    return Dataset(classes_, std::move(feats), std::move(labels), std::move(prov), std::move(truth),
                   std::move(ids));
}

void DatasetSpec::validate() const {
    auto check = [](bool ok, const char* msg) {
        if (!ok) throw ConfigError(std::string("dataset: ") + msg);
    };
    check(classes >= 2, "classes must be >= 2");
    check(input_dim >= 2, "input_dim must be >= 2");
    check(train_per_class >= 1, "train_per_class must be >= 1");
    check(close_rate >= 0.0 && close_rate < 1.0, "close_rate must be in [0,1)");
    check(open_rate >= 0.0 && open_rate < 1.0, "open_rate must be in [0,1)");
    check(close_rate + open_rate < 1.0, "close_rate + open_rate must be < 1");
    check(pair_angle_deg > 0.0 && pair_angle_deg < 90.0, "pair_angle_deg must be in (0,90)");
    check(pair_separation_deg > 0.0 && pair_separation_deg <= 90.0,
          "pair_separation_deg must be in (0,90]");
    check(open_margin_deg > 0.0 && open_margin_deg < 90.0, "open_margin_deg must be in (0,90)");
    check(within_class_std >= 0.0, "within_class_std must be >= 0");
    check(radius_min > 0.0 && radius_max >= radius_min, "need 0 < radius_min <= radius_max");
}

nlohmann::json to_json(const DatasetSpec& s) {
    return {{"classes", s.classes},
            {"input_dim", s.input_dim},
            {"train_per_class", s.train_per_class},
            {"validation_per_class", s.validation_per_class},
            {"test_per_class", s.test_per_class},
            {"close_rate", s.close_rate},
            {"open_rate", s.open_rate},
            {"pair_angle_deg", s.pair_angle_deg},
            {"pair_separation_deg", s.pair_separation_deg},
            {"open_margin_deg", s.open_margin_deg},
            {"within_class_std", s.within_class_std},
            {"radius_min", s.radius_min},
            {"radius_max", s.radius_max},
            {"seed", s.seed}};
}

DatasetSpec dataset_spec_from_json(const nlohmann::json& j) {
    DatasetSpec s;
    detail::check_schema(j, to_json(s), "dataset");
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("classes", s.classes);
        get("input_dim", s.input_dim);
        get("train_per_class", s.train_per_class);
        get("validation_per_class", s.validation_per_class);
        get("test_per_class", s.test_per_class);
        get("close_rate", s.close_rate);
        get("open_rate", s.open_rate);
        get("pair_angle_deg", s.pair_angle_deg);
        get("pair_separation_deg", s.pair_separation_deg);
        get("open_margin_deg", s.open_margin_deg);
        get("within_class_std", s.within_class_std);
        get("radius_min", s.radius_min);
        get("radius_max", s.radius_max);
        get("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("dataset: ") + e.what());
    }
    s.validate();
    return s;
}

std::size_t partner_class(std::size_t c, std::size_t classes) {
    detail::require(c < classes && classes >= 2, "partner_class: class out of range");
    if (classes % 2 == 1 && c == classes - 1) return classes - 2;  // unpaired tail class
    return c ^ std::size_t{1};
}

namespace {

constexpr int kMaxRejections = 100000;

double deg_to_rad(double d) { return d * std::numbers::pi / 180.0; }

std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
        std::vector<double> v(dim);
        for (double& x : v) x = normal(rng);
        if (l2_norm(v) > 1e-6) return l2_normalize(v);
    }
}

DenseMatrix place_centers(const DatasetSpec& spec, std::mt19937_64& rng) {
    const std::size_t d = spec.input_dim;
    const std::size_t pairs = (spec.classes + 1) / 2;
    const double max_cos = std::cos(deg_to_rad(spec.pair_separation_deg));

    std::vector<std::vector<double>> axes;
    for (std::size_t k = 0; k < pairs; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < kMaxRejections && !placed; ++attempt) {
            auto u = random_unit(d, rng);
            const bool ok = std::all_of(axes.begin(), axes.end(), [&](const auto& a) {
                return std::abs(dot(a, u)) <= max_cos;
            });
            if (ok) {
                axes.push_back(std::move(u));
                placed = true;
            }
        }
        if (!placed)
            throw ConfigError("dataset: cannot place " + std::to_string(pairs) +
                              " class pairs " + std::to_string(spec.pair_separation_deg) +
                              " degrees apart in " + std::to_string(d) + " dimensions");
    }

    const double half = deg_to_rad(spec.pair_angle_deg) / 2.0;
    DenseMatrix centers(spec.classes, d);
    for (std::size_t k = 0; k < pairs; ++k) {
        const auto& u = axes[k];
        auto v = random_unit(d, rng);
        const double along = dot(v, u);
        for (std::size_t i = 0; i < d; ++i) v[i] -= along * u[i];
        v = l2_normalize(v);
        const std::size_t a = 2 * k;
        const std::size_t b = a + 1;
        if (b < spec.classes) {
            for (std::size_t i = 0; i < d; ++i) {
                centers(a, i) = std::cos(half) * u[i] + std::sin(half) * v[i];
                centers(b, i) = std::cos(half) * u[i] - std::sin(half) * v[i];
            }
        } else {
            for (std::size_t i = 0; i < d; ++i) centers(a, i) = u[i];
        }
    }
    return centers;
}

void draw_around(std::span<const double> direction, const DatasetSpec& spec,
                 std::mt19937_64& rng, std::span<double> out) {
    std::normal_distribution<double> normal(0.0, spec.within_class_std);
    std::uniform_real_distribution<double> radius(spec.radius_min, spec.radius_max);
    const double r = radius(rng);
    for (std::size_t i = 0; i < direction.size(); ++i) out[i] = r * (direction[i] + normal(rng));
}

std::vector<double> open_direction(const DenseMatrix& centers, const DatasetSpec& spec,
                                   std::mt19937_64& rng) {
    const double max_cos = std::cos(deg_to_rad(spec.open_margin_deg));
    for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
        auto u = random_unit(spec.input_dim, rng);
        bool ok = true;
        for (std::size_t c = 0; c < centers.rows() && ok; ++c) ok = dot(centers.row(c), u) < max_cos;
        if (ok) return u;
    }
    throw ConfigError("dataset: no direction satisfies the open-set margin");
}

Dataset clean_split(const DenseMatrix& centers, const DatasetSpec& spec, std::size_t per_class,
                    std::size_t first_id, std::mt19937_64& rng) {
    const std::size_t n = per_class * spec.classes;
    DenseMatrix feats(n, spec.input_dim);
    std::vector<std::size_t> labels(n), ids(n);
    std::vector<int> truth(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i / per_class;
        draw_around(centers.row(c), spec, rng, feats.row(i));
        labels[i] = c;
        truth[i] = static_cast<int>(c);
        ids[i] = first_id + i;
    }
    return Dataset(spec.classes, std::move(feats), std::move(labels),
                   std::vector<Provenance>(n, Provenance::Clean), std::move(truth), std::move(ids));
}

}  // namespace

DatasetBundle generate(const DatasetSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    DatasetBundle bundle;
    bundle.spec = spec;
    bundle.centers = place_centers(spec, rng);

    Dataset clean = clean_split(bundle.centers, spec, spec.train_per_class, 0, rng);
    const std::size_t n = clean.size();
    const auto n_open = static_cast<std::size_t>(std::llround(spec.open_rate * static_cast<double>(n)));
    const auto n_close = static_cast<std::size_t>(std::llround(spec.close_rate * static_cast<double>(n)));
    if (n_open + n_close > n) throw ConfigError("dataset: noise counts exceed training size");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    DenseMatrix feats = clean.features();
    std::vector<std::size_t> labels(clean.labels().begin(), clean.labels().end());
    std::vector<Provenance> prov(n, Provenance::Clean);
    std::vector<int> truth(clean.true_labels().begin(), clean.true_labels().end());
    for (std::size_t r = 0; r < n_open; ++r) {
        const std::size_t i = order[r];
        const auto dir = open_direction(bundle.centers, spec, rng);
        draw_around(dir, spec, rng, feats.row(i));
        prov[i] = Provenance::OpenNoise;
        truth[i] = -1;
    }
    for (std::size_t r = n_open; r < n_open + n_close; ++r) {
        const std::size_t i = order[r];
        labels[i] = partner_class(labels[i], spec.classes);
        prov[i] = Provenance::CloseNoise;
    }
    bundle.train = Dataset(spec.classes, std::move(feats), std::move(labels), std::move(prov),
                           std::move(truth), std::vector<std::size_t>(clean.ids().begin(), clean.ids().end()));
    bundle.validation = clean_split(bundle.centers, spec, spec.validation_per_class, n, rng);
    bundle.test = clean_split(bundle.centers, spec, spec.test_per_class, n + bundle.validation.size(), rng);
    return bundle;
}

double hypergeometric_pmf(std::size_t population, std::size_t successes, std::size_t draws,
                          std::size_t k) {
    detail::require(successes <= population && draws <= population,
                    "hypergeometric_pmf: need K <= N and n <= N");
    if (k > successes || k > draws || draws - k > population - successes) return 0.0;
    auto log_choose = [](double n, double r) {
        return std::lgamma(n + 1.0) - std::lgamma(r + 1.0) - std::lgamma(n - r + 1.0);
    };
    const auto N = static_cast<double>(population);
    const auto K = static_cast<double>(successes);
    const auto n = static_cast<double>(draws);
    const auto kk = static_cast<double>(k);
    return std::exp(log_choose(K, kk) + log_choose(N - K, n - kk) - log_choose(N, n));
}

double NoiseRateStats::mean_count() const {
    if (batch_noise_counts.empty()) return 0.0;
    double s = 0.0;
    for (auto c : batch_noise_counts) s += static_cast<double>(c);
    return s / static_cast<double>(batch_noise_counts.size());
}

double NoiseRateStats::count_variance() const {
    if (batch_noise_counts.empty()) return 0.0;
    const double m = mean_count();
    double s = 0.0;
    for (auto c : batch_noise_counts) s += (static_cast<double>(c) - m) * (static_cast<double>(c) - m);
    return s / static_cast<double>(batch_noise_counts.size());
}

std::vector<std::size_t> NoiseRateStats::rate_histogram(std::size_t bins) const {
    detail::require(bins >= 1 && batch_size > 0, "rate_histogram: need bins and a batch size");
    std::vector<std::size_t> hist(bins, 0);
    for (auto c : batch_noise_counts) {
        const double rate = static_cast<double>(c) / static_cast<double>(batch_size);
        const auto b = std::min(bins - 1, static_cast<std::size_t>(rate * static_cast<double>(bins)));
        ++hist[b];
    }
    return hist;
}

NoiseRateStats batch_noise_stats(const Dataset& dataset,
                                 const std::vector<std::vector<std::size_t>>& partition) {
    NoiseRateStats st;
    st.dataset_size = dataset.size();
    st.dataset_noise_rate = dataset.noise_rate();
    const auto prov = dataset.provenance();
    for (const auto& batch : partition) {
        std::size_t noisy = 0;
        for (std::size_t i : batch) {
            detail::require(i < dataset.size(), "batch_noise_stats: index out of range");
            if (prov[i] != Provenance::Clean) ++noisy;
        }
        st.batch_size = std::max(st.batch_size, batch.size());
        st.batch_noise_counts.push_back(noisy);
    }
    return st;
}

std::vector<std::vector<std::size_t>> chunk_batches(std::span<const std::size_t> order,
                                                    std::size_t batch_size) {
    detail::require(batch_size >= 1, "chunk_batches: batch size must be >= 1");
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size,
                                                       std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    return chunk_batches(order, batch_size);
}

}  // namespace sud
