#include "tradegraph/data.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace tradegraph {

namespace {

constexpr std::array<const char*, 14> kCategories{
    "entertainment", "food_dining", "gas_transport", "grocery_net", "grocery_pos",
    "health_fitness", "home",       "kids_pets",     "misc_net",    "misc_pos",
    "personal_care", "shopping_net", "shopping_pos", "travel"};
constexpr std::array<const char*, 3> kFraudCategories{"shopping_net", "grocery_pos", "misc_net"};

// Offset applied to fraud signals along the dimension shared by every region.
constexpr double kSharedSignal = 1.0;
constexpr double kFraudLogAmountShift = 1.0;
constexpr double kFraudInSliceProbability = 0.6;
constexpr double kCompromisedCardProbability = 0.7;

RegionSpec region_box(int k) {
    const auto standard = standard_regions();
    if (k < static_cast<int>(standard.size())) return standard[static_cast<std::size_t>(k)];
    // Extra boxes west of the standard five, stepping 5 degrees.
    const double west = 100.0 + 5.0 * (k - static_cast<int>(standard.size()));
    return {k + 1, 30, 40, west, west + 5};
}

void civil_from_days(int days_since_2019, int& y, int& m, int& d) {
    y = 2019;
    m = 1;
    d = 1 + days_since_2019;
    auto dim = [](int yy, int mm) {
        static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        const bool leap = (yy % 4 == 0 && yy % 100 != 0) || yy % 400 == 0;
        return mm == 2 && leap ? 29 : kDays[mm - 1];
    };
    while (d > dim(y, m)) {
        d -= dim(y, m);
        if (++m > 12) {
            m = 1;
            ++y;
        }
    }
}

} // namespace

void SyntheticConfig::validate() const {
    if (n_regions <= 0) throw ConfigError("n_regions", "must be positive");
    if (txns_per_region <= 0) throw ConfigError("txns_per_region", "must be positive");
    if (n_card_holders <= 0) throw ConfigError("n_card_holders", "must be positive");
    if (n_merchants <= 0) throw ConfigError("n_merchants", "must be positive");
    if (!(fraud_rate > 0.0 && fraud_rate < 1.0)) throw ConfigError("fraud_rate", "must lie in (0, 1)");
    for (int h : fraud_time_slices)
        if (h < 0 || h > 23) throw ConfigError("fraud_time_slices", "hours must lie in [0, 23]");
    if (!(region_shift_strength >= 0.0) || !std::isfinite(region_shift_strength))
        throw ConfigError("region_shift_strength", "must be a nonnegative number");
    if (!(signal_strength >= 0.0) || !std::isfinite(signal_strength))
        throw ConfigError("signal_strength", "must be a nonnegative number");
}

std::vector<Dataset> generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    const std::vector<int> slices(cfg.fraud_time_slices.begin(), cfg.fraud_time_slices.end());
    const int compromised = std::max(1, cfg.n_card_holders / 10);

    std::vector<Dataset> out;
    out.reserve(static_cast<std::size_t>(cfg.n_regions));
    for (int k = 0; k < cfg.n_regions; ++k) {
        std::mt19937_64 rng(derive_seed(cfg.seed, "synthetic/region/" + std::to_string(k)));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);
        auto pick = [&](int n) { return static_cast<int>(std::floor(unit(rng) * n)) % n; };

        const RegionSpec box = region_box(k);
        const double angle = k * cfg.region_shift_strength;
        const std::array<double, kLatentSignalCount> fraud_mean{
            cfg.signal_strength * std::cos(angle), cfg.signal_strength * std::sin(angle), kSharedSignal};
        const std::string prefix = "r" + std::to_string(k + 1);

        Dataset ds;
        ds.provenance = Provenance::synthetic;
        ds.seed = cfg.seed;
        ds.records.reserve(static_cast<std::size_t>(cfg.txns_per_region));
        for (int t = 0; t < cfg.txns_per_region; ++t) {
            TransactionRecord r;
            r.label = unit(rng) < cfg.fraud_rate ? 1 : 0;
            const bool fraud = r.label == 1;

            int hour = pick(24);
            if (fraud && !slices.empty() && unit(rng) < kFraudInSliceProbability)
                hour = slices[static_cast<std::size_t>(pick(static_cast<int>(slices.size())))];
            int y = 0, m = 0, d = 0;
            civil_from_days(pick(731), y, m, d);
            r.timestamp = Timestamp{y, m, d, hour, pick(60), pick(60)};

            int card = pick(cfg.n_card_holders);
            if (fraud && unit(rng) < kCompromisedCardProbability) card = pick(compromised);
            char id[64];
            std::snprintf(id, sizeof(id), "%s-%06d", prefix.c_str(), t);
            r.txn_id = id;
            r.card_holder_id = prefix + "-c" + std::to_string(card);
            r.merchant_id = prefix + "-m" + std::to_string(pick(cfg.n_merchants));

            r.category = kCategories[static_cast<std::size_t>(pick(static_cast<int>(kCategories.size())))];
            if (fraud && unit(rng) < 0.5)
                r.category = kFraudCategories[static_cast<std::size_t>(pick(static_cast<int>(kFraudCategories.size())))];

            const double log_amount = 3.5 + (fraud ? kFraudLogAmountShift : 0.0) + 0.8 * normal(rng);
            r.amount = std::round(std::exp(log_amount) * 100.0) / 100.0;

            r.latitude = box.lat_min + (box.lat_max - box.lat_min) * unit(rng);
            r.longitude = -(box.lon_west_min + (box.lon_west_max - box.lon_west_min) * unit(rng));

            for (std::size_t s = 0; s < kLatentSignalCount; ++s)
                r.signals[s] = normal(rng) + (fraud ? fraud_mean[s] : 0.0);
            ds.records.push_back(std::move(r));
        }
        out.push_back(std::move(ds));
    }
    return out;
}

} // namespace tradegraph
