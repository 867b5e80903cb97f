#include "tradegraph/data.hpp"

#include "tradegraph/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_set>

namespace tradegraph {

std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) {
    // FNV-1a over the tag, then a splitmix64 finalizer over the mix.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (h | 1ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Timestamp

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

bool read_fixed(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
        v = v * 10 + (s[i] - '0');
    }
    out = v;
    return true;
}

} // namespace

Timestamp Timestamp::parse(std::string_view text) {
    while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);

    Timestamp t;
    const bool shape = (text.size() == 19 || text.size() == 16) && text[4] == '-' && text[7] == '-' &&
                       (text[10] == ' ' || text[10] == 'T') && text[13] == ':' &&
                       (text.size() == 16 || text[16] == ':');
    bool ok = shape && read_fixed(text, 0, 4, t.year) && read_fixed(text, 5, 2, t.month) &&
              read_fixed(text, 8, 2, t.day) && read_fixed(text, 11, 2, t.hour) &&
              read_fixed(text, 14, 2, t.minute);
    if (ok && text.size() == 19) ok = read_fixed(text, 17, 2, t.second);
    ok = ok && t.month >= 1 && t.month <= 12 && t.day >= 1 && t.day <= days_in_month(t.year, t.month) &&
         t.hour <= 23 && t.minute <= 59 && t.second <= 59;
    if (!ok) throw Error("unparsable timestamp '" + std::string(text) + "'");
    return t;
}

std::string Timestamp::to_string() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d", year, month, day, hour, minute, second);
    return buf;
}

// ---------------------------------------------------------------------------
// Features

double category_score(std::string_view category) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : category) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return static_cast<double>(h % 1024) / 1024.0;
}

std::array<double, kFeatureWidth> transaction_features(const TransactionRecord& r) {
    constexpr double kTwoPi = 6.283185307179586;
    const double phase = kTwoPi * r.timestamp.hour_of_day() / 24.0;
    std::array<double, kFeatureWidth> f{};
    f[0] = r.amount / 100.0;
    f[1] = std::log1p(r.amount);
    f[2] = category_score(r.category);
    f[3] = std::sin(phase);
    f[4] = std::cos(phase);
    for (std::size_t k = 0; k < kLatentSignalCount; ++k) f[5 + k] = r.signals[k];
    return f;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> canonical_header() {
    ColumnMapping c;
    std::vector<std::string> h{c.txn_id,   c.card_holder_id, c.merchant_id, c.timestamp, c.amount,
                               c.category, c.latitude,       c.longitude,   c.label};
    for (const auto& s : c.signals) h.push_back(s);
    return h;
}

} // namespace

Dataset parse_transactions_csv(std::istream& in, const ColumnMapping& schema) {
    std::size_t line = 0;
    auto header = csv::read_record(in, line);
    if (!header) throw SchemaError("empty input: missing header row");
    for (auto& h : *header) {
        while (!h.empty() && (h.back() == ' ' || h.back() == '\r')) h.pop_back();
        while (!h.empty() && h.front() == ' ') h.erase(h.begin());
    }
    // Strip a UTF-8 byte order mark.
    if (!header->empty() && header->front().rfind("\xEF\xBB\xBF", 0) == 0) header->front().erase(0, 3);

    auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
        if (name.empty()) {
            if (required) throw SchemaError("column mapping has an empty name for a required field");
            return std::nullopt;
        }
        auto it = std::find(header->begin(), header->end(), name);
        if (it == header->end()) {
            if (required) throw SchemaError("missing column '" + name + "'");
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - header->begin());
    };

    const std::size_t c_id = *column(schema.txn_id, true);
    const std::size_t c_card = *column(schema.card_holder_id, true);
    const std::size_t c_merchant = *column(schema.merchant_id, true);
    const std::size_t c_time = *column(schema.timestamp, true);
    const std::size_t c_amount = *column(schema.amount, true);
    const std::size_t c_category = *column(schema.category, true);
    const std::size_t c_lat = *column(schema.latitude, true);
    const std::size_t c_lon = *column(schema.longitude, true);
    const std::size_t c_label = *column(schema.label, true);
    std::array<std::optional<std::size_t>, kLatentSignalCount> c_signal;
    for (std::size_t k = 0; k < kLatentSignalCount; ++k) c_signal[k] = column(schema.signals[k], schema.signals_required);

    Dataset ds;
    ds.provenance = Provenance::ingested;
    std::unordered_set<std::string> seen;

    while (auto row = csv::read_record(in, line)) {
        if (row->size() == 1 && (*row)[0].empty()) continue; // blank line
        if (row->size() != header->size())
            throw RowError(line, "expected " + std::to_string(header->size()) + " fields, found " +
                                     std::to_string(row->size()));
        const auto& f = *row;
        auto number = [&](std::size_t col, const char* what) {
            auto v = csv::parse_double(f[col]);
            if (!v || !std::isfinite(*v))
                throw RowError(line, std::string("unparsable ") + what + " '" + f[col] + "'");
            return *v;
        };

        TransactionRecord r;
        r.txn_id = f[c_id];
        r.card_holder_id = f[c_card];
        r.merchant_id = f[c_merchant];
        try {
            r.timestamp = Timestamp::parse(f[c_time]);
        } catch (const Error& e) {
            throw RowError(line, e.what());
        }
        r.amount = number(c_amount, "amount");
        r.category = f[c_category];
        r.latitude = number(c_lat, "latitude");
        r.longitude = number(c_lon, "longitude");
        const auto label = csv::parse_int(f[c_label]);
        if (!label || (*label != 0 && *label != 1)) throw RowError(line, "label must be 0 or 1, got '" + f[c_label] + "'");
        r.label = static_cast<int>(*label);
        for (std::size_t k = 0; k < kLatentSignalCount; ++k)
            r.signals[k] = c_signal[k] ? number(*c_signal[k], "signal") : 0.0;

        if (r.txn_id.empty()) throw RowError(line, "empty txn_id");
        if (r.amount < 0) throw RowError(line, "negative amount");
        if (r.latitude < -90 || r.latitude > 90 || r.longitude < -180 || r.longitude > 180)
            throw RowError(line, "coordinates out of range");
        if (!seen.insert(r.txn_id).second)
            throw DuplicateError("line " + std::to_string(line) + ": duplicate txn_id '" + r.txn_id + "'");
        ds.records.push_back(std::move(r));
    }
    return ds;
}

Dataset parse_transactions_csv(const std::filesystem::path& path, const ColumnMapping& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return parse_transactions_csv(in, schema);
}

void write_transactions_csv(std::ostream& out, const Dataset& ds) {
    csv::write_record(out, canonical_header());
    for (const auto& r : ds.records) {
        std::vector<std::string> f{r.txn_id,
                                   r.card_holder_id,
                                   r.merchant_id,
                                   r.timestamp.to_string(),
                                   csv::format_double(r.amount),
                                   r.category,
                                   csv::format_double(r.latitude),
                                   csv::format_double(r.longitude),
                                   std::to_string(r.label)};
        for (double s : r.signals) f.push_back(csv::format_double(s));
        csv::write_record(out, f);
    }
}

void write_transactions_csv(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    write_transactions_csv(out, ds);
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void validate_dataset(const Dataset& ds) {
    std::unordered_set<std::string> seen;
    for (const auto& r : ds.records) {
        if (!seen.insert(r.txn_id).second) throw DuplicateError("duplicate txn_id '" + r.txn_id + "'");
        if (!(r.amount >= 0)) throw Error("txn " + r.txn_id + ": negative amount");
        if (!(r.latitude >= -90 && r.latitude <= 90 && r.longitude >= -180 && r.longitude <= 180))
            throw Error("txn " + r.txn_id + ": coordinates out of range");
        if (r.label != 0 && r.label != 1) throw Error("txn " + r.txn_id + ": label must be 0 or 1");
    }
}

// ---------------------------------------------------------------------------
// Regions

bool RegionSpec::contains(double latitude, double longitude) const {
    const double west = -longitude;
    return latitude >= lat_min && latitude < lat_max && west >= lon_west_min && west < lon_west_max;
}

std::vector<RegionSpec> standard_regions() {
    return {
        {1, 30, 40, 95, 100},
        {2, 40, 50, 75, 80},
        {3, 30, 40, 75, 80},
        {4, 40, 50, 95, 100},
        {5, 30, 40, 90, 95},
    };
}

void validate_regions(std::span<const RegionSpec> regions) {
    for (std::size_t a = 0; a < regions.size(); ++a) {
        const auto& r = regions[a];
        if (!(r.lat_min < r.lat_max) || !(r.lon_west_min < r.lon_west_max))
            throw ConfigError("region " + std::to_string(r.region_id), "min must be below max on both axes");
        for (std::size_t b = 0; b < a; ++b) {
            const auto& o = regions[b];
            if (o.region_id == r.region_id)
                throw ConfigError("region " + std::to_string(r.region_id), "duplicate region id");
            const bool lat_overlap = r.lat_min < o.lat_max && o.lat_min < r.lat_max;
            const bool lon_overlap = r.lon_west_min < o.lon_west_max && o.lon_west_min < r.lon_west_max;
            if (lat_overlap && lon_overlap)
                throw ConfigError("region " + std::to_string(r.region_id),
                                  "overlaps region " + std::to_string(o.region_id));
        }
    }
}

RegionPartition partition_by_region(const Dataset& ds, std::span<const RegionSpec> regions) {
    validate_regions(regions);
    RegionPartition out;
    for (const auto& spec : regions) {
        auto& region = out.regions[spec.region_id];
        region.provenance = ds.provenance;
        region.seed = ds.seed;
    }
    for (const auto& r : ds.records) {
        auto it = std::find_if(regions.begin(), regions.end(),
                               [&](const RegionSpec& s) { return s.contains(r.latitude, r.longitude); });
        if (it == regions.end()) {
            ++out.dropped;
        } else {
            out.regions[it->region_id].records.push_back(r);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Splits

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
    const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
    for (double v : r)
        if (!(v > 0)) throw ConfigError("ratios", "every split ratio must be positive");
    if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw ConfigError("ratios", "split ratios must sum to 1");

    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
        const double share = r[k] * static_cast<double>(n);
        sizes[k] = static_cast<std::size_t>(std::floor(share + 1e-9));
        remainder[k] = share - static_cast<double>(sizes[k]);
        assigned += sizes[k];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
    return sizes;
}

DatasetSplit split_train_val_test(const Dataset& ds, const SplitRatios& ratios, std::uint64_t seed) {
    if (ds.empty()) throw Error("cannot split an empty dataset");
    const auto sizes = split_sizes(ds.size(), ratios);

    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    DatasetSplit out;
    Dataset* parts[3] = {&out.train, &out.val, &out.test};
    std::size_t offset = 0;
    for (int k = 0; k < 3; ++k) {
        std::vector<std::size_t> idx(order.begin() + offset, order.begin() + offset + sizes[k]);
        std::sort(idx.begin(), idx.end());
        parts[k]->provenance = ds.provenance;
        parts[k]->seed = ds.seed;
        parts[k]->records.reserve(idx.size());
        for (auto i : idx) parts[k]->records.push_back(ds.records[i]);
        offset += sizes[k];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Temporal profile

TemporalProfile emit_temporal_profile(const Dataset& ds) {
    TemporalProfile p{};
    for (const auto& r : ds.records) ++p[r.timestamp.hour][r.label == 1 ? 1 : 0];
    return p;
}

void write_temporal_profile_csv(std::ostream& out, const TemporalProfile& profile) {
    out << "hour,label,count\n";
    for (int h = 0; h < 24; ++h)
        for (int l = 0; l < 2; ++l) out << h << ',' << l << ',' << profile[h][l] << '\n';
}

} // namespace tradegraph
