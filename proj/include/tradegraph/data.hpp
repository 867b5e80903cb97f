#pragma once

#include "tradegraph/common.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace tradegraph {

/// Calendar timestamp at second resolution. No time zone.
struct Timestamp {
    int year = 1970;
    int month = 1;
    int day = 1;
    int hour = 0;
    int minute = 0;
    int second = 0;

    /// Accepts "YYYY-MM-DD HH:MM:SS" (a 'T' separator is also allowed).
    static Timestamp parse(std::string_view text);
    std::string to_string() const;
    double hour_of_day() const { return hour + minute / 60.0 + second / 3600.0; }

    friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

inline constexpr std::size_t kLatentSignalCount = 3;

struct TransactionRecord {
    std::string txn_id;
    std::string card_holder_id;
    std::string merchant_id;
    Timestamp timestamp;
    double amount = 0.0;
    std::string category;
    double latitude = 0.0;
    double longitude = 0.0;
    int label = 0;
    // Optional numeric attributes carried into the feature vector; zero when absent.
    std::array<double, kLatentSignalCount> signals{};

    friend bool operator==(const TransactionRecord&, const TransactionRecord&) = default;
};

enum class Provenance { ingested, synthetic };

struct Dataset {
    std::vector<TransactionRecord> records;
    Provenance provenance = Provenance::ingested;
    std::optional<std::uint64_t> seed;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

// ---------------------------------------------------------------------------
// Features

inline constexpr std::size_t kFeatureWidth = 5 + kLatentSignalCount;

/// Fixed-width attribute vector of one transaction:
/// amount/100, log1p(amount), category score, sin/cos of hour-of-day, latent signals.
std::array<double, kFeatureWidth> transaction_features(const TransactionRecord& record);

/// Stable score in [0, 1) for a category code.
double category_score(std::string_view category);

// ---------------------------------------------------------------------------
// CSV ingestion

/// Maps canonical fields to the column names of an input file. Signal columns are
/// optional; an empty name means "not present".
struct ColumnMapping {
    std::string txn_id = "txn_id";
    std::string card_holder_id = "card_holder_id";
    std::string merchant_id = "merchant_id";
    std::string timestamp = "timestamp";
    std::string amount = "amount";
    std::string category = "category";
    std::string latitude = "latitude";
    std::string longitude = "longitude";
    std::string label = "label";
    std::array<std::string, kLatentSignalCount> signals{"signal_0", "signal_1", "signal_2"};
    bool signals_required = false;
};

Dataset parse_transactions_csv(const std::filesystem::path& path, const ColumnMapping& schema = {});
Dataset parse_transactions_csv(std::istream& in, const ColumnMapping& schema = {});

/// Writes the canonical schema (the default ColumnMapping column names).
void write_transactions_csv(const std::filesystem::path& path, const Dataset& ds);
void write_transactions_csv(std::ostream& out, const Dataset& ds);

/// Throws DuplicateError on a repeated txn_id and RowError-free Error on out-of-range values.
void validate_dataset(const Dataset& ds);

// ---------------------------------------------------------------------------
// Regions

/// Latitude in degrees north, longitude in degrees west (so 97 means longitude -97).
/// Boxes are half-open: [min, max) on both axes.
struct RegionSpec {
    int region_id = 0;
    double lat_min = 0.0;
    double lat_max = 0.0;
    double lon_west_min = 0.0;
    double lon_west_max = 0.0;

    bool contains(double latitude, double longitude) const;
};

/// The five non-overlapping boxes over the US mainland used for the regional sequence.
std::vector<RegionSpec> standard_regions();

/// Throws ConfigError when a box is empty or two boxes overlap.
void validate_regions(std::span<const RegionSpec> regions);

struct RegionPartition {
    std::map<int, Dataset> regions;
    std::size_t dropped = 0;
};

RegionPartition partition_by_region(const Dataset& ds, std::span<const RegionSpec> regions);

// ---------------------------------------------------------------------------
// Splits

struct SplitRatios {
    double train = 0.6;
    double val = 0.1;
    double test = 0.3;
};

struct DatasetSplit {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Sizes follow largest-remainder rounding; records keep their input order within a split.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);
DatasetSplit split_train_val_test(const Dataset& ds, const SplitRatios& ratios, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticConfig {
    int n_regions = 3;
    int txns_per_region = 2000;
    int n_card_holders = 1000;
    int n_merchants = 200;
    double fraud_rate = 0.1;
    std::set<int> fraud_time_slices{0, 1, 2, 3, 22, 23};
    // Rotation (radians) of the region-specific fraud direction between consecutive regions.
    double region_shift_strength = 1.5707963267948966;
    // Length of the fraud mean offset in the latent signal plane.
    double signal_strength = 3.0;
    std::uint64_t seed = 7;

    void validate() const;
};

std::vector<Dataset> generate_synthetic(const SyntheticConfig& cfg);

// ---------------------------------------------------------------------------
// Temporal profile

/// counts[hour][label]
using TemporalProfile = std::array<std::array<std::size_t, 2>, 24>;

TemporalProfile emit_temporal_profile(const Dataset& ds);
void write_temporal_profile_csv(std::ostream& out, const TemporalProfile& profile);

} // namespace tradegraph
