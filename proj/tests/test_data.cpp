#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace tradegraph;

namespace {

const char* kHeader = "txn_id,card_holder_id,merchant_id,timestamp,amount,category,latitude,longitude,label\n";

Dataset parse(const std::string& text) {
    std::istringstream in(text);
    return parse_transactions_csv(in);
}

} // namespace

TEST_SUITE("data") {

TEST_CASE("three valid rows keep file order") {
    const Dataset ds = parse(std::string(kHeader) +
                             "b,c1,m1,2019-01-01 01:30:00,10.5,food,35,-97,0\n"
                             "a,c2,m1,2019-01-02 13:00:00,3,travel,36,-98,1\n"
                             "c,c1,m2,2019-01-03T23:59:59,0,food,37,-99,0\n");
    REQUIRE(ds.size() == 3);
    CHECK(ds.records[0].txn_id == "b");
    CHECK(ds.records[1].txn_id == "a");
    CHECK(ds.records[2].txn_id == "c");
    CHECK(ds.records[0].timestamp.hour == 1);
    CHECK(ds.records[0].timestamp.minute == 30);
    CHECK(ds.records[1].label == 1);
    CHECK(ds.records[2].timestamp.hour == 23);
    CHECK(ds.provenance == Provenance::ingested);
}

TEST_CASE("unparsable amount reports its line") {
    try {
        parse(std::string(kHeader) + "a,c,m,2019-01-01 00:00:00,1,x,35,-97,0\n" +
              "b,c,m,2019-01-01 00:00:00,abc,x,35,-97,0\n");
        FAIL("expected a row error");
    } catch (const RowError& e) {
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).find("abc") != std::string::npos);
    }
}

TEST_CASE("bad timestamp is a row error") {
    CHECK_THROWS_AS(parse(std::string(kHeader) + "a,c,m,2019-13-01 00:00:00,1,x,35,-97,0\n"), RowError);
    CHECK_THROWS_AS(parse(std::string(kHeader) + "a,c,m,yesterday,1,x,35,-97,0\n"), RowError);
}

TEST_CASE("missing column is a schema error naming it") {
    try {
        parse("txn_id,card_holder_id,merchant_id,timestamp,category,latitude,longitude,label\n");
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("amount") != std::string::npos);
    }
}

TEST_CASE("duplicate txn_id is rejected") {
    CHECK_THROWS_AS(parse(std::string(kHeader) + "a,c,m,2019-01-01 00:00:00,1,x,35,-97,0\n" +
                          "a,c,m,2019-01-01 00:00:00,1,x,35,-97,0\n"),
                    DuplicateError);
}

TEST_CASE("custom column mapping") {
    ColumnMapping m;
    m.txn_id = "trans_num";
    m.amount = "amt";
    std::istringstream in("trans_num,card_holder_id,merchant_id,timestamp,amt,category,latitude,longitude,label\n"
                          "x1,c,m,2019-01-01 05:00:00,7.25,food,35,-97,1\n");
    const Dataset ds = parse_transactions_csv(in, m);
    REQUIRE(ds.size() == 1);
    CHECK(ds.records[0].txn_id == "x1");
    CHECK(ds.records[0].amount == 7.25);
}

TEST_CASE("csv round trip is exact") {
    std::mt19937_64 rng(5);
    Dataset ds = support::random_dataset(rng, 40, 5, 5);
    ds.records[3].category = "needs, \"quoting\"";
    std::ostringstream out;
    write_transactions_csv(out, ds);
    const Dataset back = parse(out.str());
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(back.records[i] == ds.records[i]);
}

TEST_CASE("partition uses the standard boxes") {
    Dataset ds;
    auto rec = [](std::string id, double lat, double lon) {
        TransactionRecord r;
        r.txn_id = std::move(id);
        r.latitude = lat;
        r.longitude = lon;
        return r;
    };
    ds.records = {rec("a", 35, -97), rec("b", 45, -77), rec("c", 10, -10)};
    const auto part = partition_by_region(ds, standard_regions());
    CHECK(part.dropped == 1);
    REQUIRE(part.regions.count(1));
    REQUIRE(part.regions.count(2));
    CHECK(part.regions.at(1).records.front().txn_id == "a");
    CHECK(part.regions.at(2).records.front().txn_id == "b");
    std::size_t total = part.dropped;
    for (const auto& [id, r] : part.regions) total += r.size();
    CHECK(total == ds.size());
}

TEST_CASE("overlapping boxes are a configuration error") {
    std::vector<RegionSpec> boxes{{1, 30, 40, 95, 100}, {2, 35, 45, 97, 105}};
    CHECK_THROWS_AS(validate_regions(boxes), ConfigError);
    CHECK_THROWS_AS(partition_by_region(Dataset{}, boxes), ConfigError);
    CHECK_NOTHROW(validate_regions(standard_regions()));
}

TEST_CASE("split sizes and determinism") {
    CHECK(split_sizes(100, {0.6, 0.1, 0.3}) == std::array<std::size_t, 3>{60, 10, 30});
    CHECK(split_sizes(7, {0.6, 0.1, 0.3}) == std::array<std::size_t, 3>{4, 1, 2});
    CHECK_THROWS_AS(split_sizes(100, {0.5, 0.5, 0.5}), ConfigError);

    std::mt19937_64 rng(1);
    const Dataset ds = support::random_dataset(rng, 100, 10, 10);
    const auto a = split_train_val_test(ds, {0.6, 0.1, 0.3}, 42);
    const auto b = split_train_val_test(ds, {0.6, 0.1, 0.3}, 42);
    CHECK(a.train.records == b.train.records);
    CHECK(a.test.records == b.test.records);

    std::set<std::string> ids;
    for (const Dataset* d : {&a.train, &a.val, &a.test})
        for (const auto& r : d->records) CHECK(ids.insert(r.txn_id).second);
    CHECK(ids.size() == 100);
    CHECK_THROWS(split_train_val_test(Dataset{}, {0.6, 0.1, 0.3}, 1));
}

TEST_CASE("synthetic fraud count concentrates around the rate") {
    SyntheticConfig cfg;
    cfg.n_regions = 1;
    cfg.txns_per_region = 10000;
    cfg.fraud_rate = 0.1;
    const auto ds = generate_synthetic(cfg).front();
    int frauds = 0;
    for (const auto& r : ds.records) frauds += r.label;
    CHECK(std::abs(frauds - 1000) <= 3.0 * std::sqrt(10000 * 0.1 * 0.9));
}

TEST_CASE("fraud is elevated inside the configured slices") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SyntheticConfig cfg;
        cfg.n_regions = 1;
        cfg.seed = seed;
        cfg.fraud_time_slices = {22, 23};
        const auto ds = generate_synthetic(cfg).front();
        double in_f = 0, in_n = 0, out_f = 0, out_n = 0;
        for (const auto& r : ds.records) {
            const bool in = r.timestamp.hour >= 22;
            (in ? in_n : out_n) += 1;
            (in ? in_f : out_f) += r.label;
        }
        CHECK(in_f / in_n > out_f / out_n);
    }
}

TEST_CASE("synthetic generation is deterministic and drifts by region") {
    SyntheticConfig cfg;
    cfg.txns_per_region = 500;
    const auto a = generate_synthetic(cfg), b = generate_synthetic(cfg);
    REQUIRE(a.size() == 3);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].records == b[k].records);

    auto fraud_signal_mean = [](const Dataset& ds, std::size_t dim) {
        double s = 0, n = 0;
        for (const auto& r : ds.records)
            if (r.label) {
                s += r.signals[dim];
                n += 1;
            }
        return s / n;
    };
    // Region 1 plants fraud along signal 0; the next region rotates it onto signal 1.
    CHECK(fraud_signal_mean(a[0], 0) > 2.0);
    CHECK(std::abs(fraud_signal_mean(a[1], 0)) < 0.7);
    CHECK(fraud_signal_mean(a[1], 1) > 2.0);

    cfg.region_shift_strength = 0.0;
    const auto flat = generate_synthetic(cfg);
    for (std::size_t k = 1; k < flat.size(); ++k)
        for (std::size_t d = 0; d < kLatentSignalCount; ++d)
            CHECK(std::abs(fraud_signal_mean(flat[k], d) - fraud_signal_mean(flat[0], d)) < 0.5);
}

TEST_CASE("synthetic config validation names the field") {
    SyntheticConfig cfg;
    cfg.fraud_rate = 1.5;
    try {
        cfg.validate();
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "fraud_rate");
    }
    cfg = {};
    cfg.n_merchants = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("temporal profile") {
    const auto empty = emit_temporal_profile(Dataset{});
    for (const auto& row : empty) CHECK(row == std::array<std::size_t, 2>{0, 0});

    Dataset one;
    TransactionRecord r;
    r.txn_id = "x";
    r.label = 1;
    r.timestamp = Timestamp::parse("2019-01-01 01:30:00");
    one.records.push_back(r);
    const auto p = emit_temporal_profile(one);
    for (int h = 0; h < 24; ++h)
        for (int l = 0; l < 2; ++l) CHECK(p[h][l] == (h == 1 && l == 1 ? 1u : 0u));

    SyntheticConfig cfg;
    cfg.n_regions = 1;
    cfg.fraud_time_slices = {3};
    const auto prof = emit_temporal_profile(generate_synthetic(cfg).front());
    int best = 0;
    std::size_t total = 0;
    for (int h = 0; h < 24; ++h) {
        if (prof[h][1] > prof[best][1]) best = h;
        total += prof[h][0] + prof[h][1];
    }
    CHECK(best == 3);
    CHECK(total == 2000);

    std::ostringstream out;
    write_temporal_profile_csv(out, p);
    CHECK(out.str().rfind("hour,label,count\n", 0) == 0);
}

TEST_CASE("features") {
    TransactionRecord r;
    r.amount = 250.0;
    r.category = "food";
    r.timestamp = Timestamp{2019, 1, 1, 6, 0, 0};
    r.signals = {1.0, 2.0, 3.0};
    const auto f = transaction_features(r);
    CHECK(f[0] == doctest::Approx(2.5));
    CHECK(f[1] == doctest::Approx(std::log1p(250.0)));
    CHECK(f[2] == category_score("food"));
    CHECK(f[3] == doctest::Approx(1.0));
    CHECK(f[4] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(f[7] == 3.0);
}

} // TEST_SUITE
