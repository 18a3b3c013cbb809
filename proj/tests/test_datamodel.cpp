#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "smlp/datamodel.hpp"

using namespace smlp;

namespace {

QueryInstance valid_instance() {
    QueryInstance q;
    q.query = "spring festival";
    q.event_date = Date::from_ymd(2006, 4, 20);
    q.hitting_time = Date::from_ymd(2006, 4, 12);
    q.short_series = {Date::from_ymd(2006, 3, 1), Granularity::Daily,
                      std::vector<std::int64_t>(92, 1)};
    q.long_series = {Date::from_ymd(1987, 1, 1), Granularity::Monthly,
                     std::vector<std::int64_t>(246, 3)};
    q.background_long_series = {Date::from_ymd(1987, 1, 1), Granularity::Monthly,
                                std::vector<std::int64_t>(246, 500)};
    q.clicks.push_back({Date::from_ymd(2006, 4, 12), "site1.example.com/1", q.query});
    q.cluster = {{q.query, 40}, {"spring festival tickets", 12}};
    return q;
}

} // namespace

TEST_CASE("event classes have stable codes and names") {
    REQUIRE(kClassCount == 6);
    const char* expected[] = {"anticipated", "breaking",  "commemorative",
                              "meme",        "ongoing",   "atemporal"};
    for (int c = 0; c < kClassCount; ++c) {
        const auto cls = class_from_code(c);
        REQUIRE(cls.has_value());
        REQUIRE(class_code(*cls) == static_cast<std::size_t>(c));
        REQUIRE(std::string(class_name(*cls)) == expected[c]);
        REQUIRE(class_from_name(expected[c]) == *cls);
    }
    REQUIRE_FALSE(class_from_code(-1).has_value());
    REQUIRE_FALSE(class_from_code(6).has_value());
    REQUIRE_FALSE(class_from_name("Anticipated").has_value());
    REQUIRE_FALSE(class_from_name("unknown").has_value());
    REQUIRE(all_classes().size() == 6);
}

TEST_CASE("daily series indexes by day offset") {
    TimeSeries ts{Date::from_ymd(2006, 2, 27), Granularity::Daily, {5, 6, 7, 8}};
    REQUIRE(ts.size() == 4);
    REQUIRE(ts.bucket_date(0) == Date::from_ymd(2006, 2, 27));
    REQUIRE(ts.bucket_date(2) == Date::from_ymd(2006, 3, 1)); // crosses month end
    REQUIRE(ts.index_of(Date::from_ymd(2006, 3, 2)) == 3);
    REQUIRE_FALSE(ts.index_of(Date::from_ymd(2006, 2, 26)).has_value());
    REQUIRE_FALSE(ts.index_of(Date::from_ymd(2006, 3, 3)).has_value());
    REQUIRE(ts.as_doubles() == std::vector<double>{5.0, 6.0, 7.0, 8.0});
}

TEST_CASE("monthly series indexes by month offset regardless of day") {
    TimeSeries ts{Date::from_ymd(2005, 11, 1), Granularity::Monthly, {1, 2, 3}};
    REQUIRE(ts.bucket_date(2) == Date::from_ymd(2006, 1, 1));
    REQUIRE(ts.index_of(Date::from_ymd(2006, 1, 31)) == 2);
    REQUIRE(ts.index_of(Date::from_ymd(2005, 12, 15)) == 1);
    REQUIRE_FALSE(ts.index_of(Date::from_ymd(2006, 2, 1)).has_value());
}

TEST_CASE("query normalization lowercases and collapses whitespace") {
    REQUIRE(normalize_query("  The   Beatles ") == "the beatles");
    REQUIRE(normalize_query("MoZaRt\tRequiem\n") == "mozart requiem");
    REQUIRE(normalize_query("") == "");
    REQUIRE(normalize_query("   ") == "");
    const std::string once = normalize_query("World  Cup 2006");
    REQUIRE(normalize_query(once) == once); // idempotent
}

TEST_CASE("url normalization strips scheme and trailing slashes") {
    REQUIRE(normalize_url("HTTP://www.Example.com/Path/") == "www.example.com/path");
    REQUIRE(normalize_url("https://news.example.org") == "news.example.org");
    REQUIRE(normalize_url("plain.example.net///") == "plain.example.net");
    REQUIRE(normalize_url(" spaced .com ") == "spaced.com");
}

TEST_CASE("a well-formed instance validates cleanly") {
    REQUIRE(validate_instance(valid_instance()).empty());
}

TEST_CASE("each instance invariant produces its own violation message") {
    auto has = [](const std::vector<std::string>& v, std::string_view needle) {
        for (const auto& m : v)
            if (m.find(needle) != std::string::npos)
                return true;
        return false;
    };

    auto q = valid_instance();
    q.query = "";
    REQUIRE(has(validate_instance(q), "query empty"));

    q = valid_instance();
    q.query = "Spring Festival";
    REQUIRE(has(validate_instance(q), "query not normalized"));

    q = valid_instance();
    q.short_series.counts.clear();
    REQUIRE(has(validate_instance(q), "short_series empty"));

    q = valid_instance();
    q.long_series.granularity = Granularity::Daily;
    REQUIRE(has(validate_instance(q), "long_series wrong granularity"));

    q = valid_instance();
    q.background_long_series.counts[5] = -1;
    REQUIRE(has(validate_instance(q), "background_long_series negative count"));

    q = valid_instance();
    q.hitting_time = Date::from_ymd(2007, 1, 1);
    REQUIRE(has(validate_instance(q), "hitting_time outside short_series"));

    q = valid_instance();
    q.cluster = {{"other query", 3}};
    REQUIRE(has(validate_instance(q), "cluster missing self"));

    q = valid_instance();
    q.cluster.push_back({"neighbor", -2});
    REQUIRE(has(validate_instance(q), "cluster negative frequency"));

    q = valid_instance();
    q.clicks.push_back({Date::from_ymd(2006, 4, 13), "", "x"});
    REQUIRE(has(validate_instance(q), "click url empty"));
}

TEST_CASE("feature vector accessors agree with canonical positions") {
    FeatureVector fv;
    fv.at(Feature::LongSpanAcf) = 0.25;
    fv.at(Feature::MaxCFreq) = 99.0;
    REQUIRE(fv[0] == 0.25);
    REQUIRE(fv[27] == 99.0);
    REQUIRE(feature_names().size() == kFeatureCount);
    REQUIRE(std::string(feature_names()[0]) == "long_span_acf");
    REQUIRE(std::string(feature_names()[7]) == "prediction_sse");
    REQUIRE(std::string(feature_names()[27]) == "maxCFreq");
}

TEST_CASE("feature vector checks find non-finite, flag and sign violations") {
    FeatureVector fv; // all zeros is valid
    REQUIRE(check_feature_vector(fv).empty());

    fv.at(Feature::IsLoc) = 0.5;
    fv.at(Feature::MaxFreq) = -1.0;
    fv.at(Feature::PredictionSse) = std::numeric_limits<double>::quiet_NaN();
    const auto v = check_feature_vector(fv);
    REQUIRE(v.size() == 3);
}

TEST_CASE("dataset files round-trip bit exactly") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> mant(-1.0, 1.0);
    std::uniform_int_distribution<int> expo(-300, 300);
    std::uniform_int_distribution<int> lab(0, 5);

    LabeledDataset ds;
    for (int r = 0; r < 64; ++r) {
        FeatureVector fv;
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            fv[i] = std::ldexp(mant(rng), expo(rng));
        ds.features.push_back(fv);
        ds.labels.push_back(*class_from_code(lab(rng)));
    }
    FeatureStats st;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        st.mean[i] = mant(rng) * 10.0;
        st.stddev[i] = std::abs(mant(rng)) + 0.5;
    }
    ds.feature_stats = st;

    const LabeledDataset back = roundtrip_dataset(ds);
    REQUIRE(back.size() == ds.size());
    REQUIRE(back.labels == ds.labels);
    for (std::size_t r = 0; r < ds.size(); ++r)
        REQUIRE(back.features[r] == ds.features[r]);
    REQUIRE(back.feature_stats.has_value());
    REQUIRE(back.feature_stats->mean == st.mean);
    REQUIRE(back.feature_stats->stddev == st.stddev);
}

TEST_CASE("dataset parser rejects malformed input") {
    auto loads = [](const std::string& text) {
        std::istringstream is(text);
        return load_dataset(is);
    };
    const std::string row =
        "0\t1 2 3 4 5 6 7 8 9 10 11 12 13 14 15 16 17 18 19 20 21 22 23 24 25 26 27 28\n";

    REQUIRE_NOTHROW(loads("#smlp-dataset v1 d=28\n" + row));
    REQUIRE_THROWS_AS(loads("no header\n"), DataError);
    REQUIRE_THROWS_AS(loads("#smlp-dataset v1 d=28\n9\t1 2 3\n"), DataError);  // bad label
    REQUIRE_THROWS_AS(loads("#smlp-dataset v1 d=28\nx\t1 2 3\n"), DataError);  // non-numeric label
    REQUIRE_THROWS_AS(loads("#smlp-dataset v1 d=28\n0\t1 2 3\n"), DataError);  // short row
    REQUIRE_THROWS_AS(loads("#smlp-dataset v1 d=28\n0 1 2\n"), DataError);     // missing tab
    std::string meanline = "#mean";
    for (int i = 0; i < 28; ++i)
        meanline += " 0";
    REQUIRE_THROWS_AS(loads("#smlp-dataset v1 d=28\n" + meanline + "\n" + row), DataError);
    const std::string bad_real_row =
        "0\t1 2 3 4 5 6 7 8 9 x 11 12 13 14 15 16 17 18 19 20 21 22 23 24 25 26 27 28\n";
    REQUIRE_THROWS_AS(loads("#smlp-dataset v1 d=28\n" + bad_real_row), DataError);
}
