#include "doctest.h"

#include <algorithm>
#include <random>
#include <sstream>

#include "optbin/errors.hpp"
#include "optbin/market_data.hpp"

using namespace optbin;

namespace {

const std::string kFixtures = OPTBIN_FIXTURE_DIR;

std::vector<UnderlyingBar> make_bars(int n, double start = 100.0) {
    std::vector<UnderlyingBar> bars;
    Date d = parse_date("2015-01-01");
    for (int i = 0; i < n; ++i) {
        const double c = start + i;
        bars.push_back({d + std::chrono::days{i}, c, c + 1.0, c - 1.0, c});
    }
    return bars;
}

OptionQuote quote_on(Date d, int ttm, double strike, long long volume = 10) {
    OptionQuote q;
    q.date = d;
    q.expiry = d + std::chrono::days{ttm};
    q.strike = strike;
    q.close = 2.0;
    q.prev_close = 1.9;
    q.volume = volume;
    return q;
}

ContractRecord record(double spot, double strike, int ttm, std::optional<double> prev, long long volume) {
    ContractRecord r;
    r.quote.date = parse_date("2015-03-02");
    r.quote.expiry = r.quote.date + std::chrono::days{ttm};
    r.quote.strike = strike;
    r.quote.close = 1.0;
    r.quote.prev_close = prev;
    r.quote.volume = volume;
    r.spot = spot;
    r.ttm_days = ttm;
    return r;
}

std::vector<ContractRecord> dated_records(const std::vector<int>& day_offsets) {
    std::vector<ContractRecord> out;
    for (int off : day_offsets) {
        auto r = record(100, 100, 10, 1.0, 1);
        r.quote.date = parse_date("2016-01-01") + std::chrono::days{off};
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST_CASE("parse_date accepts ISO dates and rejects the rest") {
    CHECK(format_date(parse_date("2015-01-05")) == "2015-01-05");
    CHECK_THROWS_AS(parse_date("2015/01/05"), ValidationError);
    CHECK_THROWS_AS(parse_date("2015-02-30"), ValidationError);
    CHECK_THROWS_AS(parse_date("15-01-05"), ValidationError);
}

TEST_CASE("underlying csv") {
    SUBCASE("single row") {
        std::istringstream in("date,open,high,low,close\n2015-01-05,8300,8350,8280,8320\n");
        const auto bars = parse_underlying_csv(in, "mem");
        REQUIRE(bars.size() == 1);
        CHECK(bars[0].close == 8320);
        CHECK(bars[0].open == 8300);
        CHECK(format_date(bars[0].date) == "2015-01-05");
    }
    SUBCASE("header only") {
        std::istringstream in("date,open,high,low,close\n");
        CHECK(parse_underlying_csv(in, "mem").empty());
    }
    SUBCASE("low above high") {
        std::istringstream in("date,open,high,low,close\n2015-01-05,8300,8250,8280,8300\n");
        CHECK_THROWS_AS(parse_underlying_csv(in, "mem"), ValidationError);
    }
    SUBCASE("error names the line") {
        std::istringstream in("date,open,high,low,close\n2015-01-05,1,2,1,1\n2015-01-06,x,2,1,1\n");
        try {
            parse_underlying_csv(in, "mem");
            FAIL("expected a parse error");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("mem:3") != std::string::npos);
        }
    }
    SUBCASE("duplicate date") {
        std::istringstream in("date,open,high,low,close\n2015-01-05,1,2,1,1\n2015-01-05,1,2,1,1\n");
        CHECK_THROWS_AS(parse_underlying_csv(in, "mem"), ValidationError);
    }
    SUBCASE("rows are sorted by date") {
        std::istringstream in("date,open,high,low,close\n2015-01-06,1,2,1,1\n2015-01-05,1,2,1,1\n");
        const auto bars = parse_underlying_csv(in, "mem");
        CHECK(bars[0].date < bars[1].date);
    }
    SUBCASE("wrong header") {
        std::istringstream in("date,close\n2015-01-05,1\n");
        CHECK_THROWS_AS(parse_underlying_csv(in, "mem"), ValidationError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(parse_underlying_csv(std::filesystem::path("/nonexistent/u.csv")), IoError);
    }
}

TEST_CASE("option csv") {
    const std::string header = "date,expiry,strike,close,prev_close,volume\n";
    SUBCASE("full row") {
        std::istringstream in(header + "2015-01-05,2015-01-29,8300,120.5,118.0,4000\n");
        const auto q = parse_option_csv(in, "mem");
        REQUIRE(q.size() == 1);
        CHECK(q[0].strike == 8300);
        CHECK(q[0].close == 120.5);
        REQUIRE(q[0].prev_close.has_value());
        CHECK(*q[0].prev_close == 118.0);
        CHECK(q[0].volume == 4000);
        CHECK((q[0].expiry - q[0].date).count() == 24);
    }
    SUBCASE("empty prev_close is absent") {
        std::istringstream in(header + "2015-01-05,2015-01-29,8300,120.5,,4000\n");
        CHECK_FALSE(parse_option_csv(in, "mem")[0].prev_close.has_value());
    }
    SUBCASE("expiry before date") {
        std::istringstream in(header + "2015-01-29,2015-01-05,8300,120.5,118.0,4000\n");
        CHECK_THROWS_AS(parse_option_csv(in, "mem"), ValidationError);
    }
    SUBCASE("non-positive strike") {
        std::istringstream in(header + "2015-01-05,2015-01-29,0,120.5,118.0,4000\n");
        CHECK_THROWS_AS(parse_option_csv(in, "mem"), ValidationError);
    }
    SUBCASE("file order kept") {
        std::istringstream in(header + "2015-01-06,2015-01-29,1,1,1,1\n2015-01-05,2015-01-29,2,1,1,1\n");
        const auto q = parse_option_csv(in, "mem");
        CHECK(q[0].strike == 1);
        CHECK(q[1].strike == 2);
    }
}

TEST_CASE("yield csv enforces the sanity bound") {
    std::istringstream ok("date,rate\n2015-01-05,0.065\n");
    CHECK(parse_yield_csv(ok, "mem")[0].rate == doctest::Approx(0.065));
    std::istringstream bad("date,rate\n2015-01-05,-0.06\n");
    CHECK_THROWS_AS(parse_yield_csv(bad, "mem"), ValidationError);
}

TEST_CASE("build_records windows, ttm and yield lookup") {
    const auto bars = make_bars(30);
    std::vector<YieldPoint> yields = {{bars[0].date, 0.06}, {bars[22].date, 0.07}};

    SUBCASE("quote on day 25 takes bars 6..25") {
        const auto res = build_records(bars, {quote_on(bars[24].date, 24, 120)}, yields);
        REQUIRE(res.records.size() == 1);
        const auto& r = res.records[0];
        CHECK(r.window.size() == kWindowBars);
        CHECK(r.window.front().date == bars[5].date);
        CHECK(r.window.back().date == bars[24].date);
        CHECK(r.spot == bars[24].close);
        CHECK(r.ttm_days == 24);
        CHECK(r.rate == 0.07);
    }
    SUBCASE("quote on day 10 is dropped") {
        const auto res = build_records(bars, {quote_on(bars[9].date, 5, 100)}, yields);
        CHECK(res.records.empty());
        CHECK(res.dropped.at("insufficient_window") == 1);
    }
    SUBCASE("quote on day 20 is the first with a full window") {
        const auto res = build_records(bars, {quote_on(bars[19].date, 5, 100)}, yields);
        CHECK(res.records.size() == 1);
        CHECK(res.records[0].rate == 0.06);
    }
    SUBCASE("missing underlying and missing yield are counted") {
        std::vector<YieldPoint> late = {{bars[25].date, 0.05}};
        const auto res = build_records(
            bars, {quote_on(bars[29].date + std::chrono::days{3}, 5, 100), quote_on(bars[21].date, 5, 100)},
            late);
        CHECK(res.records.empty());
        CHECK(res.dropped.at("missing_underlying") == 1);
        CHECK(res.dropped.at("missing_yield") == 1);
    }
    SUBCASE("order independence") {
        std::vector<OptionQuote> qs;
        for (int i = 19; i < 30; ++i) qs.push_back(quote_on(bars[i].date, 10 + i, 100 + i));
        const auto a = build_records(bars, qs, yields);
        std::mt19937 rng(4);
        std::shuffle(qs.begin(), qs.end(), rng);
        const auto b = build_records(bars, qs, yields);
        REQUIRE(a.records.size() == b.records.size());
        for (std::size_t i = 0; i < a.records.size(); ++i) {
            CHECK(a.records[i].quote.strike == b.records[i].quote.strike);
            CHECK(a.records[i].date() == b.records[i].date());
        }
    }
}

TEST_CASE("filter rules") {
    CHECK(passes_filter(record(100, 103, 10, 2.0, 5)));
    CHECK_FALSE(passes_filter(record(100, 110, 10, 2.0, 5)));
    CHECK_FALSE(passes_filter(record(100, 100, 2, 2.0, 5)));
    CHECK_FALSE(passes_filter(record(100, 100, 46, 2.0, 5)));
    CHECK(passes_filter(record(100, 100, 3, 2.0, 5)));
    CHECK(passes_filter(record(100, 100, 45, 2.0, 5)));
    CHECK_FALSE(passes_filter(record(100, 100, 10, std::nullopt, 5)));
    CHECK_FALSE(passes_filter(record(100, 100, 10, 0.0, 5)));
    CHECK_FALSE(passes_filter(record(100, 100, 10, 2.0, 0)));

    const auto res = filter_records({record(100, 103, 10, 2.0, 5), record(100, 110, 10, 2.0, 5),
                                     record(100, 100, 2, 2.0, 5), record(100, 110, 2, std::nullopt, 0)});
    CHECK(res.records.size() == 1);
    CHECK(res.dropped.at("near_atm") == 1);
    CHECK(res.dropped.at("ttm_window") == 1);
    CHECK(res.dropped.at("untraded") == 1);
    CHECK(res.dropped.at("prev_close") == 0);
}

TEST_CASE("filter survivors satisfy every rule") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> strike(90, 110);
    std::uniform_int_distribution<int> ttm(1, 60);
    std::uniform_int_distribution<int> vol(0, 3);
    std::vector<ContractRecord> recs;
    for (int i = 0; i < 2000; ++i) {
        std::optional<double> prev;
        if (i % 7 != 0) prev = (i % 11 == 0) ? 0.0 : 1.5;
        recs.push_back(record(100, strike(rng), ttm(rng), prev, vol(rng)));
    }
    const auto res = filter_records(recs);
    std::size_t dropped = 0;
    for (const auto& [rule, n] : res.dropped) dropped += n;
    CHECK(dropped + res.records.size() == recs.size());
    for (const auto& r : res.records) {
        CHECK(std::abs(1.0 - r.spot / r.quote.strike) <= 0.04);
        CHECK(r.ttm_days >= 3);
        CHECK(r.ttm_days <= 45);
        CHECK(*r.quote.prev_close > 0.0);
        CHECK(r.quote.volume > 0);
    }
}

TEST_CASE("chronological split") {
    SUBCASE("10 distinct dates at 0.7") {
        const auto s = chronological_split(dated_records({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}), 0.7);
        CHECK(s.train.size() == 7);
        CHECK(s.test.size() == 3);
    }
    SUBCASE("4 records on 2 dates at 0.5") {
        const auto s = chronological_split(dated_records({0, 0, 1, 1}), 0.5);
        CHECK(s.train.size() == 2);
        CHECK(s.test.size() == 2);
    }
    SUBCASE("one date cannot split") {
        CHECK_THROWS_AS(chronological_split(dated_records({3, 3, 3}), 0.7), ValidationError);
    }
    SUBCASE("bad fraction and empty input") {
        CHECK_THROWS_AS(chronological_split(dated_records({0, 1}), 1.0), ValidationError);
        CHECK_THROWS_AS(chronological_split({}, 0.5), ValidationError);
    }
    SUBCASE("dates never straddle the boundary") {
        std::mt19937 rng(2);
        std::uniform_int_distribution<int> day(0, 30);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<int> offs(1 + trial % 40);
            for (int& o : offs) o = day(rng);
            if (std::all_of(offs.begin(), offs.end(), [&](int o) { return o == offs[0]; })) continue;
            const double frac = 0.05 + 0.9 * (trial % 17) / 16.0;
            const auto s = chronological_split(dated_records(offs), frac);
            REQUIRE_FALSE(s.train.empty());
            REQUIRE_FALSE(s.test.empty());
            Date max_train = s.train.front().date();
            for (const auto& r : s.train) max_train = std::max(max_train, r.date());
            for (const auto& r : s.test) CHECK(r.date() > max_train);
            CHECK(s.train.size() + s.test.size() == offs.size());
        }
    }
}

TEST_CASE("fixture files build the expected dataset") {
    const auto bars = parse_underlying_csv(kFixtures + "/underlying.csv");
    const auto quotes = parse_option_csv(kFixtures + "/options.csv");
    const auto yields = parse_yield_csv(kFixtures + "/yields.csv");
    CHECK(bars.size() == 40);
    CHECK(quotes.size() == 321);
    CHECK(yields.size() == 2);

    const auto built = build_records(bars, quotes, yields);
    CHECK(built.records.size() == 210);
    CHECK(built.dropped.at("missing_underlying") == 1);
    CHECK(built.dropped.at("insufficient_window") == 110);
    CHECK(built.dropped.at("missing_yield") == 0);

    const auto filtered = filter_records(built.records);
    CHECK(filtered.records.size() == 72);
    CHECK(filtered.dropped.at("untraded") == 29);
    CHECK(filtered.dropped.at("prev_close") == 16);
    CHECK(filtered.dropped.at("near_atm") == 63);
    CHECK(filtered.dropped.at("ttm_window") == 30);

    const auto split = chronological_split(filtered.records, 0.7);
    CHECK(split.train.size() == 49);
    CHECK(split.test.size() == 23);

    for (const auto& r : built.records) {
        CHECK(r.spot == r.window.back().close);
        for (std::size_t i = 1; i < r.window.size(); ++i) CHECK(r.window[i - 1].date < r.window[i].date);
    }
}
