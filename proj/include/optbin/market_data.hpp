#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace optbin {

using Date = std::chrono::sys_days;

/// Parses an ISO `YYYY-MM-DD` date. Throws ValidationError on anything else.
Date parse_date(std::string_view text);
std::string format_date(Date d);

inline constexpr std::size_t kWindowBars = 20;

struct UnderlyingBar {
    Date date;
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
};

struct OptionQuote {
    Date date;
    Date expiry;
    double strike = 0.0;
    double close = 0.0;
    std::optional<double> prev_close;
    long long volume = 0;
};

struct YieldPoint {
    Date date;
    double rate = 0.0;  // annualized decimal
};

/// One option observation joined with the 20 underlying bars that end on its
/// quote date and the yield in force on that date.
struct ContractRecord {
    OptionQuote quote;
    double spot = 0.0;
    std::vector<UnderlyingBar> window;
    int ttm_days = 0;
    double rate = 0.0;

    Date date() const { return quote.date; }
};

struct SplitDataset {
    std::vector<ContractRecord> train;
    std::vector<ContractRecord> test;
};

/// Rule name -> number of records removed by that rule.
using DropCounts = std::map<std::string, std::size_t>;

// CSV readers. The stream overloads take a source name used in error messages.
std::vector<UnderlyingBar> parse_underlying_csv(const std::filesystem::path& path);
std::vector<UnderlyingBar> parse_underlying_csv(std::istream& in, std::string_view source);
std::vector<OptionQuote> parse_option_csv(const std::filesystem::path& path);
std::vector<OptionQuote> parse_option_csv(std::istream& in, std::string_view source);
std::vector<YieldPoint> parse_yield_csv(const std::filesystem::path& path);
std::vector<YieldPoint> parse_yield_csv(std::istream& in, std::string_view source);

struct BuildResult {
    std::vector<ContractRecord> records;
    DropCounts dropped;
};

/// Joins quotes with their trailing 20-bar window and the most recent yield on
/// or before the quote date. Output is sorted, so the result does not depend
/// on the order of `quotes`.
BuildResult build_records(const std::vector<UnderlyingBar>& bars,
                          std::vector<OptionQuote> quotes,
                          std::vector<YieldPoint> yields);

struct FilterConfig {
    double max_moneyness_gap = 0.04;  // |1 - S/K|, inclusive
    int min_ttm_days = 3;
    int max_ttm_days = 45;
};

struct FilterResult {
    std::vector<ContractRecord> records;
    DropCounts dropped;
};

bool passes_filter(const ContractRecord& rec, const FilterConfig& cfg = {});

/// Keeps near-ATM, traded contracts inside the maturity window that have a
/// positive previous close. Drops are attributed to the first failing rule.
FilterResult filter_records(std::vector<ContractRecord> records, const FilterConfig& cfg = {});

/// Splits at the date boundary whose train share is closest to
/// `train_fraction`; records on one date never straddle the split.
SplitDataset chronological_split(std::vector<ContractRecord> records, double train_fraction);

}  // namespace optbin
