#include "optbin/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <tuple>

#include "optbin/errors.hpp"

namespace optbin {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

[[noreturn]] void fail_line(std::string_view source, std::size_t line_no, const std::string& what) {
    std::ostringstream os;
    os << source << ":" << line_no << ": " << what;
    throw ValidationError(os.str());
}

double parse_number(std::string_view field, std::string_view source, std::size_t line_no,
                    std::string_view column) {
    double value = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (field.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value)) {
        fail_line(source, line_no, "bad number in column '" + std::string(column) + "': '" +
                                       std::string(field) + "'");
    }
    return value;
}

Date parse_date_at(std::string_view field, std::string_view source, std::size_t line_no) {
    try {
        return parse_date(field);
    } catch (const ValidationError& e) {
        fail_line(source, line_no, e.what());
    }
}

// Reads the header and every data line, checking the column layout. Blank
// lines and lines starting with '#' are skipped.
template <typename RowFn>
void read_csv(std::istream& in, std::string_view source, std::string_view expected_header,
              RowFn&& on_row) {
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    const auto expected = split_fields(expected_header);
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = trim(line);
        if (view.empty() || view.front() == '#') continue;
        auto fields = split_fields(view);
        if (!header_seen) {
            if (fields != expected) {
                fail_line(source, line_no,
                          "expected header '" + std::string(expected_header) + "'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != expected.size()) {
            fail_line(source, line_no,
                      "expected " + std::to_string(expected.size()) + " fields, got " +
                          std::to_string(fields.size()));
        }
        on_row(fields, line_no);
    }
    if (!header_seen) fail_line(source, line_no, "missing header");
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

}  // namespace

Date parse_date(std::string_view text) {
    text = trim(text);
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    const bool shape_ok = text.size() == 10 && text[4] == '-' && text[7] == '-';
    auto read = [&](std::size_t pos, std::size_t len, auto& out) {
        const auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
        return ec == std::errc{} && ptr == text.data() + pos + len;
    };
    if (!shape_ok || !read(0, 4, y) || !read(5, 2, m) || !read(8, 2, d)) {
        throw ValidationError("bad date '" + std::string(text) + "' (want YYYY-MM-DD)");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) throw ValidationError("invalid calendar date '" + std::string(text) + "'");
    return Date{ymd};
}

std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::vector<UnderlyingBar> parse_underlying_csv(std::istream& in, std::string_view source) {
    std::vector<UnderlyingBar> bars;
    read_csv(in, source, "date,open,high,low,close", [&](const auto& f, std::size_t ln) {
        UnderlyingBar b;
        b.date = parse_date_at(f[0], source, ln);
        b.open = parse_number(f[1], source, ln, "open");
        b.high = parse_number(f[2], source, ln, "high");
        b.low = parse_number(f[3], source, ln, "low");
        b.close = parse_number(f[4], source, ln, "close");
        if (!(b.low > 0.0)) fail_line(source, ln, "low must be positive");
        if (b.low > std::min(b.open, b.close) || b.high < std::max(b.open, b.close)) {
            fail_line(source, ln, "inconsistent OHLC (need low <= open,close <= high)");
        }
        bars.push_back(b);
    });
    std::stable_sort(bars.begin(), bars.end(),
                     [](const auto& a, const auto& b) { return a.date < b.date; });
    const auto dup = std::adjacent_find(bars.begin(), bars.end(), [](const auto& a, const auto& b) {
        return a.date == b.date;
    });
    if (dup != bars.end()) {
        throw ValidationError(std::string(source) + ": duplicate date " + format_date(dup->date));
    }
    return bars;
}

std::vector<UnderlyingBar> parse_underlying_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_underlying_csv(in, path.string());
}

std::vector<OptionQuote> parse_option_csv(std::istream& in, std::string_view source) {
    std::vector<OptionQuote> quotes;
    read_csv(in, source, "date,expiry,strike,close,prev_close,volume",
             [&](const auto& f, std::size_t ln) {
                 OptionQuote q;
                 q.date = parse_date_at(f[0], source, ln);
                 q.expiry = parse_date_at(f[1], source, ln);
                 q.strike = parse_number(f[2], source, ln, "strike");
                 q.close = parse_number(f[3], source, ln, "close");
                 if (!f[4].empty()) q.prev_close = parse_number(f[4], source, ln, "prev_close");
                 const double vol = parse_number(f[5], source, ln, "volume");
                 if (q.strike <= 0.0) fail_line(source, ln, "strike must be positive");
                 if (q.close < 0.0) fail_line(source, ln, "close must be non-negative");
                 if (q.prev_close && *q.prev_close < 0.0) {
                     fail_line(source, ln, "prev_close must be non-negative");
                 }
                 if (vol < 0.0 || vol != std::floor(vol)) {
                     fail_line(source, ln, "volume must be a non-negative integer");
                 }
                 if (q.expiry < q.date) fail_line(source, ln, "expiry before quote date");
                 q.volume = static_cast<long long>(vol);
                 quotes.push_back(q);
             });
    return quotes;
}

std::vector<OptionQuote> parse_option_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_option_csv(in, path.string());
}

std::vector<YieldPoint> parse_yield_csv(std::istream& in, std::string_view source) {
    std::vector<YieldPoint> out;
    read_csv(in, source, "date,rate", [&](const auto& f, std::size_t ln) {
        YieldPoint y;
        y.date = parse_date_at(f[0], source, ln);
        y.rate = parse_number(f[1], source, ln, "rate");
        if (!(y.rate > -0.05)) fail_line(source, ln, "rate below sanity bound -0.05");
        out.push_back(y);
    });
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.date < b.date; });
    const auto dup = std::adjacent_find(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.date == b.date;
    });
    if (dup != out.end()) {
        throw ValidationError(std::string(source) + ": duplicate date " + format_date(dup->date));
    }
    return out;
}

std::vector<YieldPoint> parse_yield_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_yield_csv(in, path.string());
}

namespace {

auto quote_key(const OptionQuote& q) {
    return std::make_tuple(q.date, q.expiry, q.strike, q.close, q.prev_close.value_or(-1.0),
                           q.volume);
}

}  // namespace

BuildResult build_records(const std::vector<UnderlyingBar>& bars, std::vector<OptionQuote> quotes,
                          std::vector<YieldPoint> yields) {
    std::sort(quotes.begin(), quotes.end(),
              [](const auto& a, const auto& b) { return quote_key(a) < quote_key(b); });
    std::sort(yields.begin(), yields.end(),
              [](const auto& a, const auto& b) { return a.date < b.date; });

    BuildResult result;
    result.dropped["missing_underlying"] = 0;
    result.dropped["insufficient_window"] = 0;
    result.dropped["missing_yield"] = 0;

    for (const auto& q : quotes) {
        const auto bar_it = std::lower_bound(
            bars.begin(), bars.end(), q.date,
            [](const UnderlyingBar& b, const Date& d) { return b.date < d; });
        if (bar_it == bars.end() || bar_it->date != q.date) {
            ++result.dropped["missing_underlying"];
            continue;
        }
        const auto end_index = static_cast<std::size_t>(bar_it - bars.begin()) + 1;
        if (end_index < kWindowBars) {
            ++result.dropped["insufficient_window"];
            continue;
        }
        const auto yield_it = std::upper_bound(
            yields.begin(), yields.end(), q.date,
            [](const Date& d, const YieldPoint& y) { return d < y.date; });
        if (yield_it == yields.begin()) {
            ++result.dropped["missing_yield"];
            continue;
        }
        ContractRecord rec;
        rec.quote = q;
        rec.window.assign(bars.begin() + static_cast<std::ptrdiff_t>(end_index - kWindowBars),
                          bars.begin() + static_cast<std::ptrdiff_t>(end_index));
        rec.spot = rec.window.back().close;
        rec.ttm_days = static_cast<int>((q.expiry - q.date).count());
        rec.rate = std::prev(yield_it)->rate;
        result.records.push_back(std::move(rec));
    }
    return result;
}

bool passes_filter(const ContractRecord& rec, const FilterConfig& cfg) {
    const auto& q = rec.quote;
    return q.volume > 0 && q.prev_close.has_value() && *q.prev_close > 0.0 &&
           std::abs(1.0 - rec.spot / q.strike) <= cfg.max_moneyness_gap &&
           rec.ttm_days >= cfg.min_ttm_days && rec.ttm_days <= cfg.max_ttm_days;
}

FilterResult filter_records(std::vector<ContractRecord> records, const FilterConfig& cfg) {
    FilterResult result;
    auto& d = result.dropped;
    d["untraded"] = 0;
    d["prev_close"] = 0;
    d["near_atm"] = 0;
    d["ttm_window"] = 0;
    for (auto& rec : records) {
        const auto& q = rec.quote;
        if (q.volume <= 0) {
            ++d["untraded"];
        } else if (!q.prev_close || !(*q.prev_close > 0.0)) {
            ++d["prev_close"];
        } else if (!(std::abs(1.0 - rec.spot / q.strike) <= cfg.max_moneyness_gap)) {
            ++d["near_atm"];
        } else if (rec.ttm_days < cfg.min_ttm_days || rec.ttm_days > cfg.max_ttm_days) {
            ++d["ttm_window"];
        } else {
            result.records.push_back(std::move(rec));
        }
    }
    return result;
}

SplitDataset chronological_split(std::vector<ContractRecord> records, double train_fraction) {
    if (records.empty()) throw ValidationError("cannot split an empty dataset");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ValidationError("train fraction must lie in (0, 1)");
    }
    std::stable_sort(records.begin(), records.end(),
                     [](const auto& a, const auto& b) { return a.date() < b.date(); });

    const double target = train_fraction * static_cast<double>(records.size());
    std::size_t best = 0;
    double best_gap = 0.0;
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].date() == records[i - 1].date()) continue;
        const double gap = std::abs(static_cast<double>(i) - target);
        if (best == 0 || gap < best_gap) {
            best = i;
            best_gap = gap;
        }
    }
    if (best == 0) throw ValidationError("all records share one date; no split boundary exists");

    SplitDataset out;
    out.train.assign(std::make_move_iterator(records.begin()),
                     std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(best)));
    out.test.assign(std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(best)),
                    std::make_move_iterator(records.end()));
    return out;
}

}  // namespace optbin
