#include "optbin/features.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "optbin/errors.hpp"

namespace optbin {

Approach approach_from_int(int id) {
    switch (id) {
        case 1: return Approach::I;
        case 2: return Approach::II;
        case 3: return Approach::III;
        default: throw ValidationError("unknown approach id " + std::to_string(id));
    }
}

std::size_t feature_count(Approach a) {
    switch (a) {
        case Approach::I: return 22;
        case Approach::II: return 17;
        case Approach::III: return 19;
    }
    return 0;
}

std::vector<double> log_returns(std::span<const double> prices) {
    if (prices.size() < 2) throw ValidationError("need at least two prices for log returns");
    for (double p : prices) {
        if (!(p > 0.0) || !std::isfinite(p)) throw ValidationError("log returns need positive prices");
    }
    std::vector<double> out(prices.size() - 1);
    for (std::size_t i = 0; i + 1 < prices.size(); ++i) out[i] = std::log(prices[i + 1] / prices[i]);
    return out;
}

std::vector<double> order_statistics(std::span<const double> values) {
    std::vector<double> out(values.begin(), values.end());
    std::sort(out.begin(), out.end());
    return out;
}

double signed_sqrt(double x) {
    if (x == 0.0) return 0.0;
    return x / std::sqrt(std::abs(x));
}

namespace {

void check_window(const ContractRecord& rec) {
    if (rec.window.size() != kWindowBars) {
        throw ValidationError("record window must hold exactly " + std::to_string(kWindowBars) +
                              " bars");
    }
}

std::vector<double> closes(const ContractRecord& rec) {
    std::vector<double> out;
    out.reserve(rec.window.size());
    for (const auto& b : rec.window) out.push_back(b.close);
    return out;
}

void append_contract_terms(std::vector<double>& v, const ContractRecord& rec) {
    v.push_back(static_cast<double>(rec.ttm_days));
    v.push_back(rec.rate);
    v.push_back(rec.spot / rec.quote.strike);
}

}  // namespace

OhlcMoments ohlc_moments(const ContractRecord& rec) {
    check_window(rec);
    std::array<std::vector<double>, 4> facets;
    for (auto& f : facets) f.reserve(kWindowBars);
    for (const auto& b : rec.window) {
        facets[0].push_back(b.open);
        facets[1].push_back(b.high);
        facets[2].push_back(b.low);
        facets[3].push_back(b.close);
    }
    std::array<std::vector<double>, 4> lr;
    for (std::size_t k = 0; k < 4; ++k) lr[k] = log_returns(facets[k]);

    OhlcMoments m;
    const auto n = static_cast<double>(lr[0].size());
    for (std::size_t k = 0; k < 4; ++k) {
        double s = 0.0;
        for (double x : lr[k]) s += x;
        m.mean[k] = s / n;
    }
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < lr[i].size(); ++t) {
                s += (lr[i][t] - m.mean[i]) * (lr[j][t] - m.mean[j]);
            }
            m.cov[i][j] = m.cov[j][i] = s / (n - 1.0);
        }
    }
    return m;
}

FeatureVector approach1(const ContractRecord& rec) {
    check_window(rec);
    const auto c = closes(rec);
    FeatureVector fv{Approach::I, order_statistics(log_returns(c))};
    append_contract_terms(fv.values, rec);
    return fv;
}

FeatureVector approach2(const ContractRecord& rec) {
    const auto m = ohlc_moments(rec);
    FeatureVector fv{Approach::II, {}};
    fv.values.reserve(feature_count(Approach::II));
    fv.values.insert(fv.values.end(), m.mean.begin(), m.mean.end());
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j <= i; ++j) fv.values.push_back(signed_sqrt(m.cov[i][j]));
    }
    append_contract_terms(fv.values, rec);
    return fv;
}

FeatureVector approach3(const ContractRecord& rec) {
    if (!rec.quote.prev_close) {
        throw ValidationError("approach III needs a previous close; record was not filtered");
    }
    FeatureVector fv = approach2(rec);
    fv.approach = Approach::III;
    const double strike = rec.quote.strike;
    double sum = 0.0;
    for (const auto& b : rec.window) sum += b.close;
    fv.values.push_back(*rec.quote.prev_close / strike);
    fv.values.push_back(sum / static_cast<double>(rec.window.size()) / strike);
    return fv;
}

FeatureVector make_features(const ContractRecord& rec, Approach a) {
    switch (a) {
        case Approach::I: return approach1(rec);
        case Approach::II: return approach2(rec);
        case Approach::III: return approach3(rec);
    }
    throw ValidationError("unknown approach");
}

std::vector<std::string> feature_names(Approach a) {
    std::vector<std::string> names;
    if (a == Approach::I) {
        for (int i = 1; i <= 19; ++i) names.push_back("lr_os_" + std::to_string(i));
    } else {
        static constexpr const char* facet[] = {"o", "h", "l", "c"};
        for (const char* f : facet) names.push_back(std::string("mu_") + f);
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j <= i; ++j) {
                names.push_back(std::string("ssqrt_cov_") + facet[i] + facet[j]);
            }
        }
    }
    names.insert(names.end(), {"ttm_days", "rate", "moneyness"});
    if (a == Approach::III) names.insert(names.end(), {"prev_close_over_k", "mean_moneyness"});
    return names;
}

void write_feature_csv(std::ostream& out, Approach a, std::span<const FeatureVector> rows) {
    const auto names = feature_names(a);
    for (std::size_t i = 0; i < names.size(); ++i) {
        out << (i ? "," : "") << i << ":" << names[i];
    }
    out << '\n' << std::setprecision(17);
    for (const auto& row : rows) {
        if (row.values.size() != names.size()) throw ValidationError("feature row length mismatch");
        for (std::size_t i = 0; i < row.values.size(); ++i) out << (i ? "," : "") << row.values[i];
        out << '\n';
    }
}

}  // namespace optbin
