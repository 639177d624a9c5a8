#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "optbin/black_scholes.hpp"
#include "optbin/ensemble.hpp"
#include "optbin/experiment.hpp"
#include "optbin/features.hpp"
#include "optbin/gbt.hpp"
#include "optbin/labels.hpp"
#include "optbin/metrics.hpp"
#include "optbin/mlp.hpp"
#include "optbin/simulator.hpp"
#include "oracles.hpp"

using namespace optbin;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

const fs::path& work_dir() {
    static const fs::path dir = fs::temp_directory_path() / ("optbin_acceptance_" + std::to_string(::getpid()));
    return dir;
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "optbin");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

void require_cli(const std::vector<std::string>& args) {
    if (cli(args) != 0) throw std::runtime_error("optbin " + args.front() + " failed");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<EmvPoint> parse_emv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    std::vector<EmvPoint> out;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line == "sigma,em") continue;
        const auto comma = line.find(',');
        out.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    }
    return out;
}

double em_at(const std::vector<EmvPoint>& curve, double sigma) {
    for (const auto& p : curve) {
        if (std::abs(p.sigma - sigma) < 1e-12) return p.em;
    }
    throw std::runtime_error("sigma missing from sweep output");
}

Outcome black_scholes_oracle() {
    const double price = bs_call({100, 100, 0.05, 0.2, 0.5});
    const double quad = oracle::call_by_quadrature(100, 100, 0.05, 0.2, 0.5);
    double homog = 0.0;
    for (double c : {0.01, 1.0, 137.0}) {
        homog = std::max(homog, std::abs(bs_call({c * 100, c * 100, 0.05, 0.2, 0.5}) - c * price));
    }
    return {std::abs(price - quad) <= 1e-6 && homog <= 1e-10,
            "|bs - quadrature| = " + fmt("%.2e", std::abs(price - quad)) + ", homogeneity error " + fmt("%.2e", homog)};
}

Outcome implied_vol_round_trip() {
    double worst = 0.0;
    for (double tau : {10.0 / 365, 45.0 / 365}) {
        for (int i = 1; i <= 20; ++i) {
            const double sigma = 0.05 * i;
            const double iv = implied_vol(bs_call({100, 100, 0.05, sigma, tau}), 100, 100, 0.05, tau);
            worst = std::max(worst, std::abs(iv - sigma));
        }
    }
    return {worst <= 1e-6, "max |iv - sigma| = " + fmt("%.2e", worst)};
}

double batch_loss(const MlpModel& m, const std::vector<std::vector<double>>& xs, const std::vector<BinLabel>& ys) {
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) s += ce_loss(m.forward(xs[i]), ys[i]);
    return s / static_cast<double>(xs.size());
}

Outcome mlp_gradient_check() {
    auto m = MlpModel::initialize({4, 2, 3}, 123);
    m.layers()[0].bias = {0.37, 0.21};
    const std::vector<std::vector<double>> xs = {
        {0.5, -0.3, 0.8, 0.1}, {-0.2, 0.9, 0.4, -0.7}, {1.0, 0.2, -0.5, 0.3}};
    const std::vector<BinLabel> ys = {BinLabel{1}, BinLabel{3}, BinLabel{2}};
    const auto g = gradients(m, xs, ys);
    const double h = 1e-5;
    double worst = 0.0;
    std::size_t count = 0;
    auto check = [&](double& p, double analytic) {
        const double saved = p;
        p = saved + h;
        const double up = batch_loss(m, xs, ys);
        p = saved - h;
        const double down = batch_loss(m, xs, ys);
        p = saved;
        const double numeric = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(numeric - analytic) / std::max(1e-8, std::abs(numeric) + std::abs(analytic)));
        ++count;
    };
    for (std::size_t k = 0; k < m.layers().size(); ++k) {
        auto& l = m.layers()[k];
        for (std::size_t i = 0; i < l.weights.size(); ++i) check(l.weights[i], g.layers[k].weights[i]);
        for (std::size_t i = 0; i < l.bias.size(); ++i) check(l.bias[i], g.layers[k].bias[i]);
    }
    return {worst <= 1e-4 && count == 4 * 2 + 2 + 2 * 3 + 3,
            std::to_string(count) + " parameters, max relative error " + fmt("%.2e", worst)};
}

Outcome gbt_equivalences() {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> z(0.0, 2.0);
    double resid_err = 0.0;
    for (int t = 0; t < 200; ++t) {
        std::vector<double> f(6);
        for (auto& v : f) v = z(rng);
        const BinLabel y{1 + t % 6};
        const auto res = residuals(f, y);
        const double h = 1e-6;
        for (std::size_t k = 0; k < f.size(); ++k) {
            auto up = f;
            auto down = f;
            up[k] += h;
            down[k] -= h;
            const double grad = (cross_entropy(softmax(up), y) - cross_entropy(softmax(down), y)) / (2 * h);
            resid_err = std::max(resid_err, std::abs(res[k] + grad));
        }
    }

    double freq_err = 0.0;
    std::uniform_int_distribution<int> cls(1, 7);
    for (int t = 0; t < 50; ++t) {
        std::vector<BinLabel> y(40 + t);
        std::vector<double> count(7, 0.0);
        for (auto& l : y) {
            l = BinLabel{cls(rng)};
            count[l.value - 1] += 1.0;
        }
        const auto p = softmax(initial_scores(y, 7));
        for (std::size_t k = 0; k < 7; ++k) {
            if (count[k] > 0) freq_err = std::max(freq_err, std::abs(p[k] - count[k] / static_cast<double>(y.size())));
        }
    }

    std::normal_distribution<double> n01;
    std::uniform_int_distribution<int> coarse(0, 5);
    double tree_err = 0.0;
    double optimal_gap = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        oracle::Rows x(30, std::vector<double>(3));
        std::vector<double> y(30);
        for (std::size_t i = 0; i < 30; ++i) {
            x[i] = {n01(rng), static_cast<double>(coarse(rng)), n01(rng)};
            y[i] = std::sin(2 * x[i][0]) + 0.3 * x[i][1] + 0.2 * n01(rng);
        }
        std::vector<std::size_t> all(30);
        std::iota(all.begin(), all.end(), 0);
        TreeConfig cfg;
        cfg.max_depth = 2;
        const auto tree = fit_tree(x, y, cfg);
        double got = 0.0;
        for (std::size_t i = 0; i < 30; ++i) got += (tree.predict(x[i]) - y[i]) * (tree.predict(x[i]) - y[i]);
        const double want = oracle::greedy_sse(x, y, all, 2);
        tree_err = std::max(tree_err, std::abs(got - want) / std::max(1.0, want));
        optimal_gap = std::max(optimal_gap, oracle::optimal_sse(x, y, all, 2) - got);
    }
    const bool ok = resid_err <= 1e-6 && freq_err <= 1e-9 && tree_err <= 1e-10 && optimal_gap <= 1e-10;
    return {ok, "residual vs gradient " + fmt("%.2e", resid_err) + ", prior vs frequency " + fmt("%.2e", freq_err) +
                    ", depth-2 tree vs enumeration " + fmt("%.2e", tree_err)};
}

Outcome metric_identities() {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> bin(1, 50);
    std::vector<BinLabel> c(10000);
    std::vector<double> p(10000);
    for (std::size_t i = 0; i < c.size(); ++i) {
        c[i] = BinLabel{bin(rng)};
        p[i] = bin(rng);
    }
    long long abs_sum = 0;
    long long hits = 0;
    long long misses = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const long long d = std::llabs(c[i].value - static_cast<long long>(p[i]));
        abs_sum += d;
        hits += d == 0;
        misses += d > 2;
    }
    const double n = static_cast<double>(c.size());
    const bool exact = em(c, p, 0.1) == 0.1 * static_cast<double>(abs_sum) / n &&
                       accuracy(c, p) == static_cast<double>(hits) / n && rho(c, p) == static_cast<double>(misses) / n;

    int violations = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        std::vector<BinLabel> truth(50), ann(50), gbt(50);
        for (std::size_t i = 0; i < truth.size(); ++i) {
            truth[i] = BinLabel{bin(rng)};
            ann[i] = BinLabel{bin(rng)};
            gbt[i] = BinLabel{bin(rng)};
        }
        const double e_ens = em(truth, average_predictions(ann, gbt), 0.1);
        const double bound = (em(truth, as_values(ann), 0.1) + em(truth, as_values(gbt), 0.1)) / 2;
        violations += e_ens > bound + 1e-15;
    }
    return {exact && violations == 0, std::string(exact ? "exact" : "MISMATCH") + " on 10000 pairs, " +
                                          std::to_string(violations) + "/" + std::to_string(trials) +
                                          " triangle violations"};
}

ContractRecord random_record(std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 0.02);
    std::uniform_real_distribution<double> u(0.0, 0.01);
    ContractRecord r;
    double c = 50.0;
    const Date start = parse_date("2020-06-01");
    for (int i = 0; i < static_cast<int>(kWindowBars); ++i) {
        c *= std::exp(z(rng));
        const double o = c * std::exp(z(rng) / 4);
        r.window.push_back({start + std::chrono::days{i}, o, std::max(o, c) * (1 + u(rng)),
                            std::min(o, c) * (1 - u(rng)), c});
    }
    r.spot = c;
    r.quote.date = r.window.back().date;
    r.quote.expiry = r.quote.date + std::chrono::days{17};
    r.quote.strike = c * (1 + z(rng));
    r.quote.close = c * 0.02;
    r.quote.prev_close = c * 0.03;
    r.quote.volume = 1;
    r.ttm_days = 17;
    r.rate = 0.063;
    return r;
}

Outcome binning_laws() {
    std::mt19937_64 rng(21);
    const BinConfig cfg;
    std::uniform_real_distribution<double> dist(1e-9, cfg.n_classes * cfg.width);
    std::vector<double> vs(100000);
    for (auto& v : vs) v = dist(rng);
    std::sort(vs.begin(), vs.end());
    std::size_t broken = 0;
    int prev = 1;
    for (double v : vs) {
        const auto n = bin_of(v, cfg);
        const auto iv = bin_interval(n, cfg);
        broken += !(v > iv.lo - 1e-12 && v <= iv.hi + 1e-12);
        broken += n.value < prev;
        prev = n.value;
    }
    for (int n = 1; n < cfg.n_classes; ++n) {
        const double edge = n * cfg.width;
        broken += bin_of(edge, cfg).value != n;
        broken += bin_of(edge + 1e-6, cfg).value != n + 1;
    }

    double worst = 0.0;
    for (int t = 0; t < 300; ++t) {
        const auto rec = random_record(rng);
        for (double c : {0.01, 3.7, 137.0}) {
            auto s = rec;
            for (auto& b : s.window) {
                b.open *= c;
                b.high *= c;
                b.low *= c;
                b.close *= c;
            }
            s.spot *= c;
            s.quote.strike *= c;
            s.quote.close *= c;
            *s.quote.prev_close *= c;
            for (auto a : {Approach::I, Approach::II, Approach::III}) {
                const auto x = make_features(rec, a).values;
                const auto y = make_features(s, a).values;
                for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
            }
        }
    }
    return {broken == 0 && worst <= 1e-12,
            std::to_string(broken) + " binning violations on 100000 values, max rescaling drift " + fmt("%.2e", worst)};
}

// simulate -> train -> sweep through the command-line entry point.
std::vector<EmvPoint> train_and_sweep(const fs::path& dir, const std::string& learner) {
    const auto data = (dir / "sim" / "dataset.json").string();
    const auto model_dir = dir / learner;
    require_cli({"train", "--seed", "7", "--learner", learner, "--dataset", data, "--out", model_dir.string()});
    require_cli({"sweep", "--seed", "99", "--model", (model_dir / "model.json").string(), "--out",
                 (model_dir / "sweep").string()});
    return parse_emv(slurp(model_dir / "sweep" / "emv.csv"));
}

Outcome synthetic_emv() {
    const auto dir = work_dir() / "emv";
    require_cli({"simulate", "--seed", "7", "--sigma", "0.13", "--out", (dir / "sim").string()});
    const auto train_rows = load_dataset(dir / "sim" / "dataset.json").train.size();
    bool ok = train_rows >= 5000;
    std::string detail = std::to_string(train_rows) + " training records";
    for (const std::string learner : {"ann", "gbt"}) {
        const auto curve = train_and_sweep(dir, learner);
        auto best = curve.front();
        for (const auto& p : curve) {
            if (p.em < best.em) best = p;
        }
        const double lo = curve.front().em;
        const double hi = curve.back().em;
        ok = ok && curve.size() == 20 && std::abs(best.sigma - 0.13) <= 0.02 + 1e-12 && lo >= 1.5 * best.em &&
             hi >= 1.5 * best.em;
        detail += "; " + learner + " emv " + fmt("%.2f", best.sigma) + " (EM " + fmt("%.4f", best.em) +
                  ", endpoints " + fmt("%.4f", lo) + "/" + fmt("%.4f", hi) + ")";
    }
    return {ok, detail};
}

Outcome combined_training() {
    const auto dir = work_dir() / "pooled";
    const auto low = dir / "sim_010";
    const auto high = dir / "sim_020";
    require_cli({"simulate", "--seed", "11", "--sigma", "0.1", "--out", low.string()});
    require_cli({"simulate", "--seed", "12", "--sigma", "0.2", "--out", high.string()});
    bool ok = true;
    std::string detail;
    for (const std::string learner : {"ann", "gbt"}) {
        auto fit = [&](const std::string& name, const std::vector<fs::path>& sets) {
            std::vector<std::string> args = {"train", "--seed", "7", "--learner", learner};
            for (const auto& s : sets) {
                args.push_back("--dataset");
                args.push_back((s / "dataset.json").string());
            }
            const auto out = dir / learner / name;
            args.push_back("--out");
            args.push_back(out.string());
            require_cli(args);
            require_cli({"sweep", "--seed", "99", "--model", (out / "model.json").string(), "--sigmas", "0.1", "0.2",
                         "--out", (out / "sweep").string()});
            return parse_emv(slurp(out / "sweep" / "emv.csv"));
        };
        const auto only_low = fit("low", {low});
        const auto only_high = fit("high", {high});
        const auto both = fit("both", {low, high});
        const double cross_at_low = em_at(only_high, 0.1);
        const double cross_at_high = em_at(only_low, 0.2);
        ok = ok && em_at(both, 0.1) <= cross_at_low && em_at(both, 0.2) <= cross_at_high;
        detail += (detail.empty() ? "" : "; ") + learner + " pooled " + fmt("%.4f", em_at(both, 0.1)) + "/" +
                  fmt("%.4f", em_at(both, 0.2)) + " vs cross " + fmt("%.4f", cross_at_low) + "/" +
                  fmt("%.4f", cross_at_high) + " (single-sigma own " + fmt("%.4f", em_at(only_low, 0.1)) + "/" +
                  fmt("%.4f", em_at(only_high, 0.2)) + ")";
    }
    return {ok, detail};
}

Outcome benchmark_self_consistency() {
    const BinConfig bins;
    double worst = 0.0;
    for (double sigma : {0.05, 0.13, 0.2}) {
        GbmConfig g;
        g.sigma = sigma;
        g.seed = 5;
        const auto recs = synthetic_dataset(g, SynthConfig{});
        BenchmarkOptions opts;
        opts.fixed_sigma = sigma;
        const auto res = bs_benchmark(recs, bins, opts);
        worst = std::max(worst, em(true_labels(recs, bins), as_values(res.labels), bins.width));
    }
    return {worst <= bins.width, "max EM " + fmt("%.4f", worst) + " against w = 0.1"};
}

Outcome determinism() {
    const auto dir = work_dir() / "emv";
    std::string detail;
    bool ok = true;
    for (const std::string learner : {"ann", "gbt"}) {
        const auto path = dir / learner / "sweep" / "emv.csv";
        if (!fs::exists(path)) return {false, "criterion 7 artifacts missing"};
        const auto first = slurp(path);
        train_and_sweep(dir, learner);
        const bool same = slurp(path) == first;
        ok = ok && same;
        detail += (detail.empty() ? "" : "; ") + learner + (same ? " identical" : " DIFFERENT") + " (" +
                  std::to_string(first.size()) + " bytes)";
    }
    return {ok, detail};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "black-scholes oracle", 1, black_scholes_oracle},
        {2, "implied-vol round trip", 5, implied_vol_round_trip},
        {3, "mlp gradient check", 10, mlp_gradient_check},
        {4, "gbt equivalences", 30, gbt_equivalences},
        {5, "metric identities", 10, metric_identities},
        {6, "binning laws and rescaling", 10, binning_laws},
        {7, "synthetic emv", 15 * 60, synthetic_emv},
        {8, "combined-training flattening", 20 * 60, combined_training},
        {9, "benchmark self-consistency", 60, benchmark_self_consistency},
        {10, "determinism", 15 * 60, determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.budget_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("criterion %d %s: %s  %s  [%.2f s of %.0f s]\n", c.id, c.name, pass ? "PASS" : "FAIL",
                    o.detail.c_str(), secs, c.budget_s);
        std::fflush(stdout);
    }
    std::error_code ec;
    fs::remove_all(work_dir(), ec);
    return failed == 0 ? 0 : 1;
}
