#include "optbin/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "optbin/black_scholes.hpp"
#include "optbin/ensemble.hpp"
#include "optbin/errors.hpp"

namespace optbin {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFileFormatVersion = 1;
const std::vector<double> kReportQuantiles = {0.02, 0.25, 0.5, 0.75, 0.98};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::string csv_header(const std::string& hash) { return "# config_hash=" + hash + "\n"; }

// Rejects keys the loader does not understand, so typos fail loudly.
void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + " must be a JSON object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ValidationError("unknown config key '" + where + key + "'");
    }
}

template <typename T>
void take(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config key '") + key + "': " + e.what());
    }
}

std::vector<ContractRecord> pick_split(SplitDataset data, const std::string& split) {
    if (split == "train") return std::move(data.train);
    if (split == "test") return std::move(data.test);
    if (split == "all") {
        auto out = std::move(data.train);
        out.insert(out.end(), std::make_move_iterator(data.test.begin()),
                   std::make_move_iterator(data.test.end()));
        return out;
    }
    throw ValidationError("split must be train, test or all");
}

std::vector<ContractRecord> pooled(const std::vector<fs::path>& paths, const std::string& split) {
    if (paths.empty()) throw ValidationError("no dataset files given");
    std::vector<ContractRecord> out;
    for (const auto& p : paths) {
        auto part = pick_split(load_dataset(p), split);
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return out;
}

std::vector<double> predict_all(const TrainedModel& model, std::span<const ContractRecord> records) {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& rec : records) {
        const auto fv = make_features(rec, model.approach);
        if (fv.values.size() != model.input_size()) {
            throw ValidationError("feature length " + std::to_string(fv.values.size()) +
                                  " does not match model input " + std::to_string(model.input_size()));
        }
        out.push_back(model.predict(fv.values));
    }
    return out;
}

}  // namespace

Learner learner_from_string(const std::string& s) {
    if (s == "ann") return Learner::Ann;
    if (s == "gbt") return Learner::Gbt;
    if (s == "ensemble") return Learner::Ensemble;
    throw ValidationError("unknown learner '" + s + "' (ann, gbt, ensemble)");
}

std::string to_string(Learner l) {
    switch (l) {
        case Learner::Ann: return "ann";
        case Learner::Gbt: return "gbt";
        case Learner::Ensemble: return "ensemble";
    }
    return "?";
}

std::string config_hash(const json& doc) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : doc.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t derive_seed(std::uint64_t root, const std::string& stage) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ root;
    for (unsigned char c : stage) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
    check_keys(doc,
               {"underlying", "options", "yields", "datasets", "model", "out", "split", "approach",
                "learner", "bins", "train_fraction", "seed", "mlp", "gbt", "sweep", "widths", "simulate"},
               "");
    ExperimentConfig c;
    if (doc.contains("underlying")) c.underlying_csv = doc.at("underlying").get<std::string>();
    if (doc.contains("options")) c.options_csv = doc.at("options").get<std::string>();
    if (doc.contains("yields")) c.yields_csv = doc.at("yields").get<std::string>();
    if (doc.contains("model")) c.model_path = doc.at("model").get<std::string>();
    if (doc.contains("out")) c.out_dir = doc.at("out").get<std::string>();
    std::vector<std::string> ds;
    take(doc, "datasets", ds);
    c.datasets.assign(ds.begin(), ds.end());
    take(doc, "split", c.split);
    int approach = 1;
    take(doc, "approach", approach);
    c.approach = approach_from_int(approach);
    std::string learner = "ann";
    take(doc, "learner", learner);
    c.learner = learner_from_string(learner);
    take(doc, "train_fraction", c.train_fraction);
    take(doc, "seed", c.seed);
    take(doc, "widths", c.widths);

    if (doc.contains("bins")) {
        const auto& b = doc.at("bins");
        check_keys(b, {"width", "n_classes"}, "bins.");
        take(b, "width", c.bins.width);
        take(b, "n_classes", c.bins.n_classes);
    }
    c.bins.validate();

    if (doc.contains("mlp")) {
        const auto& m = doc.at("mlp");
        check_keys(m, {"hidden", "learning_rate", "batch_size", "epochs", "validation_fraction", "patience"},
                   "mlp.");
        take(m, "hidden", c.mlp.hidden);
        take(m, "learning_rate", c.mlp.learning_rate);
        take(m, "batch_size", c.mlp.batch_size);
        take(m, "epochs", c.mlp.epochs);
        take(m, "validation_fraction", c.mlp.validation_fraction);
        take(m, "patience", c.mlp.patience);
    }
    c.mlp.n_classes = c.bins.n_classes;
    c.mlp.seed = derive_seed(c.seed, "mlp");
    c.mlp.validate();

    if (doc.contains("gbt")) {
        const auto& g = doc.at("gbt");
        check_keys(g, {"n_rounds", "max_depth", "shrinkage"}, "gbt.");
        take(g, "n_rounds", c.gbt.n_rounds);
        take(g, "max_depth", c.gbt.max_depth);
        take(g, "shrinkage", c.gbt.shrinkage);
    }
    c.gbt.n_classes = c.bins.n_classes;
    c.gbt.validate();

    if (doc.contains("sweep")) {
        const auto& w = doc.at("sweep");
        check_keys(w, {"sigmas", "days", "mu", "s0", "rate", "repetitions", "ttms", "moneyness_offsets",
                       "strike_tick"},
                   "sweep.");
        take(w, "sigmas", c.sweep.sigmas);
        take(w, "days", c.sweep.gbm.days);
        take(w, "mu", c.sweep.gbm.mu);
        take(w, "s0", c.sweep.gbm.s0);
        take(w, "rate", c.sweep.synth.rate);
        take(w, "repetitions", c.sweep.repetitions);
        take(w, "ttms", c.sweep.synth.ttms);
        take(w, "moneyness_offsets", c.sweep.synth.moneyness_offsets);
        take(w, "strike_tick", c.sweep.synth.strike_tick);
    }
    c.sweep.gbm.seed = derive_seed(c.seed, "sweep");
    for (double sg : c.sweep.sigmas) {
        if (!(sg > 0.0)) throw ValidationError("sweep volatilities must be positive");
    }

    c.simulate.days = c.sweep.gbm.days;
    c.simulate.mu = c.sweep.gbm.mu;
    c.simulate.s0 = c.sweep.gbm.s0;
    if (doc.contains("simulate")) {
        const auto& m = doc.at("simulate");
        check_keys(m, {"sigma", "days", "mu", "s0"}, "simulate.");
        take(m, "sigma", c.simulate.sigma);
        take(m, "days", c.simulate.days);
        take(m, "mu", c.simulate.mu);
        take(m, "s0", c.simulate.s0);
    }
    c.simulate.seed = derive_seed(c.seed, "simulate");

    c.source = doc;
    c.hash = config_hash(doc);
    return c;
}

json record_to_json(const ContractRecord& r) {
    json window = json::array();
    for (const auto& b : r.window) window.push_back({format_date(b.date), b.open, b.high, b.low, b.close});
    return {{"date", format_date(r.quote.date)},
            {"expiry", format_date(r.quote.expiry)},
            {"strike", r.quote.strike},
            {"close", r.quote.close},
            {"prev_close", r.quote.prev_close ? json(*r.quote.prev_close) : json(nullptr)},
            {"volume", r.quote.volume},
            {"spot", r.spot},
            {"ttm_days", r.ttm_days},
            {"rate", r.rate},
            {"window", window}};
}

ContractRecord record_from_json(const json& j) {
    ContractRecord r;
    r.quote.date = parse_date(j.at("date").get<std::string>());
    r.quote.expiry = parse_date(j.at("expiry").get<std::string>());
    r.quote.strike = j.at("strike").get<double>();
    r.quote.close = j.at("close").get<double>();
    if (!j.at("prev_close").is_null()) r.quote.prev_close = j.at("prev_close").get<double>();
    r.quote.volume = j.at("volume").get<long long>();
    r.spot = j.at("spot").get<double>();
    r.ttm_days = j.at("ttm_days").get<int>();
    r.rate = j.at("rate").get<double>();
    for (const auto& b : j.at("window")) {
        r.window.push_back({parse_date(b.at(0).get<std::string>()), b.at(1).get<double>(),
                            b.at(2).get<double>(), b.at(3).get<double>(), b.at(4).get<double>()});
    }
    if (r.window.size() != kWindowBars) throw ValidationError("dataset record window must hold 20 bars");
    if (r.window.back().close != r.spot) throw ValidationError("dataset record spot differs from window close");
    return r;
}

void save_dataset(const fs::path& path, const SplitDataset& data, const DropCounts& drops,
                  const std::string& hash) {
    json train = json::array();
    json test = json::array();
    for (const auto& r : data.train) train.push_back(record_to_json(r));
    for (const auto& r : data.test) test.push_back(record_to_json(r));
    write_text(path, json{{"format", "optbin-dataset"},
                          {"version", kFileFormatVersion},
                          {"config_hash", hash},
                          {"drops", drops},
                          {"train", train},
                          {"test", test}}
                         .dump() +
                         "\n");
}

SplitDataset load_dataset(const fs::path& path) {
    const auto j = read_json(path);
    if (j.value("format", "") != "optbin-dataset" || j.value("version", 0) != kFileFormatVersion) {
        throw ValidationError(path.string() + " is not an optbin-dataset v1 file");
    }
    SplitDataset d;
    try {
        for (const auto& r : j.at("train")) d.train.push_back(record_from_json(r));
        for (const auto& r : j.at("test")) d.test.push_back(record_from_json(r));
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return d;
}

std::size_t TrainedModel::input_size() const {
    if (mlp) return mlp->input_size();
    if (gbt) return gbt->input_size;
    return 0;
}

double TrainedModel::predict(std::span<const double> features) const {
    switch (learner) {
        case Learner::Ann: return mlp->predict_bin(features).value;
        case Learner::Gbt: return gbt->predict_bin(features).value;
        case Learner::Ensemble:
            return average_predict(mlp->predict_bin(features), gbt->predict_bin(features)).value();
    }
    return 0.0;
}

json TrainedModel::to_json(const std::string& hash) const {
    json j{{"format", "optbin-model"},
           {"version", kFileFormatVersion},
           {"config_hash", hash},
           {"learner", optbin::to_string(learner)},
           {"approach", static_cast<int>(approach)},
           {"bins", {{"width", bins.width}, {"n_classes", bins.n_classes}}}};
    if (mlp) j["mlp"] = mlp->to_json();
    if (gbt) j["gbt"] = gbt->to_json();
    return j;
}

TrainedModel TrainedModel::from_json(const json& j) {
    if (j.value("format", "") != "optbin-model" || j.value("version", 0) != kFileFormatVersion) {
        throw ValidationError("not an optbin-model v1 file");
    }
    TrainedModel m;
    m.learner = learner_from_string(j.at("learner").get<std::string>());
    m.approach = approach_from_int(j.at("approach").get<int>());
    m.bins.width = j.at("bins").at("width").get<double>();
    m.bins.n_classes = j.at("bins").at("n_classes").get<int>();
    m.bins.validate();
    if (j.contains("mlp")) m.mlp = MlpModel::from_json(j.at("mlp"));
    if (j.contains("gbt")) m.gbt = GbtModel::from_json(j.at("gbt"));
    const bool need_mlp = m.learner != Learner::Gbt;
    const bool need_gbt = m.learner != Learner::Ann;
    if ((need_mlp && !m.mlp) || (need_gbt && !m.gbt)) throw ValidationError("model file lacks learner parameters");
    if (m.mlp && m.gbt && m.mlp->input_size() != m.gbt->input_size) {
        throw ValidationError("ensemble members disagree on input size");
    }
    if (m.input_size() != feature_count(m.approach)) throw ValidationError("model input size does not match approach");
    return m;
}

void save_model(const fs::path& path, const TrainedModel& m, const std::string& hash) {
    write_text(path, m.to_json(hash).dump() + "\n");
}

TrainedModel load_model(const fs::path& path) {
    try {
        return TrainedModel::from_json(read_json(path));
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

TrainingSet make_training_set(std::span<const ContractRecord> records, Approach a, const BinConfig& bins) {
    TrainingSet ts;
    ts.features.reserve(records.size());
    for (const auto& r : records) ts.features.push_back(make_features(r, a).values);
    ts.labels = true_labels(records, bins);
    return ts;
}

TrainOutput train_model(std::span<const ContractRecord> records, const ExperimentConfig& cfg) {
    if (records.empty()) throw ValidationError("no training records");
    const auto data = make_training_set(records, cfg.approach, cfg.bins);
    TrainOutput out;
    out.model.learner = cfg.learner;
    out.model.approach = cfg.approach;
    out.model.bins = cfg.bins;
    if (cfg.learner != Learner::Gbt) {
        auto mc = cfg.mlp;
        mc.n_classes = cfg.bins.n_classes;
        auto r = train_mlp(data, mc);
        out.model.mlp = std::move(r.model);
        out.mlp_epoch_loss = std::move(r.epoch_loss);
        out.mlp_validation_loss = std::move(r.validation_loss);
    }
    if (cfg.learner != Learner::Ann) {
        auto gc = cfg.gbt;
        gc.n_classes = cfg.bins.n_classes;
        auto r = boost(data, gc);
        out.model.gbt = std::move(r.model);
        out.gbt_round_loss = std::move(r.round_loss);
    }
    return out;
}

void cmd_ingest(const ExperimentConfig& cfg) {
    if (cfg.underlying_csv.empty() || cfg.options_csv.empty() || cfg.yields_csv.empty()) {
        throw ValidationError("ingest needs underlying, options and yields CSV paths");
    }
    const auto bars = parse_underlying_csv(cfg.underlying_csv);
    auto quotes = parse_option_csv(cfg.options_csv);
    auto yields = parse_yield_csv(cfg.yields_csv);
    if (quotes.empty()) throw ValidationError("option file has no quotes");

    auto built = build_records(bars, std::move(quotes), std::move(yields));
    auto filtered = filter_records(std::move(built.records));
    DropCounts drops = built.dropped;
    for (const auto& [k, v] : filtered.dropped) drops[k] += v;
    if (filtered.records.empty()) throw ValidationError("no records survive filtering");

    const auto kept = filtered.records.size();
    const auto split = chronological_split(std::move(filtered.records), cfg.train_fraction);
    save_dataset(cfg.out_dir / "dataset.json", split, drops, cfg.hash);
    json report{{"config_hash", cfg.hash},
                {"drops", drops},
                {"kept", kept},
                {"train", split.train.size()},
                {"test", split.test.size()}};
    write_json(cfg.out_dir / "drops.json", report);
}

void cmd_simulate(const ExperimentConfig& cfg) {
    auto records = synthetic_dataset(cfg.simulate, cfg.sweep.synth);
    if (records.empty()) throw ValidationError("simulation produced no contracts");
    const auto n = records.size();
    const auto split = chronological_split(std::move(records), cfg.train_fraction);
    save_dataset(cfg.out_dir / "dataset.json", split, {}, cfg.hash);
    write_json(cfg.out_dir / "simulate.json", {{"config_hash", cfg.hash},
                                               {"records", n},
                                               {"train", split.train.size()},
                                               {"test", split.test.size()},
                                               {"sigma", cfg.simulate.sigma}});
}

void cmd_train(const ExperimentConfig& cfg) {
    const auto records = pooled(cfg.datasets, "train");
    const auto out = train_model(records, cfg);
    save_model(cfg.out_dir / "model.json", out.model, cfg.hash);

    std::vector<FeatureVector> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.push_back(make_features(r, cfg.approach));
    std::ostringstream fcsv;
    fcsv << csv_header(cfg.hash);
    write_feature_csv(fcsv, cfg.approach, rows);
    write_text(cfg.out_dir / "train_features.csv", fcsv.str());

    std::string curve = csv_header(cfg.hash);
    if (!out.mlp_epoch_loss.empty()) {
        curve += "epoch,loss,validation_loss\n";
        for (std::size_t e = 0; e < out.mlp_epoch_loss.size(); ++e) {
            curve += std::to_string(e + 1) + "," + num(out.mlp_epoch_loss[e]) + "," +
                     (e < out.mlp_validation_loss.size() ? num(out.mlp_validation_loss[e]) : "") + "\n";
        }
        write_text(cfg.out_dir / "loss_curve.csv", curve);
    }
    if (!out.gbt_round_loss.empty()) {
        std::string gcurve = csv_header(cfg.hash) + "round,loss\n";
        for (std::size_t m = 0; m < out.gbt_round_loss.size(); ++m) {
            gcurve += std::to_string(m) + "," + num(out.gbt_round_loss[m]) + "\n";
        }
        write_text(cfg.out_dir / "gbt_loss_curve.csv", gcurve);
    }

    const auto predicted = predict_all(out.model, records);
    const auto actual = true_labels(records, cfg.bins);
    json report{{"config_hash", cfg.hash},
                {"learner", to_string(cfg.learner)},
                {"approach", static_cast<int>(cfg.approach)},
                {"rows", records.size()},
                {"datasets", cfg.datasets.size()},
                {"train_metrics", to_json(evaluate_predictions(actual, predicted, cfg.bins.width))}};
    if (!out.mlp_epoch_loss.empty()) report["mlp_epochs_run"] = out.mlp_epoch_loss.size();
    write_json(cfg.out_dir / "training_report.json", report);
}

void cmd_evaluate(const ExperimentConfig& cfg) {
    if (cfg.model_path.empty()) throw ValidationError("evaluate needs a model file");
    const auto model = load_model(cfg.model_path);
    const auto records = pooled(cfg.datasets, cfg.split);
    if (records.empty()) throw ValidationError("no records in the requested split");
    const auto predicted = predict_all(model, records);
    auto report = evaluation_report(records, predicted, model.bins, cfg.hash, cfg.out_dir);
    report["learner"] = to_string(model.learner);
    report["approach"] = static_cast<int>(model.approach);
    report["split"] = cfg.split;
    write_json(cfg.out_dir / "metrics.json", report);
}

json evaluation_report(std::span<const ContractRecord> records, std::span<const double> predicted,
                       const BinConfig& bins, const std::string& hash, const fs::path& out_dir) {
    const auto actual = true_labels(records, bins);
    const auto report = evaluate_predictions(actual, predicted, bins.width, kReportQuantiles);
    const auto dist = error_distribution(actual, predicted, kReportQuantiles);

    std::string cdf = csv_header(hash) + "error,cdf\n";
    for (const auto& [e, p] : dist.cdf) cdf += num(e) + "," + num(p) + "\n";
    write_text(out_dir / "cdf.csv", cdf);

    std::vector<double> mid;
    std::vector<double> close;
    std::string scatter = csv_header(hash) + "date,strike,predicted_mid_price,actual_price\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        mid.push_back(bin_mid_price(predicted[i], records[i].quote.strike, bins));
        close.push_back(records[i].quote.close);
        scatter += format_date(records[i].date()) + "," + num(records[i].quote.strike) + "," + num(mid.back()) +
                   "," + num(close.back()) + "\n";
    }
    write_text(out_dir / "scatter.csv", scatter);

    json regression = nullptr;
    try {
        const auto d = orthogonal_regression(mid, close);
        regression = {{"slope", d.slope}, {"intercept", d.intercept}};
    } catch (const ValidationError& e) {
        regression = {{"error", e.what()}};
    }

    const auto bench = bs_benchmark(records, bins);
    const auto bench_pred = as_values(bench.labels);
    auto bench_json = to_json(evaluate_predictions(actual, bench_pred, bins.width, kReportQuantiles));
    bench_json["floored_sigma"] = bench.floored_sigma;

    const auto band = iv_band_series(records, predicted, bins);
    std::string band_csv = csv_header(hash) + "date,iv_low,iv_high,iv_market\n";
    for (const auto& p : band.points) {
        band_csv += format_date(p.date) + "," + num(p.iv_low) + "," + num(p.iv_high) + "," + num(p.iv_market) + "\n";
    }
    write_text(out_dir / "iv_band.csv", band_csv);

    return {{"config_hash", hash},
            {"model", to_json(report)},
            {"black_scholes", bench_json},
            {"regression", regression},
            {"iv_band", {{"hit_rate", band.hit_rate},
                         {"dates", band.points.size()},
                         {"dropped_dates", band.dropped_dates}}}};
}

std::string emv_csv(const EmvCurve& curve, const std::string& hash) {
    std::string s = csv_header(hash) + "sigma,em\n";
    for (const auto& p : curve.points) s += num(p.sigma) + "," + num(p.em) + "\n";
    return s;
}

void cmd_sweep(const ExperimentConfig& cfg) {
    if (cfg.model_path.empty()) throw ValidationError("sweep needs a model file");
    const auto model = load_model(cfg.model_path);
    if (model.approach != Approach::I) {
        throw ValidationError("the volatility sweep only supports Approach I models");
    }
    const auto curve = emv_sweep([&](std::span<const double> x) { return model.predict(x); }, cfg.sweep,
                                 model.bins);
    write_text(cfg.out_dir / "emv.csv", emv_csv(curve, cfg.hash));
    write_json(cfg.out_dir / "emv.json", {{"config_hash", cfg.hash}, {"emv", curve.emv}});
}

void cmd_binwidth_study(const ExperimentConfig& cfg) {
    if (cfg.widths.empty()) throw ValidationError("binwidth-study needs at least one width");
    for (double w : cfg.widths) {
        if (!(w > 0.0)) throw ValidationError("bin widths must be positive");
    }
    SplitDataset data;
    data.train = pooled(cfg.datasets, "train");
    data.test = pooled(cfg.datasets, "test");
    const double range = cfg.bins.width * cfg.bins.n_classes;
    const BinTrainer trainer = [&](const std::vector<ContractRecord>& train,
                                   const std::vector<ContractRecord>& test, const BinConfig& bins) {
        auto local = cfg;
        local.bins = bins;
        const auto out = train_model(train, local);
        return predict_all(out.model, test);
    };
    const auto points = em_vs_binwidth(data, cfg.widths, trainer, range);
    std::string csv = csv_header(cfg.hash) + "width,em\n";
    for (const auto& p : points) csv += num(p.width) + "," + num(p.em) + "\n";
    write_text(cfg.out_dir / "binwidth.csv", csv);
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Bin-classification option pricing experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> approach;
    std::optional<std::string> learner;
    std::optional<std::string> model;
    std::optional<std::string> split;
    std::optional<std::string> underlying;
    std::optional<std::string> options;
    std::optional<std::string> yields;
    std::optional<double> bin_width;
    std::optional<int> n_classes;
    std::optional<int> epochs;
    std::optional<double> train_fraction;
    std::optional<double> sim_sigma;
    std::vector<std::string> datasets;
    std::vector<double> sigmas;
    std::vector<double> widths;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON experiment config");
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_option("--seed", seed, "Root random seed");
    };
    auto* ingest = app.add_subcommand("ingest", "Parse, join, filter and split market CSVs");
    add_common(ingest);
    ingest->add_option("--underlying", underlying, "Underlying OHLC CSV");
    ingest->add_option("--options", options, "Option quotes CSV");
    ingest->add_option("--yields", yields, "Bond yield CSV");
    ingest->add_option("--train-fraction", train_fraction, "Chronological train share");

    auto* simulate = app.add_subcommand("simulate", "Write a synthetic GBM + Black-Scholes dataset");
    add_common(simulate);
    simulate->add_option("--sigma", sim_sigma, "Volatility of the simulated path");
    simulate->add_option("--train-fraction", train_fraction, "Chronological train share");

    auto* train = app.add_subcommand("train", "Train a learner on one or more pooled datasets");
    add_common(train);
    train->add_option("--dataset", datasets, "Dataset file (repeat to pool)");
    train->add_option("--approach", approach, "Feature approach 1, 2 or 3");
    train->add_option("--learner", learner, "ann, gbt or ensemble");
    train->add_option("--bin-width", bin_width, "Bin width");
    train->add_option("--n-classes", n_classes, "Number of bins");
    train->add_option("--epochs", epochs, "Maximum MLP epochs");

    auto* evaluate = app.add_subcommand("evaluate", "Score a model on a dataset");
    add_common(evaluate);
    evaluate->add_option("--model", model, "Model file");
    evaluate->add_option("--dataset", datasets, "Dataset file (repeat to pool)");
    evaluate->add_option("--split", split, "train, test or all");

    auto* sweep = app.add_subcommand("sweep", "Error-vs-volatility sweep on simulated GBM data");
    add_common(sweep);
    sweep->add_option("--model", model, "Approach I model file");
    sweep->add_option("--sigmas", sigmas, "Volatility grid override");

    auto* binwidth = app.add_subcommand("binwidth-study", "EM against bin width");
    add_common(binwidth);
    binwidth->add_option("--dataset", datasets, "Dataset file (repeat to pool)");
    binwidth->add_option("--widths", widths, "Bin widths");
    binwidth->add_option("--approach", approach, "Feature approach 1, 2 or 3");
    binwidth->add_option("--learner", learner, "ann, gbt or ensemble");
    binwidth->add_option("--epochs", epochs, "Maximum MLP epochs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        json doc = config_path.empty() ? json::object() : read_json(config_path);
        if (!doc.is_object()) throw ValidationError("config must be a JSON object");
        if (out_dir) doc["out"] = *out_dir;
        if (seed) doc["seed"] = *seed;
        if (approach) doc["approach"] = *approach;
        if (learner) doc["learner"] = *learner;
        if (model) doc["model"] = *model;
        if (split) doc["split"] = *split;
        if (underlying) doc["underlying"] = *underlying;
        if (options) doc["options"] = *options;
        if (yields) doc["yields"] = *yields;
        if (train_fraction) doc["train_fraction"] = *train_fraction;
        if (bin_width) doc["bins"]["width"] = *bin_width;
        if (n_classes) doc["bins"]["n_classes"] = *n_classes;
        if (epochs) doc["mlp"]["epochs"] = *epochs;
        if (sim_sigma) doc["simulate"]["sigma"] = *sim_sigma;
        if (!datasets.empty()) doc["datasets"] = datasets;
        if (!sigmas.empty()) doc["sweep"]["sigmas"] = sigmas;
        if (!widths.empty()) doc["widths"] = widths;

        const auto cfg = ExperimentConfig::from_json(doc);
        if (ingest->parsed()) cmd_ingest(cfg);
        if (simulate->parsed()) cmd_simulate(cfg);
        if (train->parsed()) cmd_train(cfg);
        if (evaluate->parsed()) cmd_evaluate(cfg);
        if (sweep->parsed()) cmd_sweep(cfg);
        if (binwidth->parsed()) cmd_binwidth_study(cfg);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace optbin
