#include "recbench/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "recbench/error.hpp"

namespace recbench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, end);
}

std::string pct(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+.2f%%", v);
    return buf;
}

fs::path resolve(const fs::path& p, const fs::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return (base / p).lexically_normal();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json summary_json(const MetricSummary& s) { return {{"mean", s.mean}, {"std", s.std}, {"values", s.values}}; }

MetricSummary summary_from_json(const json& j) {
    MetricSummary s;
    s.mean = j.at("mean").get<double>();
    s.std = j.at("std").get<double>();
    s.values = j.value("values", std::vector<double>{});
    return s;
}

std::string failure_kind(const std::exception& e) {
    if (dynamic_cast<const CapacityError*>(&e)) return "capacity";
    if (dynamic_cast<const DataError*>(&e)) return "data";
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const MeterError*>(&e)) return "meter";
    if (dynamic_cast<const std::bad_alloc*>(&e)) return "capacity";
    return "error";
}

RatingPredictorPtr build_rating(const ExperimentConfig& cfg, const ModelSpec& m) {
    if (m.ensemble) {
        auto p = make_rating_ensemble(*m.ensemble, cfg.seed);
        static_cast<RatingEnsemble&>(*p).set_name(m.name);
        return p;
    }
    return make_rating_model(m.type, m.params, cfg.seed);
}

RankingScorerPtr build_ranking(const ExperimentConfig& cfg, const ModelSpec& m) {
    if (m.ensemble) {
        auto p = make_ranking_ensemble(*m.ensemble, cfg.seed);
        static_cast<RankingEnsemble&>(*p).set_name(m.name);
        return p;
    }
    return make_ranking_model(m.type, m.params, cfg.seed);
}

DatasetRef dataset_from_json(const json& j, const fs::path& base) {
    DatasetRef d;
    d.name = j.at("name").get<std::string>();
    d.path = resolve(j.at("path").get<std::string>(), base);
    if (j.contains("scale")) {
        auto s = j["scale"].get<std::vector<double>>();
        if (s.size() != 2) throw ConfigError("dataset " + d.name + ": scale must be [min, max]");
        d.scale = RatingScale(s[0], s[1]);
    }
    if (j.contains("columns")) {
        const auto& c = j["columns"];
        d.columns.user_column = c.value("user", d.columns.user_column);
        d.columns.item_column = c.value("item", d.columns.item_column);
        d.columns.rating_column = c.value("rating", d.columns.rating_column);
        if (c.contains("timestamp")) {
            if (c["timestamp"].is_null())
                d.columns.timestamp_column.reset();
            else
                d.columns.timestamp_column = c["timestamp"].get<std::string>();
        }
        if (c.contains("delimiter")) {
            auto delim = c["delimiter"].get<std::string>();
            if (delim.size() != 1) throw ConfigError("dataset " + d.name + ": delimiter must be one character");
            d.columns.delimiter = delim[0];
        }
    }
    d.columns.validate();
    if (j.contains("implicit_threshold") && !j["implicit_threshold"].is_null())
        d.implicit_threshold = j["implicit_threshold"].get<double>();
    return d;
}

json dataset_to_json(const DatasetRef& d) {
    json c = {{"user", d.columns.user_column},
              {"item", d.columns.item_column},
              {"rating", d.columns.rating_column},
              {"delimiter", std::string(1, d.columns.delimiter)}};
    c["timestamp"] = d.columns.timestamp_column ? json(*d.columns.timestamp_column) : json(nullptr);
    json j = {{"name", d.name}, {"path", d.path.string()}, {"scale", {d.scale.min, d.scale.max}}, {"columns", c}};
    if (d.implicit_threshold) j["implicit_threshold"] = *d.implicit_threshold;
    return j;
}

ModelSpec model_from_json(const json& j, Pipeline pipeline) {
    ModelSpec m;
    if (j.is_string()) {
        m.type = j.get<std::string>();
        m.name = m.type;
        return m;
    }
    m.type = j.at("type").get<std::string>();
    m.name = j.value("name", m.type);
    if (m.type == "ensemble") {
        m.ensemble = ensemble_spec_from_json(j, pipeline);
        if (!j.contains("name")) m.name = to_string(m.ensemble->strategy) + "_ensemble";
    } else {
        m.params = j.value("params", json::object());
    }
    return m;
}

json model_to_json(const ModelSpec& m) {
    if (m.ensemble) {
        auto j = to_json(*m.ensemble);
        j["name"] = m.name;
        j["type"] = "ensemble";
        return j;
    }
    return {{"name", m.name}, {"type", m.type}, {"params", m.params}};
}

}  // namespace

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
    if (datasets.empty()) throw ConfigError("config: no datasets");
    if (models.empty()) throw ConfigError("config: no models");
    split.validate();
    if (cv.enabled && cv.k < 2) throw ConfigError("config: cv.k must be >= 2");
    if (!(emission_factor > 0)) throw ConfigError("config: emission_factor must be positive");
    if (meter) meter->validate();
    if (evaluation.k < 1) throw ConfigError("config: evaluation.k must be >= 1");
    std::set<std::string> names;
    for (const auto& m : models) {
        if (!names.insert(m.name).second) throw ConfigError("config: duplicate model name '" + m.name + "'");
        if (m.name.find_first_of("\t\n/") != std::string::npos)
            throw ConfigError("config: model name '" + m.name + "' contains tab, newline or slash");
        if (m.ensemble && m.ensemble->pipeline != pipeline)
            throw ConfigError("config: ensemble '" + m.name + "' belongs to another pipeline");
        if (pipeline == Pipeline::rating)
            (void)build_rating(*this, m);
        else
            (void)build_ranking(*this, m);
    }
    std::set<std::string> dnames;
    for (const auto& d : datasets)
        if (!dnames.insert(d.name).second) throw ConfigError("config: duplicate dataset '" + d.name + "'");
}

ExperimentConfig experiment_config_from_json(const json& j, const fs::path& base) {
    ExperimentConfig c;
    try {
        c.pipeline = parse_pipeline(j.at("pipeline").get<std::string>());
        c.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("datasets"))
            for (const auto& d : j["datasets"]) c.datasets.push_back(dataset_from_json(d, base));
        if (j.contains("dataset")) c.datasets.push_back(dataset_from_json(j["dataset"], base));

        c.split.strategy = c.pipeline == Pipeline::rating ? SplitStrategy::global : SplitStrategy::per_user;
        if (j.contains("split")) {
            const auto& s = j["split"];
            if (s.contains("strategy")) c.split.strategy = parse_split_strategy(s["strategy"].get<std::string>());
            c.split.train_fraction = s.value("train_fraction", c.split.train_fraction);
            c.split.min_interactions_per_user = s.value("min_interactions_per_user", c.split.min_interactions_per_user);
            c.split.min_test_items_per_user = s.value("min_test_items_per_user", c.split.min_test_items_per_user);
        }
        c.split.seed = c.seed;

        if (j.contains("cv")) {
            c.cv.enabled = j["cv"].value("enabled", c.cv.enabled);
            c.cv.k = j["cv"].value("k", c.cv.k);
        }
        for (const auto& m : j.at("models")) c.models.push_back(model_from_json(m, c.pipeline));

        if (j.contains("meter") && !j["meter"].is_null() && !(j["meter"].is_boolean() && !j["meter"].get<bool>())) {
            const auto& m = j["meter"];
            if (m.contains("settings_file")) {
                c.meter = load_meter_settings(resolve(m["settings_file"].get<std::string>(), base));
            } else {
                auto copy = m;
                if (copy.contains("trace_file"))
                    copy["trace_file"] = resolve(copy["trace_file"].get<std::string>(), base).string();
                c.meter = meter_config_from_json(copy);
            }
        }
        if (j.contains("monitor_settings"))
            c.emission_factor = load_emission_factor(resolve(j["monitor_settings"].get<std::string>(), base));
        c.emission_factor = j.value("emission_factor", c.emission_factor);

        if (j.contains("idle_check")) {
            const auto& ic = j["idle_check"];
            c.idle_check.enabled = ic.value("enabled", true);
            c.idle_check.expected_w = ic.value("expected_w", c.idle_check.expected_w);
            c.idle_check.band_w = ic.value("band_w", c.idle_check.band_w);
            c.idle_check.duration_s = ic.value("duration_s", c.idle_check.duration_s);
        }
        if (j.contains("evaluation")) {
            const auto& e = j["evaluation"];
            c.evaluation.k = e.value("k", c.evaluation.k);
            c.evaluation.rbp_persistence = e.value("rbp_persistence", c.evaluation.rbp_persistence);
            auto ideal = e.value("ideal", std::string("all_relevant"));
            if (ideal == "all_relevant")
                c.evaluation.ideal = IdealDepth::all_relevant;
            else if (ideal == "cutoff")
                c.evaluation.ideal = IdealDepth::cutoff;
            else
                throw ConfigError("config: evaluation.ideal must be 'all_relevant' or 'cutoff'");
            c.evaluation.only_users_with_relevant =
                e.value("only_users_with_relevant", c.evaluation.only_users_with_relevant);
        }
        if (j.contains("output_dir")) c.output_dir = resolve(j["output_dir"].get<std::string>(), base);
        if (j.contains("data_dir")) c.data_dir = resolve(j["data_dir"].get<std::string>(), base);
        if (j.contains("measurement_dir")) c.measurement_dir = resolve(j["measurement_dir"].get<std::string>(), base);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return experiment_config_from_json(j, path.parent_path());
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["pipeline"] = to_string(c.pipeline);
    j["seed"] = c.seed;
    j["datasets"] = json::array();
    for (const auto& d : c.datasets) j["datasets"].push_back(dataset_to_json(d));
    j["split"] = {{"strategy", to_string(c.split.strategy)},
                  {"train_fraction", c.split.train_fraction},
                  {"min_interactions_per_user", c.split.min_interactions_per_user},
                  {"min_test_items_per_user", c.split.min_test_items_per_user}};
    j["cv"] = {{"enabled", c.cv.enabled}, {"k", c.cv.k}};
    j["models"] = json::array();
    for (const auto& m : c.models) j["models"].push_back(model_to_json(m));
    j["meter"] = c.meter ? to_json(*c.meter) : json(nullptr);
    j["emission_factor"] = c.emission_factor;
    j["idle_check"] = {{"enabled", c.idle_check.enabled},
                       {"expected_w", c.idle_check.expected_w},
                       {"band_w", c.idle_check.band_w},
                       {"duration_s", c.idle_check.duration_s}};
    j["evaluation"] = {{"k", c.evaluation.k},
                       {"rbp_persistence", c.evaluation.rbp_persistence},
                       {"ideal", c.evaluation.ideal == IdealDepth::all_relevant ? "all_relevant" : "cutoff"},
                       {"only_users_with_relevant", c.evaluation.only_users_with_relevant}};
    j["output_dir"] = c.output_dir.string();
    j["data_dir"] = c.data_dir.string();
    j["measurement_dir"] = c.measurement_dir.string();
    return j;
}

// --------------------------------------------------------------- records

std::optional<double> ExperimentRecord::metric(const std::string& name) const {
    for (const auto& m : metrics)
        if (m.name == name) return m.value;
    return std::nullopt;
}

json to_json(const ExperimentRecord& r) {
    json j = {{"model", r.model},   {"dataset", r.dataset},       {"pipeline", to_string(r.pipeline)},
              {"ensemble", r.ensemble}, {"fit_s", r.fit_s},       {"predict_s", r.predict_s},
              {"status", r.status}, {"reason", r.reason},         {"implausible", r.implausible},
              {"details", r.details}};
    j["metrics"] = json::array();
    for (const auto& m : r.metrics) {
        json mj = {{"name", m.name}, {"value", m.value}};
        if (m.cv) mj["cv"] = summary_json(*m.cv);
        j["metrics"].push_back(mj);
    }
    if (r.energy) {
        const auto& e = *r.energy;
        j["energy"] = {{"e_start_wh", e.e_start_wh},   {"e_end_wh", e.e_end_wh},
                       {"e_experiment_wh", e.e_experiment_wh}, {"sample_count", e.sample_count},
                       {"duration_s", e.duration_s},   {"mean_power_w", e.mean_power_w}};
    }
    if (r.carbon) j["carbon"] = {{"emission_factor", r.carbon->emission_factor}, {"grams_co2e", r.carbon->grams_co2e}};
    return j;
}

ExperimentRecord experiment_record_from_json(const json& j) {
    ExperimentRecord r;
    r.model = j.at("model").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.pipeline = parse_pipeline(j.at("pipeline").get<std::string>());
    r.ensemble = j.value("ensemble", false);
    r.fit_s = j.value("fit_s", 0.0);
    r.predict_s = j.value("predict_s", 0.0);
    r.status = j.value("status", std::string("ok"));
    r.reason = j.value("reason", std::string());
    r.implausible = j.value("implausible", false);
    r.details = j.value("details", json::object());
    for (const auto& mj : j.value("metrics", json::array())) {
        MetricRecord m{mj.at("name").get<std::string>(), mj.at("value").get<double>(), std::nullopt};
        if (mj.contains("cv")) m.cv = summary_from_json(mj["cv"]);
        r.metrics.push_back(m);
    }
    if (j.contains("energy")) {
        const auto& e = j["energy"];
        EnergyResult er;
        er.e_start_wh = e.at("e_start_wh").get<double>();
        er.e_end_wh = e.at("e_end_wh").get<double>();
        er.e_experiment_wh = e.at("e_experiment_wh").get<double>();
        er.sample_count = e.at("sample_count").get<std::int64_t>();
        er.duration_s = e.at("duration_s").get<double>();
        er.mean_power_w = e.at("mean_power_w").get<double>();
        r.energy = er;
    }
    if (j.contains("carbon"))
        r.carbon = CarbonReport{j["carbon"].at("emission_factor").get<double>(), j["carbon"].at("grams_co2e").get<double>()};
    return r;
}

std::string headline_metric(Pipeline p) { return p == Pipeline::rating ? "rmse" : "ndcg@10"; }

bool lower_is_better(const std::string& metric) {
    return metric == "rmse" || metric == "train_rmse" || metric == "energy_wh" || metric == "carbon_g";
}

std::vector<std::string> results_rows(const ExperimentRecord& r) {
    const std::string energy = r.energy ? num(r.energy->e_experiment_wh) : "";
    const std::string carbon_g = r.carbon ? num(r.carbon->grams_co2e) : "";
    const std::string prefix = r.model + "\t" + r.dataset + "\t" + to_string(r.pipeline) + "\t";
    const std::string suffix = "\t" + energy + "\t" + carbon_g + "\t" + num(r.fit_s) + "\t" + num(r.predict_s) + "\t" + r.status;
    std::vector<std::string> rows;
    if (r.metrics.empty()) {
        rows.push_back(prefix + headline_metric(r.pipeline) + "\t\t\t" + suffix);
        return rows;
    }
    for (const auto& m : r.metrics) {
        std::string cv_mean = m.cv ? num(m.cv->mean) : "";
        std::string cv_std = m.cv ? num(m.cv->std) : "";
        rows.push_back(prefix + m.name + "\t" + num(m.value) + "\t" + cv_mean + "\t" + cv_std + suffix);
    }
    return rows;
}

// ------------------------------------------------------------------ data

fs::path split_cache_dir(const ExperimentConfig& cfg, const DatasetRef& d) {
    if (cfg.pipeline == Pipeline::ranking) return cfg.data_dir / (d.name + "-peruser-split");
    if (cfg.split.strategy == SplitStrategy::per_user) return cfg.data_dir / (d.name + "-rating-peruser-split");
    return cfg.data_dir / (d.name + "-split");
}

PreparedData prepare_dataset(const ExperimentConfig& cfg, const DatasetRef& d) {
    PreparedData out;
    out.cleaned = clean(load_interactions(d.path, d.columns, d.scale, d.name));
    out.stats = compute_stats(out.cleaned);
    const auto dir = split_cache_dir(cfg, d);
    SplitConfig sc = cfg.split;
    sc.seed = cfg.seed;
    const bool hit = split_cached(dir) && cached_split_config(dir) == sc;

    if (cfg.pipeline == Pipeline::rating) {
        if (!hit) {
            auto s = sc.strategy == SplitStrategy::global ? global_random_split(out.cleaned, sc)
                                                          : per_user_split(out.cleaned, sc);
            cache_split(s, dir);
            spdlog::info("[{}] split cached in {}", d.name, dir.string());
        } else {
            spdlog::info("[{}] using cached split {}", d.name, dir.string());
        }
        out.rating = load_rating_split(dir, d.scale);
        out.rating->train.name = out.rating->test.name = d.name;
        return out;
    }

    const double threshold = d.implicit_threshold.value_or(d.scale.default_implicit_threshold());
    bool usable = hit;
    if (usable) {
        auto probe = load_implicit_split(dir);
        usable = probe.train.threshold == threshold;
    }
    if (!usable) {
        if (sc.strategy != SplitStrategy::per_user) throw ConfigError("ranking pipeline requires the per-user split");
        auto s = per_user_split(convert_implicit(out.cleaned, threshold), sc);
        cache_split(s, dir);
        spdlog::info("[{}] split cached in {}", d.name, dir.string());
    } else {
        spdlog::info("[{}] using cached split {}", d.name, dir.string());
    }
    out.ranking = load_implicit_split(dir);
    out.ranking->train.name = out.ranking->test.name = d.name;
    return out;
}

// ------------------------------------------------------------ experiment

namespace {

void run_rating(const ExperimentConfig& cfg, const ModelSpec& spec, const RatingSplit& split, ExperimentRecord& rec) {
    std::optional<MetricSummary> cv;
    if (cfg.cv.enabled) {
        const auto t0 = std::chrono::steady_clock::now();
        auto folds = kfold_global(split.train, cfg.cv.k, cfg.seed);
        std::vector<double> scores;
        for (const auto& f : folds.folds) {
            auto m = build_rating(cfg, spec);
            m->fit(subset(split.train, f.train_rows));
            scores.push_back(evaluate_rmse(*m, subset(split.train, f.validation_rows)));
        }
        cv = summarize(scores);
        rec.details["cv_s"] = seconds_since(t0);
    }
    auto m = build_rating(cfg, spec);
    auto t0 = std::chrono::steady_clock::now();
    m->fit(split.train);
    rec.fit_s = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const double test_rmse = evaluate_rmse(*m, split.test);
    rec.predict_s = seconds_since(t0);
    const double train_rmse = evaluate_rmse(*m, split.train);
    rec.metrics = {{"rmse", test_rmse, cv}, {"train_rmse", train_rmse, std::nullopt}};
    if (auto* e = dynamic_cast<RatingEnsemble*>(m.get())) {
        rec.details["weights"] = e->weights();
        if (spec.ensemble->strategy == EnsembleStrategy::stacking) rec.details["intercept"] = e->intercept();
        rec.details["bases"] = spec.ensemble->base_models;
    }
}

void run_ranking(const ExperimentConfig& cfg, const ModelSpec& spec, const ImplicitSplit& split, ExperimentRecord& rec) {
    std::optional<MetricSummary> cv_ndcg, cv_rbp, cv_rr;
    if (cfg.cv.enabled) {
        const auto t0 = std::chrono::steady_clock::now();
        auto folds = kfold_per_user(split.train, cfg.cv.k, cfg.seed);
        std::vector<double> n, r, rr;
        for (const auto& f : folds.folds) {
            auto m = build_ranking(cfg, spec);
            m->fit(subset(split.train, f.train_rows));
            auto ev = evaluate_ranking(*m, subset(split.train, f.validation_rows), cfg.evaluation);
            n.push_back(ev.ndcg);
            r.push_back(ev.rbp);
            rr.push_back(ev.reciprank);
        }
        cv_ndcg = summarize(n);
        cv_rbp = summarize(r);
        cv_rr = summarize(rr);
        rec.details["cv_s"] = seconds_since(t0);
    }
    auto m = build_ranking(cfg, spec);
    auto t0 = std::chrono::steady_clock::now();
    m->fit(split.train);
    rec.fit_s = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    auto ev = evaluate_ranking(*m, split.test, cfg.evaluation);
    rec.predict_s = seconds_since(t0);
    const std::string k = std::to_string(cfg.evaluation.k);
    rec.metrics = {{"ndcg@" + k, ev.ndcg, cv_ndcg}, {"rbp", ev.rbp, cv_rbp}, {"reciprank", ev.reciprank, cv_rr}};
    rec.details["evaluated_users"] = ev.users;
    if (auto* e = dynamic_cast<RankingEnsemble*>(m.get())) {
        rec.details["weights"] = e->weights();
        rec.details["bases"] = spec.ensemble->base_models;
    }
}

}  // namespace

ExperimentRecord run_experiment(const ExperimentConfig& cfg, const ModelSpec& model, const DatasetRef& dataset,
                                const PreparedData& data) {
    ExperimentRecord rec;
    rec.model = model.name;
    rec.dataset = dataset.name;
    rec.pipeline = cfg.pipeline;
    rec.ensemble = model.is_ensemble();

    std::unique_ptr<MeasurementSession> session;
    if (cfg.meter) {
        try {
            auto bundle = make_meter(*cfg.meter);
            SessionOptions opt;
            opt.root = cfg.measurement_dir;
            opt.background = cfg.meter->clock != ClockKind::simulated;
            opt.clock = cfg.meter->clock == ClockKind::work ? std::make_shared<WallClock>() : bundle.clock;
            session = MeasurementSession::start(model.name, dataset.name, bundle.meter, *cfg.meter, opt);
            rec.details["measurement_dir"] = session->directory().string();
        } catch (const std::exception& e) {
            spdlog::warn("[{}] metering unavailable: {}", model.name, e.what());
            rec.details["energy_error"] = e.what();
        }
    }

    spdlog::info("[{}] {} on {}", to_string(cfg.pipeline), model.name, dataset.name);
    try {
        if (cfg.pipeline == Pipeline::rating)
            run_rating(cfg, model, *data.rating, rec);
        else
            run_ranking(cfg, model, *data.ranking, rec);
    } catch (const std::exception& e) {
        rec.metrics.clear();
        rec.status = "failed(" + failure_kind(e) + ")";
        rec.reason = e.what();
        spdlog::error("[{}] {}: {}", model.name, rec.status, rec.reason);
    }

    if (session) {
        try {
            auto energy = session->stop();
            if (rec.ok()) {
                rec.energy = energy;
                rec.carbon = carbon(energy, cfg.emission_factor);
            }
        } catch (const std::exception& e) {
            spdlog::warn("[{}] energy unavailable: {}", model.name, e.what());
            rec.details["energy_error"] = e.what();
        }
    }
    return rec;
}

// ----------------------------------------------------------------- suite

namespace {

std::set<std::pair<std::string, std::string>> completed_runs(const fs::path& tsv) {
    std::set<std::pair<std::string, std::string>> done;
    std::ifstream in(tsv);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            if (line != kResultsHeader) throw ConfigError(tsv.string() + ": unexpected results header");
            first = false;
            continue;
        }
        auto t1 = line.find('\t');
        auto t2 = line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos) continue;
        done.emplace(line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1));
    }
    return done;
}

void write_manifest(const fs::path& dir, const ExperimentConfig& cfg, const std::vector<ExperimentRecord>& records) {
    json j;
    j["config"] = to_json(cfg);
    j["records"] = json::array();
    for (const auto& r : records) j["records"].push_back(to_json(r));
    const auto tmp = dir / "manifest.json.tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError("cannot write " + tmp.string());
        out << j.dump(2) << "\n";
    }
    fs::rename(tmp, dir / "manifest.json");
}

}  // namespace

std::vector<ExperimentRecord> load_manifest(const fs::path& output_dir) {
    const auto path = output_dir / "manifest.json";
    std::vector<ExperimentRecord> out;
    if (!fs::exists(path)) return out;
    std::ifstream in(path);
    try {
        auto j = json::parse(in);
        for (const auto& r : j.at("records")) out.push_back(experiment_record_from_json(r));
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return out;
}

std::vector<ExperimentRecord> run_suite(const ExperimentConfig& cfg, const SuiteOptions& opt) {
    cfg.validate();
    fs::create_directories(cfg.output_dir);
    const auto tsv = cfg.output_dir / "results.tsv";
    if (!fs::exists(tsv)) {
        std::ofstream out(tsv);
        if (!out) throw DataError("cannot write " + tsv.string());
        out << kResultsHeader << "\n";
    }
    const auto done = completed_runs(tsv);
    std::vector<ExperimentRecord> records;
    for (auto& r : load_manifest(cfg.output_dir))
        if (done.count({r.model, r.dataset})) records.push_back(std::move(r));

    if (cfg.meter && cfg.idle_check.enabled) {
        auto bundle = make_meter(*cfg.meter);
        const double idle = measure_idle_baseline(*bundle.meter, *bundle.clock, cfg.idle_check.duration_s,
                                                  cfg.meter->poll_interval_s);
        spdlog::info("idle baseline {:.2f} W", idle);
        check_idle_baseline(idle, cfg.idle_check.expected_w, cfg.idle_check.band_w);
    }

    for (const auto& d : cfg.datasets) {
        std::optional<PreparedData> data;
        for (const auto& m : cfg.models) {
            if (opt.resume && done.count({m.name, d.name})) {
                spdlog::info("[{}] {} already completed, skipping", m.name, d.name);
                continue;
            }
            if (!data) data = prepare_dataset(cfg, d);
            auto rec = run_experiment(cfg, m, d, *data);
            {
                std::ofstream out(tsv, std::ios::app);
                for (const auto& row : results_rows(rec)) out << row << "\n";
                out.flush();
                if (!out) throw DataError("cannot append to " + tsv.string());
            }
            records.push_back(std::move(rec));
            flag_implausible(records);
            write_manifest(cfg.output_dir, cfg, records);
        }
    }
    return records;
}

void flag_implausible(std::vector<ExperimentRecord>& records, double factor) {
    std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
    for (const auto& r : records)
        if (r.energy) groups[{r.model, r.dataset}].push_back(r.energy->e_experiment_wh);
    for (auto& r : records) {
        r.implausible = false;
        if (!r.energy) continue;
        auto v = groups[{r.model, r.dataset}];
        if (v.size() < 2) continue;
        std::sort(v.begin(), v.end());
        const double med = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
        const double e = r.energy->e_experiment_wh;
        if (med > 0 ? (e > factor * med || e * factor < med) : e > 0) r.implausible = true;
    }
}

// --------------------------------------------------------------- reports

double percent_vs(double model, double reference) {
    if (reference == 0.0) throw ConfigError("percent_vs: reference value is zero");
    return 100.0 * (model - reference) / reference;
}

double accuracy_improvement(double ensemble, double best_single, bool lower_better) {
    if (best_single == 0.0) throw ConfigError("accuracy_improvement: best single value is zero");
    return lower_better ? 100.0 * (best_single - ensemble) / best_single : 100.0 * (ensemble - best_single) / best_single;
}

std::string ReportTable::to_tsv() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "\t" : "") << header[i];
    os << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "\t" : "") << row[i];
        os << "\n";
    }
    for (const auto& f : footnotes) os << "# " << f << "\n";
    return os.str();
}

namespace {

std::optional<double> quantity_of(const ExperimentRecord& r, const std::string& quantity) {
    if (!r.ok()) return std::nullopt;
    if (quantity == "energy_wh") return r.energy ? std::optional<double>(r.energy->e_experiment_wh) : std::nullopt;
    if (quantity == "carbon_g") return r.carbon ? std::optional<double>(r.carbon->grams_co2e) : std::nullopt;
    return r.metric(quantity);
}

template <class T>
void push_unique(std::vector<T>& v, const T& x) {
    if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

}  // namespace

ReportTable report_comparison(const std::vector<ExperimentRecord>& records, const std::string& reference_model,
                              const std::string& quantity) {
    std::vector<std::string> models, datasets;
    for (const auto& r : records) {
        push_unique(models, r.model);
        push_unique(datasets, r.dataset);
    }
    // last record wins for reruns
    std::map<std::pair<std::string, std::string>, const ExperimentRecord*> latest;
    for (const auto& r : records) latest[{r.model, r.dataset}] = &r;

    auto average = [&](const std::string& m) -> std::optional<double> {
        double sum = 0.0;
        int n = 0;
        for (const auto& d : datasets) {
            auto it = latest.find({m, d});
            if (it == latest.end()) continue;
            if (auto v = quantity_of(*it->second, quantity)) {
                sum += *v;
                ++n;
            }
        }
        if (n == 0) return std::nullopt;
        return sum / n;
    };
    if (std::find(models.begin(), models.end(), reference_model) == models.end())
        throw ConfigError("reference model '" + reference_model + "' has no records");
    const auto ref = average(reference_model);
    if (!ref) throw ConfigError("reference model '" + reference_model + "' has no " + quantity + " values");

    ReportTable t;
    t.header.push_back("model");
    for (const auto& d : datasets) t.header.push_back(d);
    t.header.push_back("avg");
    t.header.push_back("pct_vs_" + reference_model);
    for (const auto& m : models) {
        std::vector<std::string> row{m};
        for (const auto& d : datasets) {
            auto it = latest.find({m, d});
            if (it == latest.end()) {
                row.push_back("");
                continue;
            }
            const auto& r = *it->second;
            if (!r.ok()) {
                row.push_back("NA*");
                t.footnotes.push_back("* " + m + " on " + d + ": " + r.status + " " + r.reason);
                continue;
            }
            auto v = quantity_of(r, quantity);
            row.push_back(v ? num(*v) : "");
        }
        auto avg = average(m);
        row.push_back(avg ? num(*avg) : "");
        row.push_back(avg ? pct(percent_vs(*avg, *ref)) : "");
        t.rows.push_back(std::move(row));
    }
    return t;
}

ReportTable report_efficiency(const std::vector<ExperimentRecord>& records) {
    std::map<std::pair<std::string, std::string>, const ExperimentRecord*> latest;
    std::vector<std::string> datasets;
    for (const auto& r : records) {
        latest[{r.model, r.dataset}] = &r;
        push_unique(datasets, r.dataset);
    }
    ReportTable t;
    t.header = {"ensemble", "dataset", "best_single", "metric", "ensemble_value", "best_value",
                "accuracy_improvement_pct", "ensemble_energy_wh", "best_energy_wh", "energy_overhead_pct"};
    bool any = false;
    for (const auto& d : datasets) {
        const ExperimentRecord* best = nullptr;
        std::string metric;
        for (const auto& [key, r] : latest) {
            if (key.second != d || r->ensemble || !r->ok()) continue;
            metric = headline_metric(r->pipeline);
            auto v = r->metric(metric);
            if (!v) continue;
            const bool lower = lower_is_better(metric);
            if (!best || (lower ? *v < *best->metric(metric) : *v > *best->metric(metric))) best = r;
        }
        for (const auto& r : records) {
            if (r.dataset != d || !r.ensemble || latest[{r.model, r.dataset}] != &r) continue;
            any = true;
            std::vector<std::string> row{r.model, d, best ? best->model : "", metric};
            if (!r.ok() || !best) {
                row.insert(row.end(), {"NA*", "", "", "", "", ""});
                if (!r.ok()) t.footnotes.push_back("* " + r.model + " on " + d + ": " + r.status + " " + r.reason);
                t.rows.push_back(std::move(row));
                continue;
            }
            const double ev = *r.metric(metric), bv = *best->metric(metric);
            row.push_back(num(ev));
            row.push_back(num(bv));
            row.push_back(pct(accuracy_improvement(ev, bv, lower_is_better(metric))));
            if (r.energy && best->energy && best->energy->e_experiment_wh > 0) {
                row.push_back(num(r.energy->e_experiment_wh));
                row.push_back(num(best->energy->e_experiment_wh));
                row.push_back(pct(percent_vs(r.energy->e_experiment_wh, best->energy->e_experiment_wh)));
            } else {
                row.insert(row.end(), {"", "", ""});
            }
            t.rows.push_back(std::move(row));
        }
    }
    if (!any) throw ConfigError("efficiency report: no ensemble records");
    return t;
}

}  // namespace recbench
