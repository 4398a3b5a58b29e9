#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "recbench/energy.hpp"
#include "recbench/error.hpp"
#include "recbench/harness.hpp"
#include "recbench/ranking_models.hpp"
#include "recbench/rating_models.hpp"

namespace fs = std::filesystem;
using namespace recbench;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPartial = 2;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct CommonFlags {
    std::string config;
    std::string dataset;
    std::string models;
    bool no_meter = false;
    std::optional<std::uint64_t> seed;
    std::string out;
};

ExperimentConfig load_config(const CommonFlags& f) {
    if (f.config.empty()) throw ConfigError("--config is required");
    auto cfg = load_experiment_config(f.config);
    if (f.seed) {
        cfg.seed = *f.seed;
        cfg.split.seed = *f.seed;
    }
    if (!f.out.empty()) cfg.output_dir = f.out;
    if (f.no_meter) cfg.meter.reset();
    if (!f.dataset.empty()) {
        auto keep = split_list(f.dataset);
        std::erase_if(cfg.datasets, [&](const DatasetRef& d) {
            return std::find(keep.begin(), keep.end(), d.name) == keep.end();
        });
        if (cfg.datasets.empty()) throw ConfigError("--dataset matches no configured dataset");
    }
    if (!f.models.empty()) {
        auto keep = split_list(f.models);
        for (const auto& k : keep)
            if (std::none_of(cfg.models.begin(), cfg.models.end(), [&](const ModelSpec& m) { return m.name == k; }))
                throw ConfigError("--models: '" + k + "' is not in the config");
        std::erase_if(cfg.models, [&](const ModelSpec& m) {
            return std::find(keep.begin(), keep.end(), m.name) == keep.end();
        });
    }
    cfg.validate();
    return cfg;
}

int cmd_prepare(const CommonFlags& f) {
    auto cfg = load_config(f);
    for (const auto& d : cfg.datasets) {
        auto data = prepare_dataset(cfg, d);
        nlohmann::json j = nlohmann::json::parse(stats_json(data.stats));
        j["dataset"] = d.name;
        j["split_dir"] = split_cache_dir(cfg, d).string();
        if (data.rating) {
            j["train"] = data.rating->train.size();
            j["test"] = data.rating->test.size();
            j["checksum"] = data.rating->checksum;
        } else {
            j["train"] = data.ranking->train.size();
            j["test"] = data.ranking->test.size();
            j["checksum"] = data.ranking->checksum;
            j["threshold"] = data.ranking->train.threshold;
        }
        std::cout << j.dump() << "\n";
    }
    return kExitOk;
}

int cmd_run(const CommonFlags& f, bool fresh) {
    auto cfg = load_config(f);
    SuiteOptions opt;
    opt.resume = !fresh;
    if (fresh) {
        fs::remove(cfg.output_dir / "results.tsv");
        fs::remove(cfg.output_dir / "manifest.json");
    }
    auto records = run_suite(cfg, opt);
    std::size_t failed = 0;
    for (const auto& r : records) failed += !r.ok();
    spdlog::info("{} records, {} failed; results in {}", records.size(), failed,
                 (cfg.output_dir / "results.tsv").string());
    return failed ? kExitPartial : kExitOk;
}

int cmd_baseline(const CommonFlags& f, double duration, std::optional<double> expected, double band) {
    MeterConfig meter;
    if (!f.config.empty()) {
        auto cfg = load_experiment_config(f.config);
        if (!cfg.meter) throw ConfigError("config has no meter");
        meter = *cfg.meter;
    }
    auto bundle = make_meter(meter);
    const double watts = measure_idle_baseline(*bundle.meter, *bundle.clock, duration, meter.poll_interval_s);
    std::printf("%.4f\n", watts);
    if (expected) check_idle_baseline(watts, *expected, band);
    return kExitOk;
}

void write_table(const fs::path& path, const ReportTable& t) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << t.to_tsv();
}

int cmd_report(const CommonFlags& f, const std::string& reference) {
    fs::path dir = f.out;
    if (dir.empty()) {
        if (f.config.empty()) throw ConfigError("report needs --out or --config");
        dir = load_experiment_config(f.config).output_dir;
    }
    auto records = load_manifest(dir);
    if (records.empty()) throw ConfigError("no records in " + dir.string());
    std::set<Pipeline> pipelines;
    for (const auto& r : records) pipelines.insert(r.pipeline);
    if (pipelines.size() != 1) throw ConfigError("records mix pipelines");
    const auto metric = headline_metric(*pipelines.begin());

    auto accuracy = report_comparison(records, reference, metric);
    write_table(dir / "comparison_accuracy.tsv", accuracy);
    std::cout << accuracy.to_tsv();
    try {
        write_table(dir / "comparison_energy.tsv", report_comparison(records, reference, "energy_wh"));
    } catch (const ConfigError& e) {
        spdlog::warn("energy comparison skipped: {}", e.what());
    }
    try {
        write_table(dir / "efficiency.tsv", report_efficiency(records));
    } catch (const ConfigError& e) {
        spdlog::warn("efficiency report skipped: {}", e.what());
    }
    return kExitOk;
}

int cmd_list_models() {
    std::cout << "rating:";
    for (const auto& t : rating_model_types()) std::cout << " " << t;
    std::cout << "\nranking:";
    for (const auto& t : ranking_model_types()) std::cout << " " << t;
    std::cout << "\nensemble strategies: average weighted stacking(rating) rank_fusion(ranking) top_performers\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Accuracy and energy benchmark for recommender models"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

    CommonFlags f;
    auto add_common = [&](CLI::App* sub, bool models) {
        sub->add_option("--config", f.config, "experiment config (JSON)");
        sub->add_option("--dataset", f.dataset, "comma-separated dataset names to keep");
        if (models) sub->add_option("--models", f.models, "comma-separated model names to keep");
        sub->add_option("--seed", f.seed, "override the config seed");
        sub->add_option("--out", f.out, "output directory");
    };

    auto* prepare = app.add_subcommand("prepare", "clean, split and cache datasets");
    add_common(prepare, false);

    bool fresh = false;
    auto* run = app.add_subcommand("run", "run the experiment suite");
    add_common(run, true);
    run->add_flag("--no-meter", f.no_meter, "disable energy metering");
    run->add_flag("--fresh", fresh, "discard earlier results instead of resuming");

    double duration = 600.0;
    std::optional<double> expected;
    double band = 5.0;
    auto* baseline = app.add_subcommand("baseline", "measure mean idle power");
    baseline->add_option("--config", f.config, "config whose meter to use (default: 71.2 W mock)");
    baseline->add_option("--duration", duration, "seconds")->check(CLI::PositiveNumber);
    baseline->add_option("--expected", expected, "fail unless within --band watts of this");
    baseline->add_option("--band", band, "watts");

    std::string reference = "svd";
    auto* report = app.add_subcommand("report", "comparison and efficiency tables");
    report->add_option("--config", f.config, "config whose output directory to read");
    report->add_option("--out", f.out, "results directory");
    report->add_option("--reference", reference, "reference model for percentages");

    auto* list = app.add_subcommand("list-models", "print model types");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }
    spdlog::set_level(spdlog::level::from_str(log_level));
    spdlog::set_pattern("[%H:%M:%S] [%l] %v");

    try {
        if (*prepare) return cmd_prepare(f);
        if (*run) return cmd_run(f, fresh);
        if (*baseline) return cmd_baseline(f, duration, expected, band);
        if (*report) return cmd_report(f, reference);
        if (*list) return cmd_list_models();
    } catch (const ConfigError& e) {
        spdlog::error("config error: {}", e.what());
        return kExitConfig;
    } catch (const MeterError& e) {
        spdlog::error("meter error: {}", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitConfig;
    }
    return kExitConfig;
}
