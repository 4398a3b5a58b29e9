#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "recbench/data.hpp"
#include "recbench/energy.hpp"
#include "recbench/ensembles.hpp"
#include "recbench/evaluation.hpp"
#include "recbench/metrics.hpp"
#include "recbench/splitting.hpp"

namespace recbench {

struct DatasetRef {
    std::string name;
    std::filesystem::path path;
    ColumnMapping columns;
    RatingScale scale{1.0, 5.0};
    std::optional<double> implicit_threshold;  // default chosen by scale
};

struct ModelSpec {
    std::string name;  // label in results
    std::string type;  // registry type, or "ensemble"
    nlohmann::json params = nlohmann::json::object();
    std::optional<EnsembleSpec> ensemble;
    bool is_ensemble() const { return ensemble.has_value(); }
};

struct CvConfig {
    bool enabled = true;
    std::int32_t k = 5;
};

struct IdleCheckConfig {
    bool enabled = false;
    double expected_w = 71.2;
    double band_w = 5.0;
    double duration_s = 600.0;
};

struct ExperimentConfig {
    std::vector<DatasetRef> datasets;
    Pipeline pipeline = Pipeline::rating;
    SplitConfig split;
    CvConfig cv;
    std::vector<ModelSpec> models;
    std::optional<MeterConfig> meter;  // nullopt: metering disabled
    double emission_factor = 420.0;
    IdleCheckConfig idle_check;
    RankingEvalOptions evaluation;
    std::filesystem::path output_dir = "results";
    std::filesystem::path data_dir = "data";
    std::filesystem::path measurement_dir = "measurements";
    std::uint64_t seed = 0;

    void validate() const;
};

// Relative paths inside the file are resolved against `base_dir`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& c);

struct MetricRecord {
    std::string name;
    double value = 0.0;
    std::optional<MetricSummary> cv;
};

struct ExperimentRecord {
    std::string model;
    std::string dataset;
    Pipeline pipeline = Pipeline::rating;
    bool ensemble = false;
    std::vector<MetricRecord> metrics;  // first entry is the headline metric
    std::optional<EnergyResult> energy;
    std::optional<CarbonReport> carbon;
    double fit_s = 0.0;
    double predict_s = 0.0;
    std::string status = "ok";  // ok | failed(<kind>)
    std::string reason;
    bool implausible = false;
    nlohmann::json details = nlohmann::json::object();

    bool ok() const { return status == "ok"; }
    std::optional<double> metric(const std::string& name) const;
};

nlohmann::json to_json(const ExperimentRecord& r);
ExperimentRecord experiment_record_from_json(const nlohmann::json& j);

inline const char* kResultsHeader =
    "model\tdataset\tpipeline\tmetric_name\tmetric_value\tcv_mean\tcv_std\tenergy_wh\tcarbon_g\tfit_s\tpredict_s\tstatus";

std::vector<std::string> results_rows(const ExperimentRecord& r);
std::string headline_metric(Pipeline p);  // "rmse" or "ndcg@10"
bool lower_is_better(const std::string& metric);

// Loaded and cleaned dataset plus its cached split for one pipeline.
struct PreparedData {
    Dataset cleaned;
    DatasetStats stats;
    std::optional<RatingSplit> rating;
    std::optional<ImplicitSplit> ranking;
};

std::filesystem::path split_cache_dir(const ExperimentConfig& cfg, const DatasetRef& d);
// Load, clean, and split; reuses the cache when its config matches, and
// always hands back the split as read from the cache.
PreparedData prepare_dataset(const ExperimentConfig& cfg, const DatasetRef& d);

ExperimentRecord run_experiment(const ExperimentConfig& cfg, const ModelSpec& model, const DatasetRef& dataset,
                                const PreparedData& data);

struct SuiteOptions {
    bool resume = true;  // skip (model, dataset) pairs already in the results file
};

// Sequential suite; appends to <output_dir>/results.tsv after every run and
// rewrites <output_dir>/manifest.json.
std::vector<ExperimentRecord> run_suite(const ExperimentConfig& cfg, const SuiteOptions& opt = {});

std::vector<ExperimentRecord> load_manifest(const std::filesystem::path& output_dir);

// Marks records whose energy is more than `factor` times away from the
// median of runs of the same model on the same dataset.
void flag_implausible(std::vector<ExperimentRecord>& records, double factor = 5.0);

// Percent difference 100 * (model - reference) / reference.
double percent_vs(double model, double reference);
// Relative accuracy gain over the best single model, in percent; positive is better.
double accuracy_improvement(double ensemble, double best_single, bool lower_better);

struct ReportTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> footnotes;
    std::string to_tsv() const;
};

// Rows: models; columns: each dataset, average, percent vs reference.
// `quantity` is a metric name or "energy_wh".
ReportTable report_comparison(const std::vector<ExperimentRecord>& records, const std::string& reference_model,
                              const std::string& quantity);
ReportTable report_efficiency(const std::vector<ExperimentRecord>& records);

}  // namespace recbench
