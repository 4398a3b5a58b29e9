#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "recbench/ranking_models.hpp"
#include "recbench/rating_models.hpp"

namespace recbench {

enum class Pipeline { rating, ranking };
std::string to_string(Pipeline p);
Pipeline parse_pipeline(const std::string& s);

enum class EnsembleStrategy { average, weighted, stacking, rank_fusion, top_performers };
std::string to_string(EnsembleStrategy s);
EnsembleStrategy parse_ensemble_strategy(const std::string& s);

struct EnsembleSpec {
    Pipeline pipeline = Pipeline::rating;
    EnsembleStrategy strategy = EnsembleStrategy::average;
    std::vector<std::string> base_models;
    std::optional<std::vector<double>> weights;
    // Strategy settings: "rrf_c", "holdout_fraction", and "base_params"
    // (object of per-base hyperparameters keyed by base name).
    nlohmann::json meta_params = nlohmann::json::object();

    void validate() const;
};

EnsembleSpec default_ensemble_spec(Pipeline p, EnsembleStrategy s);

// ---- pure combination rules

double combine_average(std::span<const double> preds);
double combine_weighted(std::span<const double> preds, std::span<const double> weights);
double combine_stacking(std::span<const double> preds, double intercept, std::span<const double> weights);

// Rescales to [0,1] in place; a constant vector becomes all 0.5.
void minmax_normalize(std::span<double> scores);

// 1-based ranks of each candidate under descending score, ties by item index.
std::vector<std::int64_t> ranks_of(std::span<const ItemIndex> candidates, std::span<const double> scores);
// Per candidate: sum over bases of 1 / (c + rank).
std::vector<double> reciprocal_rank_fusion(std::span<const ItemIndex> candidates,
                                           const std::vector<std::vector<double>>& base_scores, double c = 60.0);

// Lawson-Hanson non-negative least squares: argmin |A w - b| with w >= 0.
// A is row-major with `cols` columns.
std::vector<double> nnls(std::span<const double> a, std::span<const double> b, std::size_t cols);

struct LinearFit {
    double intercept = 0.0;
    std::vector<double> weights;
    bool singular = false;
};
// Ordinary least squares with intercept; singular design sets `singular`.
LinearFit fit_linear(std::span<const double> x, std::span<const double> y, std::size_t cols);

// ---- rating ensembles

class RatingEnsemble final : public RatingPredictor {
public:
    RatingEnsemble(EnsembleSpec spec, std::vector<RatingPredictorPtr> bases, std::uint64_t seed = 0);
    std::string name() const override { return name_; }
    void set_name(std::string n) { name_ = std::move(n); }

    const EnsembleSpec& spec() const noexcept { return spec_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    double intercept() const noexcept { return intercept_; }
    const RatingPredictor& base(std::size_t m) const { return *bases_.at(m); }
    std::size_t n_bases() const noexcept { return bases_.size(); }

protected:
    void fit_impl(const Dataset& train) override;
    double estimate(UserIndex u, ItemIndex i) const override;

private:
    void learn_combination(const Dataset& train);

    EnsembleSpec spec_;
    std::vector<RatingPredictorPtr> bases_;
    std::uint64_t seed_;
    std::string name_;
    std::vector<double> weights_;
    double intercept_ = 0.0;
    bool stacked_ = false;
};

// ---- ranking ensembles

class RankingEnsemble final : public RankingScorer {
public:
    RankingEnsemble(EnsembleSpec spec, std::vector<RankingScorerPtr> bases, std::uint64_t seed = 0);
    std::string name() const override { return name_; }
    void set_name(std::string n) { name_ = std::move(n); }

    std::vector<double> score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const override;

    const EnsembleSpec& spec() const noexcept { return spec_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const RankingScorer& base(std::size_t m) const { return *bases_.at(m); }
    std::size_t n_bases() const noexcept { return bases_.size(); }

protected:
    void fit_impl(const ImplicitDataset& train) override;

private:
    EnsembleSpec spec_;
    std::vector<RankingScorerPtr> bases_;
    std::uint64_t seed_;
    std::string name_;
    std::vector<double> weights_;
};

// Builds bases through the model registry and wraps them.
RatingPredictorPtr make_rating_ensemble(const EnsembleSpec& spec, std::uint64_t seed);
RankingScorerPtr make_ranking_ensemble(const EnsembleSpec& spec, std::uint64_t seed);

nlohmann::json to_json(const EnsembleSpec& s);
EnsembleSpec ensemble_spec_from_json(const nlohmann::json& j, Pipeline pipeline);

}  // namespace recbench
