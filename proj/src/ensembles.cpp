#include "recbench/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "recbench/error.hpp"
#include "recbench/evaluation.hpp"
#include "recbench/splitting.hpp"
#include "recbench/work.hpp"

namespace recbench {

namespace {

constexpr double kWeightTolerance = 1e-9;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<double> uniform(std::size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

double holdout_fraction(const EnsembleSpec& s) {
    double f = s.meta_params.value("holdout_fraction", 0.25);
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("ensemble: holdout_fraction must lie in (0,1)");
    return f;
}

nlohmann::json base_params(const EnsembleSpec& s, const std::string& base) {
    if (s.meta_params.contains("base_params") && s.meta_params["base_params"].contains(base))
        return s.meta_params["base_params"][base];
    return nlohmann::json::object();
}

}  // namespace

std::string to_string(Pipeline p) { return p == Pipeline::rating ? "rating" : "ranking"; }

Pipeline parse_pipeline(const std::string& s) {
    if (s == "rating") return Pipeline::rating;
    if (s == "ranking") return Pipeline::ranking;
    throw ConfigError("unknown pipeline '" + s + "'");
}

std::string to_string(EnsembleStrategy s) {
    switch (s) {
        case EnsembleStrategy::average: return "average";
        case EnsembleStrategy::weighted: return "weighted";
        case EnsembleStrategy::stacking: return "stacking";
        case EnsembleStrategy::rank_fusion: return "rank_fusion";
        case EnsembleStrategy::top_performers: return "top_performers";
    }
    return "?";
}

EnsembleStrategy parse_ensemble_strategy(const std::string& s) {
    for (auto v : {EnsembleStrategy::average, EnsembleStrategy::weighted, EnsembleStrategy::stacking,
                   EnsembleStrategy::rank_fusion, EnsembleStrategy::top_performers})
        if (to_string(v) == s) return v;
    throw ConfigError("unknown ensemble strategy '" + s + "'");
}

void EnsembleSpec::validate() const {
    if (base_models.empty()) throw ConfigError("ensemble: base_models is empty");
    if (pipeline == Pipeline::rating && strategy == EnsembleStrategy::rank_fusion)
        throw ConfigError("ensemble: rank_fusion applies to the ranking pipeline only");
    if (pipeline == Pipeline::ranking && strategy == EnsembleStrategy::stacking)
        throw ConfigError("ensemble: stacking applies to the rating pipeline only");
    const auto& known = pipeline == Pipeline::rating ? rating_model_types() : ranking_model_types();
    for (const auto& b : base_models)
        if (std::find(known.begin(), known.end(), b) == known.end())
            throw ConfigError("ensemble: unknown base model '" + b + "'");
    if (weights) {
        if (weights->size() != base_models.size())
            throw ConfigError("ensemble: weights and base_models differ in length");
        double sum = 0.0;
        for (double w : *weights) {
            if (!(w >= 0.0)) throw ConfigError("ensemble: weights must be non-negative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > kWeightTolerance) throw ConfigError("ensemble: weights must sum to 1");
    }
    if (meta_params.contains("rrf_c") && !(meta_params["rrf_c"].get<double>() >= 0.0))
        throw ConfigError("ensemble: rrf_c must be non-negative");
}

EnsembleSpec default_ensemble_spec(Pipeline p, EnsembleStrategy s) {
    EnsembleSpec spec;
    spec.pipeline = p;
    spec.strategy = s;
    if (p == Pipeline::rating)
        spec.base_models = s == EnsembleStrategy::top_performers ? std::vector<std::string>{"svd", "svdpp"}
                                                                 : std::vector<std::string>{"svd", "svdpp", "nmf", "knn_baseline"};
    else
        spec.base_models = s == EnsembleStrategy::top_performers ? std::vector<std::string>{"als", "item_knn"}
                                                                 : std::vector<std::string>{"als", "bpr", "item_knn", "user_knn"};
    return spec;
}

// ------------------------------------------------------------ combination

double combine_weighted(std::span<const double> preds, std::span<const double> weights) {
    if (preds.size() != weights.size() || preds.empty()) throw ConfigError("combine_weighted: size mismatch");
    double s = 0.0;
    for (std::size_t m = 0; m < preds.size(); ++m) s += weights[m] * preds[m];
    return s;
}

double combine_average(std::span<const double> preds) {
    if (preds.empty()) throw ConfigError("combine_average: no predictions");
    auto w = uniform(preds.size());
    return combine_weighted(preds, w);
}

double combine_stacking(std::span<const double> preds, double intercept, std::span<const double> weights) {
    return intercept + combine_weighted(preds, weights);
}

void minmax_normalize(std::span<double> scores) {
    if (scores.empty()) return;
    auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    const double a = *lo, b = *hi;
    if (!(b > a)) {
        std::fill(scores.begin(), scores.end(), 0.5);
        return;
    }
    for (auto& s : scores) s = (s - a) / (b - a);
}

std::vector<std::int64_t> ranks_of(std::span<const ItemIndex> candidates, std::span<const double> scores) {
    if (candidates.size() != scores.size()) throw ConfigError("ranks_of: size mismatch");
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return candidates[a] < candidates[b];
    });
    std::vector<std::int64_t> rank(candidates.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<std::int64_t>(r) + 1;
    return rank;
}

std::vector<double> reciprocal_rank_fusion(std::span<const ItemIndex> candidates,
                                           const std::vector<std::vector<double>>& base_scores, double c) {
    std::vector<double> fused(candidates.size(), 0.0);
    for (const auto& s : base_scores) {
        auto r = ranks_of(candidates, s);
        for (std::size_t j = 0; j < fused.size(); ++j) fused[j] += 1.0 / (c + static_cast<double>(r[j]));
    }
    return fused;
}

std::vector<double> nnls(std::span<const double> a_data, std::span<const double> b_data, std::size_t cols) {
    if (cols == 0 || a_data.size() % cols != 0 || a_data.size() / cols != b_data.size())
        throw ConfigError("nnls: shape mismatch");
    const auto rows = static_cast<Eigen::Index>(b_data.size());
    const auto n = static_cast<Eigen::Index>(cols);
    Eigen::Map<const RowMat> a(a_data.data(), rows, n);
    Eigen::Map<const Eigen::VectorXd> b(b_data.data(), rows);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<bool> passive(cols, false);
    const double tol = 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()) * static_cast<double>(rows);

    auto solve_passive = [&]() {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j)
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
        if (idx.empty()) return z;
        Eigen::MatrixXd ap(rows, static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) ap.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
        Eigen::VectorXd zp = ap.colPivHouseholderQr().solve(b);
        for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zp(static_cast<Eigen::Index>(k));
        return z;
    };

    for (int outer = 0; outer < 3 * static_cast<int>(cols) + 10; ++outer) {
        Eigen::VectorXd w = a.transpose() * (b - a * x);
        Eigen::Index best = -1;
        double best_w = tol;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
                best_w = w(j);
                best = j;
            }
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = true;
        for (int inner = 0; inner < 3 * static_cast<int>(cols) + 10; ++inner) {
            Eigen::VectorXd z = solve_passive();
            bool feasible = true;
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) feasible = false;
            if (feasible) {
                x = z;
                break;
            }
            double alpha = 1.0;
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) alpha = std::min(alpha, x(j) / (x(j) - z(j)));
            x += alpha * (z - x);
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)] && x(j) <= 1e-15) {
                    passive[static_cast<std::size_t>(j)] = false;
                    x(j) = 0.0;
                }
        }
    }
    work::add(static_cast<std::uint64_t>(rows) * cols * cols);
    return {x.data(), x.data() + n};
}

LinearFit fit_linear(std::span<const double> x_data, std::span<const double> y_data, std::size_t cols) {
    if (cols == 0 || x_data.size() % cols != 0 || x_data.size() / cols != y_data.size())
        throw ConfigError("fit_linear: shape mismatch");
    const auto rows = static_cast<Eigen::Index>(y_data.size());
    const auto n = static_cast<Eigen::Index>(cols);
    Eigen::Map<const RowMat> x(x_data.data(), rows, n);
    Eigen::Map<const Eigen::VectorXd> y(y_data.data(), rows);
    Eigen::MatrixXd design(rows, n + 1);
    design.col(0).setOnes();
    design.rightCols(n) = x;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    LinearFit fit;
    work::add(static_cast<std::uint64_t>(rows) * (cols + 1) * (cols + 1));
    if (qr.rank() < n + 1) {
        fit.singular = true;
        return fit;
    }
    Eigen::VectorXd beta = qr.solve(y);
    fit.intercept = beta(0);
    fit.weights.assign(beta.data() + 1, beta.data() + 1 + n);
    return fit;
}

// ------------------------------------------------------- rating ensemble

RatingEnsemble::RatingEnsemble(EnsembleSpec spec, std::vector<RatingPredictorPtr> bases, std::uint64_t seed)
    : spec_(std::move(spec)), bases_(std::move(bases)), seed_(seed) {
    spec_.validate();
    if (spec_.pipeline != Pipeline::rating) throw ConfigError("RatingEnsemble: spec is not a rating ensemble");
    if (bases_.size() != spec_.base_models.size()) throw ConfigError("RatingEnsemble: base count mismatch");
    name_ = to_string(spec_.strategy) + "_ensemble";
}

void RatingEnsemble::learn_combination(const Dataset& train) {
    SplitConfig cfg;
    cfg.strategy = SplitStrategy::global;
    cfg.train_fraction = 1.0 - holdout_fraction(spec_);
    cfg.seed = seed_;
    auto hold = global_random_split(train, cfg);
    for (auto& b : bases_) b->fit(hold.train);

    const std::size_t m = bases_.size();
    std::vector<double> x, y;
    x.reserve(hold.test.size() * m);
    for (const auto& it : hold.test.interactions) {
        for (const auto& b : bases_) x.push_back(b->predict(it.user, it.item));
        y.push_back(it.rating);
    }
    if (spec_.strategy == EnsembleStrategy::weighted) {
        auto w = nnls(x, y, m);
        double sum = std::accumulate(w.begin(), w.end(), 0.0);
        weights_ = sum > 0.0 ? w : uniform(m);
        if (sum > 0.0)
            for (auto& v : weights_) v /= sum;
    } else {
        auto fit = fit_linear(x, y, m);
        if (fit.singular) {
            spdlog::warn("{}: singular meta-features, falling back to averaging", name_);
            weights_ = uniform(m);
            intercept_ = 0.0;
            stacked_ = false;
        } else {
            weights_ = fit.weights;
            intercept_ = fit.intercept;
            stacked_ = true;
        }
    }
}

void RatingEnsemble::fit_impl(const Dataset& train) {
    intercept_ = 0.0;
    stacked_ = false;
    const bool learned = (spec_.strategy == EnsembleStrategy::weighted && !spec_.weights) ||
                         spec_.strategy == EnsembleStrategy::stacking;
    if (learned)
        learn_combination(train);
    else if (spec_.weights && spec_.strategy == EnsembleStrategy::weighted)
        weights_ = *spec_.weights;
    else
        weights_ = uniform(bases_.size());
    for (auto& b : bases_) b->fit(train);
}

double RatingEnsemble::estimate(UserIndex u, ItemIndex i) const {
    std::vector<double> preds(bases_.size());
    for (std::size_t m = 0; m < bases_.size(); ++m) preds[m] = bases_[m]->predict(u, i);
    return stacked_ ? combine_stacking(preds, intercept_, weights_) : combine_weighted(preds, weights_);
}

// ------------------------------------------------------ ranking ensemble

RankingEnsemble::RankingEnsemble(EnsembleSpec spec, std::vector<RankingScorerPtr> bases, std::uint64_t seed)
    : spec_(std::move(spec)), bases_(std::move(bases)), seed_(seed) {
    spec_.validate();
    if (spec_.pipeline != Pipeline::ranking) throw ConfigError("RankingEnsemble: spec is not a ranking ensemble");
    if (bases_.size() != spec_.base_models.size()) throw ConfigError("RankingEnsemble: base count mismatch");
    name_ = spec_.strategy == EnsembleStrategy::rank_fusion ? "rank_fusion" : to_string(spec_.strategy) + "_ensemble";
}

void RankingEnsemble::fit_impl(const ImplicitDataset& train) {
    weights_ = uniform(bases_.size());
    if (spec_.strategy == EnsembleStrategy::weighted) {
        if (spec_.weights) {
            weights_ = *spec_.weights;
        } else {
            SplitConfig cfg;
            cfg.strategy = SplitStrategy::per_user;
            cfg.train_fraction = 1.0 - holdout_fraction(spec_);
            cfg.seed = seed_;
            cfg.min_interactions_per_user = 2;
            cfg.min_test_items_per_user = 1;
            auto hold = per_user_split(train, cfg);
            std::vector<double> quality;
            for (auto& b : bases_) {
                b->fit(hold.train);
                quality.push_back(evaluate_ranking(*b, hold.test).ndcg);
            }
            double sum = std::accumulate(quality.begin(), quality.end(), 0.0);
            if (sum > 0.0)
                for (std::size_t m = 0; m < quality.size(); ++m) weights_[m] = quality[m] / sum;
        }
    }
    for (auto& b : bases_) b->fit(train);
}

std::vector<double> RankingEnsemble::score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const {
    require_fitted();
    std::vector<std::vector<double>> scores;
    scores.reserve(bases_.size());
    for (const auto& b : bases_) scores.push_back(b->score_candidates(u, candidates));
    if (spec_.strategy == EnsembleStrategy::rank_fusion)
        return reciprocal_rank_fusion(candidates, scores, spec_.meta_params.value("rrf_c", 60.0));
    for (auto& s : scores) minmax_normalize(s);
    std::vector<double> out(candidates.size());
    std::vector<double> col(bases_.size());
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        for (std::size_t m = 0; m < bases_.size(); ++m) col[m] = scores[m][j];
        out[j] = combine_weighted(col, weights_);
    }
    work::add(candidates.size() * bases_.size());
    return out;
}

// ---------------------------------------------------------------- factory

RatingPredictorPtr make_rating_ensemble(const EnsembleSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::vector<RatingPredictorPtr> bases;
    for (const auto& b : spec.base_models) bases.push_back(make_rating_model(b, base_params(spec, b), seed));
    return std::make_unique<RatingEnsemble>(spec, std::move(bases), seed);
}

RankingScorerPtr make_ranking_ensemble(const EnsembleSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::vector<RankingScorerPtr> bases;
    for (const auto& b : spec.base_models) bases.push_back(make_ranking_model(b, base_params(spec, b), seed));
    return std::make_unique<RankingEnsemble>(spec, std::move(bases), seed);
}

nlohmann::json to_json(const EnsembleSpec& s) {
    nlohmann::json j;
    j["pipeline"] = to_string(s.pipeline);
    j["strategy"] = to_string(s.strategy);
    j["bases"] = s.base_models;
    if (s.weights) j["weights"] = *s.weights;
    j["meta_params"] = s.meta_params;
    return j;
}

EnsembleSpec ensemble_spec_from_json(const nlohmann::json& j, Pipeline pipeline) {
    try {
        auto strategy = parse_ensemble_strategy(j.at("strategy").get<std::string>());
        auto spec = default_ensemble_spec(pipeline, strategy);
        if (j.contains("bases")) spec.base_models = j["bases"].get<std::vector<std::string>>();
        if (j.contains("weights")) spec.weights = j["weights"].get<std::vector<double>>();
        if (j.contains("meta_params")) spec.meta_params = j["meta_params"];
        if (!spec.meta_params.is_object()) throw ConfigError("ensemble: meta_params must be an object");
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("ensemble spec: ") + e.what());
    }
}

}  // namespace recbench
