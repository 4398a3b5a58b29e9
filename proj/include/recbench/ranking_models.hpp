#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "recbench/data.hpp"
#include "recbench/rating_models.hpp"

namespace recbench {

// Binary interaction adjacency of an implicit training set. Lists are sorted.
struct InteractionIndex {
    std::int32_t n_users = 0;
    std::int32_t n_items = 0;
    std::vector<std::vector<ItemIndex>> by_user;
    std::vector<std::vector<UserIndex>> by_item;
    std::vector<ItemIndex> known_items;  // items with at least one interaction

    static InteractionIndex build(const ImplicitDataset& train);
    bool knows_user(UserIndex u) const noexcept {
        return u >= 0 && u < n_users && !by_user[static_cast<std::size_t>(u)].empty();
    }
    bool knows_item(ItemIndex i) const noexcept {
        return i >= 0 && i < n_items && !by_item[static_cast<std::size_t>(i)].empty();
    }
    bool interacted(UserIndex u, ItemIndex i) const;
    std::size_t n_interactions() const;
};

struct ScoredItem {
    ItemIndex item = 0;
    double score = 0.0;
};

// fit on implicit positives, then score (user, item) pairs. recommend()
// drops items the user interacted with in training and orders by descending
// score, breaking ties by ascending internal item index.
class RankingScorer {
public:
    virtual ~RankingScorer() = default;

    virtual std::string name() const = 0;

    void fit(const ImplicitDataset& train);
    bool fitted() const noexcept { return fitted_; }
    const InteractionIndex& index() const noexcept { return index_; }

    double score(UserIndex u, ItemIndex i) const;
    virtual std::vector<double> score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const = 0;

    // Known training items the user has not interacted with.
    std::vector<ItemIndex> candidates_for(UserIndex u) const;
    std::vector<ScoredItem> recommend(UserIndex u, std::size_t n,
                                      std::optional<std::span<const ItemIndex>> candidates = std::nullopt) const;

protected:
    virtual void fit_impl(const ImplicitDataset& train) = 0;
    void require_fitted() const;

private:
    InteractionIndex index_;
    bool fitted_ = false;
};

using RankingScorerPtr = std::unique_ptr<RankingScorer>;

// Orders candidates by descending score, ties by ascending item index, and
// truncates to n.
std::vector<ScoredItem> rank_candidates(std::span<const ItemIndex> candidates, std::span<const double> scores,
                                        std::size_t n);

class RandomScorer final : public RankingScorer {
public:
    explicit RandomScorer(std::uint64_t seed = 0) : seed_(seed) {}
    std::string name() const override { return "random"; }
    std::vector<double> score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const override;

protected:
    void fit_impl(const ImplicitDataset&) override {}

private:
    std::uint64_t seed_;
};

class PopularScorer final : public RankingScorer {
public:
    std::string name() const override { return "popular"; }
    std::vector<double> score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const override;

protected:
    void fit_impl(const ImplicitDataset&) override {}
};

// Scores every item for a user with that user's activity level (number of
// training positives). The score is constant per user, so the ordering of a
// user's list comes from a seeded sub-unit jitter.
class UserMeanScorer final : public RankingScorer {
public:
    explicit UserMeanScorer(std::uint64_t seed = 0) : seed_(seed) {}
    std::string name() const override { return "user_mean"; }
    std::vector<double> score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const override;

protected:
    void fit_impl(const ImplicitDataset&) override {}

private:
    std::uint64_t seed_;
};

struct AlsConfig {
    std::int32_t factors = 50;
    double alpha = 40.0;
    double regularization = 0.01;
    std::int32_t sweeps = 15;
    double init_std = 0.01;
    std::uint64_t seed = 0;
};

// Confidence-weighted implicit ALS: c = 1 + alpha for positives, 1 otherwise,
// preference 1 for positives and 0 otherwise; each half-sweep solves the
// normal equations exactly.
class AlsImplicit final : public RankingScorer {
public:
    using Config = AlsConfig;
    explicit AlsImplicit(Config cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "als"; }
    std::vector<double> score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const override;

    // Weighted squared loss plus L2 penalty at the current factors.
    double loss() const;
    // Called after each full sweep (users then items) with the loss.
    void set_sweep_hook(std::function<void(std::int32_t sweep, double loss)> hook) { hook_ = std::move(hook); }

    // Solves one row: argmin_x sum_j c_j (p_j - x.y_j)^2 + reg |x|^2 where
    // `fixed` holds the other side's factors (row-major, width f), `gram` is
    // fixed^T fixed (f x f) and `positives` the rows with p = 1.
    static std::vector<double> solve_row(std::span<const double> fixed, std::span<const double> gram,
                                         std::span<const std::int32_t> positives, std::int32_t f, double alpha,
                                         double reg);

protected:
    void fit_impl(const ImplicitDataset& train) override;

private:
    Config cfg_;
    std::vector<double> x_, y_;  // user and item factors, row-major
    std::function<void(std::int32_t, double)> hook_;
};

struct BprConfig {
    std::int32_t factors = 50;
    std::int32_t epochs = 30;
    double learning_rate = 0.05;
    double regularization = 0.01;
    double init_std = 0.1;
    std::uint64_t seed = 0;
};

// Parameters touched by one (user, positive, negative) triple or one
// (user, item) logistic observation.
struct PairwiseParams {
    std::vector<double> user;
    std::vector<double> item_a;
    std::vector<double> item_b;
    double bias_a = 0.0;
    double bias_b = 0.0;
    double bias_user = 0.0;
};

class Bpr final : public RankingScorer {
public:
    using Config = BprConfig;
    explicit Bpr(Config cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "bpr"; }
    std::vector<double> score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const override;

    // ln sigma(x_ui - x_uj) - reg/2 * |theta|^2 for one triple, where
    // x_ui = user . item_a + bias_a and x_uj = user . item_b + bias_b.
    static double objective(const PairwiseParams& t, double reg);
    // Gradient of objective() in the same layout as PairwiseParams
    // (bias_user unused).
    static PairwiseParams gradient(const PairwiseParams& t, double reg);

protected:
    void fit_impl(const ImplicitDataset& train) override;

private:
    Config cfg_;
    std::vector<double> p_, q_, bi_;
};

struct LogisticMfConfig {
    std::int32_t factors = 50;
    std::int32_t epochs = 30;
    double learning_rate = 0.05;
    double regularization = 0.01;
    std::int32_t negatives_per_positive = 1;
    double init_std = 0.1;
    std::uint64_t seed = 0;
};

class LogisticMf final : public RankingScorer {
public:
    using Config = LogisticMfConfig;
    explicit LogisticMf(Config cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "logistic_mf"; }
    std::vector<double> score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const override;
    double probability(UserIndex u, ItemIndex i) const;

    // Log-likelihood of one observation with label y in {0,1} under
    // sigma(user . item_a + bias_user + bias_a), minus reg/2 * |theta|^2.
    static double objective(const PairwiseParams& t, double label, double reg);
    static PairwiseParams gradient(const PairwiseParams& t, double label, double reg);

protected:
    void fit_impl(const ImplicitDataset& train) override;

private:
    double logit(UserIndex u, ItemIndex i) const;

    Config cfg_;
    std::vector<double> p_, q_, bu_, bi_;
};

struct KnnConfig {
    std::int32_t k = 20;
    std::size_t memory_budget_bytes = kDefaultMemoryBudget;
};

// Cosine similarity over binary item vectors; score(u, i) sums the k largest
// similarities between i and the items u interacted with.
class ItemKnn final : public RankingScorer {
public:
    using Config = KnnConfig;
    explicit ItemKnn(Config cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "item_knn"; }
    std::vector<double> score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const override;
    double similarity(ItemIndex a, ItemIndex b) const;

protected:
    void fit_impl(const ImplicitDataset& train) override;

private:
    Config cfg_;
    std::vector<double> sim_;
};

// Cosine similarity over binary user vectors; score(u, i) sums the k largest
// similarities between u and the users who interacted with i.
class UserKnn final : public RankingScorer {
public:
    using Config = KnnConfig;
    explicit UserKnn(Config cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "user_knn"; }
    std::vector<double> score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const override;
    double similarity(UserIndex a, UserIndex b) const;

protected:
    void fit_impl(const ImplicitDataset& train) override;

private:
    Config cfg_;
    std::vector<double> sim_;
};

std::size_t dense_similarity_bytes(std::int64_t n);

const std::vector<std::string>& ranking_model_types();
RankingScorerPtr make_ranking_model(const std::string& type, const nlohmann::json& params, std::uint64_t seed);

}  // namespace recbench
