#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "recbench/data.hpp"

namespace recbench {

inline constexpr std::size_t kDefaultMemoryBudget = std::size_t{4} << 30;  // 4 GiB

// Per-user and per-item adjacency of a training set.
struct RatingIndex {
    std::int32_t n_users = 0;
    std::int32_t n_items = 0;
    double global_mean = 0.0;
    std::vector<std::vector<std::pair<ItemIndex, double>>> by_user;
    std::vector<std::vector<std::pair<UserIndex, double>>> by_item;

    static RatingIndex build(const Dataset& train);
    bool knows_user(UserIndex u) const noexcept {
        return u >= 0 && u < n_users && !by_user[static_cast<std::size_t>(u)].empty();
    }
    bool knows_item(ItemIndex i) const noexcept {
        return i >= 0 && i < n_items && !by_item[static_cast<std::size_t>(i)].empty();
    }
};

// fit on a training Dataset, then predict a rating for any (user, item).
// Predictions are clamped to the training scale; ids never seen in training
// fall back to bias terms and then to the global mean.
class RatingPredictor {
public:
    virtual ~RatingPredictor() = default;

    virtual std::string name() const = 0;

    void fit(const Dataset& train);
    double predict(UserIndex u, ItemIndex i) const;
    bool fitted() const noexcept { return fitted_; }
    const RatingScale& scale() const noexcept { return scale_; }

protected:
    virtual void fit_impl(const Dataset& train) = 0;
    // Unclamped estimate.
    virtual double estimate(UserIndex u, ItemIndex i) const = 0;

private:
    RatingScale scale_;
    bool fitted_ = false;
};

using RatingPredictorPtr = std::unique_ptr<RatingPredictor>;

class GlobalMean final : public RatingPredictor {
public:
    std::string name() const override { return "global_mean"; }
    double mean() const noexcept { return mean_; }

protected:
    void fit_impl(const Dataset& train) override;
    double estimate(UserIndex, ItemIndex) const override { return mean_; }

private:
    double mean_ = 0.0;
};

// Draws each prediction from a distribution fitted to the training ratings.
// `normal` samples N(mean, std) and relies on clamping to stay in range;
// `uniform` samples the scale uniformly. Draws are keyed on (seed, user,
// item), so repeated queries return the same value.
enum class RandomDistribution { normal, uniform };

struct RandomConfig {
    std::uint64_t seed = 0;
    RandomDistribution distribution = RandomDistribution::normal;
};

class RandomPredictor final : public RatingPredictor {
public:
    using Distribution = RandomDistribution;
    using Config = RandomConfig;
    explicit RandomPredictor(Config cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "random"; }

protected:
    void fit_impl(const Dataset& train) override;
    double estimate(UserIndex u, ItemIndex i) const override;

private:
    Config cfg_;
    double mean_ = 0.0;
    double std_ = 0.0;
    RatingScale range_;
};

// mu + b_u + b_i with biases fitted by alternating regularized least squares.
struct BiasConfig {
    double reg_user = 15.0;
    double reg_item = 10.0;
    std::int32_t epochs = 10;
};

class BiasBaseline final : public RatingPredictor {
public:
    using Config = BiasConfig;
    explicit BiasBaseline(Config cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "bias_baseline"; }

    double mu() const noexcept { return mu_; }
    double user_bias(UserIndex u) const noexcept;
    double item_bias(ItemIndex i) const noexcept;
    double baseline(UserIndex u, ItemIndex i) const noexcept { return mu_ + user_bias(u) + item_bias(i); }
    // Fits from an already-built index (shared with KnnBaseline).
    void fit_index(const RatingIndex& index);

protected:
    void fit_impl(const Dataset& train) override;
    double estimate(UserIndex u, ItemIndex i) const override { return baseline(u, i); }

private:
    Config cfg_;
    double mu_ = 0.0;
    std::vector<double> bu_;
    std::vector<double> bi_;
};

struct FactorConfig {
    std::int32_t factors = 100;
    std::int32_t epochs = 20;
    double learning_rate = 0.005;
    double regularization = 0.02;
    double init_mean = 0.0;
    double init_std = 0.1;
    std::uint64_t seed = 0;
};

// Biased matrix factorization trained by SGD over a per-epoch shuffle.
class Svd final : public RatingPredictor {
public:
    explicit Svd(FactorConfig cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "svd"; }
    double train_loss() const noexcept { return train_loss_; }

protected:
    void fit_impl(const Dataset& train) override;
    double estimate(UserIndex u, ItemIndex i) const override;

private:
    FactorConfig cfg_;
    RatingIndex index_;
    std::vector<double> bu_, bi_, p_, q_;
    double train_loss_ = 0.0;
};

// SVD with implicit item factors Y summed over the items each user rated.
// With `implicit_factors` off, Y stays zero and the updates reduce to Svd's.
struct SvdppConfig {
    FactorConfig factor{20, 20, 0.007, 0.02, 0.0, 0.1, 0};
    bool implicit_factors = true;
};

class SvdPlusPlus final : public RatingPredictor {
public:
    using Config = SvdppConfig;
    explicit SvdPlusPlus(Config cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "svdpp"; }

protected:
    void fit_impl(const Dataset& train) override;
    double estimate(UserIndex u, ItemIndex i) const override;

private:
    Config cfg_;
    RatingIndex index_;
    std::vector<double> bu_, bi_, p_, q_, y_;
    std::vector<double> implicit_sum_;  // per user, |N(u)|^-1/2 * sum_j y_j after fit
};

// Non-negative factorization with multiplicative updates.
struct NmfConfig {
    std::int32_t factors = 15;
    std::int32_t epochs = 50;
    double reg_user = 0.06;
    double reg_item = 0.06;
    double init_low = 0.0;
    double init_high = 1.0;
    std::uint64_t seed = 0;
};

class Nmf final : public RatingPredictor {
public:
    using Config = NmfConfig;
    explicit Nmf(Config cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "nmf"; }

    // Invoked after every epoch with the current factors (for invariant probes).
    using EpochHook = std::function<void(std::int32_t epoch, const std::vector<double>& p, const std::vector<double>& q)>;
    void set_epoch_hook(EpochHook hook) { hook_ = std::move(hook); }

protected:
    void fit_impl(const Dataset& train) override;
    double estimate(UserIndex u, ItemIndex i) const override;

private:
    Config cfg_;
    RatingIndex index_;
    std::vector<double> p_, q_;
    EpochHook hook_;
};

// Item-based neighbourhood model on baseline-centred ratings with shrunk
// Pearson-baseline similarities.
struct KnnBaselineConfig {
    std::int32_t k = 40;
    std::int32_t min_k = 1;
    double shrinkage = 100.0;
    BiasConfig baseline{};
    std::size_t memory_budget_bytes = kDefaultMemoryBudget;
};

class KnnBaseline final : public RatingPredictor {
public:
    using Config = KnnBaselineConfig;
    explicit KnnBaseline(Config cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "knn_baseline"; }

    static std::size_t similarity_bytes(std::int64_t n_items);
    double similarity(ItemIndex a, ItemIndex b) const;

protected:
    void fit_impl(const Dataset& train) override;
    double estimate(UserIndex u, ItemIndex i) const override;

private:
    Config cfg_;
    RatingIndex index_;
    BiasBaseline baseline_;
    std::vector<double> sim_;  // n_items x n_items, row-major
};

struct SlopeOneConfig {
    std::size_t memory_budget_bytes = kDefaultMemoryBudget;
};

class SlopeOne final : public RatingPredictor {
public:
    using Config = SlopeOneConfig;
    explicit SlopeOne(Config cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "slope_one"; }

    double deviation(ItemIndex i, ItemIndex j) const;

protected:
    void fit_impl(const Dataset& train) override;
    double estimate(UserIndex u, ItemIndex i) const override;

private:
    Config cfg_;
    RatingIndex index_;
    std::vector<double> dev_;
    std::vector<std::int32_t> freq_;
    std::vector<double> user_mean_;
};

struct CoClusteringConfig {
    std::int32_t user_clusters = 3;
    std::int32_t item_clusters = 3;
    std::int32_t epochs = 20;
    std::uint64_t seed = 0;
};

class CoClustering final : public RatingPredictor {
public:
    using Config = CoClusteringConfig;
    explicit CoClustering(Config cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "co_clustering"; }

    std::int32_t user_cluster(UserIndex u) const { return cu_.at(static_cast<std::size_t>(u)); }
    std::int32_t item_cluster(ItemIndex i) const { return ci_.at(static_cast<std::size_t>(i)); }

protected:
    void fit_impl(const Dataset& train) override;
    double estimate(UserIndex u, ItemIndex i) const override;

private:
    void compute_averages();

    Config cfg_;
    RatingIndex index_;
    std::vector<std::int32_t> cu_, ci_;
    std::vector<double> user_mean_, item_mean_;
    std::vector<double> avg_user_cluster_, avg_item_cluster_, avg_cocluster_;
};

// Names accepted by make_rating_model.
const std::vector<std::string>& rating_model_types();

// Builds a single (non-ensemble) rating model from JSON hyperparameters.
// `seed` is used unless params carry their own "seed".
RatingPredictorPtr make_rating_model(const std::string& type, const nlohmann::json& params, std::uint64_t seed);

}  // namespace recbench
