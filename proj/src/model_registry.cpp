#include <nlohmann/json.hpp>

#include "recbench/error.hpp"
#include "recbench/ranking_models.hpp"
#include "recbench/rating_models.hpp"

namespace recbench {

namespace {

using nlohmann::json;

template <class T>
T get(const json& p, const char* key, T fallback) {
    if (!p.is_object() || !p.contains(key)) return fallback;
    try {
        return p.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("parameter '") + key + "': " + e.what());
    }
}

void reject_unknown(const json& p, const std::string& type, std::initializer_list<const char*> allowed) {
    if (p.is_null()) return;
    if (!p.is_object()) throw ConfigError(type + ": params must be an object");
    for (const auto& [key, _] : p.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(type + ": unknown parameter '" + key + "'");
    }
}

FactorConfig factor_config(const json& p, FactorConfig base, std::uint64_t seed) {
    base.factors = get(p, "factors", base.factors);
    base.epochs = get(p, "epochs", base.epochs);
    base.learning_rate = get(p, "learning_rate", base.learning_rate);
    base.regularization = get(p, "regularization", base.regularization);
    base.init_mean = get(p, "init_mean", base.init_mean);
    base.init_std = get(p, "init_std", base.init_std);
    base.seed = get(p, "seed", seed);
    return base;
}

}  // namespace

const std::vector<std::string>& rating_model_types() {
    static const std::vector<std::string> types = {"global_mean", "random",       "bias_baseline", "svd",
                                                   "svdpp",       "nmf",          "knn_baseline",  "slope_one",
                                                   "co_clustering"};
    return types;
}

RatingPredictorPtr make_rating_model(const std::string& type, const json& p, std::uint64_t seed) {
    if (type == "global_mean") {
        reject_unknown(p, type, {});
        return std::make_unique<GlobalMean>();
    }
    if (type == "random") {
        reject_unknown(p, type, {"seed", "distribution"});
        RandomConfig c;
        c.seed = get(p, "seed", seed);
        auto dist = get<std::string>(p, "distribution", "normal");
        if (dist == "normal")
            c.distribution = RandomDistribution::normal;
        else if (dist == "uniform")
            c.distribution = RandomDistribution::uniform;
        else
            throw ConfigError("random: distribution must be 'normal' or 'uniform'");
        return std::make_unique<RandomPredictor>(c);
    }
    if (type == "bias_baseline") {
        reject_unknown(p, type, {"reg_user", "reg_item", "epochs"});
        BiasConfig c;
        c.reg_user = get(p, "reg_user", c.reg_user);
        c.reg_item = get(p, "reg_item", c.reg_item);
        c.epochs = get(p, "epochs", c.epochs);
        return std::make_unique<BiasBaseline>(c);
    }
    if (type == "svd") {
        reject_unknown(p, type, {"factors", "epochs", "learning_rate", "regularization", "init_mean", "init_std", "seed"});
        return std::make_unique<Svd>(factor_config(p, FactorConfig{}, seed));
    }
    if (type == "svdpp") {
        reject_unknown(p, type, {"factors", "epochs", "learning_rate", "regularization", "init_mean", "init_std", "seed",
                                 "implicit_factors"});
        SvdppConfig c;
        c.factor = factor_config(p, c.factor, seed);
        c.implicit_factors = get(p, "implicit_factors", c.implicit_factors);
        return std::make_unique<SvdPlusPlus>(c);
    }
    if (type == "nmf") {
        reject_unknown(p, type, {"factors", "epochs", "reg_user", "reg_item", "init_low", "init_high", "seed"});
        NmfConfig c;
        c.factors = get(p, "factors", c.factors);
        c.epochs = get(p, "epochs", c.epochs);
        c.reg_user = get(p, "reg_user", c.reg_user);
        c.reg_item = get(p, "reg_item", c.reg_item);
        c.init_low = get(p, "init_low", c.init_low);
        c.init_high = get(p, "init_high", c.init_high);
        c.seed = get(p, "seed", seed);
        return std::make_unique<Nmf>(c);
    }
    if (type == "knn_baseline") {
        reject_unknown(p, type, {"k", "min_k", "shrinkage", "memory_budget_bytes"});
        KnnBaselineConfig c;
        c.k = get(p, "k", c.k);
        c.min_k = get(p, "min_k", c.min_k);
        c.shrinkage = get(p, "shrinkage", c.shrinkage);
        c.memory_budget_bytes = get(p, "memory_budget_bytes", c.memory_budget_bytes);
        return std::make_unique<KnnBaseline>(c);
    }
    if (type == "slope_one") {
        reject_unknown(p, type, {"memory_budget_bytes"});
        SlopeOneConfig c;
        c.memory_budget_bytes = get(p, "memory_budget_bytes", c.memory_budget_bytes);
        return std::make_unique<SlopeOne>(c);
    }
    if (type == "co_clustering") {
        reject_unknown(p, type, {"user_clusters", "item_clusters", "epochs", "seed"});
        CoClusteringConfig c;
        c.user_clusters = get(p, "user_clusters", c.user_clusters);
        c.item_clusters = get(p, "item_clusters", c.item_clusters);
        c.epochs = get(p, "epochs", c.epochs);
        c.seed = get(p, "seed", seed);
        return std::make_unique<CoClustering>(c);
    }
    throw ConfigError("unknown rating model type '" + type + "'");
}

const std::vector<std::string>& ranking_model_types() {
    static const std::vector<std::string> types = {"random", "popular", "user_mean", "als",
                                                   "bpr",    "logistic_mf", "item_knn", "user_knn"};
    return types;
}

RankingScorerPtr make_ranking_model(const std::string& type, const json& p, std::uint64_t seed) {
    if (type == "random") {
        reject_unknown(p, type, {"seed"});
        return std::make_unique<RandomScorer>(get(p, "seed", seed));
    }
    if (type == "popular") {
        reject_unknown(p, type, {});
        return std::make_unique<PopularScorer>();
    }
    if (type == "user_mean") {
        reject_unknown(p, type, {"seed"});
        return std::make_unique<UserMeanScorer>(get(p, "seed", seed));
    }
    if (type == "als") {
        reject_unknown(p, type, {"factors", "alpha", "regularization", "sweeps", "init_std", "seed"});
        AlsConfig c;
        c.factors = get(p, "factors", c.factors);
        c.alpha = get(p, "alpha", c.alpha);
        c.regularization = get(p, "regularization", c.regularization);
        c.sweeps = get(p, "sweeps", c.sweeps);
        c.init_std = get(p, "init_std", c.init_std);
        c.seed = get(p, "seed", seed);
        return std::make_unique<AlsImplicit>(c);
    }
    if (type == "bpr") {
        reject_unknown(p, type, {"factors", "epochs", "learning_rate", "regularization", "init_std", "seed"});
        BprConfig c;
        c.factors = get(p, "factors", c.factors);
        c.epochs = get(p, "epochs", c.epochs);
        c.learning_rate = get(p, "learning_rate", c.learning_rate);
        c.regularization = get(p, "regularization", c.regularization);
        c.init_std = get(p, "init_std", c.init_std);
        c.seed = get(p, "seed", seed);
        return std::make_unique<Bpr>(c);
    }
    if (type == "logistic_mf") {
        reject_unknown(p, type, {"factors", "epochs", "learning_rate", "regularization", "negatives_per_positive",
                                 "init_std", "seed"});
        LogisticMfConfig c;
        c.factors = get(p, "factors", c.factors);
        c.epochs = get(p, "epochs", c.epochs);
        c.learning_rate = get(p, "learning_rate", c.learning_rate);
        c.regularization = get(p, "regularization", c.regularization);
        c.negatives_per_positive = get(p, "negatives_per_positive", c.negatives_per_positive);
        c.init_std = get(p, "init_std", c.init_std);
        c.seed = get(p, "seed", seed);
        return std::make_unique<LogisticMf>(c);
    }
    if (type == "item_knn" || type == "user_knn") {
        reject_unknown(p, type, {"k", "memory_budget_bytes"});
        KnnConfig c;
        c.k = get(p, "k", c.k);
        c.memory_budget_bytes = get(p, "memory_budget_bytes", c.memory_budget_bytes);
        if (type == "item_knn") return std::make_unique<ItemKnn>(c);
        return std::make_unique<UserKnn>(c);
    }
    throw ConfigError("unknown ranking model type '" + type + "'");
}

}  // namespace recbench
