#pragma once

#include <cstdint>
#include <vector>

#include "recbench/data.hpp"
#include "recbench/metrics.hpp"
#include "recbench/ranking_models.hpp"
#include "recbench/rating_models.hpp"

namespace recbench {

double evaluate_rmse(const RatingPredictor& model, const Dataset& test);

struct RankingEvalOptions {
    std::int32_t k = 10;
    double rbp_persistence = 0.8;
    IdealDepth ideal = IdealDepth::all_relevant;
    // false: every user with training interactions is averaged, users with no
    // relevant test item adding 0. true: only users with a relevant test item.
    bool only_users_with_relevant = false;
};

struct RankingEvaluation {
    double ndcg = 0.0;
    double rbp = 0.0;
    double reciprank = 0.0;
    std::int64_t users = 0;
    std::vector<double> per_user_ndcg;
};

// Full ranking over candidates_for(u) for every evaluated user.
RankingEvaluation evaluate_ranking(const RankingScorer& model, const ImplicitDataset& test,
                                   const RankingEvalOptions& opt = {});

}  // namespace recbench
