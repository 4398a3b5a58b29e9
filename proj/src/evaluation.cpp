#include "recbench/evaluation.hpp"

#include <algorithm>

#include "recbench/error.hpp"

namespace recbench {

double evaluate_rmse(const RatingPredictor& model, const Dataset& test) {
    std::vector<PredictionPair> pairs;
    pairs.reserve(test.size());
    for (const auto& it : test.interactions) pairs.push_back({it.rating, model.predict(it.user, it.item)});
    return rmse(pairs);
}

RankingEvaluation evaluate_ranking(const RankingScorer& model, const ImplicitDataset& test,
                                   const RankingEvalOptions& opt) {
    const auto& idx = model.index();
    std::vector<std::vector<ItemIndex>> relevant(static_cast<std::size_t>(std::max(idx.n_users, test.user_capacity())));
    for (const auto& p : test.positives) relevant[static_cast<std::size_t>(p.user)].push_back(p.item);

    RankingEvaluation ev;
    std::vector<std::optional<std::int64_t>> firsts;
    double ndcg_sum = 0.0, rbp_sum = 0.0;
    for (UserIndex u = 0; u < idx.n_users; ++u) {
        if (!idx.knows_user(u)) continue;
        auto& rel = relevant[static_cast<std::size_t>(u)];
        if (rel.empty() && opt.only_users_with_relevant) continue;
        std::sort(rel.begin(), rel.end());
        rel.erase(std::unique(rel.begin(), rel.end()), rel.end());
        RankedRelevance r;
        r.total_relevant = static_cast<std::int64_t>(rel.size());
        if (!rel.empty()) {
            for (const auto& s : model.recommend(u, static_cast<std::size_t>(opt.k)))
                r.relevance.push_back(std::binary_search(rel.begin(), rel.end(), s.item) ? 1 : 0);
        }
        const double n = ndcg_at_k(r, opt.k, opt.ideal);
        ev.per_user_ndcg.push_back(n);
        ndcg_sum += n;
        rbp_sum += rbp(r, opt.rbp_persistence);
        firsts.push_back(first_relevant_rank(r));
    }
    if (firsts.empty()) throw DataError("evaluate_ranking: no users to evaluate");
    ev.users = static_cast<std::int64_t>(firsts.size());
    ev.ndcg = ndcg_sum / static_cast<double>(ev.users);
    ev.rbp = rbp_sum / static_cast<double>(ev.users);
    ev.reciprank = reciprank(firsts);
    return ev;
}

}  // namespace recbench
