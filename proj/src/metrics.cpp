#include "recbench/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "recbench/error.hpp"

namespace recbench {

double rmse(std::span<const PredictionPair> pairs) {
    if (pairs.empty()) throw ConfigError("rmse: empty prediction list");
    double sum = 0.0;
    for (const auto& p : pairs) {
        const double e = p.y - p.y_hat;
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(pairs.size()));
}

double ndcg_at_k(const RankedRelevance& r, std::int32_t k, IdealDepth ideal) {
    if (k < 1) throw ConfigError("ndcg_at_k: k must be >= 1");
    const auto depth = std::min<std::size_t>(static_cast<std::size_t>(k), r.relevance.size());
    double dcg = 0.0;
    for (std::size_t i = 0; i < depth; ++i)
        if (r.relevance[i]) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    const auto ideal_hits = ideal == IdealDepth::cutoff ? std::min<std::int64_t>(k, r.total_relevant) : r.total_relevant;
    double idcg = 0.0;
    for (std::int64_t i = 0; i < ideal_hits; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

double rbp(const RankedRelevance& r, double persistence) {
    if (!(persistence > 0.0 && persistence < 1.0)) throw ConfigError("rbp: persistence must lie in (0,1)");
    double sum = 0.0;
    double weight = 1.0;
    for (auto rel : r.relevance) {
        if (rel) sum += weight;
        weight *= persistence;
    }
    return (1.0 - persistence) * sum;
}

std::optional<std::int64_t> first_relevant_rank(const RankedRelevance& r) {
    for (std::size_t i = 0; i < r.relevance.size(); ++i)
        if (r.relevance[i]) return static_cast<std::int64_t>(i) + 1;
    return std::nullopt;
}

double reciprank(std::span<const std::optional<std::int64_t>> first_ranks) {
    if (first_ranks.empty()) throw ConfigError("reciprank: no users");
    double sum = 0.0;
    for (const auto& rank : first_ranks)
        if (rank) sum += 1.0 / static_cast<double>(*rank);
    return sum / static_cast<double>(first_ranks.size());
}

MetricSummary summarize(std::span<const double> values) {
    if (values.empty()) throw ConfigError("summarize: empty input");
    MetricSummary s;
    s.values.assign(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(values.size()));
    return s;
}

}  // namespace recbench
