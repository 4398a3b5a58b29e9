#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace recbench {

struct PredictionPair {
    double y = 0.0;      // observed rating
    double y_hat = 0.0;  // predicted rating
};

// Relevance flags of one user's recommendation list, top position first,
// plus the number of relevant items in that user's test set.
struct RankedRelevance {
    std::vector<std::uint8_t> relevance;
    std::int64_t total_relevant = 0;
};

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    std::vector<double> values;
};

double rmse(std::span<const PredictionPair> pairs);

// How many ideal positions enter IDCG: min(k, total_relevant), or every
// relevant item of the user's test set.
enum class IdealDepth { cutoff, all_relevant };

// DCG@k / IDCG with gain rel_i / log2(i + 1). A user with nothing relevant
// scores 0.
double ndcg_at_k(const RankedRelevance& r, std::int32_t k, IdealDepth ideal = IdealDepth::cutoff);

double rbp(const RankedRelevance& r, double persistence = 0.8);

// 1-based rank of the first relevant item, if any.
std::optional<std::int64_t> first_relevant_rank(const RankedRelevance& r);

// Mean of 1/rank over users; users without a retrieved relevant item add 0.
double reciprank(std::span<const std::optional<std::int64_t>> first_ranks);

MetricSummary summarize(std::span<const double> values);

}  // namespace recbench
