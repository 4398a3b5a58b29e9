#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "recbench/error.hpp"
#include "recbench/metrics.hpp"

using namespace recbench;

namespace {

RankedRelevance ranked(std::vector<std::uint8_t> rel, std::int64_t total) { return {std::move(rel), total}; }

std::vector<int> as_int(const RankedRelevance& r) { return {r.relevance.begin(), r.relevance.end()}; }

RankedRelevance random_list(std::mt19937_64& rng, int max_len) {
    std::uniform_int_distribution<int> len(0, max_len), bit(0, 1), extra(0, 3);
    RankedRelevance r;
    r.relevance.resize(static_cast<std::size_t>(len(rng)));
    std::int64_t hits = 0;
    for (auto& x : r.relevance) hits += (x = static_cast<std::uint8_t>(bit(rng)));
    r.total_relevant = hits + extra(rng);
    return r;
}

}  // namespace

TEST_CASE("rmse") {
    std::vector<PredictionPair> perfect{{3, 3}, {1, 1}};
    CHECK(rmse(perfect) == 0.0);
    std::vector<PredictionPair> two{{1, 3}, {3, 1}};
    CHECK(rmse(two) == 2.0);
    CHECK_THROWS(rmse(std::vector<PredictionPair>{}));

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(1, 5);
    std::vector<PredictionPair> pairs;
    std::vector<double> y, yh;
    for (int i = 0; i < 1000; ++i) {
        pairs.push_back({u(rng), u(rng)});
        y.push_back(pairs.back().y);
        yh.push_back(pairs.back().y_hat);
    }
    CHECK(std::abs(rmse(pairs) - oracle::rmse(y, yh)) < 1e-12);
}

TEST_CASE("ndcg analytic values") {
    CHECK(ndcg_at_k(ranked({1, 0, 0}, 1), 10) == 1.0);
    CHECK(std::abs(ndcg_at_k(ranked({0, 1}, 1), 10) - 1.0 / std::log2(3.0)) < 1e-12);
    CHECK(ndcg_at_k(ranked({0, 0, 0}, 0), 10) == 0.0);
    CHECK(ndcg_at_k(ranked({0, 0, 0}, 3), 10) == 0.0);
}

TEST_CASE("ndcg ideal depth") {
    // two hits in the top 2, five relevant in total
    auto r = ranked({1, 1, 0}, 5);
    CHECK(ndcg_at_k(r, 2) == doctest::Approx(1.0));
    const double idcg5 = 1 + 1 / std::log2(3.0) + 0.5 + 1 / std::log2(5.0) + 1 / std::log2(6.0);
    CHECK(ndcg_at_k(r, 2, IdealDepth::all_relevant) == doctest::Approx((1 + 1 / std::log2(3.0)) / idcg5));
}

TEST_CASE("ndcg matches the permutation oracle") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 1000; ++t) {
        auto r = random_list(rng, 6);
        const int k = 1 + static_cast<int>(rng() % 6);
        CHECK(std::abs(ndcg_at_k(r, k) - oracle::ndcg(as_int(r), k, static_cast<int>(r.total_relevant))) < 1e-9);
    }
}

TEST_CASE("ndcg properties") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 200; ++t) {
        auto r = random_list(rng, 12);
        const double v = ndcg_at_k(r, 5);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-12);
        if (r.relevance.size() > 6) {
            auto s = r;
            std::fill(s.relevance.begin() + 5, s.relevance.end(), std::uint8_t{0});
            CHECK(ndcg_at_k(s, 5) == v);
        }
    }
}

TEST_CASE("rbp") {
    CHECK(std::abs(rbp(ranked({1, 0, 0}, 1), 0.8) - 0.2) < 1e-12);
    CHECK(rbp(ranked({0, 0}, 1), 0.8) == 0.0);
    CHECK(std::abs(rbp(ranked(std::vector<std::uint8_t>(10, 1), 10), 0.8) - (1 - std::pow(0.8, 10))) < 1e-12);
    CHECK_THROWS_AS(rbp(ranked({1}, 1), 1.0), ConfigError);
    CHECK_THROWS_AS(rbp(ranked({1}, 1), 0.0), ConfigError);

    std::mt19937_64 rng(3);
    for (int t = 0; t < 1000; ++t) {
        auto r = random_list(rng, 10);
        CHECK(std::abs(rbp(r, 0.8) - oracle::rbp(as_int(r), 0.8)) < 1e-9);
        for (std::size_t i = 1; i < r.relevance.size(); ++i) {
            if (r.relevance[i] && !r.relevance[i - 1]) {
                auto better = r;
                std::swap(better.relevance[i], better.relevance[i - 1]);
                CHECK(rbp(better, 0.8) >= rbp(r, 0.8));
            }
        }
    }
}

TEST_CASE("reciprank") {
    std::vector<std::optional<std::int64_t>> all_first{1, 1, 1};
    CHECK(reciprank(all_first) == 1.0);
    std::vector<std::optional<std::int64_t>> four{4};
    CHECK(reciprank(four) == 0.25);
    std::vector<std::optional<std::int64_t>> one_none{1, std::nullopt};
    CHECK(reciprank(one_none) == 0.5);
    CHECK_THROWS(reciprank(std::vector<std::optional<std::int64_t>>{}));

    CHECK(first_relevant_rank(ranked({0, 0, 1}, 1)) == 3);
    CHECK_FALSE(first_relevant_rank(ranked({0, 0}, 1)).has_value());

    std::mt19937_64 rng(4);
    for (int t = 0; t < 1000; ++t) {
        std::vector<std::vector<int>> lists;
        std::vector<std::optional<std::int64_t>> ranks;
        const int users = 1 + static_cast<int>(rng() % 5);
        for (int u = 0; u < users; ++u) {
            auto r = random_list(rng, 8);
            lists.push_back(as_int(r));
            ranks.push_back(first_relevant_rank(r));
        }
        CHECK(std::abs(reciprank(ranks) - oracle::reciprank(lists)) < 1e-9);
    }
}

TEST_CASE("summarize") {
    std::vector<double> ones{1, 1, 1};
    auto s = summarize(ones);
    CHECK(s.mean == 1.0);
    CHECK(s.std == 0.0);
    std::vector<double> zero_two{0, 2};
    s = summarize(zero_two);
    CHECK(s.mean == 1.0);
    CHECK(s.std == 1.0);
    CHECK_THROWS(summarize(std::vector<double>{}));

    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(3, 2);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> v(1 + rng() % 40);
        for (auto& x : v) x = n(rng);
        auto m = summarize(v);
        CHECK(std::abs(m.mean - oracle::mean(v)) < 1e-12);
        CHECK(std::abs(m.std - oracle::population_std(v)) < 1e-12);
        CHECK(m.values == v);
    }
}
