#pragma once

// Straightforward reference implementations used to cross-check the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace oracle {

inline double rmse(const std::vector<double>& y, const std::vector<double>& y_hat) {
    long double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (long double)(y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    return std::sqrt((double)(s / y.size()));
}

inline double dcg(const std::vector<int>& rel, int k) {
    double s = 0;
    for (int i = 0; i < k && i < (int)rel.size(); ++i) s += rel[i] / std::log2(i + 2.0);
    return s;
}

// IDCG as the best DCG@k over every ordering of `total` relevant items
// padded with non-relevant ones.
inline double ndcg(const std::vector<int>& rel, int k, int total) {
    if (total == 0) return 0.0;
    std::vector<int> pool(std::max<std::size_t>(rel.size(), total), 0);
    std::fill(pool.begin(), pool.begin() + total, 1);
    std::sort(pool.begin(), pool.end());
    double best = 0;
    do {
        best = std::max(best, dcg(pool, k));
    } while (std::next_permutation(pool.begin(), pool.end()));
    return best == 0 ? 0.0 : dcg(rel, k) / best;
}

inline double rbp(const std::vector<int>& rel, double p) {
    double s = 0;
    for (std::size_t i = 0; i < rel.size(); ++i)
        if (rel[i]) s += std::pow(p, (double)i);
    return (1 - p) * s;
}

inline double reciprank(const std::vector<std::vector<int>>& lists) {
    double s = 0;
    for (const auto& l : lists)
        for (std::size_t i = 0; i < l.size(); ++i)
            if (l[i]) {
                s += 1.0 / (i + 1);
                break;
            }
    return s / lists.size();
}

inline double mean(const std::vector<double>& v) {
    long double s = 0;
    for (double x : v) s += x;
    return (double)(s / v.size());
}

inline double population_std(const std::vector<double>& v) {
    const double m = mean(v);
    long double s = 0;
    for (double x : v) s += (long double)(x - m) * (x - m);
    return std::sqrt((double)(s / v.size()));
}

}  // namespace oracle
