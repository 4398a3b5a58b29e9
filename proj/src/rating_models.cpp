#include "recbench/rating_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "recbench/error.hpp"
#include "recbench/random.hpp"
#include "recbench/work.hpp"

namespace recbench {

namespace {

// Separate stream for epoch shuffles so that parameter initialisation and
// visiting order can be varied independently.
constexpr std::uint64_t kShuffleStream = 0x6a09e667f3bcc909ULL;

struct Triple {
    UserIndex u;
    ItemIndex i;
    double r;
};

std::vector<Triple> triples_of(const Dataset& train) {
    std::vector<Triple> out;
    out.reserve(train.size());
    for (const auto& it : train.interactions) out.push_back({it.user, it.item, it.rating});
    return out;
}

void require_nonempty(const Dataset& train, const char* model) {
    if (train.empty()) throw DataError(std::string(model) + ": empty training set");
}

inline std::size_t at(std::int32_t row, std::int32_t col, std::int32_t width) {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col);
}

inline double dot(const double* a, const double* b, std::int32_t n) {
    double s = 0.0;
    for (std::int32_t k = 0; k < n; ++k) s += a[k] * b[k];
    return s;
}

}  // namespace

RatingIndex RatingIndex::build(const Dataset& train) {
    RatingIndex idx;
    idx.n_users = train.user_capacity();
    idx.n_items = train.item_capacity();
    idx.by_user.resize(static_cast<std::size_t>(idx.n_users));
    idx.by_item.resize(static_cast<std::size_t>(idx.n_items));
    double sum = 0.0;
    for (const auto& it : train.interactions) {
        idx.by_user[static_cast<std::size_t>(it.user)].emplace_back(it.item, it.rating);
        idx.by_item[static_cast<std::size_t>(it.item)].emplace_back(it.user, it.rating);
        sum += it.rating;
    }
    idx.global_mean = train.empty() ? 0.0 : sum / static_cast<double>(train.size());
    return idx;
}

void RatingPredictor::fit(const Dataset& train) {
    scale_ = train.scale;
    fit_impl(train);
    fitted_ = true;
}

double RatingPredictor::predict(UserIndex u, ItemIndex i) const {
    if (!fitted_) throw ConfigError(name() + ": predict called before fit");
    return scale_.clamp(estimate(u, i));
}

// ---------------------------------------------------------------- baselines

void GlobalMean::fit_impl(const Dataset& train) {
    require_nonempty(train, "global_mean");
    double sum = 0.0;
    for (const auto& it : train.interactions) sum += it.rating;
    mean_ = sum / static_cast<double>(train.size());
    work::add(train.size());
}

void RandomPredictor::fit_impl(const Dataset& train) {
    range_ = train.scale;
    if (train.empty()) {
        mean_ = 0.5 * (range_.min + range_.max);
        std_ = 0.0;
        return;
    }
    double sum = 0.0;
    for (const auto& it : train.interactions) sum += it.rating;
    mean_ = sum / static_cast<double>(train.size());
    double sq = 0.0;
    for (const auto& it : train.interactions) sq += (it.rating - mean_) * (it.rating - mean_);
    std_ = std::sqrt(sq / static_cast<double>(train.size()));
    work::add(2 * train.size());
}

double RandomPredictor::estimate(UserIndex u, ItemIndex i) const {
    const auto a = static_cast<std::uint64_t>(static_cast<std::uint32_t>(u));
    const auto b = static_cast<std::uint64_t>(static_cast<std::uint32_t>(i));
    if (cfg_.distribution == RandomDistribution::uniform)
        return range_.min + (range_.max - range_.min) * hash_unit(cfg_.seed, a, b);
    return mean_ + std_ * hash_normal(cfg_.seed, a, b);
}

double BiasBaseline::user_bias(UserIndex u) const noexcept {
    return u >= 0 && static_cast<std::size_t>(u) < bu_.size() ? bu_[static_cast<std::size_t>(u)] : 0.0;
}

double BiasBaseline::item_bias(ItemIndex i) const noexcept {
    return i >= 0 && static_cast<std::size_t>(i) < bi_.size() ? bi_[static_cast<std::size_t>(i)] : 0.0;
}

void BiasBaseline::fit_index(const RatingIndex& index) {
    if (cfg_.epochs < 1) throw ConfigError("bias_baseline: epochs must be >= 1");
    mu_ = index.global_mean;
    bu_.assign(static_cast<std::size_t>(index.n_users), 0.0);
    bi_.assign(static_cast<std::size_t>(index.n_items), 0.0);
    for (std::int32_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
        for (std::size_t u = 0; u < bu_.size(); ++u) {
            const auto& row = index.by_user[u];
            if (row.empty()) continue;
            double s = 0.0;
            for (auto [i, r] : row) s += r - mu_ - bi_[static_cast<std::size_t>(i)];
            bu_[u] = s / (cfg_.reg_user + static_cast<double>(row.size()));
        }
        for (std::size_t i = 0; i < bi_.size(); ++i) {
            const auto& col = index.by_item[i];
            if (col.empty()) continue;
            double s = 0.0;
            for (auto [u, r] : col) s += r - mu_ - bu_[static_cast<std::size_t>(u)];
            bi_[i] = s / (cfg_.reg_item + static_cast<double>(col.size()));
        }
    }
    std::size_t n_ratings = 0;
    for (const auto& row : index.by_user) n_ratings += row.size();
    work::add(2 * n_ratings * static_cast<std::size_t>(cfg_.epochs));
}

void BiasBaseline::fit_impl(const Dataset& train) {
    require_nonempty(train, "bias_baseline");
    fit_index(RatingIndex::build(train));
}

// ------------------------------------------------------------------ SVD

void Svd::fit_impl(const Dataset& train) {
    require_nonempty(train, "svd");
    if (cfg_.factors < 1 || cfg_.epochs < 0) throw ConfigError("svd: invalid factor/epoch count");
    index_ = RatingIndex::build(train);
    const std::int32_t f = cfg_.factors;
    Rng init(cfg_.seed);
    p_.resize(static_cast<std::size_t>(index_.n_users) * static_cast<std::size_t>(f));
    q_.resize(static_cast<std::size_t>(index_.n_items) * static_cast<std::size_t>(f));
    for (auto& x : p_) x = draw_normal(init, cfg_.init_mean, cfg_.init_std);
    for (auto& x : q_) x = draw_normal(init, cfg_.init_mean, cfg_.init_std);
    bu_.assign(static_cast<std::size_t>(index_.n_users), 0.0);
    bi_.assign(static_cast<std::size_t>(index_.n_items), 0.0);

    auto rows = triples_of(train);
    Rng order_rng(cfg_.seed ^ kShuffleStream);
    const double mu = index_.global_mean;
    const double lr = cfg_.learning_rate;
    const double reg = cfg_.regularization;
    for (std::int32_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
        shuffle_in_place(rows, order_rng);
        for (const auto& [u, i, r] : rows) {
            double* pu = &p_[at(u, 0, f)];
            double* qi = &q_[at(i, 0, f)];
            double& bu = bu_[static_cast<std::size_t>(u)];
            double& bi = bi_[static_cast<std::size_t>(i)];
            const double err = r - (mu + bu + bi + dot(qi, pu, f));
            bu += lr * (err - reg * bu);
            bi += lr * (err - reg * bi);
            for (std::int32_t k = 0; k < f; ++k) {
                const double puf = pu[k];
                const double qif = qi[k];
                pu[k] += lr * (err * qif - reg * puf);
                qi[k] += lr * (err * puf - reg * qif);
            }
        }
        work::add(rows.size() * static_cast<std::size_t>(3 * f));
    }
    double sq = 0.0;
    for (const auto& [u, i, r] : rows) {
        const double e = r - estimate(u, i);
        sq += e * e;
    }
    train_loss_ = std::sqrt(sq / static_cast<double>(rows.size()));
}

double Svd::estimate(UserIndex u, ItemIndex i) const {
    const bool ku = index_.knows_user(u);
    const bool ki = index_.knows_item(i);
    double est = index_.global_mean;
    if (ku) est += bu_[static_cast<std::size_t>(u)];
    if (ki) est += bi_[static_cast<std::size_t>(i)];
    if (ku && ki) est += dot(&q_[at(i, 0, cfg_.factors)], &p_[at(u, 0, cfg_.factors)], cfg_.factors);
    return est;
}

// ---------------------------------------------------------------- SVD++

void SvdPlusPlus::fit_impl(const Dataset& train) {
    require_nonempty(train, "svdpp");
    const auto& fc = cfg_.factor;
    if (fc.factors < 1 || fc.epochs < 0) throw ConfigError("svdpp: invalid factor/epoch count");
    index_ = RatingIndex::build(train);
    const std::int32_t f = fc.factors;
    const auto uf = static_cast<std::size_t>(index_.n_users) * static_cast<std::size_t>(f);
    const auto itf = static_cast<std::size_t>(index_.n_items) * static_cast<std::size_t>(f);
    Rng init(fc.seed);
    p_.resize(uf);
    q_.resize(itf);
    for (auto& x : p_) x = draw_normal(init, fc.init_mean, fc.init_std);
    for (auto& x : q_) x = draw_normal(init, fc.init_mean, fc.init_std);
    y_.assign(itf, 0.0);
    if (cfg_.implicit_factors) {
        Rng init_y(fc.seed ^ 0xbb67ae8584caa73bULL);
        for (auto& x : y_) x = draw_normal(init_y, fc.init_mean, fc.init_std);
    }
    bu_.assign(static_cast<std::size_t>(index_.n_users), 0.0);
    bi_.assign(static_cast<std::size_t>(index_.n_items), 0.0);

    auto rows = triples_of(train);
    Rng order_rng(fc.seed ^ kShuffleStream);
    const double mu = index_.global_mean;
    const double lr = fc.learning_rate;
    const double reg = fc.regularization;
    std::vector<double> u_impl(static_cast<std::size_t>(f));
    std::vector<double> q_old(static_cast<std::size_t>(f));
    for (std::int32_t epoch = 0; epoch < fc.epochs; ++epoch) {
        shuffle_in_place(rows, order_rng);
        std::size_t implicit_work = 0;
        for (const auto& [u, i, r] : rows) {
            const auto& rated = index_.by_user[static_cast<std::size_t>(u)];
            const double norm = 1.0 / std::sqrt(static_cast<double>(rated.size()));
            std::fill(u_impl.begin(), u_impl.end(), 0.0);
            if (cfg_.implicit_factors) {
                for (auto [j, rj] : rated) {
                    const double* yj = &y_[at(j, 0, f)];
                    for (std::int32_t k = 0; k < f; ++k) u_impl[static_cast<std::size_t>(k)] += yj[k];
                }
                for (auto& x : u_impl) x *= norm;
                implicit_work += 2 * rated.size();
            }
            double* pu = &p_[at(u, 0, f)];
            double* qi = &q_[at(i, 0, f)];
            double& bu = bu_[static_cast<std::size_t>(u)];
            double& bi = bi_[static_cast<std::size_t>(i)];
            double est = mu + bu + bi;
            double d = 0.0;
            for (std::int32_t k = 0; k < f; ++k) d += qi[k] * (pu[k] + u_impl[static_cast<std::size_t>(k)]);
            est += d;
            const double err = r - est;
            bu += lr * (err - reg * bu);
            bi += lr * (err - reg * bi);
            for (std::int32_t k = 0; k < f; ++k) {
                const double puf = pu[k];
                const double qif = qi[k];
                q_old[static_cast<std::size_t>(k)] = qif;
                pu[k] += lr * (err * qif - reg * puf);
                qi[k] += lr * (err * (puf + u_impl[static_cast<std::size_t>(k)]) - reg * qif);
            }
            if (cfg_.implicit_factors) {
                for (auto [j, rj] : rated) {
                    double* yj = &y_[at(j, 0, f)];
                    for (std::int32_t k = 0; k < f; ++k)
                        yj[k] += lr * (err * q_old[static_cast<std::size_t>(k)] * norm - reg * yj[k]);
                }
            }
        }
        work::add((rows.size() * 3 + implicit_work) * static_cast<std::size_t>(f));
    }

    implicit_sum_.assign(uf, 0.0);
    if (cfg_.implicit_factors) {
        for (std::int32_t u = 0; u < index_.n_users; ++u) {
            const auto& rated = index_.by_user[static_cast<std::size_t>(u)];
            if (rated.empty()) continue;
            const double norm = 1.0 / std::sqrt(static_cast<double>(rated.size()));
            double* s = &implicit_sum_[at(u, 0, f)];
            for (auto [j, rj] : rated)
                for (std::int32_t k = 0; k < f; ++k) s[k] += y_[at(j, k, f)];
            for (std::int32_t k = 0; k < f; ++k) s[k] *= norm;
        }
    }
}

double SvdPlusPlus::estimate(UserIndex u, ItemIndex i) const {
    const bool ku = index_.knows_user(u);
    const bool ki = index_.knows_item(i);
    double est = index_.global_mean;
    if (ku) est += bu_[static_cast<std::size_t>(u)];
    if (ki) est += bi_[static_cast<std::size_t>(i)];
    if (ku && ki) {
        const std::int32_t f = cfg_.factor.factors;
        const double* qi = &q_[at(i, 0, f)];
        const double* pu = &p_[at(u, 0, f)];
        const double* s = &implicit_sum_[at(u, 0, f)];
        double d = 0.0;
        for (std::int32_t k = 0; k < f; ++k) d += qi[k] * (pu[k] + s[k]);
        est += d;
    }
    return est;
}

// ------------------------------------------------------------------ NMF

void Nmf::fit_impl(const Dataset& train) {
    require_nonempty(train, "nmf");
    for (const auto& it : train.interactions)
        if (it.rating < 0.0) throw DataError("nmf: negative ratings are not supported");
    if (cfg_.factors < 1 || cfg_.epochs < 0) throw ConfigError("nmf: invalid factor/epoch count");
    if (cfg_.init_low < 0.0) throw ConfigError("nmf: init_low must be non-negative");
    index_ = RatingIndex::build(train);
    const std::int32_t f = cfg_.factors;
    const auto uf = static_cast<std::size_t>(index_.n_users) * static_cast<std::size_t>(f);
    const auto itf = static_cast<std::size_t>(index_.n_items) * static_cast<std::size_t>(f);
    Rng init(cfg_.seed);
    p_.resize(uf);
    q_.resize(itf);
    const double span = cfg_.init_high - cfg_.init_low;
    for (auto& x : p_) x = cfg_.init_low + span * draw_unit(init);
    for (auto& x : q_) x = cfg_.init_low + span * draw_unit(init);

    std::vector<double> user_num(uf), user_denom(uf), item_num(itf), item_denom(itf);
    for (std::int32_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
        std::fill(user_num.begin(), user_num.end(), 0.0);
        std::fill(user_denom.begin(), user_denom.end(), 0.0);
        for (const auto& it : train.interactions) {
            const double* pu = &p_[at(it.user, 0, f)];
            const double* qi = &q_[at(it.item, 0, f)];
            const double est = dot(pu, qi, f);
            for (std::int32_t k = 0; k < f; ++k) {
                user_num[at(it.user, k, f)] += qi[k] * it.rating;
                user_denom[at(it.user, k, f)] += qi[k] * est;
            }
        }
        for (std::int32_t u = 0; u < index_.n_users; ++u) {
            const auto n = static_cast<double>(index_.by_user[static_cast<std::size_t>(u)].size());
            if (n == 0.0) continue;
            for (std::int32_t k = 0; k < f; ++k) {
                const auto c = at(u, k, f);
                const double denom = user_denom[c] + n * cfg_.reg_user * p_[c];
                if (denom > 0.0) p_[c] *= user_num[c] / denom;
            }
        }
        // items see the refreshed user factors
        std::fill(item_num.begin(), item_num.end(), 0.0);
        std::fill(item_denom.begin(), item_denom.end(), 0.0);
        for (const auto& it : train.interactions) {
            const double* pu = &p_[at(it.user, 0, f)];
            const double* qi = &q_[at(it.item, 0, f)];
            const double est = dot(pu, qi, f);
            for (std::int32_t k = 0; k < f; ++k) {
                item_num[at(it.item, k, f)] += pu[k] * it.rating;
                item_denom[at(it.item, k, f)] += pu[k] * est;
            }
        }
        for (std::int32_t i = 0; i < index_.n_items; ++i) {
            const auto n = static_cast<double>(index_.by_item[static_cast<std::size_t>(i)].size());
            if (n == 0.0) continue;
            for (std::int32_t k = 0; k < f; ++k) {
                const auto c = at(i, k, f);
                const double denom = item_denom[c] + n * cfg_.reg_item * q_[c];
                if (denom > 0.0) q_[c] *= item_num[c] / denom;
            }
        }
        work::add(train.size() * static_cast<std::size_t>(6 * f));
        if (hook_) hook_(epoch, p_, q_);
    }
}

double Nmf::estimate(UserIndex u, ItemIndex i) const {
    if (!index_.knows_user(u) || !index_.knows_item(i)) return index_.global_mean;
    return dot(&p_[at(u, 0, cfg_.factors)], &q_[at(i, 0, cfg_.factors)], cfg_.factors);
}

// --------------------------------------------------------- KNN baseline

std::size_t KnnBaseline::similarity_bytes(std::int64_t n_items) {
    return static_cast<std::size_t>(n_items) * static_cast<std::size_t>(n_items) * sizeof(double);
}

double KnnBaseline::similarity(ItemIndex a, ItemIndex b) const { return sim_.at(at(a, b, index_.n_items)); }

void KnnBaseline::fit_impl(const Dataset& train) {
    require_nonempty(train, "knn_baseline");
    if (cfg_.k < 1 || cfg_.min_k < 1) throw ConfigError("knn_baseline: k and min_k must be >= 1");
    const auto bytes = similarity_bytes(train.item_capacity());
    if (bytes > cfg_.memory_budget_bytes)
        throw CapacityError("knn_baseline: item-similarity matrix needs " + std::to_string(bytes) +
                                " bytes, budget is " + std::to_string(cfg_.memory_budget_bytes),
                            bytes, cfg_.memory_budget_bytes);
    index_ = RatingIndex::build(train);
    baseline_ = BiasBaseline(cfg_.baseline);
    baseline_.fit_index(index_);

    const std::int32_t n = index_.n_items;
    sim_.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
    std::vector<double> prod(static_cast<std::size_t>(n)), sq_a(static_cast<std::size_t>(n)),
        sq_b(static_cast<std::size_t>(n));
    std::vector<std::int32_t> freq(static_cast<std::size_t>(n), 0);
    std::vector<ItemIndex> touched;
    std::size_t pair_updates = 0;
    for (ItemIndex a = 0; a < n; ++a) {
        touched.clear();
        for (auto [u, r_ua] : index_.by_item[static_cast<std::size_t>(a)]) {
            const double da = r_ua - baseline_.baseline(u, a);
            const auto& row = index_.by_user[static_cast<std::size_t>(u)];
            pair_updates += row.size();
            for (auto [b, r_ub] : row) {
                const auto bb = static_cast<std::size_t>(b);
                if (freq[bb] == 0) touched.push_back(b);
                const double db = r_ub - baseline_.baseline(u, b);
                prod[bb] += da * db;
                sq_a[bb] += da * da;
                sq_b[bb] += db * db;
                ++freq[bb];
            }
        }
        for (auto b : touched) {
            const auto bb = static_cast<std::size_t>(b);
            const double denom = std::sqrt(sq_a[bb] * sq_b[bb]);
            double s = denom > 0.0 ? prod[bb] / denom : 0.0;
            if (cfg_.shrinkage > 0.0) s *= (freq[bb] - 1) / (freq[bb] - 1 + cfg_.shrinkage);
            sim_[at(a, b, n)] = s;
            prod[bb] = sq_a[bb] = sq_b[bb] = 0.0;
            freq[bb] = 0;
        }
        sim_[at(a, a, n)] = 1.0;
    }
    work::add(4 * pair_updates);
}

double KnnBaseline::estimate(UserIndex u, ItemIndex i) const {
    const double bui = baseline_.baseline(u, i);
    if (!index_.knows_user(u) || !index_.knows_item(i)) return bui;
    const auto& rated = index_.by_user[static_cast<std::size_t>(u)];
    struct Neighbor {
        double sim;
        ItemIndex item;
        double rating;
    };
    std::vector<Neighbor> nbrs;
    nbrs.reserve(rated.size());
    for (auto [j, r] : rated) nbrs.push_back({sim_[at(i, j, index_.n_items)], j, r});
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg_.k), nbrs.size());
    std::partial_sort(nbrs.begin(), nbrs.begin() + static_cast<std::ptrdiff_t>(k), nbrs.end(),
                      [](const Neighbor& a, const Neighbor& b) {
                          return a.sim != b.sim ? a.sim > b.sim : a.item < b.item;
                      });
    double sum_sim = 0.0;
    double sum_dev = 0.0;
    std::int32_t used = 0;
    for (std::size_t n = 0; n < k; ++n) {
        const auto& nb = nbrs[n];
        if (nb.sim <= 0.0) continue;
        sum_sim += nb.sim;
        sum_dev += nb.sim * (nb.rating - baseline_.baseline(u, nb.item));
        ++used;
    }
    work::add(2 * rated.size());
    if (used < cfg_.min_k) return bui;
    return bui + sum_dev / sum_sim;
}

// ------------------------------------------------------------- Slope One

double SlopeOne::deviation(ItemIndex i, ItemIndex j) const { return dev_.at(at(i, j, index_.n_items)); }

void SlopeOne::fit_impl(const Dataset& train) {
    require_nonempty(train, "slope_one");
    const auto n64 = static_cast<std::size_t>(train.item_capacity());
    const auto bytes = n64 * n64 * (sizeof(double) + sizeof(std::int32_t));
    if (bytes > cfg_.memory_budget_bytes)
        throw CapacityError("slope_one: deviation matrix needs " + std::to_string(bytes) + " bytes, budget is " +
                                std::to_string(cfg_.memory_budget_bytes),
                            bytes, cfg_.memory_budget_bytes);
    index_ = RatingIndex::build(train);
    const std::int32_t n = index_.n_items;
    dev_.assign(n64 * n64, 0.0);
    freq_.assign(n64 * n64, 0);
    std::size_t pair_updates = 0;
    for (const auto& row : index_.by_user) {
        pair_updates += row.size() * row.size();
        for (auto [i, ri] : row)
            for (auto [j, rj] : row) {
                const auto c = at(i, j, n);
                dev_[c] += ri - rj;
                ++freq_[c];
            }
    }
    for (std::size_t c = 0; c < dev_.size(); ++c)
        if (freq_[c] > 0) dev_[c] /= freq_[c];
    user_mean_.assign(static_cast<std::size_t>(index_.n_users), index_.global_mean);
    for (std::size_t u = 0; u < user_mean_.size(); ++u) {
        const auto& row = index_.by_user[u];
        if (row.empty()) continue;
        double s = 0.0;
        for (auto [i, r] : row) s += r;
        user_mean_[u] = s / static_cast<double>(row.size());
    }
    work::add(2 * pair_updates);
}

double SlopeOne::estimate(UserIndex u, ItemIndex i) const {
    if (!index_.knows_user(u)) return index_.global_mean;
    const auto& rated = index_.by_user[static_cast<std::size_t>(u)];
    if (i < 0 || i >= index_.n_items) return user_mean_[static_cast<std::size_t>(u)];
    double sum = 0.0;
    std::size_t count = 0;
    for (auto [j, r] : rated) {
        const auto c = at(i, j, index_.n_items);
        if (freq_[c] == 0) continue;
        sum += r + dev_[c];
        ++count;
    }
    work::add(rated.size());
    if (count == 0) return user_mean_[static_cast<std::size_t>(u)];
    return sum / static_cast<double>(count);
}

// ---------------------------------------------------------- Co-clustering

void CoClustering::compute_averages() {
    const auto nu = static_cast<std::size_t>(cfg_.user_clusters);
    const auto ni = static_cast<std::size_t>(cfg_.item_clusters);
    std::vector<double> su(nu, 0.0), si(ni, 0.0), sc(nu * ni, 0.0);
    std::vector<std::size_t> cnt_u(nu, 0), cnt_i(ni, 0), cnt_c(nu * ni, 0);
    for (std::int32_t u = 0; u < index_.n_users; ++u) {
        const auto cu = static_cast<std::size_t>(cu_[static_cast<std::size_t>(u)]);
        for (auto [i, r] : index_.by_user[static_cast<std::size_t>(u)]) {
            const auto ci = static_cast<std::size_t>(ci_[static_cast<std::size_t>(i)]);
            su[cu] += r;
            ++cnt_u[cu];
            si[ci] += r;
            ++cnt_i[ci];
            sc[cu * ni + ci] += r;
            ++cnt_c[cu * ni + ci];
        }
    }
    const double mu = index_.global_mean;
    avg_user_cluster_.resize(nu);
    avg_item_cluster_.resize(ni);
    avg_cocluster_.resize(nu * ni);
    for (std::size_t c = 0; c < nu; ++c) avg_user_cluster_[c] = cnt_u[c] ? su[c] / static_cast<double>(cnt_u[c]) : mu;
    for (std::size_t c = 0; c < ni; ++c) avg_item_cluster_[c] = cnt_i[c] ? si[c] / static_cast<double>(cnt_i[c]) : mu;
    for (std::size_t c = 0; c < nu * ni; ++c)
        avg_cocluster_[c] = cnt_c[c] ? sc[c] / static_cast<double>(cnt_c[c]) : mu;
}

void CoClustering::fit_impl(const Dataset& train) {
    require_nonempty(train, "co_clustering");
    if (cfg_.user_clusters < 1 || cfg_.item_clusters < 1) throw ConfigError("co_clustering: cluster counts must be >= 1");
    if (cfg_.user_clusters > train.n_users() || cfg_.item_clusters > train.n_items())
        throw ConfigError("co_clustering: cluster counts exceed the number of distinct users/items");
    index_ = RatingIndex::build(train);
    Rng rng(cfg_.seed);
    cu_.resize(static_cast<std::size_t>(index_.n_users));
    ci_.resize(static_cast<std::size_t>(index_.n_items));
    for (auto& c : cu_) c = static_cast<std::int32_t>(rng() % static_cast<std::uint64_t>(cfg_.user_clusters));
    for (auto& c : ci_) c = static_cast<std::int32_t>(rng() % static_cast<std::uint64_t>(cfg_.item_clusters));

    user_mean_.assign(static_cast<std::size_t>(index_.n_users), index_.global_mean);
    item_mean_.assign(static_cast<std::size_t>(index_.n_items), index_.global_mean);
    for (std::size_t u = 0; u < user_mean_.size(); ++u) {
        const auto& row = index_.by_user[u];
        if (row.empty()) continue;
        double s = 0.0;
        for (auto [i, r] : row) s += r;
        user_mean_[u] = s / static_cast<double>(row.size());
    }
    for (std::size_t i = 0; i < item_mean_.size(); ++i) {
        const auto& col = index_.by_item[i];
        if (col.empty()) continue;
        double s = 0.0;
        for (auto [u, r] : col) s += r;
        item_mean_[i] = s / static_cast<double>(col.size());
    }

    const auto ni = static_cast<std::size_t>(cfg_.item_clusters);
    for (std::int32_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
        compute_averages();
        for (std::int32_t u = 0; u < index_.n_users; ++u) {
            const auto& row = index_.by_user[static_cast<std::size_t>(u)];
            if (row.empty()) continue;
            double best = std::numeric_limits<double>::infinity();
            std::int32_t best_c = cu_[static_cast<std::size_t>(u)];
            for (std::int32_t c = 0; c < cfg_.user_clusters; ++c) {
                double err = 0.0;
                for (auto [i, r] : row) {
                    const auto ic = static_cast<std::size_t>(ci_[static_cast<std::size_t>(i)]);
                    const double est = avg_cocluster_[static_cast<std::size_t>(c) * ni + ic] +
                                       user_mean_[static_cast<std::size_t>(u)] -
                                       avg_user_cluster_[static_cast<std::size_t>(c)] +
                                       item_mean_[static_cast<std::size_t>(i)] - avg_item_cluster_[ic];
                    err += (r - est) * (r - est);
                }
                if (err < best) {
                    best = err;
                    best_c = c;
                }
            }
            cu_[static_cast<std::size_t>(u)] = best_c;
        }
        for (std::int32_t i = 0; i < index_.n_items; ++i) {
            const auto& col = index_.by_item[static_cast<std::size_t>(i)];
            if (col.empty()) continue;
            double best = std::numeric_limits<double>::infinity();
            std::int32_t best_c = ci_[static_cast<std::size_t>(i)];
            for (std::int32_t c = 0; c < cfg_.item_clusters; ++c) {
                double err = 0.0;
                for (auto [u, r] : col) {
                    const auto uc = static_cast<std::size_t>(cu_[static_cast<std::size_t>(u)]);
                    const double est = avg_cocluster_[uc * ni + static_cast<std::size_t>(c)] +
                                       user_mean_[static_cast<std::size_t>(u)] - avg_user_cluster_[uc] +
                                       item_mean_[static_cast<std::size_t>(i)] -
                                       avg_item_cluster_[static_cast<std::size_t>(c)];
                    err += (r - est) * (r - est);
                }
                if (err < best) {
                    best = err;
                    best_c = c;
                }
            }
            ci_[static_cast<std::size_t>(i)] = best_c;
        }
        work::add(train.size() * static_cast<std::size_t>(cfg_.user_clusters + cfg_.item_clusters) * 4);
    }
    compute_averages();
}

double CoClustering::estimate(UserIndex u, ItemIndex i) const {
    const bool ku = index_.knows_user(u);
    const bool ki = index_.knows_item(i);
    if (ku && ki) {
        const auto uc = static_cast<std::size_t>(cu_[static_cast<std::size_t>(u)]);
        const auto ic = static_cast<std::size_t>(ci_[static_cast<std::size_t>(i)]);
        return avg_cocluster_[uc * static_cast<std::size_t>(cfg_.item_clusters) + ic] +
               user_mean_[static_cast<std::size_t>(u)] - avg_user_cluster_[uc] +
               item_mean_[static_cast<std::size_t>(i)] - avg_item_cluster_[ic];
    }
    if (ku) return user_mean_[static_cast<std::size_t>(u)];
    if (ki) return item_mean_[static_cast<std::size_t>(i)];
    return index_.global_mean;
}

}  // namespace recbench
