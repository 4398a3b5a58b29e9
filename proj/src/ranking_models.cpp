#include "recbench/ranking_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "recbench/error.hpp"
#include "recbench/random.hpp"
#include "recbench/work.hpp"

namespace recbench {

namespace {

constexpr std::uint64_t kSampleStream = 0xbb67ae8584caa73bULL;

inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline double log_sigmoid(double x) {
    // ln(1 / (1 + e^-x)), stable for large |x|
    if (x >= 0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

inline double dot(const double* a, const double* b, std::int32_t n) {
    double s = 0.0;
    for (std::int32_t k = 0; k < n; ++k) s += a[k] * b[k];
    return s;
}

inline std::size_t row(std::int32_t r, std::int32_t width) {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(width);
}

void require_nonempty(const ImplicitDataset& train, const std::string& model) {
    if (train.empty()) throw DataError(model + ": empty training set");
}

void init_normal(std::vector<double>& v, std::size_t n, double stddev, Rng& rng) {
    v.resize(n);
    for (auto& x : v) x = draw_normal(rng, 0.0, stddev);
}

void check_budget(const std::string& model, const char* what, std::int64_t n, std::size_t budget) {
    const auto bytes = dense_similarity_bytes(n);
    if (bytes > budget)
        throw CapacityError(model + ": " + what + " similarity matrix needs " + std::to_string(bytes) +
                                " bytes, budget is " + std::to_string(budget),
                            bytes, budget);
}

// Cosine over binary vectors: co-occurrence / sqrt(|a| |b|), zero diagonal.
std::vector<double> binary_cosine(const std::vector<std::vector<std::int32_t>>& rows_of,
                                  const std::vector<std::vector<std::int32_t>>& members_of) {
    const std::size_t n = rows_of.size();
    std::vector<double> sim(n * n, 0.0);
    std::uint64_t ops = 0;
    for (const auto& members : members_of) {
        for (auto a : members) {
            double* r = sim.data() + static_cast<std::size_t>(a) * n;
            for (auto b : members) r[b] += 1.0;
        }
        ops += members.size() * members.size();
    }
    for (std::size_t a = 0; a < n; ++a) {
        const double na = static_cast<double>(rows_of[a].size());
        for (std::size_t b = 0; b < n; ++b) {
            double& s = sim[a * n + b];
            if (a == b || s == 0.0) {
                s = 0.0;
                continue;
            }
            s /= std::sqrt(na * static_cast<double>(rows_of[b].size()));
        }
    }
    work::add(ops + n * n);
    return sim;
}

// Sum of the k largest positive entries of buf (buf is reordered).
double top_k_sum(std::vector<double>& buf, std::int32_t k) {
    auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), buf.size());
    if (kk < buf.size()) std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(kk), buf.end(), std::greater<>());
    double s = 0.0;
    for (std::size_t j = 0; j < kk; ++j)
        if (buf[j] > 0.0) s += buf[j];
    return s;
}

}  // namespace

// ------------------------------------------------------------------ index

InteractionIndex InteractionIndex::build(const ImplicitDataset& train) {
    InteractionIndex idx;
    idx.n_users = train.user_capacity();
    idx.n_items = train.item_capacity();
    idx.by_user.resize(static_cast<std::size_t>(idx.n_users));
    idx.by_item.resize(static_cast<std::size_t>(idx.n_items));
    for (const auto& p : train.positives) {
        idx.by_user[static_cast<std::size_t>(p.user)].push_back(p.item);
        idx.by_item[static_cast<std::size_t>(p.item)].push_back(p.user);
    }
    for (auto& v : idx.by_user) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    for (auto& v : idx.by_item) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    for (ItemIndex i = 0; i < idx.n_items; ++i)
        if (!idx.by_item[static_cast<std::size_t>(i)].empty()) idx.known_items.push_back(i);
    return idx;
}

bool InteractionIndex::interacted(UserIndex u, ItemIndex i) const {
    if (u < 0 || u >= n_users) return false;
    const auto& v = by_user[static_cast<std::size_t>(u)];
    return std::binary_search(v.begin(), v.end(), i);
}

std::size_t InteractionIndex::n_interactions() const {
    std::size_t n = 0;
    for (const auto& v : by_user) n += v.size();
    return n;
}

// ----------------------------------------------------------------- scorer

void RankingScorer::fit(const ImplicitDataset& train) {
    require_nonempty(train, name());
    index_ = InteractionIndex::build(train);
    fit_impl(train);
    fitted_ = true;
}

void RankingScorer::require_fitted() const {
    if (!fitted_) throw ConfigError(name() + ": scoring called before fit");
}

double RankingScorer::score(UserIndex u, ItemIndex i) const {
    return score_candidates(u, std::span<const ItemIndex>(&i, 1)).front();
}

std::vector<ItemIndex> RankingScorer::candidates_for(UserIndex u) const {
    require_fitted();
    std::vector<ItemIndex> out;
    out.reserve(index_.known_items.size());
    for (auto i : index_.known_items)
        if (!index_.interacted(u, i)) out.push_back(i);
    return out;
}

std::vector<ScoredItem> rank_candidates(std::span<const ItemIndex> candidates, std::span<const double> scores,
                                        std::size_t n) {
    if (candidates.size() != scores.size()) throw ConfigError("rank_candidates: size mismatch");
    std::vector<ScoredItem> all(candidates.size());
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        double s = scores[j];
        if (std::isnan(s)) s = -std::numeric_limits<double>::infinity();
        all[j] = {candidates[j], s};
    }
    auto better = [](const ScoredItem& a, const ScoredItem& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.item < b.item;
    };
    n = std::min(n, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), better);
    all.resize(n);
    return all;
}

std::vector<ScoredItem> RankingScorer::recommend(UserIndex u, std::size_t n,
                                                 std::optional<std::span<const ItemIndex>> candidates) const {
    require_fitted();
    std::vector<ItemIndex> pool;
    if (candidates) {
        for (auto i : *candidates)
            if (!index_.interacted(u, i)) pool.push_back(i);
    } else {
        pool = candidates_for(u);
    }
    auto scores = score_candidates(u, pool);
    return rank_candidates(pool, scores, n);
}

std::size_t dense_similarity_bytes(std::int64_t n) {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(n) * sizeof(double);
}

// ------------------------------------------------------------- baselines

std::vector<double> RandomScorer::score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const {
    require_fitted();
    std::vector<double> out(candidates.size());
    for (std::size_t j = 0; j < candidates.size(); ++j)
        out[j] = hash_unit(seed_, static_cast<std::uint64_t>(u), static_cast<std::uint64_t>(candidates[j]));
    return out;
}

std::vector<double> PopularScorer::score_candidates(UserIndex, std::span<const ItemIndex> candidates) const {
    require_fitted();
    std::vector<double> out(candidates.size(), 0.0);
    for (std::size_t j = 0; j < candidates.size(); ++j)
        if (index().knows_item(candidates[j]))
            out[j] = static_cast<double>(index().by_item[static_cast<std::size_t>(candidates[j])].size());
    return out;
}

std::vector<double> UserMeanScorer::score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const {
    require_fitted();
    const double base = index().knows_user(u) ? static_cast<double>(index().by_user[static_cast<std::size_t>(u)].size()) : 0.0;
    std::vector<double> out(candidates.size());
    for (std::size_t j = 0; j < candidates.size(); ++j)
        out[j] = base + 1e-6 * hash_unit(seed_, static_cast<std::uint64_t>(u), static_cast<std::uint64_t>(candidates[j]));
    return out;
}

// -------------------------------------------------------------------- ALS

std::vector<double> AlsImplicit::solve_row(std::span<const double> fixed, std::span<const double> gram,
                                           std::span<const std::int32_t> positives, std::int32_t f, double alpha,
                                           double reg) {
    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> g(gram.data(), f, f);
    Mat a = g;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(f);
    const double c = 1.0 + alpha;
    for (auto j : positives) {
        Eigen::Map<const Eigen::VectorXd> y(fixed.data() + row(j, f), f);
        a.noalias() += alpha * y * y.transpose();
        b += c * y;
    }
    a.diagonal().array() += reg;
    Eigen::VectorXd x = a.ldlt().solve(b);
    work::add(static_cast<std::uint64_t>(positives.size()) * f * f + static_cast<std::uint64_t>(f) * f * f / 3);
    return {x.data(), x.data() + f};
}

namespace {

std::vector<double> gram_of(const std::vector<double>& m, std::int32_t rows, std::int32_t f) {
    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> x(m.data(), rows, f);
    Mat g = x.transpose() * x;
    work::add(static_cast<std::uint64_t>(rows) * f * f);
    return {g.data(), g.data() + static_cast<std::size_t>(f) * f};
}

}  // namespace

void AlsImplicit::fit_impl(const ImplicitDataset& train) {
    const auto& idx = index();
    const std::int32_t f = cfg_.factors;
    if (f < 1 || cfg_.sweeps < 0 || cfg_.alpha < 0 || cfg_.regularization < 0)
        throw ConfigError("als: invalid hyperparameters");
    (void)train;
    Rng rng(cfg_.seed);
    init_normal(x_, row(idx.n_users, f), cfg_.init_std, rng);
    init_normal(y_, row(idx.n_items, f), cfg_.init_std, rng);
    for (std::int32_t s = 0; s < cfg_.sweeps; ++s) {
        auto gy = gram_of(y_, idx.n_items, f);
        for (UserIndex u = 0; u < idx.n_users; ++u) {
            auto x = solve_row(y_, gy, idx.by_user[static_cast<std::size_t>(u)], f, cfg_.alpha, cfg_.regularization);
            std::copy(x.begin(), x.end(), x_.begin() + static_cast<std::ptrdiff_t>(row(u, f)));
        }
        auto gx = gram_of(x_, idx.n_users, f);
        for (ItemIndex i = 0; i < idx.n_items; ++i) {
            auto y = solve_row(x_, gx, idx.by_item[static_cast<std::size_t>(i)], f, cfg_.alpha, cfg_.regularization);
            std::copy(y.begin(), y.end(), y_.begin() + static_cast<std::ptrdiff_t>(row(i, f)));
        }
        if (hook_) hook_(s, loss());
    }
}

double AlsImplicit::loss() const {
    const auto& idx = index();
    const std::int32_t f = cfg_.factors;
    auto gx = gram_of(x_, idx.n_users, f);
    auto gy = gram_of(y_, idx.n_items, f);
    // sum over all pairs of (x.y)^2 = trace(GX GY)
    double all = 0.0;
    for (std::int32_t a = 0; a < f; ++a)
        for (std::int32_t b = 0; b < f; ++b) all += gx[row(a, f) + b] * gy[row(b, f) + a];
    const double c = 1.0 + cfg_.alpha;
    double pos = 0.0;
    for (UserIndex u = 0; u < idx.n_users; ++u)
        for (auto i : idx.by_user[static_cast<std::size_t>(u)]) {
            double s = dot(&x_[row(u, f)], &y_[row(i, f)], f);
            pos += c * (1.0 - s) * (1.0 - s) - s * s;
        }
    double norm = 0.0;
    for (double v : x_) norm += v * v;
    for (double v : y_) norm += v * v;
    return all + pos + cfg_.regularization * norm;
}

std::vector<double> AlsImplicit::score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const {
    require_fitted();
    const std::int32_t f = cfg_.factors;
    std::vector<double> out(candidates.size(), 0.0);
    if (!index().knows_user(u)) return out;
    for (std::size_t j = 0; j < candidates.size(); ++j)
        if (index().knows_item(candidates[j])) out[j] = dot(&x_[row(u, f)], &y_[row(candidates[j], f)], f);
    work::add(candidates.size() * static_cast<std::size_t>(f));
    return out;
}

// -------------------------------------------------------------------- BPR

namespace {

double sq(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

double sub_dot(const std::vector<double>& u, const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * (a[k] - b[k]);
    return s;
}

// Draws a known item the user has not interacted with; -1 when none exists.
ItemIndex sample_negative(const InteractionIndex& idx, UserIndex u, Rng& rng) {
    const auto& mine = idx.by_user[static_cast<std::size_t>(u)];
    if (mine.size() >= idx.known_items.size()) return -1;
    for (;;) {
        auto j = idx.known_items[static_cast<std::size_t>(rng() % idx.known_items.size())];
        if (!std::binary_search(mine.begin(), mine.end(), j)) return j;
    }
}

}  // namespace

double Bpr::objective(const PairwiseParams& t, double reg) {
    double x = sub_dot(t.user, t.item_a, t.item_b) + t.bias_a - t.bias_b;
    double pen = sq(t.user) + sq(t.item_a) + sq(t.item_b) + t.bias_a * t.bias_a + t.bias_b * t.bias_b;
    return log_sigmoid(x) - 0.5 * reg * pen;
}

PairwiseParams Bpr::gradient(const PairwiseParams& t, double reg) {
    const double x = sub_dot(t.user, t.item_a, t.item_b) + t.bias_a - t.bias_b;
    const double g = sigmoid(-x);
    PairwiseParams d;
    const std::size_t f = t.user.size();
    d.user.resize(f);
    d.item_a.resize(f);
    d.item_b.resize(f);
    for (std::size_t k = 0; k < f; ++k) {
        d.user[k] = g * (t.item_a[k] - t.item_b[k]) - reg * t.user[k];
        d.item_a[k] = g * t.user[k] - reg * t.item_a[k];
        d.item_b[k] = -g * t.user[k] - reg * t.item_b[k];
    }
    d.bias_a = g - reg * t.bias_a;
    d.bias_b = -g - reg * t.bias_b;
    return d;
}

void Bpr::fit_impl(const ImplicitDataset& train) {
    const auto& idx = index();
    const std::int32_t f = cfg_.factors;
    if (f < 1 || cfg_.epochs < 0 || cfg_.learning_rate <= 0 || cfg_.regularization < 0)
        throw ConfigError("bpr: invalid hyperparameters");
    Rng rng(cfg_.seed);
    init_normal(p_, row(idx.n_users, f), cfg_.init_std, rng);
    init_normal(q_, row(idx.n_items, f), cfg_.init_std, rng);
    bi_.assign(static_cast<std::size_t>(idx.n_items), 0.0);

    Rng sampler(cfg_.seed ^ kSampleStream);
    const auto& pos = train.positives;
    const double lr = cfg_.learning_rate;
    PairwiseParams t;
    t.user.resize(static_cast<std::size_t>(f));
    t.item_a.resize(static_cast<std::size_t>(f));
    t.item_b.resize(static_cast<std::size_t>(f));
    for (std::int32_t e = 0; e < cfg_.epochs; ++e) {
        for (std::size_t step = 0; step < pos.size(); ++step) {
            const auto& ui = pos[static_cast<std::size_t>(sampler() % pos.size())];
            ItemIndex j = sample_negative(idx, ui.user, sampler);
            if (j < 0) continue;
            double* pu = &p_[row(ui.user, f)];
            double* qi = &q_[row(ui.item, f)];
            double* qj = &q_[row(j, f)];
            std::copy(pu, pu + f, t.user.begin());
            std::copy(qi, qi + f, t.item_a.begin());
            std::copy(qj, qj + f, t.item_b.begin());
            t.bias_a = bi_[static_cast<std::size_t>(ui.item)];
            t.bias_b = bi_[static_cast<std::size_t>(j)];
            auto d = gradient(t, cfg_.regularization);
            for (std::int32_t k = 0; k < f; ++k) {
                pu[k] += lr * d.user[static_cast<std::size_t>(k)];
                qi[k] += lr * d.item_a[static_cast<std::size_t>(k)];
                qj[k] += lr * d.item_b[static_cast<std::size_t>(k)];
            }
            bi_[static_cast<std::size_t>(ui.item)] += lr * d.bias_a;
            bi_[static_cast<std::size_t>(j)] += lr * d.bias_b;
        }
        work::add(pos.size() * static_cast<std::size_t>(f) * 6);
    }
}

std::vector<double> Bpr::score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const {
    require_fitted();
    const std::int32_t f = cfg_.factors;
    std::vector<double> out(candidates.size(), 0.0);
    const bool known_user = index().knows_user(u);
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        auto i = candidates[j];
        if (!index().knows_item(i)) continue;
        out[j] = bi_[static_cast<std::size_t>(i)];
        if (known_user) out[j] += dot(&p_[row(u, f)], &q_[row(i, f)], f);
    }
    work::add(candidates.size() * static_cast<std::size_t>(f));
    return out;
}

// ------------------------------------------------------------ logistic MF

double LogisticMf::objective(const PairwiseParams& t, double label, double reg) {
    double x = dot(t.user.data(), t.item_a.data(), static_cast<std::int32_t>(t.user.size())) + t.bias_user + t.bias_a;
    double pen = sq(t.user) + sq(t.item_a) + t.bias_user * t.bias_user + t.bias_a * t.bias_a;
    return label * log_sigmoid(x) + (1.0 - label) * log_sigmoid(-x) - 0.5 * reg * pen;
}

PairwiseParams LogisticMf::gradient(const PairwiseParams& t, double label, double reg) {
    const std::size_t f = t.user.size();
    const double x = dot(t.user.data(), t.item_a.data(), static_cast<std::int32_t>(f)) + t.bias_user + t.bias_a;
    const double e = label - sigmoid(x);
    PairwiseParams d;
    d.user.resize(f);
    d.item_a.resize(f);
    for (std::size_t k = 0; k < f; ++k) {
        d.user[k] = e * t.item_a[k] - reg * t.user[k];
        d.item_a[k] = e * t.user[k] - reg * t.item_a[k];
    }
    d.bias_user = e - reg * t.bias_user;
    d.bias_a = e - reg * t.bias_a;
    return d;
}

void LogisticMf::fit_impl(const ImplicitDataset& train) {
    const auto& idx = index();
    const std::int32_t f = cfg_.factors;
    if (f < 1 || cfg_.epochs < 0 || cfg_.learning_rate <= 0 || cfg_.regularization < 0 ||
        cfg_.negatives_per_positive < 0)
        throw ConfigError("logistic_mf: invalid hyperparameters");
    Rng rng(cfg_.seed);
    init_normal(p_, row(idx.n_users, f), cfg_.init_std, rng);
    init_normal(q_, row(idx.n_items, f), cfg_.init_std, rng);
    bu_.assign(static_cast<std::size_t>(idx.n_users), 0.0);
    bi_.assign(static_cast<std::size_t>(idx.n_items), 0.0);

    Rng sampler(cfg_.seed ^ kSampleStream);
    std::vector<UserItem> order = train.positives;
    const double lr = cfg_.learning_rate;
    PairwiseParams t;
    t.user.resize(static_cast<std::size_t>(f));
    t.item_a.resize(static_cast<std::size_t>(f));
    auto step = [&](UserIndex u, ItemIndex i, double label) {
        double* pu = &p_[row(u, f)];
        double* qi = &q_[row(i, f)];
        std::copy(pu, pu + f, t.user.begin());
        std::copy(qi, qi + f, t.item_a.begin());
        t.bias_user = bu_[static_cast<std::size_t>(u)];
        t.bias_a = bi_[static_cast<std::size_t>(i)];
        auto d = gradient(t, label, cfg_.regularization);
        for (std::int32_t k = 0; k < f; ++k) {
            pu[k] += lr * d.user[static_cast<std::size_t>(k)];
            qi[k] += lr * d.item_a[static_cast<std::size_t>(k)];
        }
        bu_[static_cast<std::size_t>(u)] += lr * d.bias_user;
        bi_[static_cast<std::size_t>(i)] += lr * d.bias_a;
    };
    for (std::int32_t e = 0; e < cfg_.epochs; ++e) {
        shuffle_in_place(order, sampler);
        for (const auto& ui : order) {
            step(ui.user, ui.item, 1.0);
            for (std::int32_t n = 0; n < cfg_.negatives_per_positive; ++n) {
                ItemIndex j = sample_negative(idx, ui.user, sampler);
                if (j >= 0) step(ui.user, j, 0.0);
            }
        }
        work::add(order.size() * static_cast<std::size_t>(1 + cfg_.negatives_per_positive) * f * 4);
    }
}

double LogisticMf::logit(UserIndex u, ItemIndex i) const {
    const std::int32_t f = cfg_.factors;
    if (!index().knows_item(i)) return 0.0;
    double x = bi_[static_cast<std::size_t>(i)];
    if (index().knows_user(u)) x += bu_[static_cast<std::size_t>(u)] + dot(&p_[row(u, f)], &q_[row(i, f)], f);
    return x;
}

double LogisticMf::probability(UserIndex u, ItemIndex i) const {
    require_fitted();
    return sigmoid(logit(u, i));
}

std::vector<double> LogisticMf::score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const {
    require_fitted();
    std::vector<double> out(candidates.size());
    for (std::size_t j = 0; j < candidates.size(); ++j) out[j] = logit(u, candidates[j]);
    work::add(candidates.size() * static_cast<std::size_t>(cfg_.factors));
    return out;
}

// -------------------------------------------------------------------- kNN

void ItemKnn::fit_impl(const ImplicitDataset&) {
    if (cfg_.k < 1) throw ConfigError("item_knn: k must be >= 1");
    const auto& idx = index();
    check_budget(name(), "item", idx.n_items, cfg_.memory_budget_bytes);
    sim_ = binary_cosine(idx.by_item, idx.by_user);
}

double ItemKnn::similarity(ItemIndex a, ItemIndex b) const {
    require_fitted();
    const auto n = static_cast<std::size_t>(index().n_items);
    return sim_.at(static_cast<std::size_t>(a) * n + static_cast<std::size_t>(b));
}

std::vector<double> ItemKnn::score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const {
    require_fitted();
    std::vector<double> out(candidates.size(), 0.0);
    if (!index().knows_user(u)) return out;
    const auto& mine = index().by_user[static_cast<std::size_t>(u)];
    const auto n = static_cast<std::size_t>(index().n_items);
    std::vector<double> buf(mine.size());
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        auto i = candidates[j];
        if (!index().knows_item(i)) continue;
        const double* r = sim_.data() + static_cast<std::size_t>(i) * n;
        for (std::size_t m = 0; m < mine.size(); ++m) buf[m] = r[mine[m]];
        out[j] = top_k_sum(buf, cfg_.k);
    }
    work::add(candidates.size() * mine.size());
    return out;
}

void UserKnn::fit_impl(const ImplicitDataset&) {
    if (cfg_.k < 1) throw ConfigError("user_knn: k must be >= 1");
    const auto& idx = index();
    check_budget(name(), "user", idx.n_users, cfg_.memory_budget_bytes);
    sim_ = binary_cosine(idx.by_user, idx.by_item);
}

double UserKnn::similarity(UserIndex a, UserIndex b) const {
    require_fitted();
    const auto n = static_cast<std::size_t>(index().n_users);
    return sim_.at(static_cast<std::size_t>(a) * n + static_cast<std::size_t>(b));
}

std::vector<double> UserKnn::score_candidates(UserIndex u, std::span<const ItemIndex> candidates) const {
    require_fitted();
    std::vector<double> out(candidates.size(), 0.0);
    if (!index().knows_user(u)) return out;
    const double* r = sim_.data() + static_cast<std::size_t>(u) * static_cast<std::size_t>(index().n_users);
    std::vector<double> buf;
    std::uint64_t ops = 0;
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        auto i = candidates[j];
        if (!index().knows_item(i)) continue;
        const auto& theirs = index().by_item[static_cast<std::size_t>(i)];
        buf.resize(theirs.size());
        for (std::size_t m = 0; m < theirs.size(); ++m) buf[m] = theirs[m] == u ? 0.0 : r[theirs[m]];
        out[j] = top_k_sum(buf, cfg_.k);
        ops += theirs.size();
    }
    work::add(ops);
    return out;
}

}  // namespace recbench
