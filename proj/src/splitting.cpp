#include "recbench/splitting.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "recbench/error.hpp"
#include "recbench/random.hpp"

namespace recbench {

std::string to_string(SplitStrategy s) { return s == SplitStrategy::global ? "global" : "per-user"; }

SplitStrategy parse_split_strategy(const std::string& s) {
    if (s == "global") return SplitStrategy::global;
    if (s == "per-user" || s == "per_user") return SplitStrategy::per_user;
    throw ConfigError("unknown split strategy '" + s + "'");
}

void SplitConfig::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0,1)");
    if (min_interactions_per_user < 1 || min_test_items_per_user < 1)
        throw ConfigError("per-user minimums must be >= 1");
}

std::int32_t per_user_test_count(std::int32_t n, double test_fraction, std::int32_t min_test) {
    auto count = static_cast<std::int32_t>(std::floor(test_fraction * n + 0.5));
    count = std::max(count, min_test);
    return std::clamp(count, 0, std::max(n - 1, 0));
}

namespace {

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) { EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr); }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::string_view s) { EVP_DigestUpdate(ctx_, s.data(), s.size()); }
    std::string hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_, md, &len);
        static constexpr char digits[] = "0123456789abcdef";
        std::string out;
        for (unsigned int i = 0; i < len; ++i) {
            out.push_back(digits[md[i] >> 4]);
            out.push_back(digits[md[i] & 0xf]);
        }
        return out;
    }

private:
    EVP_MD_CTX* ctx_;
};

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

void hash_rows(Sha256& h, const Dataset& d) {
    for (const auto& r : d.interactions) {
        h.update(d.vocab->users.external(r.user));
        h.update("\t");
        h.update(d.vocab->items.external(r.item));
        h.update("\t");
        h.update(format_double(r.rating));
        h.update("\n");
    }
}

void hash_rows(Sha256& h, const ImplicitDataset& d) {
    for (const auto& p : d.positives) {
        h.update(d.vocab->users.external(p.user));
        h.update("\t");
        h.update(d.vocab->items.external(p.item));
        h.update("\n");
    }
}

template <class Data>
std::string checksum_of(const Data& train, const Data& test) {
    Sha256 h;
    h.update("train\n");
    hash_rows(h, train);
    h.update("test\n");
    hash_rows(h, test);
    return h.hex();
}

UserIndex user_of(const Interaction& r) { return r.user; }
UserIndex user_of(const UserItem& p) { return p.user; }

const std::vector<Interaction>& rows_of(const Dataset& d) { return d.interactions; }
const std::vector<UserItem>& rows_of(const ImplicitDataset& d) { return d.positives; }

// Rows grouped by user in order of first appearance.
template <class Data>
std::vector<std::vector<std::size_t>> rows_by_user(const Data& d) {
    const auto& rows = rows_of(d);
    std::vector<std::int32_t> slot(static_cast<std::size_t>(d.user_capacity()), -1);
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        auto u = static_cast<std::size_t>(user_of(rows[k]));
        if (slot[u] < 0) {
            slot[u] = static_cast<std::int32_t>(groups.size());
            groups.emplace_back();
        }
        groups[static_cast<std::size_t>(slot[u])].push_back(k);
    }
    return groups;
}

template <class Data>
TrainTestSplit<Data> per_user_split_impl(const Data& d, const SplitConfig& cfg) {
    cfg.validate();
    if (cfg.strategy != SplitStrategy::per_user) throw ConfigError("per_user_split requires strategy per-user");
    Rng rng(cfg.seed);
    std::vector<std::size_t> train_rows, test_rows;
    std::size_t dropped_users = 0;
    for (auto& rows : rows_by_user(d)) {
        const auto n = static_cast<std::int32_t>(rows.size());
        if (n < cfg.min_interactions_per_user) {
            ++dropped_users;
            continue;
        }
        shuffle_in_place(rows, rng);
        const auto n_test = per_user_test_count(n, 1.0 - cfg.train_fraction, cfg.min_test_items_per_user);
        test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + n_test);
        train_rows.insert(train_rows.end(), rows.begin() + n_test, rows.end());
    }
    if (train_rows.empty()) throw DataError("per_user_split: no user has enough interactions");
    spdlog::info("[{}] per-user split removed {} users below {} interactions", d.name, dropped_users,
                 cfg.min_interactions_per_user);
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    TrainTestSplit<Data> s{subset(d, train_rows), subset(d, test_rows), cfg, {}};
    s.checksum = checksum_of(s.train, s.test);
    return s;
}

}  // namespace

Dataset subset(const Dataset& d, std::span<const std::size_t> rows) {
    Dataset out;
    out.name = d.name;
    out.scale = d.scale;
    out.vocab = d.vocab;
    out.interactions.reserve(rows.size());
    for (auto r : rows) out.interactions.push_back(d.interactions.at(r));
    return out;
}

ImplicitDataset subset(const ImplicitDataset& d, std::span<const std::size_t> rows) {
    ImplicitDataset out;
    out.name = d.name;
    out.vocab = d.vocab;
    out.threshold = d.threshold;
    out.positives.reserve(rows.size());
    for (auto r : rows) out.positives.push_back(d.positives.at(r));
    return out;
}

std::string partition_checksum(const Dataset& train, const Dataset& test) { return checksum_of(train, test); }
std::string partition_checksum(const ImplicitDataset& train, const ImplicitDataset& test) {
    return checksum_of(train, test);
}

RatingSplit global_random_split(const Dataset& d, const SplitConfig& cfg) {
    cfg.validate();
    if (cfg.strategy != SplitStrategy::global) throw ConfigError("global_random_split requires strategy global");
    if (d.size() < 2) throw DataError("global_random_split: need at least 2 interactions");
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(cfg.seed);
    shuffle_in_place(idx, rng);
    auto n_train = static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(d.size()) + 0.5));
    n_train = std::clamp<std::size_t>(n_train, 1, d.size() - 1);
    std::vector<std::size_t> train_rows(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test_rows(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    RatingSplit s{subset(d, train_rows), subset(d, test_rows), cfg, {}};
    s.checksum = checksum_of(s.train, s.test);
    return s;
}

RatingSplit per_user_split(const Dataset& d, const SplitConfig& cfg) { return per_user_split_impl(d, cfg); }
ImplicitSplit per_user_split(const ImplicitDataset& d, const SplitConfig& cfg) { return per_user_split_impl(d, cfg); }

FoldSet kfold_global(const Dataset& train, std::int32_t k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("kfold_global: k must be >= 2");
    if (static_cast<std::size_t>(k) > train.size()) throw ConfigError("kfold_global: k exceeds the number of interactions");
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    shuffle_in_place(idx, rng);

    const std::size_t n = idx.size();
    const auto kk = static_cast<std::size_t>(k);
    FoldSet fs;
    fs.k = k;
    std::size_t start = 0;
    for (std::size_t f = 0; f < kk; ++f) {
        const std::size_t len = n / kk + (f < n % kk ? 1 : 0);
        Fold fold;
        fold.validation_rows.assign(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                    idx.begin() + static_cast<std::ptrdiff_t>(start + len));
        std::sort(fold.validation_rows.begin(), fold.validation_rows.end());
        fold.train_rows.reserve(n - len);
        std::size_t v = 0;
        for (std::size_t r = 0; r < n; ++r) {
            if (v < fold.validation_rows.size() && fold.validation_rows[v] == r) {
                ++v;
                continue;
            }
            fold.train_rows.push_back(r);
        }
        fs.folds.push_back(std::move(fold));
        start += len;
    }
    return fs;
}

FoldSet kfold_per_user(const ImplicitDataset& train, std::int32_t k, std::uint64_t seed,
                       std::int32_t min_user_interactions, double holdout_fraction) {
    if (k < 2) throw ConfigError("kfold_per_user: k must be >= 2");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        throw ConfigError("kfold_per_user: holdout fraction must lie in (0,1)");
    Rng rng(seed);
    const auto kk = static_cast<std::size_t>(k);
    std::vector<std::vector<std::size_t>> held(kk);
    std::size_t eligible = 0;
    for (auto& rows : rows_by_user(train)) {
        const auto n = static_cast<std::int32_t>(rows.size());
        if (n < min_user_interactions) continue;
        ++eligible;
        shuffle_in_place(rows, rng);
        const auto per_fold = static_cast<std::size_t>(
            std::max(1.0, std::floor(holdout_fraction * static_cast<double>(n) + 0.5)));
        for (std::size_t f = 0; f < kk; ++f)
            for (std::size_t j = 0; j < per_fold; ++j) held[f].push_back(rows[(f * per_fold + j) % rows.size()]);
    }
    if (eligible == 0) throw DataError("kfold_per_user: no user has enough interactions for validation");

    FoldSet fs;
    fs.k = k;
    for (auto& validation : held) {
        std::sort(validation.begin(), validation.end());
        Fold fold;
        std::vector<char> is_held(train.size(), 0);
        for (auto r : validation) is_held[r] = 1;
        for (std::size_t r = 0; r < train.size(); ++r)
            if (!is_held[r]) fold.train_rows.push_back(r);
        fold.validation_rows = std::move(validation);
        fs.folds.push_back(std::move(fold));
    }
    return fs;
}

namespace {

nlohmann::json config_json(const SplitConfig& c) {
    return {{"strategy", to_string(c.strategy)},
            {"train_fraction", c.train_fraction},
            {"seed", c.seed},
            {"min_interactions_per_user", c.min_interactions_per_user},
            {"min_test_items_per_user", c.min_test_items_per_user}};
}

SplitConfig config_from_json(const nlohmann::json& j) {
    SplitConfig c;
    c.strategy = parse_split_strategy(j.at("strategy").get<std::string>());
    c.train_fraction = j.at("train_fraction").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.min_interactions_per_user = j.at("min_interactions_per_user").get<std::int32_t>();
    c.min_test_items_per_user = j.at("min_test_items_per_user").get<std::int32_t>();
    return c;
}

void write_manifest(const std::filesystem::path& dir, const std::string& kind, const std::string& dataset,
                    const SplitConfig& cfg, const std::string& checksum, std::size_t n_train, std::size_t n_test,
                    double threshold) {
    nlohmann::json m{{"kind", kind},     {"dataset", dataset}, {"config", config_json(cfg)},
                     {"checksum", checksum}, {"train_rows", n_train}, {"test_rows", n_test}};
    if (kind == "implicit") m["threshold"] = threshold;
    std::ofstream out(dir / "manifest.json");
    if (!out) throw DataError("cannot write split manifest in " + dir.string());
    out << m.dump(2) << '\n';
}

nlohmann::json read_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw DataError("missing split manifest in " + dir.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ChecksumError("unreadable split manifest in " + dir.string() + ": " + e.what());
    }
}

void write_pairs_tsv(const ImplicitDataset& d, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "user\titem\n";
    for (const auto& p : d.positives)
        out << d.vocab->users.external(p.user) << '\t' << d.vocab->items.external(p.item) << '\n';
}

ImplicitDataset read_pairs_tsv(const std::filesystem::path& path, std::shared_ptr<Vocabulary> vocab) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    ImplicitDataset d;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw ChecksumError("malformed row in " + path.string());
        d.positives.push_back({vocab->users.intern(line.substr(0, tab)), vocab->items.intern(line.substr(tab + 1))});
    }
    d.vocab = std::move(vocab);
    return d;
}

}  // namespace

void cache_split(const RatingSplit& s, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_dataset_tsv(s.train, dir / "train.tsv");
    write_dataset_tsv(s.test, dir / "test.tsv");
    write_manifest(dir, "rating", s.train.name, s.config, s.checksum, s.train.size(), s.test.size(), 0.0);
}

void cache_split(const ImplicitSplit& s, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_pairs_tsv(s.train, dir / "train.tsv");
    write_pairs_tsv(s.test, dir / "test.tsv");
    write_manifest(dir, "implicit", s.train.name, s.config, s.checksum, s.train.size(), s.test.size(),
                   s.train.threshold);
}

bool split_cached(const std::filesystem::path& dir) {
    return std::filesystem::exists(dir / "manifest.json") && std::filesystem::exists(dir / "train.tsv") &&
           std::filesystem::exists(dir / "test.tsv");
}

SplitConfig cached_split_config(const std::filesystem::path& dir) {
    return config_from_json(read_manifest(dir).at("config"));
}

RatingSplit load_rating_split(const std::filesystem::path& dir, const RatingScale& scale) {
    const auto m = read_manifest(dir);
    if (m.value("kind", "") != "rating") throw ChecksumError("cache in " + dir.string() + " is not a rating split");
    const auto name = m.at("dataset").get<std::string>();
    auto vocab = std::make_shared<Vocabulary>();
    RatingSplit s;
    try {
        s.train = read_dataset_tsv(dir / "train.tsv", scale, name, vocab);
        s.test = read_dataset_tsv(dir / "test.tsv", scale, name, vocab);
    } catch (const DataError& e) {
        throw ChecksumError(std::string("corrupted split cache: ") + e.what());
    }
    s.config = config_from_json(m.at("config"));
    s.checksum = checksum_of(s.train, s.test);
    if (s.checksum != m.at("checksum").get<std::string>())
        throw ChecksumError("split cache checksum mismatch in " + dir.string());
    return s;
}

ImplicitSplit load_implicit_split(const std::filesystem::path& dir) {
    const auto m = read_manifest(dir);
    if (m.value("kind", "") != "implicit") throw ChecksumError("cache in " + dir.string() + " is not an implicit split");
    auto vocab = std::make_shared<Vocabulary>();
    ImplicitSplit s;
    s.train = read_pairs_tsv(dir / "train.tsv", vocab);
    s.test = read_pairs_tsv(dir / "test.tsv", vocab);
    for (auto* part : {&s.train, &s.test}) {
        part->name = m.at("dataset").get<std::string>();
        part->threshold = m.value("threshold", 0.0);
    }
    s.config = config_from_json(m.at("config"));
    s.checksum = checksum_of(s.train, s.test);
    if (s.checksum != m.at("checksum").get<std::string>())
        throw ChecksumError("split cache checksum mismatch in " + dir.string());
    return s;
}

}  // namespace recbench
