#include "recbench/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "recbench/error.hpp"
#include "recbench/random.hpp"

namespace recbench {

RatingScale::RatingScale(double lo, double hi) : min(lo), max(hi) {
    if (!(lo < hi)) throw ConfigError("rating scale requires min < max");
}

double RatingScale::default_implicit_threshold() const noexcept {
    if (max == 5.0) return 4.0;
    if (max == 10.0) return 7.0;
    return min + 0.7 * (max - min);
}

std::int32_t IdVocabulary::intern(const std::string& external) {
    auto [it, inserted] = index_.try_emplace(external, static_cast<std::int32_t>(ids_.size()));
    if (inserted) ids_.push_back(external);
    return it->second;
}

std::optional<std::int32_t> IdVocabulary::find(const std::string& external) const {
    auto it = index_.find(external);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

bool Interaction::complete() const noexcept {
    return user != kMissingId && item != kMissingId && !std::isnan(rating);
}

void ColumnMapping::validate() const {
    if (user_column.empty() || item_column.empty() || rating_column.empty())
        throw ConfigError("column mapping: user, item and rating columns must be named");
    if (user_column == item_column || user_column == rating_column || item_column == rating_column)
        throw ConfigError("column mapping: user, item and rating columns must be distinct");
}

namespace {

std::vector<std::string_view> split_line(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::size_t column_index(const std::vector<std::string_view>& header, const std::string& name,
                         const std::filesystem::path& path) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (trim(header[i]) == name) return i;
    throw DataError("missing mapped column '" + name + "' in " + path.string());
}

}  // namespace

Dataset load_interactions(const std::filesystem::path& path, const ColumnMapping& mapping,
                          const RatingScale& scale, std::string name, std::shared_ptr<Vocabulary> vocab) {
    mapping.validate();
    std::ifstream in(path);
    if (!in) throw DataError("cannot open interactions file: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty interactions file: " + path.string());
    const auto header_views = split_line(line, mapping.delimiter);
    const std::size_t ucol = column_index(header_views, mapping.user_column, path);
    const std::size_t icol = column_index(header_views, mapping.item_column, path);
    const std::size_t rcol = column_index(header_views, mapping.rating_column, path);
    std::optional<std::size_t> tcol;
    if (mapping.timestamp_column) tcol = column_index(header_views, *mapping.timestamp_column, path);

    if (!vocab) vocab = std::make_shared<Vocabulary>();
    Dataset d;
    d.name = name.empty() ? path.stem().string() : std::move(name);
    d.scale = scale;

    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        auto cells = split_line(line, mapping.delimiter);
        auto cell = [&](std::size_t idx) -> std::string_view {
            return idx < cells.size() ? trim(cells[idx]) : std::string_view{};
        };
        Interaction it;
        if (auto u = cell(ucol); !u.empty()) it.user = vocab->users.intern(std::string(u));
        if (auto i = cell(icol); !i.empty()) it.item = vocab->items.intern(std::string(i));
        if (auto r = cell(rcol); !r.empty()) {
            auto v = parse_double(r);
            if (!v || !std::isfinite(*v))
                throw DataError("row " + std::to_string(row) + ": unparseable rating '" + std::string(r) + "' in " +
                                path.string());
            it.rating = *v;
        }
        if (tcol) {
            if (auto t = cell(*tcol); !t.empty()) {
                auto v = parse_double(t);
                if (!v)
                    throw DataError("row " + std::to_string(row) + ": unparseable timestamp '" + std::string(t) +
                                    "'");
                it.timestamp = static_cast<std::int64_t>(std::llround(*v));
            }
        }
        d.interactions.push_back(it);
    }
    d.vocab = std::move(vocab);
    return d;
}

std::int64_t Dataset::n_users() const {
    std::vector<char> seen(static_cast<std::size_t>(std::max(user_capacity(), 0)), 0);
    std::int64_t n = 0;
    for (const auto& it : interactions)
        if (it.user != kMissingId && !seen[static_cast<std::size_t>(it.user)]) {
            seen[static_cast<std::size_t>(it.user)] = 1;
            ++n;
        }
    return n;
}

std::int64_t Dataset::n_items() const {
    std::vector<char> seen(static_cast<std::size_t>(std::max(item_capacity(), 0)), 0);
    std::int64_t n = 0;
    for (const auto& it : interactions)
        if (it.item != kMissingId && !seen[static_cast<std::size_t>(it.item)]) {
            seen[static_cast<std::size_t>(it.item)] = 1;
            ++n;
        }
    return n;
}

namespace {

Dataset with_interactions(const Dataset& d, std::vector<Interaction> rows) {
    Dataset out;
    out.name = d.name;
    out.scale = d.scale;
    out.vocab = d.vocab;
    out.interactions = std::move(rows);
    return out;
}

std::uint64_t pair_key(UserIndex u, ItemIndex i) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) | static_cast<std::uint32_t>(i);
}

}  // namespace

Dataset deduplicate(const Dataset& d, std::size_t* removed) {
    const auto& rows = d.interactions;
    // Only fully keyed records participate; rows with a missing id are left
    // for drop_missing.
    std::unordered_map<std::uint64_t, std::size_t> survivor;
    survivor.reserve(rows.size());
    std::unordered_map<std::uint64_t, bool> all_timestamped;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        if (r.user == kMissingId || r.item == kMissingId) continue;
        const auto key = pair_key(r.user, r.item);
        auto [it, inserted] = survivor.try_emplace(key, k);
        auto [ts_it, ts_inserted] = all_timestamped.try_emplace(key, r.timestamp.has_value());
        if (inserted) continue;
        ts_it->second = ts_it->second && r.timestamp.has_value();
        const auto& cur = rows[it->second];
        if (ts_it->second) {
            if (*r.timestamp >= *cur.timestamp) it->second = k;
        } else {
            it->second = k;
        }
    }
    // A pair whose records are only partly timestamped falls back to the
    // last occurrence.
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        if (r.user == kMissingId || r.item == kMissingId) continue;
        const auto key = pair_key(r.user, r.item);
        if (!all_timestamped[key]) survivor[key] = std::max(survivor[key], k);
    }
    std::vector<Interaction> out;
    out.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        if (r.user == kMissingId || r.item == kMissingId || survivor[pair_key(r.user, r.item)] == k)
            out.push_back(r);
    }
    if (removed) *removed = rows.size() - out.size();
    return with_interactions(d, std::move(out));
}

Dataset drop_missing(const Dataset& d, std::size_t* removed) {
    std::vector<Interaction> out;
    out.reserve(d.interactions.size());
    std::copy_if(d.interactions.begin(), d.interactions.end(), std::back_inserter(out),
                 [](const Interaction& r) { return r.complete(); });
    if (removed) *removed = d.interactions.size() - out.size();
    return with_interactions(d, std::move(out));
}

Dataset filter_rating_scale(const Dataset& d, std::size_t* removed) {
    std::vector<Interaction> out;
    out.reserve(d.interactions.size());
    std::copy_if(d.interactions.begin(), d.interactions.end(), std::back_inserter(out),
                 [&](const Interaction& r) { return std::isnan(r.rating) || d.scale.contains(r.rating); });
    if (removed) *removed = d.interactions.size() - out.size();
    return with_interactions(d, std::move(out));
}

Dataset clean(const Dataset& d, CleaningReport* report) {
    CleaningReport rep;
    Dataset out = deduplicate(d, &rep.duplicates_removed);
    out = drop_missing(out, &rep.missing_removed);
    out = filter_rating_scale(out, &rep.out_of_scale_removed);
    spdlog::info("[{}] cleaning removed {} duplicates, {} incomplete rows, {} out-of-scale ratings; {} remain",
                 d.name, rep.duplicates_removed, rep.missing_removed, rep.out_of_scale_removed, out.size());
    if (out.empty()) spdlog::warn("[{}] dataset is empty after cleaning", d.name);
    if (report) *report = rep;
    return out;
}

DatasetStats compute_stats(const Dataset& d) {
    if (d.empty()) throw DataError("compute_stats: dataset '" + d.name + "' is empty");
    DatasetStats s;
    s.n_users = d.n_users();
    s.n_items = d.n_items();
    s.n_ratings = static_cast<std::int64_t>(d.size());
    const double cells = static_cast<double>(s.n_users) * static_cast<double>(s.n_items);
    const double raw = 1.0 - static_cast<double>(s.n_ratings) / cells;
    s.sparsity = std::round(raw * 1e4) / 1e4;
    return s;
}

std::string stats_json(const DatasetStats& s) {
    nlohmann::json j{{"users", s.n_users}, {"items", s.n_items}, {"ratings", s.n_ratings}, {"sparsity", s.sparsity}};
    return j.dump();
}

ImplicitDataset convert_implicit(const Dataset& d, std::optional<double> threshold) {
    const double t = threshold.value_or(d.scale.default_implicit_threshold());
    if (!d.scale.contains(t))
        throw ConfigError("implicit threshold " + std::to_string(t) + " lies outside the rating scale");
    ImplicitDataset out;
    out.name = d.name;
    out.vocab = d.vocab;
    out.threshold = t;
    for (const auto& r : d.interactions)
        if (r.complete() && r.rating >= t) out.positives.push_back({r.user, r.item});
    if (out.positives.empty()) spdlog::warn("[{}] no interactions at or above threshold {}", d.name, t);
    return out;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n_users <= 0 || spec.n_items <= 0 || spec.latent_rank <= 0)
        throw ConfigError("generate_synthetic: sizes and rank must be positive");
    if (!(spec.density > 0.0 && spec.density <= 1.0)) throw ConfigError("generate_synthetic: density must be in (0,1]");
    const double cells = static_cast<double>(spec.n_users) * static_cast<double>(spec.n_items);
    if (spec.density * cells < 1.0) throw ConfigError("generate_synthetic: density yields no interactions");

    Rng rng(spec.seed);
    const auto rank = static_cast<std::size_t>(spec.latent_rank);
    std::vector<double> uf(static_cast<std::size_t>(spec.n_users) * rank);
    std::vector<double> vf(static_cast<std::size_t>(spec.n_items) * rank);
    for (auto& x : uf) x = draw_unit(rng);
    for (auto& x : vf) x = draw_unit(rng);

    std::vector<std::uint64_t> cell_ids(static_cast<std::size_t>(cells));
    std::iota(cell_ids.begin(), cell_ids.end(), 0);
    const auto m = static_cast<std::size_t>(std::llround(spec.density * cells));
    if (m < cell_ids.size()) {
        // Partial Fisher-Yates: the first m slots are a uniform sample.
        for (std::size_t k = 0; k < m; ++k) {
            std::size_t j = k + static_cast<std::size_t>(rng() % (cell_ids.size() - k));
            std::swap(cell_ids[k], cell_ids[j]);
        }
        cell_ids.resize(m);
        std::sort(cell_ids.begin(), cell_ids.end());
    }

    auto vocab = std::make_shared<Vocabulary>();
    for (std::int32_t u = 0; u < spec.n_users; ++u) vocab->users.intern("u" + std::to_string(u));
    for (std::int32_t i = 0; i < spec.n_items; ++i) vocab->items.intern("i" + std::to_string(i));

    Dataset d;
    d.name = "synthetic-" + std::to_string(spec.seed);
    d.scale = spec.scale;
    d.interactions.reserve(cell_ids.size());
    const double range = spec.scale.max - spec.scale.min;
    for (auto c : cell_ids) {
        const auto u = static_cast<std::int32_t>(c / static_cast<std::uint64_t>(spec.n_items));
        const auto i = static_cast<std::int32_t>(c % static_cast<std::uint64_t>(spec.n_items));
        double dot = 0.0;
        for (std::size_t k = 0; k < rank; ++k)
            dot += uf[static_cast<std::size_t>(u) * rank + k] * vf[static_cast<std::size_t>(i) * rank + k];
        double r = spec.scale.min + range * dot / static_cast<double>(rank);
        if (spec.noise_stddev > 0.0) r += draw_normal(rng, 0.0, spec.noise_stddev);
        d.interactions.push_back({u, i, spec.scale.clamp(r), std::nullopt});
    }
    d.vocab = std::move(vocab);
    return d;
}

void write_dataset_tsv(const Dataset& d, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    const bool has_ts = std::any_of(d.interactions.begin(), d.interactions.end(),
                                    [](const Interaction& r) { return r.timestamp.has_value(); });
    out << "user\titem\trating" << (has_ts ? "\ttimestamp" : "") << '\n';
    char buf[64];
    for (const auto& r : d.interactions) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, r.rating);
        out << d.vocab->users.external(r.user) << '\t' << d.vocab->items.external(r.item) << '\t'
            << std::string_view(buf, static_cast<std::size_t>(end - buf));
        if (has_ts) {
            out << '\t';
            if (r.timestamp) out << *r.timestamp;
        }
        out << '\n';
    }
}

Dataset read_dataset_tsv(const std::filesystem::path& path, const RatingScale& scale, std::string name,
                         std::shared_ptr<Vocabulary> vocab) {
    std::ifstream probe(path);
    if (!probe) throw DataError("cannot open " + path.string());
    std::string header;
    std::getline(probe, header);
    ColumnMapping m;
    m.user_column = "user";
    m.item_column = "item";
    m.rating_column = "rating";
    m.timestamp_column = header.find("timestamp") != std::string::npos ? std::optional<std::string>("timestamp")
                                                                       : std::nullopt;
    return load_interactions(path, m, scale, std::move(name), std::move(vocab));
}

Dataset make_dataset(std::string name, const RatingScale& scale,
                     const std::vector<std::tuple<std::string, std::string, double>>& rows) {
    auto vocab = std::make_shared<Vocabulary>();
    Dataset d;
    d.name = std::move(name);
    d.scale = scale;
    for (const auto& [u, i, r] : rows)
        d.interactions.push_back({vocab->users.intern(u), vocab->items.intern(i), r, std::nullopt});
    d.vocab = std::move(vocab);
    return d;
}

}  // namespace recbench
