#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace recbench {

using UserIndex = std::int32_t;
using ItemIndex = std::int32_t;

inline constexpr std::int32_t kMissingId = -1;

struct RatingScale {
    double min = 1.0;
    double max = 5.0;

    RatingScale() = default;
    RatingScale(double lo, double hi);

    bool contains(double r) const noexcept { return r >= min && r <= max; }
    double clamp(double r) const noexcept { return r < min ? min : (r > max ? max : r); }
    // 4.0 on 5-point scales, 7.0 on 10-point scales, 70% of the range otherwise.
    double default_implicit_threshold() const noexcept;
};

// Bidirectional map between external string ids and dense indices.
class IdVocabulary {
public:
    std::int32_t intern(const std::string& external);
    std::optional<std::int32_t> find(const std::string& external) const;
    const std::string& external(std::int32_t index) const { return ids_.at(static_cast<std::size_t>(index)); }
    std::int32_t size() const noexcept { return static_cast<std::int32_t>(ids_.size()); }

private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::int32_t> index_;
};

struct Vocabulary {
    IdVocabulary users;
    IdVocabulary items;
};

using VocabularyPtr = std::shared_ptr<const Vocabulary>;

// One rating event. `user`/`item` are kMissingId and `rating` NaN when the
// source cell was empty.
struct Interaction {
    UserIndex user = kMissingId;
    ItemIndex item = kMissingId;
    double rating = std::numeric_limits<double>::quiet_NaN();
    std::optional<std::int64_t> timestamp;

    bool complete() const noexcept;
    friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct ColumnMapping {
    std::string user_column = "user_id:token";
    std::string item_column = "item_id:token";
    std::string rating_column = "rating:float";
    std::optional<std::string> timestamp_column = std::string("timestamp:float");
    char delimiter = '\t';

    void validate() const;
};

struct DatasetStats {
    std::int64_t n_users = 0;
    std::int64_t n_items = 0;
    std::int64_t n_ratings = 0;
    double sparsity = 0.0;  // fraction, rounded to 4 decimals
};

// Immutable-by-convention collection of interactions sharing one id vocabulary.
struct Dataset {
    std::string name;
    RatingScale scale;
    VocabularyPtr vocab;
    std::vector<Interaction> interactions;

    std::size_t size() const noexcept { return interactions.size(); }
    bool empty() const noexcept { return interactions.empty(); }
    // Distinct users/items that actually occur in `interactions`.
    std::int64_t n_users() const;
    std::int64_t n_items() const;
    // Capacity of the dense index space (vocabulary sizes).
    std::int32_t user_capacity() const noexcept { return vocab ? vocab->users.size() : 0; }
    std::int32_t item_capacity() const noexcept { return vocab ? vocab->items.size() : 0; }
};

struct UserItem {
    UserIndex user = 0;
    ItemIndex item = 0;
    friend bool operator==(const UserItem&, const UserItem&) = default;
    friend auto operator<=>(const UserItem&, const UserItem&) = default;
};

struct ImplicitDataset {
    std::string name;
    VocabularyPtr vocab;
    std::vector<UserItem> positives;
    double threshold = 0.0;

    std::size_t size() const noexcept { return positives.size(); }
    bool empty() const noexcept { return positives.empty(); }
    std::int32_t user_capacity() const noexcept { return vocab ? vocab->users.size() : 0; }
    std::int32_t item_capacity() const noexcept { return vocab ? vocab->items.size() : 0; }
};

struct CleaningReport {
    std::size_t duplicates_removed = 0;
    std::size_t missing_removed = 0;
    std::size_t out_of_scale_removed = 0;
};

// Reads a delimited file with a header row. When `vocab` is given, ids are
// interned into it so several files can share one index space.
Dataset load_interactions(const std::filesystem::path& path, const ColumnMapping& mapping,
                          const RatingScale& scale, std::string name = {},
                          std::shared_ptr<Vocabulary> vocab = nullptr);

// Keeps one record per (user, item): the latest timestamp when timestamps are
// present, otherwise the last occurrence in source order. Surviving records
// keep their original relative order.
Dataset deduplicate(const Dataset& d, std::size_t* removed = nullptr);
Dataset drop_missing(const Dataset& d, std::size_t* removed = nullptr);
Dataset filter_rating_scale(const Dataset& d, std::size_t* removed = nullptr);
// deduplicate -> drop_missing -> filter_rating_scale, logging removal counts.
Dataset clean(const Dataset& d, CleaningReport* report = nullptr);

DatasetStats compute_stats(const Dataset& d);
std::string stats_json(const DatasetStats& s);

ImplicitDataset convert_implicit(const Dataset& d, std::optional<double> threshold = std::nullopt);

struct SyntheticSpec {
    std::uint64_t seed = 0;
    std::int32_t n_users = 100;
    std::int32_t n_items = 80;
    double density = 0.1;
    RatingScale scale{1.0, 5.0};
    std::int32_t latent_rank = 3;
    double noise_stddev = 0.1;
};

Dataset generate_synthetic(const SyntheticSpec& spec);

// Cleaned-dataset cache: TSV with header user,item,rating[,timestamp] using
// external ids.
void write_dataset_tsv(const Dataset& d, const std::filesystem::path& path);
Dataset read_dataset_tsv(const std::filesystem::path& path, const RatingScale& scale, std::string name = {},
                         std::shared_ptr<Vocabulary> vocab = nullptr);

// Builds a Dataset from (external user, external item, rating) triples.
Dataset make_dataset(std::string name, const RatingScale& scale,
                     const std::vector<std::tuple<std::string, std::string, double>>& rows);

}  // namespace recbench
