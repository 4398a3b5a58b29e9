#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "recbench/data.hpp"

namespace recbench {

enum class SplitStrategy { global, per_user };

std::string to_string(SplitStrategy s);
SplitStrategy parse_split_strategy(const std::string& s);

struct SplitConfig {
    SplitStrategy strategy = SplitStrategy::global;
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    // per-user only
    std::int32_t min_interactions_per_user = 10;
    std::int32_t min_test_items_per_user = 2;

    void validate() const;
    friend bool operator==(const SplitConfig&, const SplitConfig&) = default;
};

template <class Data>
struct TrainTestSplit {
    Data train;
    Data test;
    SplitConfig config;
    std::string checksum;  // hex SHA-256 of the partition
};

using RatingSplit = TrainTestSplit<Dataset>;
using ImplicitSplit = TrainTestSplit<ImplicitDataset>;

RatingSplit global_random_split(const Dataset& d, const SplitConfig& cfg);
RatingSplit per_user_split(const Dataset& d, const SplitConfig& cfg);
ImplicitSplit per_user_split(const ImplicitDataset& d, const SplitConfig& cfg);

// Number of test items for a user with n interactions: round-half-up of the
// test share, floored at `min_test`, leaving at least one training item.
std::int32_t per_user_test_count(std::int32_t n, double test_fraction, std::int32_t min_test);

struct Fold {
    std::vector<std::size_t> train_rows;       // indices into the partitioned data
    std::vector<std::size_t> validation_rows;
};

struct FoldSet {
    std::int32_t k = 5;
    std::vector<Fold> folds;
};

FoldSet kfold_global(const Dataset& train, std::int32_t k, std::uint64_t seed);
// Every user with at least `min_user_interactions` positives contributes
// round(holdout_fraction * n) (>= 1) validation items to every fold; the
// slices rotate through the user's shuffled items. Other users stay in
// training for all folds.
FoldSet kfold_per_user(const ImplicitDataset& train, std::int32_t k, std::uint64_t seed,
                       std::int32_t min_user_interactions = 5, double holdout_fraction = 0.2);

Dataset subset(const Dataset& d, std::span<const std::size_t> rows);
ImplicitDataset subset(const ImplicitDataset& d, std::span<const std::size_t> rows);

std::string partition_checksum(const Dataset& train, const Dataset& test);
std::string partition_checksum(const ImplicitDataset& train, const ImplicitDataset& test);

// Cache layout: <dir>/{train.tsv,test.tsv,manifest.json}.
void cache_split(const RatingSplit& s, const std::filesystem::path& dir);
void cache_split(const ImplicitSplit& s, const std::filesystem::path& dir);
bool split_cached(const std::filesystem::path& dir);
// Throws ChecksumError when the stored files do not hash to the manifest.
RatingSplit load_rating_split(const std::filesystem::path& dir, const RatingScale& scale);
ImplicitSplit load_implicit_split(const std::filesystem::path& dir);
// Reads only the config stored in a cache manifest.
SplitConfig cached_split_config(const std::filesystem::path& dir);

}  // namespace recbench
