#include <doctest.h>

#include <cmath>

#include "recbench/data.hpp"
#include "recbench/error.hpp"
#include "support.hpp"

using namespace recbench;

namespace {

const RatingScale five{1.0, 5.0};

Dataset with_timestamps(const std::vector<std::tuple<std::string, std::string, double, std::int64_t>>& rows) {
    std::vector<std::tuple<std::string, std::string, double>> plain;
    for (const auto& [u, i, r, t] : rows) plain.emplace_back(u, i, r);
    auto d = make_dataset("toy", five, plain);
    for (std::size_t k = 0; k < rows.size(); ++k) d.interactions[k].timestamp = std::get<3>(rows[k]);
    return d;
}

}  // namespace

TEST_CASE("load_interactions parses a RecBole-style file") {
    testing::TempDir tmp;
    testing::write_file(tmp / "toy.inter",
                        "user_id:token\titem_id:token\trating:float\ttimestamp:float\n"
                        "u1\ti1\t4\t100\n"
                        "u1\ti2\t3.5\t101\n"
                        "u2\ti1\t5\t102\n");
    auto d = load_interactions(tmp / "toy.inter", ColumnMapping{}, five, "toy");
    REQUIRE(d.size() == 3);
    CHECK(d.n_users() == 2);
    CHECK(d.n_items() == 2);
    CHECK(d.interactions[1].rating == 3.5);
    CHECK(d.interactions[2].timestamp == 102);
    CHECK(d.vocab->users.external(d.interactions[2].user) == "u2");
}

TEST_CASE("load_interactions reports bad input") {
    testing::TempDir tmp;
    CHECK_THROWS_AS(load_interactions(tmp / "absent.inter", ColumnMapping{}, five), DataError);

    testing::write_file(tmp / "nocol.inter", "user_id:token\titem_id:token\n1\t2\n");
    CHECK_THROWS_AS(load_interactions(tmp / "nocol.inter", ColumnMapping{}, five), DataError);

    testing::write_file(tmp / "bad.inter",
                        "user_id:token\titem_id:token\trating:float\ttimestamp:float\n"
                        "u1\ti1\t4\t1\n"
                        "u1\ti2\tabc\t2\n");
    try {
        load_interactions(tmp / "bad.inter", ColumnMapping{}, five);
        FAIL("expected a parse error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
}

TEST_CASE("custom column mapping and delimiter") {
    testing::TempDir tmp;
    testing::write_file(tmp / "x.csv", "rating,who,what\n3,a,b\n4,c,b\n");
    ColumnMapping m;
    m.user_column = "who";
    m.item_column = "what";
    m.rating_column = "rating";
    m.timestamp_column.reset();
    m.delimiter = ',';
    auto d = load_interactions(tmp / "x.csv", m, five);
    CHECK(d.size() == 2);
    CHECK(d.n_items() == 1);

    ColumnMapping dup;
    dup.item_column = dup.user_column;
    CHECK_THROWS_AS(dup.validate(), ConfigError);
}

TEST_CASE("deduplicate keeps the most recent or the last occurrence") {
    auto d = with_timestamps({{"u", "i", 5.0, 20}, {"u", "i", 3.0, 10}, {"v", "i", 2.0, 5}});
    std::size_t removed = 0;
    auto out = deduplicate(d, &removed);
    CHECK(removed == 1);
    REQUIRE(out.size() == 2);
    CHECK(out.interactions[0].rating == 5.0);

    auto plain = make_dataset("p", five, {{"u", "i", 2.0}, {"u", "i", 4.0}});
    auto kept = deduplicate(plain);
    REQUIRE(kept.size() == 1);
    CHECK(kept.interactions[0].rating == 4.0);

    auto unique = make_dataset("q", five, {{"a", "x", 1.0}, {"b", "y", 2.0}});
    CHECK(deduplicate(unique).interactions == unique.interactions);
}

TEST_CASE("drop_missing and filter_rating_scale") {
    auto d = make_dataset("m", five, {{"a", "x", 1.0}, {"b", "x", 2.0}, {"c", "x", 3.0}, {"d", "x", 4.0}, {"e", "x", 5.0}});
    d.interactions[2].rating = std::nan("");
    std::size_t removed = 0;
    CHECK(drop_missing(d, &removed).size() == 4);
    CHECK(removed == 1);

    auto no_items = d;
    for (auto& x : no_items.interactions) x.item = kMissingId;
    CHECK(drop_missing(no_items).empty());

    auto ten = make_dataset("anime", RatingScale(1, 10), {{"a", "x", -1.0}, {"b", "x", 8.0}});
    auto f = filter_rating_scale(ten, &removed);
    CHECK(f.size() == 1);
    CHECK(removed == 1);

    auto six = make_dataset("s", five, {{"a", "x", 6.0}, {"a", "y", 5.0}});
    CHECK(filter_rating_scale(six).size() == 1);
}

TEST_CASE("cleaning is idempotent") {
    auto d = with_timestamps({{"u", "i", 5.0, 20}, {"u", "i", 3.0, 10}, {"v", "j", 7.0, 5}, {"w", "j", 2.0, 1}});
    d.interactions[3].rating = std::nan("");
    auto once = clean(d);
    auto twice = clean(once);
    CHECK(once.interactions == twice.interactions);
    CHECK(once.size() == 1);
}

TEST_CASE("compute_stats sparsity") {
    auto one = make_dataset("1", five, {{"a", "x", 3.0}});
    CHECK(compute_stats(one).sparsity == 0.0);

    auto two = make_dataset("2", five, {{"a", "x", 3.0}, {"b", "y", 4.0}});
    auto s = compute_stats(two);
    CHECK(s.n_users == 2);
    CHECK(s.n_items == 2);
    CHECK(s.sparsity == doctest::Approx(0.5));

    Dataset empty;
    CHECK_THROWS_AS(compute_stats(empty), DataError);
}

TEST_CASE("ML-100K statistics") {
    const auto path = std::filesystem::path(RECBENCH_SOURCE_DIR) / "data/raw/ml-100k.inter";
    auto d = clean(load_interactions(path, ColumnMapping{}, five, "ml-100k"));
    auto s = compute_stats(d);
    CHECK(s.n_ratings == 100000);
    CHECK(s.n_users == 943);
    CHECK(s.n_items == 1682);
    const double oracle = 1.0 - 100000.0 / (943.0 * 1682.0);
    CHECK(std::abs(s.sparsity - 0.937) <= 0.0001);
    CHECK(std::abs(s.sparsity - oracle) < 0.00005);
    CHECK(stats_json(s) == R"({"items":1682,"ratings":100000,"sparsity":0.937,"users":943})");
}

TEST_CASE("convert_implicit thresholds") {
    auto d = make_dataset("t", five, {{"a", "x", 3.0}, {"a", "y", 4.0}, {"a", "z", 5.0}});
    auto imp = convert_implicit(d, 4.0);
    CHECK(imp.positives.size() == 2);
    CHECK(imp.threshold == 4.0);
    CHECK(convert_implicit(d).threshold == 4.0);

    auto low = make_dataset("l", five, {{"a", "x", 1.0}, {"b", "x", 2.0}});
    CHECK(convert_implicit(low, 4.0).empty());

    auto ten = make_dataset("ten", RatingScale(1, 10), {{"a", "x", 6.0}, {"a", "y", 7.0}});
    auto t = convert_implicit(ten);
    CHECK(t.threshold == 7.0);
    CHECK(t.positives.size() == 1);

    CHECK_THROWS_AS(convert_implicit(d, 6.0), ConfigError);

    auto syn = generate_synthetic({.seed = 3, .n_users = 40, .n_items = 30, .density = 0.5});
    std::size_t prev = syn.size() + 1;
    for (double th = 1.0; th <= 5.0; th += 0.5) {
        auto n = convert_implicit(syn, th).size();
        CHECK(n <= prev);
        prev = n;
    }
}

TEST_CASE("generate_synthetic") {
    SyntheticSpec spec{.seed = 7, .n_users = 20, .n_items = 15, .density = 0.3};
    auto a = generate_synthetic(spec);
    auto b = generate_synthetic(spec);
    CHECK(a.interactions == b.interactions);
    for (const auto& x : a.interactions) CHECK(a.scale.contains(x.rating));

    spec.density = 1.0;
    CHECK(generate_synthetic(spec).size() == 300);

    spec.density = 0.0;
    CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
    spec.density = 0.001;
    spec.n_users = 2;
    spec.n_items = 2;
    CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
}

TEST_CASE("cleaned dataset TSV round trip") {
    testing::TempDir tmp;
    auto d = generate_synthetic({.seed = 1, .n_users = 10, .n_items = 10, .density = 0.4});
    write_dataset_tsv(d, tmp / "d.tsv");
    auto back = read_dataset_tsv(tmp / "d.tsv", d.scale);
    REQUIRE(back.size() == d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
        CHECK(back.vocab->users.external(back.interactions[k].user) == d.vocab->users.external(d.interactions[k].user));
        CHECK(back.interactions[k].rating == d.interactions[k].rating);
    }
}
