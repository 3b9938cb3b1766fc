#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "segrank/stats.hpp"
#include "test_util.hpp"

using namespace segrank;

TEST_CASE("load_stats reads tab-separated counts") {
    auto path = testutil::write_file("stats_basic.tsv", "hot\t500\ndog\t400\nhot dog\t100\n");
    auto stats = load_stats(path);
    CHECK(stats.freq("hot dog") == 100);
    CHECK(stats.freq("hot") == 500);
    CHECK(stats.total_unigrams == 900);
    CHECK(stats.max_order == 2);
}

TEST_CASE("load_stats on an empty file yields empty stats") {
    auto path = testutil::write_file("stats_empty.tsv", "");
    auto stats = load_stats(path);
    CHECK(stats.entries.empty());
    CHECK(stats.total_unigrams == 0);
}

TEST_CASE("load_stats sums duplicate keys") {
    auto path = testutil::write_file("stats_dup.tsv", "a\t3\na\t3\n");
    auto stats = load_stats(path);
    CHECK(stats.freq("a") == 6);
    CHECK(stats.total_unigrams == 6);
}

TEST_CASE("load_stats honours a __TOTAL__ override") {
    auto path = testutil::write_file("stats_total.tsv", "a\t3\n__TOTAL__\t1000\n");
    auto stats = load_stats(path);
    CHECK(stats.total_unigrams == 1000);
    CHECK(stats.freq("a") == 3);
}

TEST_CASE("load_stats rejects malformed lines with their line number") {
    auto no_tab = testutil::write_file("stats_notab.tsv", "a\t1\nbroken line\n");
    CHECK_THROWS_MATCHES(load_stats(no_tab), DataError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("line 2")));
    auto bad_count = testutil::write_file("stats_badcount.tsv", "a\tbanana\n");
    CHECK_THROWS_AS(load_stats(bad_count), DataError);
    auto negative = testutil::write_file("stats_negative.tsv", "a\t-4\n");
    CHECK_THROWS_AS(load_stats(negative), DataError);
    CHECK_THROWS_AS(load_stats("/nonexistent/stats.tsv"), DataError);
}

TEST_CASE("freq lookups normalize case and whitespace") {
    auto path = testutil::write_file("stats_norm.tsv", "hot dog\t100\n");
    auto stats = load_stats(path);
    CHECK(stats.freq("Hot Dog") == 100);
    CHECK(stats.freq("  hot   dog ") == 100);
    CHECK(stats.freq("hot cat") == 0);
}

TEST_CASE("load_stats then freq round-trips every line") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> count_dist(0, 5000);
    const std::vector<std::string> vocab = {"alpha", "beta", "gamma", "delta", "epsilon"};
    std::string content;
    std::vector<std::pair<std::string, int>> expected;
    for (const auto& a : vocab) {
        for (const auto& b : vocab) {
            int c = count_dist(rng);
            content += a + " " + b + "\t" + std::to_string(c) + "\n";
            expected.push_back({a + " " + b, c});
        }
    }
    auto stats = load_stats(testutil::write_file("stats_roundtrip.tsv", content));
    for (const auto& [gram, count] : expected) {
        CHECK(stats.freq(gram) == count);
    }
}

TEST_CASE("pmi matches the smoothed formula") {
    NGramStats stats;
    stats.entries = {{"x", 10}, {"y", 10}};
    stats.total_unigrams = 100;
    stats.max_order = 2;

    SECTION("independent events come out negative") {
        double value = pmi(stats, "x", "y");
        CHECK(value == Catch::Approx(std::log(101.0 / 121.0)));
        CHECK(value < 0.0);
    }
    SECTION("a perfect collocation comes out positive") {
        stats.entries["x y"] = 10;
        double value = pmi(stats, "x", "y");
        CHECK(value == Catch::Approx(std::log(11.0 * 101.0 / 121.0)));
        CHECK(value > 0.0);
    }
    SECTION("argument order matters through the joint lookup") {
        stats.entries["x y"] = 10;
        CHECK(pmi(stats, "x", "y") != pmi(stats, "y", "x"));
        // with equal joint counts both directions agree
        stats.entries["y x"] = 10;
        CHECK(pmi(stats, "x", "y") == pmi(stats, "y", "x"));
    }
}

TEST_CASE("pmi is monotone in the joint count") {
    NGramStats stats;
    stats.entries = {{"x", 10}, {"y", 10}};
    stats.total_unigrams = 100;
    stats.max_order = 2;
    double last = -1e9;
    for (int joint = 0; joint <= 10; ++joint) {
        stats.entries["x y"] = joint;
        double value = pmi(stats, "x", "y");
        CHECK(value > last);
        last = value;
    }
}

TEST_CASE("pmi requires unigram mass") {
    NGramStats stats;
    stats.entries = {{"x", 1}};
    stats.total_unigrams = 0;
    CHECK_THROWS_AS(pmi(stats, "x", "x"), DataError);
}

TEST_CASE("load_titles normalizes membership") {
    auto path = testutil::write_file("titles.txt", "Hot Dog\nNew   York\n\n");
    auto titles = load_titles(path);
    CHECK(titles.contains("hot dog"));
    CHECK(titles.contains("HOT DOG"));
    CHECK(titles.contains("new york"));
    CHECK_FALSE(titles.contains("cold dog"));
}
