#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "qrelex/stats.hpp"
#include "support/fixtures.hpp"

using namespace qrelex;

namespace {

QrelsSet small_original() {
    QrelsSet q;
    q.add({"t1", "a", 1, Source::human, {}, {}, {}, {}});
    q.add({"t1", "b", 0, Source::human, {}, {}, {}, {}});
    q.add({"t2", "a", 0, Source::human, {}, {}, {}, {}});
    q.add({"t2", "c", 0, Source::human, {}, {}, {}, {}});
    return q;
}

QrelsSet small_merged() {
    QrelsSet q = small_original();
    q.add({"t1", "x", 1, Source::judge, {}, {}, {}, {}});
    q.add({"t1", "y", 0, Source::judge, {}, {}, {}, {}});
    q.add({"t2", "x", 1, Source::judge, {}, {}, {}, {}});
    q.add({"t2", "y", 0, Source::blocked_fallback, {}, {}, {}, {}});
    return q;
}

}  // namespace

TEST_CASE("distribution counts labels and computes percentages") {
    Distribution d = distribution(small_merged());
    CHECK(d.total == 8);
    CHECK(d.relevant == 3);
    CHECK(d.not_relevant == 5);
    CHECK(d.percentages_defined);
    CHECK(d.relevant_centi == 3750);
    CHECK(d.not_relevant_centi == 6250);

    CHECK(format_distribution(d) ==
          "Total          8\n"
          "0: not-relevant 5 (62.50%)\n"
          "1: relevant     3 (37.50%)\n");
}

TEST_CASE("distribution of an empty set prints n/a") {
    Distribution d = distribution(QrelsSet{});
    CHECK(d.total == 0);
    CHECK_FALSE(d.percentages_defined);
    CHECK(format_distribution(d) ==
          "Total          0\n"
          "0: not-relevant 0 (n/a)\n"
          "1: relevant     0 (n/a)\n");
}

TEST_CASE("per_topic_counts splits by topic and label") {
    auto counts = per_topic_counts(small_merged());
    REQUIRE(counts.size() == 2);
    CHECK(counts["t1"].relevant == 2);
    CHECK(counts["t1"].not_relevant == 2);
    CHECK(counts["t2"].relevant == 1);
    CHECK(counts["t2"].not_relevant == 3);
}

TEST_CASE("expansion_stats measures growth over the original set") {
    ExpansionStats s = expansion_stats(small_original(), small_merged(), 50, 2);

    REQUIRE(s.per_topic.size() == 2);
    const TopicExpansion& t1 = s.per_topic[0];
    CHECK(t1.topic_id == "t1");
    CHECK(t1.orig_relevant == 1);
    CHECK(t1.orig_not == 1);
    CHECK(t1.new_relevant == 1);
    CHECK(t1.new_not == 1);
    CHECK(t1.total == 4);
    const TopicExpansion& t2 = s.per_topic[1];
    CHECK(t2.orig_relevant == 0);
    CHECK(t2.orig_not == 2);
    CHECK(t2.new_relevant == 1);
    CHECK(t2.new_not == 1);

    CHECK(s.total_judgments == 8);
    CHECK(s.total_relevant == 3);
    CHECK(s.total_not == 5);
    CHECK(s.percent_relevant_centi == 3750);
    CHECK(s.fold_total == doctest::Approx(2.0));
    CHECK(s.fold_relevant == doctest::Approx(3.0));
    CHECK(s.fold_not == doctest::Approx(5.0 / 3.0));
    CHECK(s.avg_judged_per_topic == doctest::Approx(4.0));
    CHECK(s.avg_coverage_percent == doctest::Approx(8.0));

    CHECK(format_expansion(s) ==
          "total judgments      8\n"
          "relevant             3 (37.50%)\n"
          "not relevant         5\n"
          "fold total           2.0\n"
          "fold relevant        3.0\n"
          "fold not relevant    1.7\n"
          "avg judged per topic 4.00\n"
          "avg coverage         8.00%\n");
}

TEST_CASE("expansion_stats requires the merged set to contain the original") {
    QrelsSet original = small_original();
    QrelsSet merged = small_merged();
    merged.entries.erase({"t2", "c"});
    CHECK_THROWS_WITH_AS(
        expansion_stats(original, merged, 0, 0),
        doctest::Contains("original judgments missing from the merged set: (t2, c)"),
        std::runtime_error);
}

TEST_CASE("relevant_diff reports per-topic original and added relevant counts") {
    auto diff = relevant_diff(small_original(), small_merged());
    REQUIRE(diff.size() == 2);
    CHECK(diff[0].topic_id == "t1");
    CHECK(diff[0].orig_relevant == 1);
    CHECK(diff[0].added_relevant == 1);
    CHECK(diff[1].topic_id == "t2");
    CHECK(diff[1].orig_relevant == 0);
    CHECK(diff[1].added_relevant == 1);
}

TEST_CASE("export_figures writes the two csv files") {
    auto dir = fixtures::unique_temp_dir("stats-figs");
    ExpansionStats s = expansion_stats(small_original(), small_merged(), 0, 0);
    export_figures(s, dir / "figures");

    CHECK(fixtures::read_file_bytes(dir / "figures" / "fig1_total_judgments.csv") ==
          "topic_id,total_judgments\n"
          "t1,4\n"
          "t2,4\n");
    CHECK(fixtures::read_file_bytes(dir / "figures" / "fig2_relevant_diff.csv") ==
          "topic_id,original_relevant,added_relevant\n"
          "t1,1,1\n"
          "t2,0,1\n");
}

TEST_CASE("census distribution matches the hand-tallied totals") {
    QrelsSet census = fixtures::census_qrels();
    Distribution d = distribution(census);
    CHECK(d.total == 15028);
    CHECK(d.relevant == 709);
    CHECK(d.not_relevant == 14319);
    CHECK(d.relevant_centi == 472);
    CHECK(d.not_relevant_centi == 9528);
    CHECK(format_distribution(d) ==
          "Total          15,028\n"
          "0: not-relevant 14,319 (95.28%)\n"
          "1: relevant     709 (4.72%)\n");
}
