#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qrelex/qrels.hpp"

namespace qrelex {

struct Distribution {
    std::uint64_t total = 0;
    std::uint64_t relevant = 0;
    std::uint64_t not_relevant = 0;
    std::uint64_t relevant_centi = 0;
    std::uint64_t not_relevant_centi = 0;
    bool percentages_defined = false;
};

Distribution distribution(const QrelsSet& qrels);
std::string format_distribution(const Distribution& d);

struct TopicCounts {
    std::uint64_t relevant = 0;
    std::uint64_t not_relevant = 0;
};

std::map<std::string, TopicCounts> per_topic_counts(const QrelsSet& qrels);

struct TopicExpansion {
    std::string topic_id;
    std::uint64_t orig_relevant = 0;
    std::uint64_t orig_not = 0;
    std::uint64_t new_relevant = 0;
    std::uint64_t new_not = 0;
    std::uint64_t total = 0;
};

struct ExpansionStats {
    std::vector<TopicExpansion> per_topic;
    std::uint64_t total_judgments = 0;
    std::uint64_t total_relevant = 0;
    std::uint64_t total_not = 0;
    std::uint64_t percent_relevant_centi = 0;
    double fold_total = 0.0;
    double fold_relevant = 0.0;
    double fold_not = 0.0;
    double avg_judged_per_topic = 0.0;
    double avg_coverage_percent = 0.0;
};

ExpansionStats expansion_stats(const QrelsSet& original, const QrelsSet& merged,
                               std::uint64_t collection_size, std::uint64_t topics);
std::string format_expansion(const ExpansionStats& stats);

struct RelevantDiff {
    std::string topic_id;
    std::uint64_t orig_relevant = 0;
    std::uint64_t added_relevant = 0;
};

std::vector<RelevantDiff> relevant_diff(const QrelsSet& original, const QrelsSet& merged);

// fig1_total_judgments.csv and fig2_relevant_diff.csv under `dir`.
void export_figures(const ExpansionStats& stats, const std::filesystem::path& dir);

}  // namespace qrelex
