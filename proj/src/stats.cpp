#include "qrelex/stats.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "qrelex/util.hpp"

namespace qrelex {

Distribution distribution(const QrelsSet& qrels) {
    Distribution d;
    d.total = qrels.size();
    for (const auto& [key, j] : qrels.entries) ++(j.label == 1 ? d.relevant : d.not_relevant);
    if (d.total > 0) {
        d.percentages_defined = true;
        d.relevant_centi = percent_centi(d.relevant, d.total);
        d.not_relevant_centi = percent_centi(d.not_relevant, d.total);
    }
    return d;
}

std::string format_distribution(const Distribution& d) {
    auto pct = [&](std::uint64_t centi) {
        return d.percentages_defined ? format_percent_centi(centi) : std::string("n/a");
    };
    std::string out;
    out += "Total          " + format_count(d.total) + "\n";
    out += "0: not-relevant " + format_count(d.not_relevant) + " (" + pct(d.not_relevant_centi) +
           ")\n";
    out += "1: relevant     " + format_count(d.relevant) + " (" + pct(d.relevant_centi) + ")\n";
    return out;
}

std::map<std::string, TopicCounts> per_topic_counts(const QrelsSet& qrels) {
    std::map<std::string, TopicCounts> counts;
    for (const auto& [key, j] : qrels.entries)
        ++(j.label == 1 ? counts[key.first].relevant : counts[key.first].not_relevant);
    return counts;
}

ExpansionStats expansion_stats(const QrelsSet& original, const QrelsSet& merged,
                               std::uint64_t collection_size, std::uint64_t topics) {
    std::vector<std::string> missing;
    for (const auto& [key, j] : original.entries)
        if (!merged.entries.count(key)) missing.push_back("(" + key.first + ", " + key.second + ")");
    if (!missing.empty()) {
        std::string msg = "original judgments missing from the merged set:";
        for (const auto& k : missing) msg += " " + k;
        throw std::runtime_error(msg);
    }

    std::map<std::string, TopicExpansion> per_topic;
    for (const auto& [key, j] : merged.entries) {
        TopicExpansion& t = per_topic[key.first];
        t.topic_id = key.first;
        ++t.total;
        bool in_original = original.entries.count(key) > 0;
        if (j.label == 1)
            ++(in_original ? t.orig_relevant : t.new_relevant);
        else
            ++(in_original ? t.orig_not : t.new_not);
    }

    ExpansionStats s;
    std::uint64_t orig_relevant = 0;
    std::uint64_t orig_not = 0;
    for (const auto& [topic, t] : per_topic) {
        s.per_topic.push_back(t);
        s.total_judgments += t.total;
        s.total_relevant += t.orig_relevant + t.new_relevant;
        s.total_not += t.orig_not + t.new_not;
        orig_relevant += t.orig_relevant;
        orig_not += t.orig_not;
    }
    if (s.total_judgments > 0)
        s.percent_relevant_centi = percent_centi(s.total_relevant, s.total_judgments);
    std::uint64_t orig_total = original.size();
    s.fold_total = orig_total ? static_cast<double>(s.total_judgments) / orig_total : 0.0;
    s.fold_relevant = orig_relevant ? static_cast<double>(s.total_relevant) / orig_relevant : 0.0;
    s.fold_not = orig_not ? static_cast<double>(s.total_not) / orig_not : 0.0;
    if (topics > 0) {
        s.avg_judged_per_topic = static_cast<double>(s.total_judgments) / topics;
        if (collection_size > 0)
            s.avg_coverage_percent = 100.0 * s.avg_judged_per_topic / collection_size;
    }
    return s;
}

namespace {

std::string fixed(double v, int decimals) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

}  // namespace

std::string format_expansion(const ExpansionStats& s) {
    std::string out;
    out += "total judgments      " + format_count(s.total_judgments) + "\n";
    out += "relevant             " + format_count(s.total_relevant) + " (" +
           format_percent_centi(s.percent_relevant_centi) + ")\n";
    out += "not relevant         " + format_count(s.total_not) + "\n";
    out += "fold total           " + fixed(s.fold_total, 1) + "\n";
    out += "fold relevant        " + fixed(s.fold_relevant, 1) + "\n";
    out += "fold not relevant    " + fixed(s.fold_not, 1) + "\n";
    out += "avg judged per topic " + fixed(s.avg_judged_per_topic, 2) + "\n";
    out += "avg coverage         " + fixed(s.avg_coverage_percent, 2) + "%\n";
    return out;
}

std::vector<RelevantDiff> relevant_diff(const QrelsSet& original, const QrelsSet& merged) {
    ExpansionStats s = expansion_stats(original, merged, 0, 0);
    std::vector<RelevantDiff> out;
    out.reserve(s.per_topic.size());
    for (const TopicExpansion& t : s.per_topic)
        out.push_back({t.topic_id, t.orig_relevant, t.new_relevant});
    return out;
}

void export_figures(const ExpansionStats& stats, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "fig1_total_judgments.csv", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write fig1_total_judgments.csv");
        out << "topic_id,total_judgments\n";
        for (const TopicExpansion& t : stats.per_topic)
            out << t.topic_id << "," << t.total << "\n";
        if (!out) throw std::runtime_error("write failed: fig1_total_judgments.csv");
    }
    {
        std::ofstream out(dir / "fig2_relevant_diff.csv", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write fig2_relevant_diff.csv");
        out << "topic_id,original_relevant,added_relevant\n";
        for (const TopicExpansion& t : stats.per_topic)
            out << t.topic_id << "," << t.orig_relevant << "," << t.new_relevant << "\n";
        if (!out) throw std::runtime_error("write failed: fig2_relevant_diff.csv");
    }
}

}  // namespace qrelex
