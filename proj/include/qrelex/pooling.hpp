#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qrelex/qrels.hpp"

namespace qrelex {

struct RunEntry {
    std::string topic_id;
    std::string doc_id;
    int rank = 0;
    double score = 0.0;
    std::string tag;
};

struct Run {
    std::string name;
    std::vector<RunEntry> entries;
};

Run parse_run(std::istream& in, const std::string& name);
Run parse_run(const std::filesystem::path& path);

struct Pool {
    std::map<std::string, std::vector<std::string>> docs_by_topic;
    int depth = 0;
    std::size_t excluded = 0;
    std::vector<std::string> warnings;

    std::size_t total() const;
};

Pool build_pool(const std::vector<Run>& runs, int depth, const QrelsSet& judged,
                bool exclude_judged,
                const std::optional<std::set<std::string>>& known_topics = std::nullopt);

struct EvalSubset {
    struct Item {
        std::string doc_id;
        int label = 0;
    };
    std::map<std::string, std::vector<Item>> by_topic;
    std::uint64_t seed = 0;
    int per_class_cap = 3;

    std::size_t total() const;
    std::size_t count_label(int label) const;
    std::size_t distinct_docs() const;
};

EvalSubset sample_eval_subset(const QrelsSet& human, int cap, std::uint64_t seed,
                              const std::optional<std::set<std::string>>& topics = std::nullopt);

}  // namespace qrelex
