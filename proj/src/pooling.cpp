#include "qrelex/pooling.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "qrelex/util.hpp"

namespace qrelex {

Run parse_run(std::istream& in, const std::string& name) {
    Run run;
    run.name = name;
    std::map<std::string, int> last_rank;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split_whitespace(line);
        if (fields.size() != 6)
            throw std::runtime_error(name + ":" + std::to_string(lineno) +
                                     ": expected 6 fields, got " + std::to_string(fields.size()));
        RunEntry e;
        e.topic_id = fields[0];
        e.doc_id = fields[2];
        try {
            std::size_t pos = 0;
            e.rank = std::stoi(fields[3], &pos);
            if (pos != fields[3].size()) throw std::invalid_argument("trailing chars");
        } catch (const std::exception&) {
            throw std::runtime_error(name + ":" + std::to_string(lineno) + ": rank '" + fields[3] +
                                     "' is not an integer");
        }
        if (e.rank < 1)
            throw std::runtime_error(name + ":" + std::to_string(lineno) + ": rank must be >= 1");
        try {
            std::size_t pos = 0;
            e.score = std::stod(fields[4], &pos);
            if (pos != fields[4].size()) throw std::invalid_argument("trailing chars");
        } catch (const std::exception&) {
            throw std::runtime_error(name + ":" + std::to_string(lineno) + ": score '" + fields[4] +
                                     "' is not a number");
        }
        e.tag = fields[5];
        auto [it, inserted] = last_rank.emplace(e.topic_id, e.rank);
        if (!inserted) {
            if (e.rank <= it->second)
                throw std::runtime_error(name + ":" + std::to_string(lineno) +
                                         ": ranks must strictly increase within topic '" +
                                         e.topic_id + "'");
            it->second = e.rank;
        }
        run.entries.push_back(std::move(e));
    }
    return run;
}

Run parse_run(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open run file: " + path.string());
    return parse_run(in, path.string());
}

std::size_t Pool::total() const {
    std::size_t n = 0;
    for (const auto& [topic, docs] : docs_by_topic) n += docs.size();
    return n;
}

Pool build_pool(const std::vector<Run>& runs, int depth, const QrelsSet& judged,
                bool exclude_judged, const std::optional<std::set<std::string>>& known_topics) {
    if (depth < 1) throw std::runtime_error("pool depth must be >= 1");
    Pool pool;
    pool.depth = depth;

    // Per topic, each run's entries in file order, capped at `depth`.
    std::map<std::string, std::vector<std::vector<const RunEntry*>>> ranked;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        for (const RunEntry& e : runs[r].entries) {
            auto& lists = ranked[e.topic_id];
            lists.resize(runs.size());
            if (lists[r].size() < static_cast<std::size_t>(depth)) lists[r].push_back(&e);
        }
    }

    std::set<std::string> warned;
    for (auto& [topic, lists] : ranked) {
        if (known_topics && !known_topics->count(topic) && warned.insert(topic).second)
            pool.warnings.push_back("unknown topic_id '" + topic + "'");
        lists.resize(runs.size());
        std::set<std::string> seen;
        auto& docs = pool.docs_by_topic[topic];
        for (std::size_t pos = 0; pos < static_cast<std::size_t>(depth); ++pos) {
            for (const auto& list : lists) {
                if (pos >= list.size()) continue;
                const RunEntry* e = list[pos];
                if (!seen.insert(e->doc_id).second) continue;
                if (exclude_judged && judged.contains(topic, e->doc_id)) {
                    ++pool.excluded;
                    continue;
                }
                docs.push_back(e->doc_id);
            }
        }
    }
    return pool;
}

std::size_t EvalSubset::total() const {
    std::size_t n = 0;
    for (const auto& [topic, items] : by_topic) n += items.size();
    return n;
}

std::size_t EvalSubset::count_label(int label) const {
    std::size_t n = 0;
    for (const auto& [topic, items] : by_topic)
        for (const auto& item : items)
            if (item.label == label) ++n;
    return n;
}

std::size_t EvalSubset::distinct_docs() const {
    std::set<std::string> docs;
    for (const auto& [topic, items] : by_topic)
        for (const auto& item : items) docs.insert(item.doc_id);
    return docs.size();
}

EvalSubset sample_eval_subset(const QrelsSet& human, int cap, std::uint64_t seed,
                              const std::optional<std::set<std::string>>& topics) {
    if (cap < 1) throw std::runtime_error("per-class cap must be >= 1");
    std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>> strata;
    for (const auto& [key, j] : human.entries) {
        auto& s = strata[key.first];
        (j.label == 1 ? s.first : s.second).push_back(key.second);
    }
    std::set<std::string> wanted;
    if (topics)
        wanted = *topics;
    else
        for (const auto& [topic, s] : strata) wanted.insert(topic);

    EvalSubset subset;
    subset.seed = seed;
    subset.per_class_cap = cap;
    for (const auto& topic : wanted) {
        auto it = strata.find(topic);
        if (it == strata.end())
            throw std::runtime_error("topic '" + topic + "' has no judged documents");
        SplitMix64 rng(fnv1a64("subset:" + topic, seed));
        auto& items = subset.by_topic[topic];
        for (int label : {1, 0}) {
            const auto& docs = label == 1 ? it->second.first : it->second.second;
            std::size_t k = std::min<std::size_t>(cap, docs.size());
            for (std::size_t idx : sample_indices(docs.size(), k, rng))
                items.push_back({docs[idx], label});
        }
    }
    return subset;
}

}  // namespace qrelex
