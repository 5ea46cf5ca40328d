#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qrelex {

enum class Source { human, judge, blocked_fallback };

std::string to_string(Source source);
Source source_from_string(const std::string& name);

enum class BinaryMode { strict, lenient };
enum class GradeEncoding { ternary, binary };

int to_binary(int grade, BinaryMode mode);

struct Judgment {
    std::string topic_id;
    std::string doc_id;
    int label = 0;
    Source source = Source::human;
    std::optional<int> raw_grade;
    std::optional<std::string> variant;
    std::optional<std::string> status;
    std::optional<std::string> timestamp;
};

struct QrelsSet {
    using Key = std::pair<std::string, std::string>;
    std::map<Key, Judgment> entries;

    void add(Judgment j);
    bool contains(const std::string& topic_id, const std::string& doc_id) const;
    const Judgment* find(const std::string& topic_id, const std::string& doc_id) const;
    std::size_t size() const { return entries.size(); }
    bool empty() const { return entries.empty(); }
};

struct QrelsParseOptions {
    BinaryMode mode = BinaryMode::strict;
    GradeEncoding encoding = GradeEncoding::ternary;
    std::string stream_name = "qrels";
};

QrelsSet parse_qrels(std::istream& in, Source source, const QrelsParseOptions& opts = {});
QrelsSet parse_qrels(const std::filesystem::path& path, Source source,
                     BinaryMode mode = BinaryMode::strict,
                     GradeEncoding encoding = GradeEncoding::ternary);

// On key collision the entry from `original` wins unconditionally.
QrelsSet merge(const QrelsSet& original, const QrelsSet& generated);

void write_qrels(const QrelsSet& qrels, std::ostream& out);
// Writes `path` plus a provenance sidecar at `path`+".prov.jsonl".
void write_qrels(const QrelsSet& qrels, const std::filesystem::path& path);

// Re-attaches sidecar provenance onto a parsed qrels set. Rows the sidecar
// marks as judge-sourced carry a binary label in the grade column, so their
// label is taken from the raw grade regardless of the parse-time mapping.
void apply_provenance_sidecar(QrelsSet& qrels, const std::filesystem::path& sidecar_path);

}  // namespace qrelex
