#include "qrelex/qrels.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "qrelex/util.hpp"

namespace qrelex {

std::string to_string(Source source) {
    switch (source) {
        case Source::human: return "human";
        case Source::judge: return "judge";
        case Source::blocked_fallback: return "blocked_fallback";
    }
    throw std::logic_error("bad source");
}

Source source_from_string(const std::string& name) {
    if (name == "human") return Source::human;
    if (name == "judge") return Source::judge;
    if (name == "blocked_fallback") return Source::blocked_fallback;
    throw std::runtime_error("unknown judgment source '" + name + "'");
}

int to_binary(int grade, BinaryMode mode) {
    if (grade < 0 || grade > 2) throw std::runtime_error("grade out of range: " + std::to_string(grade));
    if (grade == 2) return 1;
    if (grade == 0) return 0;
    return mode == BinaryMode::lenient ? 1 : 0;
}

void QrelsSet::add(Judgment j) {
    Key key{j.topic_id, j.doc_id};
    auto [it, inserted] = entries.emplace(std::move(key), std::move(j));
    if (!inserted)
        throw std::runtime_error("duplicate judgment for (" + it->first.first + ", " +
                                 it->first.second + ")");
}

bool QrelsSet::contains(const std::string& topic_id, const std::string& doc_id) const {
    return entries.count({topic_id, doc_id}) > 0;
}

const Judgment* QrelsSet::find(const std::string& topic_id, const std::string& doc_id) const {
    auto it = entries.find({topic_id, doc_id});
    return it == entries.end() ? nullptr : &it->second;
}

QrelsSet parse_qrels(std::istream& in, Source source, const QrelsParseOptions& opts) {
    QrelsSet out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split_whitespace(line);
        if (fields.size() != 4)
            throw std::runtime_error(opts.stream_name + ":" + std::to_string(lineno) +
                                     ": expected 4 fields, got " + std::to_string(fields.size()));
        int grade = 0;
        try {
            std::size_t pos = 0;
            grade = std::stoi(fields[3], &pos);
            if (pos != fields[3].size()) throw std::invalid_argument("trailing chars");
        } catch (const std::exception&) {
            throw std::runtime_error(opts.stream_name + ":" + std::to_string(lineno) +
                                     ": grade '" + fields[3] + "' is not an integer");
        }

        Judgment j;
        j.topic_id = fields[0];
        j.doc_id = fields[2];
        j.source = source;
        if (opts.encoding == GradeEncoding::binary) {
            if (grade != 0 && grade != 1)
                throw std::runtime_error(opts.stream_name + ":" + std::to_string(lineno) +
                                         ": binary grade must be 0 or 1, got " + fields[3]);
            j.label = grade;
        } else {
            if (grade < 0 || grade > 2)
                throw std::runtime_error(opts.stream_name + ":" + std::to_string(lineno) +
                                         ": ternary grade must be in {0,1,2}, got " + fields[3]);
            j.raw_grade = grade;
            j.label = to_binary(grade, opts.mode);
        }
        if (out.contains(j.topic_id, j.doc_id))
            throw std::runtime_error(opts.stream_name + ":" + std::to_string(lineno) +
                                     ": duplicate judgment for (" + j.topic_id + ", " + j.doc_id +
                                     ")");
        out.add(std::move(j));
    }
    return out;
}

QrelsSet parse_qrels(const std::filesystem::path& path, Source source, BinaryMode mode,
                     GradeEncoding encoding) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open qrels file: " + path.string());
    QrelsParseOptions opts;
    opts.mode = mode;
    opts.encoding = encoding;
    opts.stream_name = path.string();
    return parse_qrels(in, source, opts);
}

QrelsSet merge(const QrelsSet& original, const QrelsSet& generated) {
    QrelsSet out;
    out.entries = generated.entries;
    for (const auto& [key, j] : original.entries) out.entries[key] = j;
    return out;
}

void write_qrels(const QrelsSet& qrels, std::ostream& out) {
    for (const auto& [key, j] : qrels.entries) {
        int grade = j.raw_grade.value_or(j.label);
        out << key.first << " 0 " << key.second << " " << grade << "\n";
    }
}

void write_qrels(const QrelsSet& qrels, const std::filesystem::path& path) {
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write qrels file: " + path.string());
        write_qrels(qrels, out);
        if (!out) throw std::runtime_error("write failed: " + path.string());
    }
    std::filesystem::path sidecar = path;
    sidecar += ".prov.jsonl";
    std::ofstream prov(sidecar, std::ios::binary);
    if (!prov) throw std::runtime_error("cannot write provenance sidecar: " + sidecar.string());
    for (const auto& [key, j] : qrels.entries) {
        nlohmann::ordered_json rec;
        rec["topic_id"] = key.first;
        rec["doc_id"] = key.second;
        rec["source"] = to_string(j.source);
        if (j.variant) rec["variant"] = *j.variant;
        if (j.status) rec["status"] = *j.status;
        if (j.timestamp) rec["timestamp"] = *j.timestamp;
        prov << rec.dump() << "\n";
    }
    if (!prov) throw std::runtime_error("write failed: " + sidecar.string());
}

void apply_provenance_sidecar(QrelsSet& qrels, const std::filesystem::path& sidecar_path) {
    std::ifstream in(sidecar_path);
    if (!in) throw std::runtime_error("cannot open provenance sidecar: " + sidecar_path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error(sidecar_path.string() + ":" + std::to_string(lineno) + ": " +
                                     e.what());
        }
        auto it = qrels.entries.find(
            {rec.at("topic_id").get<std::string>(), rec.at("doc_id").get<std::string>()});
        if (it == qrels.entries.end()) continue;
        Judgment& j = it->second;
        j.source = source_from_string(rec.at("source").get<std::string>());
        if (rec.contains("variant")) j.variant = rec["variant"].get<std::string>();
        if (rec.contains("status")) j.status = rec["status"].get<std::string>();
        if (rec.contains("timestamp")) j.timestamp = rec["timestamp"].get<std::string>();
        if (j.source != Source::human && j.raw_grade) {
            if (*j.raw_grade != 0 && *j.raw_grade != 1)
                throw std::runtime_error(sidecar_path.string() + ":" + std::to_string(lineno) +
                                         ": judge-sourced grade must be 0 or 1 for (" +
                                         j.topic_id + ", " + j.doc_id + "), got " +
                                         std::to_string(*j.raw_grade));
            j.label = *j.raw_grade;
            j.raw_grade.reset();
        }
    }
}

}  // namespace qrelex
