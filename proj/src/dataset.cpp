#include "qrelex/dataset.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "qrelex/util.hpp"

namespace qrelex {

using nlohmann::json;

std::string to_string(MediaType t) {
    return t == MediaType::jpeg ? "jpeg" : "png";
}

std::string mime_type(MediaType t) {
    return t == MediaType::jpeg ? "image/jpeg" : "image/png";
}

namespace {

// Media type from an explicit field or the URI extension.
MediaType resolve_media_type(const json& rec, const std::string& uri,
                             const std::string& file, std::size_t line_no) {
    if (rec.contains("media_type")) {
        std::string mt = rec.at("media_type").get<std::string>();
        if (mt == "jpeg" || mt == "jpg") return MediaType::jpeg;
        if (mt == "png") return MediaType::png;
        throw std::runtime_error(file + ":" + std::to_string(line_no) +
                                 ": field 'media_type': unsupported value '" + mt + "'");
    }
    std::string lower = lowercase(uri);
    auto ends_with = [&](std::string_view suffix) {
        return lower.size() >= suffix.size() &&
               lower.compare(lower.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".jpg") || ends_with(".jpeg")) return MediaType::jpeg;
    if (ends_with(".png")) return MediaType::png;
    throw std::runtime_error(file + ":" + std::to_string(line_no) +
                             ": field 'images.uri': cannot resolve media type of '" + uri + "'");
}

std::vector<ImageRef> parse_images(const json& rec, const std::string& file, std::size_t line_no) {
    std::vector<ImageRef> out;
    if (!rec.contains("images")) return out;
    const json& arr = rec.at("images");
    if (!arr.is_array())
        throw std::runtime_error(file + ":" + std::to_string(line_no) +
                                 ": field 'images': expected an array");
    for (const json& img : arr) {
        ImageRef ref;
        if (!img.contains("uri") || !img.at("uri").is_string() ||
            img.at("uri").get<std::string>().empty())
            throw std::runtime_error(file + ":" + std::to_string(line_no) +
                                     ": field 'images.uri': missing or empty");
        ref.uri = img.at("uri").get<std::string>();
        ref.caption = img.value("caption", std::string{});
        ref.media_type = resolve_media_type(img, ref.uri, file, line_no);
        out.push_back(std::move(ref));
    }
    return out;
}

json parse_record(const std::string& line, const std::string& file, std::size_t line_no) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw std::runtime_error(file + ":" + std::to_string(line_no) +
                                 ": malformed record: " + e.what());
    }
}

std::string require_string(const json& rec, const char* field, const std::string& file,
                           std::size_t line_no, bool allow_empty = true) {
    if (!rec.contains(field) || !rec.at(field).is_string())
        throw std::runtime_error(file + ":" + std::to_string(line_no) + ": field '" + field +
                                 "': missing or not a string");
    std::string v = rec.at(field).get<std::string>();
    if (!allow_empty && v.empty())
        throw std::runtime_error(file + ":" + std::to_string(line_no) + ": field '" + field +
                                 "': must be non-empty");
    return v;
}

}  // namespace

Collection load_collection(const std::filesystem::path& corpus_path,
                           const std::filesystem::path& topics_path) {
    Collection collection;

    {
        std::ifstream in(corpus_path);
        if (!in) throw std::runtime_error("cannot open corpus file: " + corpus_path.string());
        const std::string file = corpus_path.string();
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            json rec = parse_record(line, file, line_no);

            Document doc;
            doc.doc_id = require_string(rec, "doc_id", file, line_no, /*allow_empty=*/false);
            doc.title = rec.value("title", std::string{});
            doc.abstract = rec.value("abstract", std::string{});
            doc.fulltext = rec.value("fulltext", std::string{});
            if (rec.contains("authors")) {
                if (!rec.at("authors").is_array())
                    throw std::runtime_error(file + ":" + std::to_string(line_no) +
                                             ": field 'authors': expected an array");
                for (const json& a : rec.at("authors")) doc.authors.push_back(a.get<std::string>());
            }
            doc.images = parse_images(rec, file, line_no);

            auto [it, inserted] = collection.documents.emplace(doc.doc_id, std::move(doc));
            if (!inserted)
                throw std::runtime_error(file + ":" + std::to_string(line_no) +
                                         ": duplicate doc_id '" + it->first + "'");
        }
    }

    {
        std::ifstream in(topics_path);
        if (!in) throw std::runtime_error("cannot open topics file: " + topics_path.string());
        const std::string file = topics_path.string();
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            json rec = parse_record(line, file, line_no);

            Topic topic;
            topic.topic_id = require_string(rec, "topic_id", file, line_no, /*allow_empty=*/false);
            topic.description =
                require_string(rec, "description", file, line_no, /*allow_empty=*/false);
            topic.images = parse_images(rec, file, line_no);

            auto [it, inserted] = collection.topics.emplace(topic.topic_id, std::move(topic));
            if (!inserted)
                throw std::runtime_error(file + ":" + std::to_string(line_no) +
                                         ": duplicate topic_id '" + it->first + "'");
        }
    }

    collection.stats = census(collection);
    return collection;
}

CollectionStats census(const Collection& collection) {
    CollectionStats s;
    s.documents = collection.documents.size();
    s.topics = collection.topics.size();
    for (const auto& [id, doc] : collection.documents) s.document_images += doc.images.size();
    for (const auto& [id, topic] : collection.topics) s.topic_images += topic.images.size();
    return s;
}

}  // namespace qrelex
