#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace qrelex {

enum class MediaType { jpeg, png };

std::string to_string(MediaType t);
std::string mime_type(MediaType t);

struct ImageRef {
    std::string uri;      // relative path or URI; never empty
    std::string caption;  // may be empty
    MediaType media_type = MediaType::jpeg;

    bool operator==(const ImageRef&) const = default;
};

struct Document {
    std::string doc_id;
    std::string title;
    std::vector<std::string> authors;
    std::string abstract;
    std::string fulltext;
    std::vector<ImageRef> images;

    bool operator==(const Document&) const = default;
};

struct Topic {
    std::string topic_id;
    std::string description;  // case narrative; never empty
    std::vector<ImageRef> images;

    bool operator==(const Topic&) const = default;
};

struct CollectionStats {
    std::uint64_t documents = 0;
    std::uint64_t document_images = 0;
    std::uint64_t topics = 0;
    std::uint64_t topic_images = 0;

    bool operator==(const CollectionStats&) const = default;
};

struct Collection {
    std::map<std::string, Document> documents;
    std::map<std::string, Topic> topics;
    CollectionStats stats;

    bool operator==(const Collection&) const = default;
};

/// Parse the corpus (one JSON record per line: doc_id, title, authors[],
/// abstract, fulltext, images[{uri, caption, media_type?}]) and the topics
/// file (one JSON record per line: topic_id, description, images[...]).
/// Image URIs are recorded as-is; no image bytes are read here.
///
/// Throws on a malformed record (message carries line number and field) and
/// on duplicate doc_id/topic_id (message carries the key).
Collection load_collection(const std::filesystem::path& corpus_path,
                           const std::filesystem::path& topics_path);

/// Recount documents/images/topics from the underlying sets.
CollectionStats census(const Collection& collection);

// ---- image loading (lazy; used at judging time) ----

enum class OversizePolicy { downscale, reject };

struct ImageLoadOptions {
    std::filesystem::path base_dir;    // relative URIs resolve against this
    std::size_t max_bytes = 0;         // 0 = unlimited
    OversizePolicy policy = OversizePolicy::downscale;
};

struct LoadedImage {
    ImageRef ref;
    std::vector<unsigned char> bytes;  // encoded jpeg/png, ready to send
};

/// Load one image's bytes. Files over max_bytes are re-encoded at reduced
/// resolution (downscale policy) or rejected. Throws with the URI in the
/// message when the file is unreachable or cannot be decoded.
LoadedImage load_image(const ImageRef& ref, const ImageLoadOptions& opts);

std::vector<LoadedImage> resolve_images(const Document& doc, const ImageLoadOptions& opts);
std::vector<LoadedImage> resolve_images(const Topic& topic, const ImageLoadOptions& opts);

}  // namespace qrelex
