#pragma once

// Shared synthetic fixtures for the test suites.

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "qrelex/dataset.hpp"
#include "qrelex/qrels.hpp"
#include "qrelex/util.hpp"

namespace fixtures {

// Per-topic (relevant, not relevant) counts of the 35-topic human judgment
// census used by the distribution and subset tests.
inline constexpr std::pair<int, int> kTopicCounts[] = {
    {21, 369}, {3, 477},   {3, 468},  {4, 476},  {34, 377}, {54, 377}, {33, 410},
    {40, 364}, {3, 393},   {1, 415},  {1, 433},  {3, 380},  {24, 392}, {58, 398},
    {5, 461},  {2, 440},   {1, 458},  {10, 381}, {17, 410}, {32, 378}, {32, 439},
    {53, 406}, {38, 359},  {11, 452}, {3, 465},  {101, 333}, {8, 397}, {7, 371},
    {15, 433}, {41, 401},  {2, 448},  {26, 407}, {4, 368},  {9, 410},  {10, 373},
};
inline constexpr std::size_t kTopicCount = sizeof(kTopicCounts) / sizeof(kTopicCounts[0]);

inline std::string census_topic_id(std::size_t i) {  // 1-based
    char buf[16];
    std::snprintf(buf, sizeof(buf), "t%02u", static_cast<unsigned>(i));
    return buf;
}

inline std::string padded_doc_id(const char* prefix, std::size_t i) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%s%04u", prefix, static_cast<unsigned>(i));
    return buf;
}

// The census as an in-memory set with binary labels.
inline qrelex::QrelsSet census_qrels() {
    qrelex::QrelsSet out;
    for (std::size_t t = 1; t <= kTopicCount; ++t) {
        auto [rel, not_rel] = kTopicCounts[t - 1];
        for (int i = 1; i <= rel; ++i) {
            qrelex::Judgment j;
            j.topic_id = census_topic_id(t);
            j.doc_id = padded_doc_id("r", i);
            j.label = 1;
            out.add(std::move(j));
        }
        for (int i = 1; i <= not_rel; ++i) {
            qrelex::Judgment j;
            j.topic_id = census_topic_id(t);
            j.doc_id = padded_doc_id("n", i);
            j.label = 0;
            out.add(std::move(j));
        }
    }
    return out;
}

// Same census as a binary-encoded qrels file.
inline void write_census_qrels(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    for (std::size_t t = 1; t <= kTopicCount; ++t) {
        auto [rel, not_rel] = kTopicCounts[t - 1];
        for (int i = 1; i <= rel; ++i)
            out << census_topic_id(t) << " 0 " << padded_doc_id("r", i) << " 1\n";
        for (int i = 1; i <= not_rel; ++i)
            out << census_topic_id(t) << " 0 " << padded_doc_id("n", i) << " 0\n";
    }
}

inline std::filesystem::path unique_temp_dir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    auto dir = std::filesystem::temp_directory_path() /
               ("qrelex-" + tag + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

// ---- prompt golden fixtures ----

inline qrelex::Topic golden_topic() {
    qrelex::Topic t;
    t.topic_id = "t1";
    t.description = "A 42 year old woman with fever and joint pain.";
    t.images = {{"case1.png", "Chest CT on admission", qrelex::MediaType::png}};
    return t;
}

inline qrelex::Document golden_example() {
    qrelex::Document d;
    d.doc_id = "d-ex";
    d.title = "Adult-onset Still disease: a case report";
    d.authors = {"Rivera, M.", "Chen, L."};
    d.abstract = "We report a case of adult-onset Still disease presenting with spiking fever.";
    d.fulltext = "The patient presented with quotidian fever and arthralgia responding to steroids.";
    d.images = {{"ex1.jpg", "Ferritin trend during treatment", qrelex::MediaType::jpeg}};
    return d;
}

inline qrelex::Document golden_eval() {
    qrelex::Document d;
    d.doc_id = "d9";
    d.title = "MRI findings in early rheumatoid arthritis";
    d.authors = {"Okafor, A."};
    d.abstract = "A review of MRI findings of synovitis in early rheumatoid arthritis.";
    d.fulltext = "Erosions and bone marrow edema are early markers of aggressive disease.";
    d.images = {{"f1.jpg", "Coronal T1 image of the wrist", qrelex::MediaType::jpeg},
                {"f2.png", "", qrelex::MediaType::png}};
    return d;
}

// ---- synthetic collection on disk ----

struct CollectionFiles {
    std::filesystem::path corpus;
    std::filesystem::path topics;
};

inline std::string synth_topic_id(int i) { return "t" + std::to_string(i); }
inline std::string synth_doc_id(int i) { return "d" + std::to_string(i); }

// n_topics topics and n_docs documents with deterministic text; no images.
inline CollectionFiles write_collection(const std::filesystem::path& dir, int n_topics,
                                        int n_docs) {
    CollectionFiles files{dir / "corpus.jsonl", dir / "topics.jsonl"};
    {
        std::ofstream out(files.corpus, std::ios::binary);
        for (int i = 1; i <= n_docs; ++i) {
            nlohmann::ordered_json rec;
            rec["doc_id"] = synth_doc_id(i);
            rec["title"] = "Case study number " + std::to_string(i);
            rec["authors"] = {"Author " + std::to_string(i % 7)};
            rec["abstract"] = "Findings for condition " + std::to_string(i % 5) + ".";
            rec["fulltext"] = "Full discussion of condition " + std::to_string(i % 5) +
                              " with follow-up " + std::to_string(i) + ".";
            out << rec.dump() << "\n";
        }
    }
    {
        std::ofstream out(files.topics, std::ios::binary);
        for (int i = 1; i <= n_topics; ++i) {
            nlohmann::ordered_json rec;
            rec["topic_id"] = synth_topic_id(i);
            rec["description"] = "Patient with presentation " + std::to_string(i) + ".";
            out << rec.dump() << "\n";
        }
    }
    return files;
}

// One run file listing the given docs per topic at ranks 1..k.
inline void write_run(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::vector<std::string>>>& rows,
                      const std::string& tag = "sys") {
    std::ofstream out(path, std::ios::binary);
    for (const auto& [topic, docs] : rows)
        for (std::size_t i = 0; i < docs.size(); ++i)
            out << topic << " Q0 " << docs[i] << " " << (i + 1) << " "
                << (1000.0 - static_cast<double>(i)) << " " << tag << "\n";
}

inline void write_qrels_file(const std::filesystem::path& path,
                             const std::vector<std::tuple<std::string, std::string, int>>& rows) {
    std::ofstream out(path, std::ios::binary);
    for (const auto& [topic, doc, grade] : rows)
        out << topic << " 0 " << doc << " " << grade << "\n";
}

inline void write_mock_fixture(
    const std::filesystem::path& path,
    const std::vector<std::tuple<std::string, std::string, int>>& verdicts) {
    std::ofstream out(path, std::ios::binary);
    for (const auto& [topic, doc, label] : verdicts) {
        nlohmann::ordered_json rec;
        rec["topic_id"] = topic;
        rec["doc_id"] = doc;
        rec["label"] = label;
        out << rec.dump() << "\n";
    }
}

// Encoded noise image of the requested size; noise keeps the payload large
// enough that byte-budget tests bite.
inline void write_test_image(const std::filesystem::path& path, int width, int height,
                             bool png) {
    cv::Mat img(height, width, CV_8UC3);
    qrelex::SplitMix64 rng(42);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            std::uint64_t v = rng.next();
            img.at<cv::Vec3b>(y, x) =
                cv::Vec3b(static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16));
        }
    std::vector<unsigned char> bytes;
    cv::imencode(png ? ".png" : ".jpg", img, bytes);
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
    return qrelex::read_file(path);
}

}  // namespace fixtures
