#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qrelex/dataset.hpp"
#include "qrelex/prompts.hpp"

namespace qrelex {

enum class VerdictStatus { parsed, blocked_fallback, retried_then_parsed };

std::string to_string(VerdictStatus status);
VerdictStatus verdict_status_from_string(const std::string& name);

struct JudgeVerdict {
    int label = 0;
    VerdictStatus status = VerdictStatus::parsed;
    int attempts = 1;
    std::string raw_response;
    std::chrono::milliseconds latency{0};
};

enum class ParseMode { strict, lenient };
enum class ParseFailurePolicy { error, fallback_zero };

std::optional<int> parse_label(const std::string& raw, ParseMode mode = ParseMode::strict);

struct BackendConfig {
    std::string endpoint;
    std::string credential_env;
    std::string model;
    int timeout_ms = 30000;
    int max_retries = 3;
    std::vector<int> backoff_ms = {100, 500, 2000};
    int max_in_flight = 4;
    double temperature = 0.0;
    int max_output_tokens = 8;
    double requests_per_second = 0.0;
    ParseMode parse_mode = ParseMode::strict;
    ParseFailurePolicy parse_policy = ParseFailurePolicy::error;

    void validate() const;
};

class JudgeBackend {
public:
    virtual ~JudgeBackend() = default;
    virtual JudgeVerdict judge(const PromptBundle& bundle) = 0;
};

using ImageLoader = std::function<LoadedImage(const ImageRef&)>;

class HttpJudgeBackend : public JudgeBackend {
public:
    explicit HttpJudgeBackend(BackendConfig config, ImageLoader loader = nullptr);
    JudgeVerdict judge(const PromptBundle& bundle) override;

private:
    std::string build_request(const PromptBundle& bundle) const;

    BackendConfig config_;
    ImageLoader loader_;

    std::mutex slots_mutex_;
    std::condition_variable slots_cv_;
    int slots_free_ = 0;

    std::mutex rate_mutex_;
    double rate_tokens_ = 0.0;
    std::chrono::steady_clock::time_point rate_last_;
};

class MockJudgeBackend : public JudgeBackend {
public:
    MockJudgeBackend() = default;

    void set_fixture(std::map<std::pair<std::string, std::string>, int> fixture);
    void set_heuristic(const Collection* collection, double threshold);

    JudgeVerdict judge(const PromptBundle& bundle) override;

private:
    std::map<std::pair<std::string, std::string>, int> fixture_;
    const Collection* collection_ = nullptr;
    double threshold_ = 0.2;
    bool heuristic_ = false;
};

double jaccard_overlap(const std::string& a, const std::string& b);

}  // namespace qrelex
