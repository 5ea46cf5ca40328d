#include "qrelex/judge.hpp"

#include <cctype>
#include <cstdlib>
#include <set>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "qrelex/util.hpp"

namespace qrelex {

std::string to_string(VerdictStatus status) {
    switch (status) {
        case VerdictStatus::parsed: return "parsed";
        case VerdictStatus::blocked_fallback: return "blocked_fallback";
        case VerdictStatus::retried_then_parsed: return "retried_then_parsed";
    }
    throw std::logic_error("bad verdict status");
}

VerdictStatus verdict_status_from_string(const std::string& name) {
    if (name == "parsed") return VerdictStatus::parsed;
    if (name == "blocked_fallback") return VerdictStatus::blocked_fallback;
    if (name == "retried_then_parsed") return VerdictStatus::retried_then_parsed;
    throw std::runtime_error("unknown verdict status '" + name + "'");
}

std::optional<int> parse_label(const std::string& raw, ParseMode mode) {
    std::string trimmed = trim(raw);
    if (trimmed == "0") return 0;
    if (trimmed == "1") return 1;
    if (mode == ParseMode::strict) return std::nullopt;

    std::optional<int> found;
    for (const std::string& token : split_whitespace(trimmed)) {
        std::size_t begin = 0;
        std::size_t end = token.size();
        while (begin < end && !std::isalnum(static_cast<unsigned char>(token[begin]))) ++begin;
        while (end > begin && !std::isalnum(static_cast<unsigned char>(token[end - 1]))) --end;
        std::string core = token.substr(begin, end - begin);
        if (core != "0" && core != "1") continue;
        int value = core == "1" ? 1 : 0;
        if (found && *found != value) return std::nullopt;
        found = value;
    }
    return found;
}

void BackendConfig::validate() const {
    if (max_in_flight < 1) throw std::runtime_error("max_in_flight must be >= 1");
    if (timeout_ms <= 0) throw std::runtime_error("timeout must be > 0");
    if (max_retries < 0) throw std::runtime_error("max_retries must be >= 0");
    if (max_output_tokens < 1) throw std::runtime_error("max_output_tokens must be >= 1");
}

namespace {

class SlotGuard {
public:
    SlotGuard(std::mutex& m, std::condition_variable& cv, int& free_slots)
        : mutex_(m), cv_(cv), free_(free_slots) {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return free_ > 0; });
        --free_;
    }
    ~SlotGuard() {
        {
            std::lock_guard lock(mutex_);
            ++free_;
        }
        cv_.notify_one();
    }

private:
    std::mutex& mutex_;
    std::condition_variable& cv_;
    int& free_;
};

struct Endpoint {
    std::string base;
    std::string path;
};

Endpoint split_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw std::runtime_error("endpoint must include a scheme: " + endpoint);
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

bool is_blocked_response(const nlohmann::json& body) {
    if (body.value("blocked", false)) return true;
    if (body.contains("choices") && body["choices"].is_array() && !body["choices"].empty()) {
        const auto& choice = body["choices"][0];
        if (choice.value("finish_reason", "") == "content_filter") return true;
    }
    return false;
}

std::string response_text(const nlohmann::json& body) {
    if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty())
        throw std::runtime_error("response carries no choices");
    const auto& message = body["choices"][0].at("message");
    return message.at("content").get<std::string>();
}

}  // namespace

HttpJudgeBackend::HttpJudgeBackend(BackendConfig config, ImageLoader loader)
    : config_(std::move(config)), loader_(std::move(loader)) {
    config_.validate();
    if (config_.endpoint.empty()) throw std::runtime_error("endpoint is required");
    slots_free_ = config_.max_in_flight;
    rate_last_ = std::chrono::steady_clock::now();
    rate_tokens_ = config_.requests_per_second > 0 ? 1.0 : 0.0;
    if (!loader_)
        loader_ = [](const ImageRef& ref) { return load_image(ref, ImageLoadOptions{}); };
}

std::string HttpJudgeBackend::build_request(const PromptBundle& bundle) const {
    nlohmann::ordered_json req;
    if (!config_.model.empty()) req["model"] = config_.model;
    req["temperature"] = config_.temperature;
    req["max_tokens"] = config_.max_output_tokens;
    req["messages"] = nlohmann::json::array();
    for (const Message& message : bundle.messages) {
        nlohmann::ordered_json m;
        m["role"] = to_string(message.role);
        m["content"] = nlohmann::json::array();
        for (const MessagePart& part : message.parts) {
            if (part.kind == MessagePart::Kind::text) {
                m["content"].push_back({{"type", "text"}, {"text", part.text}});
            } else {
                LoadedImage img = loader_(part.image);
                std::string data_uri = "data:" + mime_type(part.image.media_type) + ";base64," +
                                       base64_encode(img.bytes.data(), img.bytes.size());
                m["content"].push_back(
                    {{"type", "image_url"}, {"image_url", {{"url", data_uri}}}});
            }
        }
        req["messages"].push_back(std::move(m));
    }
    req["metadata"] = {{"topic_id", bundle.topic_id}, {"doc_id", bundle.doc_id}};
    return req.dump();
}

JudgeVerdict HttpJudgeBackend::judge(const PromptBundle& bundle) {
    if (config_.requests_per_second > 0) {
        std::unique_lock lock(rate_mutex_);
        for (;;) {
            auto now = std::chrono::steady_clock::now();
            double elapsed = std::chrono::duration<double>(now - rate_last_).count();
            rate_last_ = now;
            double burst = std::max(1.0, config_.requests_per_second);
            rate_tokens_ = std::min(burst, rate_tokens_ + elapsed * config_.requests_per_second);
            if (rate_tokens_ >= 1.0) {
                rate_tokens_ -= 1.0;
                break;
            }
            double wait_s = (1.0 - rate_tokens_) / config_.requests_per_second;
            lock.unlock();
            std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
            lock.lock();
        }
    }

    SlotGuard slot(slots_mutex_, slots_cv_, slots_free_);

    std::string token;
    if (!config_.credential_env.empty()) {
        const char* value = std::getenv(config_.credential_env.c_str());
        if (!value || !*value)
            throw std::runtime_error("credential environment variable " + config_.credential_env +
                                     " is not set");
        token = value;
    }

    const std::string payload = build_request(bundle);
    const Endpoint endpoint = split_endpoint(config_.endpoint);
    const auto started = std::chrono::steady_clock::now();

    auto elapsed_ms = [&] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
    };
    auto backoff_for = [&](int attempt) {
        if (config_.backoff_ms.empty()) return std::chrono::milliseconds(0);
        std::size_t i = std::min<std::size_t>(attempt - 1, config_.backoff_ms.size() - 1);
        return std::chrono::milliseconds(config_.backoff_ms[i]);
    };

    std::string last_error;
    for (int attempt = 1; attempt <= config_.max_retries + 1; ++attempt) {
        httplib::Client client(endpoint.base);
        client.set_connection_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
        client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
        client.set_write_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
        httplib::Headers headers;
        if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

        auto res = client.Post(endpoint.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
        } else if (res->status == 429 || res->status >= 500) {
            last_error = "endpoint returned status " + std::to_string(res->status);
        } else if (res->status != 200) {
            throw std::runtime_error("judge endpoint rejected the request with status " +
                                     std::to_string(res->status) + ": " + res->body);
        } else {
            nlohmann::json body;
            try {
                body = nlohmann::json::parse(res->body);
            } catch (const std::exception& e) {
                last_error = std::string("unparseable response body: ") + e.what();
                body = nullptr;
            }
            if (!body.is_null()) {
                if (is_blocked_response(body)) {
                    JudgeVerdict v;
                    v.label = 0;
                    v.status = VerdictStatus::blocked_fallback;
                    v.attempts = attempt;
                    v.raw_response = "(blocked by endpoint)";
                    v.latency = elapsed_ms();
                    return v;
                }
                bool have_text = false;
                std::string text;
                try {
                    text = response_text(body);
                    have_text = true;
                } catch (const std::exception& e) {
                    last_error = e.what();
                }
                if (have_text) {
                    if (auto label = parse_label(text, config_.parse_mode)) {
                        JudgeVerdict v;
                        v.label = *label;
                        v.status = attempt == 1 ? VerdictStatus::parsed
                                                : VerdictStatus::retried_then_parsed;
                        v.attempts = attempt;
                        v.raw_response = text;
                        v.latency = elapsed_ms();
                        return v;
                    }
                    last_error = "unparseable verdict: '" + text + "'";
                    if (attempt > config_.max_retries &&
                        config_.parse_policy == ParseFailurePolicy::fallback_zero) {
                        JudgeVerdict v;
                        v.label = 0;
                        v.status = VerdictStatus::blocked_fallback;
                        v.attempts = attempt;
                        v.raw_response = text;
                        v.latency = elapsed_ms();
                        return v;
                    }
                }
            }
        }
        if (attempt <= config_.max_retries) std::this_thread::sleep_for(backoff_for(attempt));
    }
    throw std::runtime_error("judge call failed after " + std::to_string(config_.max_retries + 1) +
                             " attempts for (" + bundle.topic_id + ", " + bundle.doc_id +
                             "): " + last_error);
}

double jaccard_overlap(const std::string& a, const std::string& b) {
    auto tokenize = [](const std::string& text) {
        std::set<std::string> tokens;
        std::string current;
        for (char c : text) {
            if (std::isalnum(static_cast<unsigned char>(c))) {
                current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            } else if (!current.empty()) {
                tokens.insert(current);
                current.clear();
            }
        }
        if (!current.empty()) tokens.insert(current);
        return tokens;
    };
    std::set<std::string> ta = tokenize(a);
    std::set<std::string> tb = tokenize(b);
    if (ta.empty() && tb.empty()) return 0.0;
    std::size_t both = 0;
    for (const auto& t : ta) both += tb.count(t);
    std::size_t either = ta.size() + tb.size() - both;
    return either == 0 ? 0.0 : static_cast<double>(both) / either;
}

void MockJudgeBackend::set_fixture(std::map<std::pair<std::string, std::string>, int> fixture) {
    fixture_ = std::move(fixture);
}

void MockJudgeBackend::set_heuristic(const Collection* collection, double threshold) {
    collection_ = collection;
    threshold_ = threshold;
    heuristic_ = true;
}

JudgeVerdict MockJudgeBackend::judge(const PromptBundle& bundle) {
    int label = 0;
    auto it = fixture_.find({bundle.topic_id, bundle.doc_id});
    if (it != fixture_.end()) {
        label = it->second;
    } else if (heuristic_ && collection_) {
        auto topic = collection_->topics.find(bundle.topic_id);
        auto doc = collection_->documents.find(bundle.doc_id);
        if (topic == collection_->topics.end() || doc == collection_->documents.end())
            throw std::runtime_error("mock oracle has no fixture for (" + bundle.topic_id + ", " +
                                     bundle.doc_id + ") and the collection lacks the pair");
        double overlap = jaccard_overlap(topic->second.description,
                                         doc->second.title + " " + doc->second.abstract);
        label = overlap >= threshold_ ? 1 : 0;
    } else {
        throw std::runtime_error("mock oracle undefined for (" + bundle.topic_id + ", " +
                                 bundle.doc_id + ")");
    }
    JudgeVerdict v;
    v.label = label;
    v.status = VerdictStatus::parsed;
    v.attempts = 1;
    v.raw_response = std::to_string(label);
    v.latency = std::chrono::milliseconds(0);
    return v;
}

}  // namespace qrelex
