#pragma once

// Scripted chat-completions stub. Each (topic, doc) key carries a queue of
// actions; the stub replays them across retries and keeps repeating the last
// one. Requests are keyed off the request metadata.

#include <chrono>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

namespace stub {

struct Action {
    enum class Kind { reply, block, content_filter, http_error, garbage, no_choices };
    Kind kind = Kind::reply;
    std::string text = "0";
    int status = 500;
    int delay_ms = 0;
};

inline Action reply(std::string text, int delay_ms = 0) {
    Action a;
    a.kind = Action::Kind::reply;
    a.text = std::move(text);
    a.delay_ms = delay_ms;
    return a;
}

inline Action block() {
    Action a;
    a.kind = Action::Kind::block;
    return a;
}

inline Action content_filter() {
    Action a;
    a.kind = Action::Kind::content_filter;
    return a;
}

inline Action http_error(int status) {
    Action a;
    a.kind = Action::Kind::http_error;
    a.status = status;
    return a;
}

inline Action garbage() {
    Action a;
    a.kind = Action::Kind::garbage;
    return a;
}

inline Action no_choices() {
    Action a;
    a.kind = Action::Kind::no_choices;
    return a;
}

class JudgeStub {
public:
    JudgeStub() {
        server_.Post("/v1/chat/completions",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         handle(req, res);
                     });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~JudgeStub() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    std::string endpoint() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    }

    void script(const std::string& topic, const std::string& doc, std::vector<Action> actions) {
        std::lock_guard lock(mutex_);
        scripts_[{topic, doc}] = std::deque<Action>(actions.begin(), actions.end());
    }

    void set_default(Action action) {
        std::lock_guard lock(mutex_);
        default_ = std::move(action);
    }

    std::vector<std::pair<std::string, std::string>> requests() const {
        std::lock_guard lock(mutex_);
        return requests_;
    }

    std::vector<std::string> auth_headers() const {
        std::lock_guard lock(mutex_);
        return auth_headers_;
    }

    int max_concurrent() const {
        std::lock_guard lock(mutex_);
        return max_concurrent_;
    }

    nlohmann::json last_body() const {
        std::lock_guard lock(mutex_);
        return last_body_;
    }

private:
    void handle(const httplib::Request& req, httplib::Response& res) {
        Action action;
        {
            std::lock_guard lock(mutex_);
            ++concurrent_;
            if (concurrent_ > max_concurrent_) max_concurrent_ = concurrent_;
            nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
            last_body_ = body;
            std::string topic;
            std::string doc;
            if (body.is_object() && body.contains("metadata")) {
                topic = body["metadata"].value("topic_id", "");
                doc = body["metadata"].value("doc_id", "");
            }
            requests_.emplace_back(topic, doc);
            auth_headers_.push_back(req.get_header_value("Authorization"));
            auto it = scripts_.find({topic, doc});
            if (it != scripts_.end() && !it->second.empty()) {
                action = it->second.front();
                if (it->second.size() > 1) it->second.pop_front();
            } else {
                action = default_;
            }
        }
        if (action.delay_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(action.delay_ms));
        {
            std::lock_guard lock(mutex_);
            --concurrent_;
        }

        switch (action.kind) {
            case Action::Kind::reply: {
                nlohmann::ordered_json body;
                body["choices"] = {{{"message", {{"role", "assistant"}, {"content", action.text}}},
                                   {"finish_reason", "stop"}}};
                res.set_content(body.dump(), "application/json");
                break;
            }
            case Action::Kind::block: {
                nlohmann::ordered_json body;
                body["blocked"] = true;
                res.set_content(body.dump(), "application/json");
                break;
            }
            case Action::Kind::content_filter: {
                nlohmann::ordered_json body;
                body["choices"] = {{{"message", {{"role", "assistant"}, {"content", ""}}},
                                   {"finish_reason", "content_filter"}}};
                res.set_content(body.dump(), "application/json");
                break;
            }
            case Action::Kind::http_error:
                res.status = action.status;
                res.set_content("stub error", "text/plain");
                break;
            case Action::Kind::garbage:
                res.set_content("this is not json {{{", "application/json");
                break;
            case Action::Kind::no_choices:
                res.set_content("{\"choices\": []}", "application/json");
                break;
        }
    }

    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;

    mutable std::mutex mutex_;
    std::map<std::pair<std::string, std::string>, std::deque<Action>> scripts_;
    Action default_;
    std::vector<std::pair<std::string, std::string>> requests_;
    std::vector<std::string> auth_headers_;
    nlohmann::json last_body_;
    int concurrent_ = 0;
    int max_concurrent_ = 0;
};

}  // namespace stub
