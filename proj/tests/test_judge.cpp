#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>
#include <vector>

#include "qrelex/judge.hpp"
#include "support/fixtures.hpp"
#include "support/stub_server.hpp"

using namespace qrelex;

namespace {

PromptBundle make_bundle(const std::string& topic = "t1", const std::string& doc = "d1") {
    PromptBundle bundle;
    bundle.variant = PromptVariant::zero_shot_with_system;
    bundle.topic_id = topic;
    bundle.doc_id = doc;
    Message sys;
    sys.role = Role::system;
    sys.parts.push_back(MessagePart::make_text("instructions"));
    Message user;
    user.role = Role::user;
    user.parts.push_back(MessagePart::make_text("Only answer 0 or 1."));
    bundle.messages = {sys, user};
    return bundle;
}

BackendConfig stub_config(const stub::JudgeStub& server) {
    BackendConfig config;
    config.endpoint = server.endpoint();
    config.timeout_ms = 5000;
    config.max_retries = 2;
    config.backoff_ms = {1, 2};
    return config;
}

}  // namespace

TEST_CASE("parse_label strict accepts only a bare 0 or 1") {
    CHECK(parse_label("0") == 0);
    CHECK(parse_label("1") == 1);
    CHECK(parse_label("  1 \n") == 1);
    CHECK(parse_label("The article is relevant. 1") == std::nullopt);
    CHECK(parse_label("01") == std::nullopt);
    CHECK(parse_label("yes") == std::nullopt);
    CHECK(parse_label("") == std::nullopt);
    CHECK(parse_label("1.") == std::nullopt);
}

TEST_CASE("parse_label lenient extracts an unambiguous binary token") {
    CHECK(parse_label("The article is relevant. 1", ParseMode::lenient) == 1);
    CHECK(parse_label("relevance: 1 (relevant)", ParseMode::lenient) == 1);
    CHECK(parse_label("I'd say 1.", ParseMode::lenient) == 1);
    CHECK(parse_label("Score = 0", ParseMode::lenient) == 0);
    CHECK(parse_label("0 0 zero", ParseMode::lenient) == 0);
    CHECK(parse_label("0 or 1", ParseMode::lenient) == std::nullopt);
    CHECK(parse_label("10", ParseMode::lenient) == std::nullopt);
    CHECK(parse_label("definitely relevant", ParseMode::lenient) == std::nullopt);
    CHECK(parse_label("", ParseMode::lenient) == std::nullopt);
}

TEST_CASE("verdict status names round trip") {
    for (VerdictStatus s : {VerdictStatus::parsed, VerdictStatus::blocked_fallback,
                            VerdictStatus::retried_then_parsed})
        CHECK(verdict_status_from_string(to_string(s)) == s);
    CHECK_THROWS_WITH_AS(verdict_status_from_string("maybe"),
                         doctest::Contains("unknown verdict status 'maybe'"), std::runtime_error);
}

TEST_CASE("BackendConfig::validate rejects out-of-range settings") {
    BackendConfig config;
    config.endpoint = "http://localhost/v1";
    CHECK_NOTHROW(config.validate());

    BackendConfig bad = config;
    bad.max_in_flight = 0;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("max_in_flight must be >= 1"),
                         std::runtime_error);
    bad = config;
    bad.timeout_ms = 0;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("timeout must be > 0"),
                         std::runtime_error);
    bad = config;
    bad.max_retries = -1;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("max_retries must be >= 0"),
                         std::runtime_error);
    bad = config;
    bad.max_output_tokens = 0;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("max_output_tokens must be >= 1"),
                         std::runtime_error);
}

TEST_CASE("jaccard_overlap compares lowercase alphanumeric token sets") {
    CHECK(jaccard_overlap("Liver lesion CT", "ct of LIVER") == doctest::Approx(0.5));
    CHECK(jaccard_overlap("alpha beta", "alpha beta") == doctest::Approx(1.0));
    CHECK(jaccard_overlap("alpha", "beta") == doctest::Approx(0.0));
    CHECK(jaccard_overlap("", "") == doctest::Approx(0.0));
    CHECK(jaccard_overlap("fever, (joint)!", "joint fever") == doctest::Approx(1.0));
}

TEST_CASE("MockJudgeBackend answers from the fixture, then the heuristic") {
    MockJudgeBackend mock;

    SUBCASE("no fixture and no heuristic is an error") {
        CHECK_THROWS_WITH_AS(mock.judge(make_bundle()),
                             doctest::Contains("mock oracle undefined for (t1, d1)"),
                             std::runtime_error);
    }
    SUBCASE("fixture verdicts are verbatim") {
        mock.set_fixture({{{"t1", "d1"}, 1}, {{"t1", "d2"}, 0}});
        JudgeVerdict v = mock.judge(make_bundle("t1", "d1"));
        CHECK(v.label == 1);
        CHECK(v.status == VerdictStatus::parsed);
        CHECK(v.attempts == 1);
        CHECK(v.raw_response == "1");
        CHECK(mock.judge(make_bundle("t1", "d2")).label == 0);
    }
    SUBCASE("heuristic scores description overlap against title plus abstract") {
        Collection c;
        Topic topic;
        topic.topic_id = "t1";
        topic.description = "fever and joint pain in adults";
        c.topics["t1"] = topic;
        Document close;
        close.doc_id = "d1";
        close.title = "Fever and joint pain";
        close.abstract = "A study of adults.";
        c.documents["d1"] = close;
        Document far;
        far.doc_id = "d2";
        far.title = "Volcanic soil chemistry";
        far.abstract = "Nothing clinical here.";
        c.documents["d2"] = far;

        mock.set_heuristic(&c, 0.2);
        CHECK(mock.judge(make_bundle("t1", "d1")).label == 1);
        CHECK(mock.judge(make_bundle("t1", "d2")).label == 0);
        CHECK_THROWS_WITH_AS(mock.judge(make_bundle("t1", "d9")),
                             doctest::Contains("the collection lacks the pair"),
                             std::runtime_error);
    }
    SUBCASE("fixture wins over the heuristic") {
        Collection c;
        Topic topic;
        topic.topic_id = "t1";
        topic.description = "fever";
        c.topics["t1"] = topic;
        Document doc;
        doc.doc_id = "d1";
        doc.title = "fever";
        c.documents["d1"] = doc;
        mock.set_heuristic(&c, 0.2);
        mock.set_fixture({{{"t1", "d1"}, 0}});
        CHECK(mock.judge(make_bundle("t1", "d1")).label == 0);
    }
}

TEST_CASE("http judge parses a clean verdict and sends the documented request") {
    stub::JudgeStub server;
    server.set_default(stub::reply("1"));

    BackendConfig config = stub_config(server);
    config.model = "judge-model-x";
    HttpJudgeBackend backend(config);

    JudgeVerdict v = backend.judge(make_bundle("t7", "d13"));
    CHECK(v.label == 1);
    CHECK(v.status == VerdictStatus::parsed);
    CHECK(v.attempts == 1);
    CHECK(v.raw_response == "1");

    auto reqs = server.requests();
    REQUIRE(reqs.size() == 1);
    CHECK(reqs[0].first == "t7");
    CHECK(reqs[0].second == "d13");

    nlohmann::json body = server.last_body();
    CHECK(body["model"] == "judge-model-x");
    CHECK(body["temperature"] == 0.0);
    CHECK(body["max_tokens"] == 8);
    REQUIRE(body["messages"].size() == 2);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][0]["content"][0]["type"] == "text");
    CHECK(body["messages"][0]["content"][0]["text"] == "instructions");
    CHECK(body["messages"][1]["role"] == "user");
    CHECK(body["metadata"]["topic_id"] == "t7");
    CHECK(body["metadata"]["doc_id"] == "d13");
    CHECK(server.auth_headers()[0].empty());

    SUBCASE("model field is omitted when unset") {
        BackendConfig bare = stub_config(server);
        HttpJudgeBackend plain(bare);
        plain.judge(make_bundle());
        CHECK_FALSE(server.last_body().contains("model"));
    }
}

TEST_CASE("http judge inlines images as base64 data uris") {
    stub::JudgeStub server;
    server.set_default(stub::reply("0"));

    BackendConfig config = stub_config(server);
    ImageLoader loader = [](const ImageRef& ref) {
        LoadedImage img;
        img.ref = ref;
        img.bytes = {1, 2, 3};
        return img;
    };
    HttpJudgeBackend backend(config, loader);

    PromptBundle bundle = make_bundle();
    bundle.messages[1].parts.push_back(
        MessagePart::make_image({"scan.png", "the scan", MediaType::png}));

    backend.judge(bundle);
    nlohmann::json body = server.last_body();
    const auto& content = body["messages"][1]["content"];
    REQUIRE(content.size() == 2);
    CHECK(content[1]["type"] == "image_url");
    CHECK(content[1]["image_url"]["url"] == "data:image/png;base64,AQID");
}

TEST_CASE("http judge sends the bearer token from the named environment variable") {
    stub::JudgeStub server;
    server.set_default(stub::reply("1"));

    BackendConfig config = stub_config(server);
    config.credential_env = "QRELEX_TEST_TOKEN";

    SUBCASE("unset variable fails before any request") {
        ::unsetenv("QRELEX_TEST_TOKEN");
        HttpJudgeBackend backend(config);
        CHECK_THROWS_WITH_AS(
            backend.judge(make_bundle()),
            doctest::Contains("credential environment variable QRELEX_TEST_TOKEN is not set"),
            std::runtime_error);
        CHECK(server.requests().empty());
    }
    SUBCASE("set variable becomes an Authorization header") {
        ::setenv("QRELEX_TEST_TOKEN", "sekrit", 1);
        HttpJudgeBackend backend(config);
        backend.judge(make_bundle());
        REQUIRE(server.auth_headers().size() == 1);
        CHECK(server.auth_headers()[0] == "Bearer sekrit");
        ::unsetenv("QRELEX_TEST_TOKEN");
    }
}

TEST_CASE("http judge retries retryable failures") {
    stub::JudgeStub server;

    SUBCASE("500 then success") {
        server.script("t1", "d1", {stub::http_error(500), stub::reply("1")});
        HttpJudgeBackend backend(stub_config(server));
        JudgeVerdict v = backend.judge(make_bundle());
        CHECK(v.label == 1);
        CHECK(v.status == VerdictStatus::retried_then_parsed);
        CHECK(v.attempts == 2);
    }
    SUBCASE("429 then success") {
        server.script("t1", "d1", {stub::http_error(429), stub::reply("0")});
        HttpJudgeBackend backend(stub_config(server));
        JudgeVerdict v = backend.judge(make_bundle());
        CHECK(v.label == 0);
        CHECK(v.attempts == 2);
    }
    SUBCASE("strict parse failure retries, then accepts a clean answer") {
        server.script("t1", "d1", {stub::reply("The article is relevant. 1"), stub::reply("1")});
        HttpJudgeBackend backend(stub_config(server));
        JudgeVerdict v = backend.judge(make_bundle());
        CHECK(v.label == 1);
        CHECK(v.status == VerdictStatus::retried_then_parsed);
        CHECK(v.attempts == 2);
        CHECK(v.raw_response == "1");
    }
    SUBCASE("lenient mode accepts the chatty answer on the first attempt") {
        server.script("t1", "d1", {stub::reply("The article is relevant. 1")});
        BackendConfig config = stub_config(server);
        config.parse_mode = ParseMode::lenient;
        HttpJudgeBackend backend(config);
        JudgeVerdict v = backend.judge(make_bundle());
        CHECK(v.label == 1);
        CHECK(v.status == VerdictStatus::parsed);
        CHECK(v.attempts == 1);
        CHECK(v.raw_response == "The article is relevant. 1");
    }
}

TEST_CASE("http judge treats an endpoint block as a conservative verdict") {
    stub::JudgeStub server;

    SUBCASE("top-level blocked flag") {
        server.script("t1", "d1", {stub::block()});
        HttpJudgeBackend backend(stub_config(server));
        JudgeVerdict v = backend.judge(make_bundle());
        CHECK(v.label == 0);
        CHECK(v.status == VerdictStatus::blocked_fallback);
        CHECK(v.attempts == 1);
        CHECK(v.raw_response == "(blocked by endpoint)");
        CHECK(server.requests().size() == 1);
    }
    SUBCASE("content_filter finish reason") {
        server.script("t1", "d1", {stub::content_filter()});
        HttpJudgeBackend backend(stub_config(server));
        JudgeVerdict v = backend.judge(make_bundle());
        CHECK(v.label == 0);
        CHECK(v.status == VerdictStatus::blocked_fallback);
        CHECK(v.raw_response == "(blocked by endpoint)");
    }
}

TEST_CASE("http judge exhausts retries and honors the parse failure policy") {
    stub::JudgeStub server;

    SUBCASE("persistently unparseable verdict with error policy") {
        server.set_default(stub::reply("maybe"));
        BackendConfig config = stub_config(server);
        config.max_retries = 1;
        HttpJudgeBackend backend(config);
        CHECK_THROWS_WITH_AS(backend.judge(make_bundle("t1", "d1")),
                             doctest::Contains("judge call failed after 2 attempts for (t1, d1)"),
                             std::runtime_error);
        CHECK(server.requests().size() == 2);
    }
    SUBCASE("persistently unparseable verdict with fallback policy") {
        server.set_default(stub::reply("maybe"));
        BackendConfig config = stub_config(server);
        config.max_retries = 1;
        config.parse_policy = ParseFailurePolicy::fallback_zero;
        HttpJudgeBackend backend(config);
        JudgeVerdict v = backend.judge(make_bundle());
        CHECK(v.label == 0);
        CHECK(v.status == VerdictStatus::blocked_fallback);
        CHECK(v.attempts == 2);
        CHECK(v.raw_response == "maybe");
    }
    SUBCASE("garbage body is retried then fatal") {
        server.set_default(stub::garbage());
        BackendConfig config = stub_config(server);
        config.max_retries = 1;
        HttpJudgeBackend backend(config);
        CHECK_THROWS_WITH_AS(backend.judge(make_bundle()),
                             doctest::Contains("unparseable response body"), std::runtime_error);
        CHECK(server.requests().size() == 2);
    }
    SUBCASE("response without choices is retried then fatal") {
        server.set_default(stub::no_choices());
        BackendConfig config = stub_config(server);
        config.max_retries = 0;
        HttpJudgeBackend backend(config);
        CHECK_THROWS_WITH_AS(backend.judge(make_bundle()),
                             doctest::Contains("response carries no choices"), std::runtime_error);
    }
}

TEST_CASE("http judge fails fast on a non-retryable status") {
    stub::JudgeStub server;
    server.set_default(stub::http_error(404));
    HttpJudgeBackend backend(stub_config(server));
    CHECK_THROWS_WITH_AS(backend.judge(make_bundle()),
                         doctest::Contains("judge endpoint rejected the request with status 404"),
                         std::runtime_error);
    CHECK(server.requests().size() == 1);
}

TEST_CASE("http judge validates its configuration up front") {
    BackendConfig config;
    config.endpoint = "";
    CHECK_THROWS_WITH_AS(HttpJudgeBackend{config}, doctest::Contains("endpoint is required"),
                         std::runtime_error);

    config.endpoint = "localhost/v1/chat";
    HttpJudgeBackend backend(config);
    CHECK_THROWS_WITH_AS(backend.judge(make_bundle()),
                         doctest::Contains("endpoint must include a scheme"), std::runtime_error);
}

TEST_CASE("http judge caps in-flight requests") {
    stub::JudgeStub server;
    server.set_default(stub::reply("1", 40));

    BackendConfig config = stub_config(server);
    config.max_in_flight = 2;
    HttpJudgeBackend backend(config);

    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int i = 0; i < 8; ++i)
        threads.emplace_back([&, i] {
            JudgeVerdict v = backend.judge(make_bundle("t1", "d" + std::to_string(i)));
            if (v.label == 1) ++ok;
        });
    for (auto& t : threads) t.join();

    CHECK(ok == 8);
    CHECK(server.requests().size() == 8);
    CHECK(server.max_concurrent() <= 2);
}

TEST_CASE("http judge paces requests when a rate is configured") {
    stub::JudgeStub server;
    server.set_default(stub::reply("1"));

    BackendConfig config = stub_config(server);
    config.requests_per_second = 200.0;
    HttpJudgeBackend backend(config);

    auto started = std::chrono::steady_clock::now();
    for (int i = 0; i < 5; ++i) backend.judge(make_bundle("t1", "d" + std::to_string(i)));
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    CHECK(server.requests().size() == 5);
    CHECK(elapsed.count() >= 15);
}
