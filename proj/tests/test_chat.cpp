#include <gtest/gtest.h>

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "lexcurate/chat.hpp"
#include "lexcurate/error.hpp"

using namespace lexcurate;
using namespace lexcurate::chat;
using nlohmann::json;

namespace {

/// Local chat-completions server whose handler is swapped per test.
class MockServer {
public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    explicit MockServer(Handler handler) : handler_(std::move(handler)) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests_;
            last_auth_ = req.get_header_value("Authorization");
            last_body_ = req.body;
            handler_(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockServer() {
        server_.stop();
        thread_.join();
    }

    RemoteConfig config() const {
        RemoteConfig c;
        c.endpoint = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
        c.model = "mock";
        c.token_env = "LEXCURATE_TEST_TOKEN";
        c.timeout = std::chrono::milliseconds(2000);
        c.backoff = std::chrono::milliseconds(1);
        c.max_retries = 2;
        return c;
    }
    int requests() const { return requests_; }
    std::string last_auth() const { return last_auth_; }
    std::string last_body() const { return last_body_; }

private:
    Handler handler_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<int> requests_{0};
    std::string last_auth_;
    std::string last_body_;
};

void reply(httplib::Response& res, const std::string& content) {
    res.set_content(json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump(),
                    "application/json");
}

const std::vector<Message> kPrompt = {{Role::user, "Is it legal?"}};

}  // namespace

TEST(Roles, RoundTrip) {
    for (auto r : {Role::system, Role::user, Role::assistant}) EXPECT_EQ(parse_role(to_string(r)), r);
    EXPECT_THROW(parse_role("robot"), FormatError);
}

TEST(StubBackend, DeterministicPerPrefix) {
    const StubBackend stub;
    std::vector<Message> conv = {{Role::user, "What is the notice period?"},
                                 {Role::assistant, "Thirty days."},
                                 {Role::user, "Why thirty?"}};
    const auto a = stub.complete(conv, Role::assistant);
    EXPECT_EQ(a, stub.complete(conv, Role::assistant));
    EXPECT_NE(a.find("Why thirty?"), std::string::npos);
    conv.push_back({Role::assistant, a});
    const auto u = stub.complete(conv, Role::user);
    EXPECT_EQ(u, stub.complete(conv, Role::user));
    EXPECT_FALSE(u.empty());
}

TEST(LabelStubBackend, AnswersFromInstructionLine) {
    const LabelStubBackend stub;
    const std::vector<Message> m = {{Role::user, "Q?\n\nAnswer by only outputting \"A\", \"B\" or \"C\""}};
    const auto out = stub.complete(m, Role::assistant);
    EXPECT_TRUE(out == "A" || out == "B" || out == "C") << out;
    EXPECT_EQ(stub.complete({{{Role::user, "no instruction"}}}, Role::assistant), "I am not sure.");
}

TEST(RemoteBackend, CompletesAndSendsBearerToken) {
    MockServer server([](const httplib::Request&, httplib::Response& res) { reply(res, "employment"); });
    ::setenv("LEXCURATE_TEST_TOKEN", "secret-token", 1);
    const RemoteChatBackend backend(server.config());
    EXPECT_EQ(backend.complete(kPrompt, Role::assistant), "employment");
    EXPECT_EQ(server.last_auth(), "Bearer secret-token");
    const auto body = json::parse(server.last_body());
    EXPECT_EQ(body["model"], "mock");
    EXPECT_EQ(body["messages"][0]["role"], "user");
    EXPECT_EQ(body["messages"][0]["content"], "Is it legal?");
    ::unsetenv("LEXCURATE_TEST_TOKEN");
    EXPECT_EQ(backend.complete(kPrompt, Role::assistant), "employment");
    EXPECT_EQ(server.last_auth(), "");
}

TEST(RemoteBackend, EmptyCompletionIsNotRetried) {
    MockServer server([](const httplib::Request&, httplib::Response& res) { reply(res, "  \n"); });
    const RemoteChatBackend backend(server.config());
    try {
        (void)backend.complete(kPrompt, Role::assistant);
        FAIL() << "expected ChatError";
    } catch (const ChatError& e) {
        EXPECT_EQ(e.reason(), "empty_completion");
    }
    EXPECT_EQ(server.requests(), 1);
}

TEST(RemoteBackend, RetriesServerErrorsThenSucceeds) {
    std::atomic<int> calls{0};
    MockServer server([&](const httplib::Request&, httplib::Response& res) {
        if (calls++ < 2) {
            res.status = 503;
            res.set_content("busy", "text/plain");
        } else {
            reply(res, "ok");
        }
    });
    const RemoteChatBackend backend(server.config());
    EXPECT_EQ(backend.complete(kPrompt, Role::assistant), "ok");
    EXPECT_EQ(server.requests(), 3);
}

TEST(RemoteBackend, ClientErrorsFailFast) {
    MockServer server([](const httplib::Request&, httplib::Response& res) {
        res.status = 400;
        res.set_content("bad request", "text/plain");
    });
    const RemoteChatBackend backend(server.config());
    try {
        (void)backend.complete(kPrompt, Role::assistant);
        FAIL() << "expected ChatError";
    } catch (const ChatError& e) {
        EXPECT_EQ(e.reason(), "http_400");
    }
    EXPECT_EQ(server.requests(), 1);
}

TEST(RemoteBackend, RateLimitExhaustsRetries) {
    MockServer server([](const httplib::Request&, httplib::Response& res) { res.status = 429; });
    const RemoteChatBackend backend(server.config());
    EXPECT_THROW((void)backend.complete(kPrompt, Role::assistant), ChatError);
    EXPECT_EQ(server.requests(), 3);
}

TEST(RemoteBackend, MalformedResponse) {
    MockServer server([](const httplib::Request&, httplib::Response& res) { res.set_content("{}", "application/json"); });
    const RemoteChatBackend backend(server.config());
    try {
        (void)backend.complete(kPrompt, Role::assistant);
        FAIL();
    } catch (const ChatError& e) {
        EXPECT_EQ(e.reason(), "bad_response");
    }
}

TEST(RemoteBackend, TransportFailure) {
    RemoteConfig c;
    c.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    c.model = "m";
    c.max_retries = 0;
    c.timeout = std::chrono::milliseconds(500);
    const RemoteChatBackend backend(c);
    try {
        (void)backend.complete(kPrompt, Role::assistant);
        FAIL();
    } catch (const ChatError& e) {
        EXPECT_EQ(e.reason(), "transport");
    }
}

TEST(RemoteBackend, PromptLogProbs) {
    MockServer server([](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        if (body.value("echo", false)) {
            res.set_content(R"({"choices":[{"logprobs":{"token_logprobs":[null,-1.5,-0.25]}}]})", "application/json");
        } else {
            res.set_content(R"({"choices":[{"message":{"content":"x"}}]})", "application/json");
        }
    });
    const RemoteChatBackend backend(server.config());
    EXPECT_EQ(backend.prompt_log_probs("a b c"), (std::vector<double>{-1.5, -0.25}));
    const auto body = json::parse(server.last_body());
    EXPECT_EQ(body["max_tokens"], 0);
    EXPECT_EQ(body["logprobs"], 1);
}

TEST(RemoteBackend, MissingLogProbs) {
    MockServer server([](const httplib::Request&, httplib::Response& res) { reply(res, "x"); });
    const RemoteChatBackend backend(server.config());
    try {
        (void)backend.prompt_log_probs("a b");
        FAIL();
    } catch (const ChatError& e) {
        EXPECT_EQ(e.reason(), "no_logprobs");
    }
}

TEST(RemoteBackend, RejectsBadEndpoint) {
    RemoteConfig c;
    c.endpoint = "ftp://example";
    EXPECT_THROW(RemoteChatBackend{c}, ConfigError);
}
