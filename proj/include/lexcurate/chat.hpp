#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lexcurate/error.hpp"

namespace lexcurate::chat {

enum class Role { system, user, assistant };

std::string_view to_string(Role role) noexcept;
Role parse_role(std::string_view name);

struct Message {
    Role role = Role::user;
    std::string content;

    bool operator==(const Message&) const = default;
};

/// A completion that could not be obtained. `reason` is a short machine-readable
/// tag: "empty_completion", "transport", "http_<status>", "bad_response".
class ChatError : public Error {
public:
    ChatError(std::string reason, const std::string& detail)
        : Error(reason + ": " + detail), reason_(std::move(reason)) {}
    const std::string& reason() const noexcept { return reason_; }

private:
    std::string reason_;
};

/// Produces the next message of a conversation. Implementations must be safe
/// to call from several threads at once.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;

    /// Text of the next message, spoken in `role_hint`. Throws ChatError.
    virtual std::string complete(std::span<const Message> messages, Role role_hint) const = 0;
    virtual std::string name() const = 0;
};

/// Offline backend. User turns come from a fixed question bank indexed by the
/// conversation length; assistant turns are assembled from the last user
/// message. The output is a pure function of the message prefix.
class StubBackend final : public ChatBackend {
public:
    std::string complete(std::span<const Message> messages, Role role_hint) const override;
    std::string name() const override { return "stub"; }
};

/// Offline evaluation backend: reads the label list from the closing
/// `Answer by only outputting "X" or "Y"` line and answers one of those labels
/// chosen by a hash of the prompt. Answers "I am not sure." when there is no such line.
class LabelStubBackend final : public ChatBackend {
public:
    std::string complete(std::span<const Message> messages, Role role_hint) const override;
    std::string name() const override { return "label-stub"; }
};

/// Wraps a callable; used by tests for oracle and fault-injecting backends.
class FunctionBackend final : public ChatBackend {
public:
    using Fn = std::function<std::string(std::span<const Message>, Role)>;
    FunctionBackend(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

    std::string complete(std::span<const Message> messages, Role role_hint) const override {
        return fn_(messages, role_hint);
    }
    std::string name() const override { return name_; }

private:
    std::string name_;
    Fn fn_;
};

struct RemoteConfig {
    /// Full URL of the chat-completions route, e.g. http://localhost:8000/v1/chat/completions.
    std::string endpoint;
    std::string model;
    /// Environment variable holding the bearer token; unset or empty sends no Authorization header.
    std::string token_env = "LEXCURATE_API_TOKEN";
    double temperature = 0.0;
    int max_tokens = 512;
    std::chrono::milliseconds timeout{60'000};
    int max_retries = 3;
    std::chrono::milliseconds backoff{500};
};

/// HTTP chat-completions client. Request body
/// {model, messages: [{role, content}], temperature, max_tokens}; the completion
/// is read from choices[0].message.content. Transport errors, 429 and 5xx are
/// retried with exponential backoff; an empty completion is not retried.
class RemoteChatBackend final : public ChatBackend {
public:
    explicit RemoteChatBackend(RemoteConfig config);

    std::string complete(std::span<const Message> messages, Role role_hint) const override;
    std::string name() const override { return "remote:" + config_.model; }

    /// Per-token natural-log probabilities of `text` itself, requested with
    /// {"echo": true, "logprobs": 1, "max_tokens": 0} and read from
    /// choices[0].logprobs.token_logprobs (null entries are skipped). Throws
    /// ChatError with reason "no_logprobs" when the server does not return them.
    std::vector<double> prompt_log_probs(std::string_view text) const;

    const RemoteConfig& config() const noexcept { return config_; }

private:
    std::string post(const std::string& body) const;

    RemoteConfig config_;
    std::string scheme_host_port_;
    std::string path_;
};

}  // namespace lexcurate::chat
