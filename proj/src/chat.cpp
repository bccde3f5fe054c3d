#include "lexcurate/chat.hpp"

#include <httplib.h>
#include <json.hpp>

#include <array>
#include <cstdlib>
#include <regex>
#include <thread>

#include "lexcurate/hash.hpp"

namespace lexcurate::chat {

using nlohmann::json;

std::string_view to_string(Role role) noexcept {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

Role parse_role(std::string_view name) {
    if (name == "system") return Role::system;
    if (name == "user") return Role::user;
    if (name == "assistant") return Role::assistant;
    throw FormatError("unknown chat role '" + std::string(name) + "'");
}

namespace {

constexpr std::array<std::string_view, 8> kFollowUps = {
    "Which facts in my situation matter most for that conclusion?",
    "Is there a deadline I should be aware of before taking action?",
    "What evidence would I need to gather to support my position?",
    "How would a court usually weigh the arguments on the other side?",
    "Are there exceptions that could change the outcome here?",
    "What would be a reasonable first step if I want to pursue this?",
    "Does it make a difference which jurisdiction this happened in?",
    "What are the risks if I decide not to act at all?",
};

constexpr std::array<std::string_view, 6> kAnswerBodies = {
    "The outcome usually turns on the specific facts, so it helps to write down a timeline of what happened "
    "and keep copies of every relevant document.",
    "Courts generally look at the written terms first and then at how the parties actually behaved, so both "
    "the paperwork and the surrounding conduct matter.",
    "Limitation periods can be short, so it is sensible to confirm the applicable deadline early rather than "
    "wait for the dispute to develop.",
    "The burden of proof normally rests on the party making the claim, which means the supporting evidence "
    "should be organised before any formal step is taken.",
    "Exceptions exist in most regimes, and they are usually read narrowly, so the general rule is the safer "
    "starting point.",
    "A short consultation with a practitioner in the relevant jurisdiction can confirm whether the general "
    "principles apply to these particular circumstances.",
};

std::string first_words(std::string_view text, std::size_t limit) {
    std::string out;
    std::size_t words = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
        if (space) {
            if (in_word && ++words == limit) return out + " ...";
            in_word = false;
            if (!out.empty() && out.back() != ' ') out.push_back(' ');
        } else {
            in_word = true;
            out.push_back(c);
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::uint64_t prefix_hash(std::span<const Message> messages) {
    std::uint64_t h = hash64("conversation");
    for (const auto& m : messages) {
        h = hash_combine(h, hash64(to_string(m.role)));
        h = hash_combine(h, hash64(m.content));
    }
    return h;
}

}  // namespace

std::string StubBackend::complete(std::span<const Message> messages, Role role_hint) const {
    const auto h = prefix_hash(messages);
    if (role_hint == Role::user) {
        return std::string(kFollowUps[messages.size() % kFollowUps.size()]);
    }
    std::string last_user;
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->role == Role::user) {
            last_user = it->content;
            break;
        }
    }
    std::string out = "Regarding \"" + first_words(last_user, 12) + "\": ";
    out += kAnswerBodies[h % kAnswerBodies.size()];
    return out;
}

std::string LabelStubBackend::complete(std::span<const Message> messages, Role) const {
    static const std::regex kInstruction(R"(Answer by only outputting ((?:"[^"]*"(?:, | or )?)+))");
    static const std::regex kQuoted(R"re("([^"]*)")re");
    const std::string prompt = messages.empty() ? std::string() : messages.back().content;
    std::smatch m;
    if (!std::regex_search(prompt, m, kInstruction)) return "I am not sure.";
    std::vector<std::string> labels;
    const std::string list = m[1].str();
    for (std::sregex_iterator it(list.begin(), list.end(), kQuoted), end; it != end; ++it) {
        labels.push_back((*it)[1].str());
    }
    if (labels.empty()) return "I am not sure.";
    return labels[hash64(prompt) % labels.size()];
}

RemoteChatBackend::RemoteChatBackend(RemoteConfig config) : config_(std::move(config)) {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.endpoint, m, kUrl)) {
        throw ConfigError("chat endpoint must be an http(s) URL, got '" + config_.endpoint + "'");
    }
    scheme_host_port_ = m[1].str();
    path_ = m[2].matched ? m[2].str() : "/";
    if (config_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

std::string RemoteChatBackend::post(const std::string& body) const {
    httplib::Client client(scheme_host_port_);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());

    httplib::Headers headers;
    if (const char* token = std::getenv(config_.token_env.c_str()); token && *token) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    std::string last_reason = "transport";
    std::string last_detail;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
        auto res = client.Post(path_, headers, body, "application/json");
        if (!res) {
            last_reason = "transport";
            last_detail = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) return res->body;
        last_reason = "http_" + std::to_string(res->status);
        last_detail = res->body.substr(0, 200);
        if (res->status != 429 && res->status < 500) break;
    }
    throw ChatError(last_reason, last_detail.empty() ? config_.endpoint : last_detail);
}

std::string RemoteChatBackend::complete(std::span<const Message> messages, Role) const {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    const json body{{"model", config_.model},
                    {"messages", msgs},
                    {"temperature", config_.temperature},
                    {"max_tokens", config_.max_tokens}};
    const auto raw = post(body.dump());
    std::string content;
    try {
        const auto j = json::parse(raw);
        const auto& c = j.at("choices").at(0).at("message").at("content");
        if (!c.is_null()) content = c.get<std::string>();
    } catch (const json::exception& e) {
        throw ChatError("bad_response", e.what());
    }
    const bool blank = content.find_first_not_of(" \t\r\n") == std::string::npos;
    if (blank) throw ChatError("empty_completion", "backend returned no text");
    return content;
}

std::vector<double> RemoteChatBackend::prompt_log_probs(std::string_view text) const {
    const json body{{"model", config_.model},
                    {"messages", json::array({{{"role", "user"}, {"content", std::string(text)}}})},
                    {"echo", true},
                    {"logprobs", 1},
                    {"max_tokens", 0},
                    {"temperature", 0.0}};
    const auto raw = post(body.dump());
    std::vector<double> out;
    try {
        const auto j = json::parse(raw);
        const auto& lp = j.at("choices").at(0).at("logprobs").at("token_logprobs");
        for (const auto& v : lp) {
            if (!v.is_null()) out.push_back(v.get<double>());
        }
    } catch (const json::exception& e) {
        throw ChatError("no_logprobs", e.what());
    }
    if (out.empty()) throw ChatError("no_logprobs", "server returned no token log-probabilities");
    return out;
}

}  // namespace lexcurate::chat
