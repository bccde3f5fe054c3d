#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace lexcurate {

/// Splits text into tokens. Implementations must be deterministic and return
/// views into the input text, so tokens stay valid as long as the text does.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;

    virtual void tokenize(std::string_view text, std::vector<std::string_view>& out) const = 0;
    virtual std::string name() const = 0;

    std::vector<std::string_view> tokenize(std::string_view text) const {
        std::vector<std::string_view> out;
        tokenize(text, out);
        return out;
    }

    virtual std::size_t count(std::string_view text) const {
        std::vector<std::string_view> out;
        tokenize(text, out);
        return out.size();
    }
};

/// Splits on runs of ASCII whitespace. The default token counter everywhere.
class WhitespaceTokenizer final : public Tokenizer {
public:
    using Tokenizer::tokenize;
    void tokenize(std::string_view text, std::vector<std::string_view>& out) const override;
    std::string name() const override { return "whitespace"; }
    std::size_t count(std::string_view text) const override;
};

constexpr bool is_ascii_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

/// Looks up a tokenizer by name; throws ConfigError for unknown names.
std::shared_ptr<const Tokenizer> make_tokenizer(std::string_view name);

const Tokenizer& whitespace_tokenizer();

}  // namespace lexcurate
