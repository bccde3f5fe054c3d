#include "lexcurate/tokenizer.hpp"

#include "lexcurate/error.hpp"

namespace lexcurate {

void WhitespaceTokenizer::tokenize(std::string_view text, std::vector<std::string_view>& out) const {
    out.clear();
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && is_ascii_space(text[i])) ++i;
        const std::size_t start = i;
        while (i < n && !is_ascii_space(text[i])) ++i;
        if (i > start) out.push_back(text.substr(start, i - start));
    }
}

std::size_t WhitespaceTokenizer::count(std::string_view text) const {
    std::size_t tokens = 0;
    bool in_token = false;
    for (char c : text) {
        const bool space = is_ascii_space(c);
        if (!space && !in_token) ++tokens;
        in_token = !space;
    }
    return tokens;
}

const Tokenizer& whitespace_tokenizer() {
    static const WhitespaceTokenizer instance;
    return instance;
}

std::shared_ptr<const Tokenizer> make_tokenizer(std::string_view name) {
    if (name == "whitespace") return std::make_shared<WhitespaceTokenizer>();
    throw ConfigError("unknown tokenizer '" + std::string(name) + "'");
}

}  // namespace lexcurate
