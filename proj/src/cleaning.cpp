#include "lexcurate/cleaning.hpp"

#include <boost/regex.hpp>
#include <json.hpp>

#include <fstream>
#include <sstream>

#include "lexcurate/error.hpp"
#include "lexcurate/unicode.hpp"

namespace lexcurate::cleaning {

using nlohmann::json;

std::string normalize_text(std::string_view text) { return unicode::nfkc(text); }

std::string_view to_string(RuleAction action) noexcept {
    switch (action) {
        case RuleAction::delete_match: return "delete_match";
        case RuleAction::collapse_whitespace: return "collapse_whitespace";
        case RuleAction::strip_html: return "strip_html";
    }
    return "delete_match";
}

RuleAction parse_rule_action(std::string_view name) {
    if (name == "delete_match") return RuleAction::delete_match;
    if (name == "collapse_whitespace") return RuleAction::collapse_whitespace;
    if (name == "strip_html") return RuleAction::strip_html;
    throw ConfigError("unknown rule action '" + std::string(name) + "'");
}

struct RuleSet::Compiled {
    std::vector<boost::regex> patterns;
};

RuleSet::RuleSet() : compiled_(std::make_shared<Compiled>()) {}

RuleSet::RuleSet(std::vector<Rule> rules) : rules_(std::move(rules)) {
    auto compiled = std::make_shared<Compiled>();
    compiled->patterns.reserve(rules_.size());
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        const auto& rule = rules_[i];
        if (rule.pattern.empty()) {
            throw ConfigError("rule " + std::to_string(i) + ": empty pattern");
        }
        try {
            compiled->patterns.emplace_back(rule.pattern, boost::regex::perl | boost::regex::optimize);
        } catch (const boost::regex_error& e) {
            throw ConfigError("rule " + std::to_string(i) + ": pattern '" + rule.pattern +
                              "' does not compile: " + e.what());
        }
        if (boost::regex_match(std::string(), compiled->patterns.back())) {
            throw ConfigError("rule " + std::to_string(i) + ": pattern '" + rule.pattern +
                              "' matches the empty string");
        }
    }
    compiled_ = std::move(compiled);
}

namespace {

std::string whitespace_replacement(std::string_view run, bool at_edge) {
    if (at_edge) return {};
    std::size_t newlines = 0;
    for (char c : run) newlines += (c == '\n');
    if (newlines >= 2) return "\n\n";
    if (newlines == 1) return "\n";
    return " ";
}

std::string apply_one(const std::string& text, const boost::regex& re, RuleAction action) {
    std::string out;
    out.reserve(text.size());
    auto last = text.cbegin();
    bool matched = false;
    for (boost::sregex_iterator it(text.cbegin(), text.cend(), re), end; it != end; ++it) {
        const auto& m = *it;
        matched = true;
        out.append(last, m[0].first);
        if (action == RuleAction::collapse_whitespace) {
            const bool at_edge = m[0].first == text.cbegin() || m[0].second == text.cend();
            const auto run = std::string_view(text).substr(static_cast<std::size_t>(m.position(std::size_t{0})),
                                                           static_cast<std::size_t>(m.length(std::size_t{0})));
            out += whitespace_replacement(run, at_edge);
        }
        last = m[0].second;
    }
    if (!matched) return text;
    out.append(last, text.cend());
    return out;
}

}  // namespace

std::string RuleSet::apply(std::string_view input) const {
    std::string text(input);
    if (rules_.empty()) return text;
    // Every rule is non-growing, so the pass converges quickly; the cap only
    // protects against a user pattern that rewrites without shrinking.
    for (int pass = 0; pass < 32; ++pass) {
        std::string before = text;
        for (std::size_t i = 0; i < rules_.size(); ++i) {
            text = apply_one(text, compiled_->patterns[i], rules_[i].action);
        }
        if (text == before) break;
    }
    return text;
}

RuleSet RuleSet::from_json_text(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("rule file is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("rules") || !j["rules"].is_array()) {
        throw ConfigError("rule file must be an object with a 'rules' array");
    }
    std::vector<Rule> rules;
    for (const auto& r : j["rules"]) {
        if (!r.is_object() || !r.contains("pattern") || !r["pattern"].is_string() || !r.contains("action") ||
            !r["action"].is_string()) {
            throw ConfigError("each rule needs string fields 'pattern' and 'action'");
        }
        Rule rule;
        rule.pattern = r["pattern"].get<std::string>();
        rule.action = parse_rule_action(r["action"].get<std::string>());
        rule.provenance = r.value("provenance", std::string{});
        rules.push_back(std::move(rule));
    }
    return RuleSet(std::move(rules));
}

RuleSet RuleSet::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open rule file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string RuleSet::to_json_text() const {
    json rules = json::array();
    for (const auto& r : rules_) {
        rules.push_back({{"pattern", r.pattern}, {"action", to_string(r.action)}, {"provenance", r.provenance}});
    }
    return json{{"rules", rules}}.dump(2) + "\n";
}

void RuleSet::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write rule file '" + path.string() + "'");
    out << to_json_text();
}

RuleSet build_default_ruleset() {
    const std::string min_repeats = std::to_string(kMinArtifactRun - 1);
    auto run_of = [&](const std::string& ch) { return ch + "(?:[ \\t]*" + ch + "){" + min_repeats + ",}"; };
    const std::string note =
        "repeated-character artifact; runs like this dominate the most frequent 10-grams of "
        "PDF-extracted legal text";

    std::vector<Rule> rules;
    rules.push_back({"<!--.*?-->|<![A-Za-z][^<>]*>|</?[A-Za-z][A-Za-z0-9:-]*(?:\\s[^<>]*)?/?>",
                     RuleAction::strip_html, "HTML markup left over from scraping"});
    rules.push_back({run_of("-"), RuleAction::delete_match, "dash run: " + note});
    rules.push_back({run_of("\\."), RuleAction::delete_match, "dot run: " + note});
    rules.push_back({run_of("\\*"), RuleAction::delete_match, "asterisk run: " + note});
    rules.push_back({run_of("="), RuleAction::delete_match, "equals run: " + note});
    rules.push_back({run_of("_"), RuleAction::delete_match, "underscore run: " + note});
    rules.push_back({"[ \\t\\n\\r\\f\\v]+", RuleAction::collapse_whitespace,
                     "repeated whitespace (spaces, tabs, newlines)"});
    return RuleSet(std::move(rules));
}

std::string apply_rules(std::string_view text, const RuleSet& rules) { return rules.apply(text); }

void clean_documents(std::span<corpus::Document> docs, const CleanOptions& options, const Tokenizer& tok,
                     Execution exec) {
    auto clean_one = [&](corpus::Document& doc) {
        if (options.normalize) doc.text = normalize_text(doc.text);
        if (options.rules != nullptr) doc.text = options.rules->apply(doc.text);
        corpus::count_tokens(doc, tok);
    };
    const auto n = static_cast<std::ptrdiff_t>(docs.size());
    if (exec == Execution::serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) clean_one(docs[i]);
        return;
    }
    // ICU and boost::regex are safe for concurrent const use; the first error wins.
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            clean_one(docs[i]);
        } catch (...) {
#pragma omp critical(lexcurate_clean_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace lexcurate::cleaning
