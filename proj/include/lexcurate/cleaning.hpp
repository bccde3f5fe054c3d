#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lexcurate/corpus.hpp"
#include "lexcurate/parallel.hpp"

namespace lexcurate::cleaning {

/// NFKC normalization of the whole text. Idempotent.
std::string normalize_text(std::string_view text);

enum class RuleAction {
    delete_match,         ///< remove every match
    collapse_whitespace,  ///< canonicalize each matched whitespace run (see RuleSet::apply)
    strip_html,           ///< remove every matched tag
};

std::string_view to_string(RuleAction action) noexcept;
RuleAction parse_rule_action(std::string_view name);

struct Rule {
    std::string pattern;
    RuleAction action = RuleAction::delete_match;
    std::string provenance;

    bool operator==(const Rule&) const = default;
};

/// Ordered list of compiled regular-expression rules.
///
/// Patterns are compiled at construction; a pattern that fails to compile is a
/// ConfigError there, never during a run. `apply` runs the rules in order and
/// repeats the pass until the text stops changing, so the result is always a
/// fixed point even when one rule exposes a match for an earlier one.
///
/// A collapse_whitespace match is replaced by:
///   - nothing, when the run touches either end of the text;
///   - "\n\n" (one paragraph break), when it contains two or more newlines;
///   - "\n", when it contains exactly one newline;
///   - " ", otherwise.
class RuleSet {
public:
    RuleSet();
    explicit RuleSet(std::vector<Rule> rules);

    const std::vector<Rule>& rules() const noexcept { return rules_; }
    bool empty() const noexcept { return rules_.empty(); }

    std::string apply(std::string_view text) const;

    /// JSON file: {"rules": [{"pattern": ..., "action": ..., "provenance": ...}, ...]}.
    static RuleSet load(const std::filesystem::path& path);
    static RuleSet from_json_text(std::string_view json_text);
    std::string to_json_text() const;
    void save(const std::filesystem::path& path) const;

private:
    struct Compiled;
    std::vector<Rule> rules_;
    std::shared_ptr<const Compiled> compiled_;
};

/// Shipped rules: repeated `-`, `.`, `*`, `=`, `_` runs of length >= 5 (spaces or
/// tabs may separate the characters), HTML tag stripping, whitespace collapse.
RuleSet build_default_ruleset();

/// Minimum repeated-punctuation run removed by the default rules.
inline constexpr int kMinArtifactRun = 5;

std::string apply_rules(std::string_view text, const RuleSet& rules);

struct CleanOptions {
    bool normalize = true;
    const RuleSet* rules = nullptr;
};

/// Cleans every document in place (normalize, then rules) and refreshes token
/// counts. Documents are independent, so the parallel kernel is a plain
/// data-parallel loop over the batch.
void clean_documents(std::span<corpus::Document> docs, const CleanOptions& options,
                     const Tokenizer& tok, Execution exec = Execution::parallel);

}  // namespace lexcurate::cleaning
