#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lexcurate/corpus.hpp"
#include "lexcurate/eval.hpp"
#include "lexcurate/instruct.hpp"
#include "lexcurate/random.hpp"

/// Deterministic generators for fixtures and the shipped sample data. The text
/// comes from a small grammar of legal sentence templates so that an n-gram
/// model trained on one sample assigns low perplexity to another.
namespace lexcurate::synth {

/// "contracts", "decisions", "legislation", "party_submissions".
std::span<const std::string_view> legal_categories() noexcept;

std::string legal_sentence(Rng& rng, std::string_view category);
std::string legal_paragraph(Rng& rng, std::string_view category, std::size_t min_sentences = 3,
                            std::size_t max_sentences = 6);
/// Paragraphs joined by a blank line.
std::string legal_text(Rng& rng, std::string_view category, std::size_t paragraphs);

/// Letters of every word of `paragraph` shuffled in place.
std::string scramble_words(std::string_view paragraph, Rng& rng);
/// Random lowercase pseudo-words.
std::string gibberish_paragraph(Rng& rng, std::size_t words);

/// General-domain text for replay sources.
std::string general_paragraph(Rng& rng, std::string_view source);

/// Clean legal documents totalling at least `target_tokens` whitespace tokens.
std::vector<corpus::Document> seed_corpus(std::uint64_t target_tokens, std::uint64_t seed);

struct ArtifactFixture {
    std::vector<corpus::Document> docs;
    /// Per document, every clean sentence that must survive cleaning verbatim.
    std::vector<std::vector<std::string>> sentences;
    /// Distinct planted artifact strings (for presence checks after cleaning).
    std::vector<std::string> artifacts;
    std::size_t planted = 0;  ///< total planted occurrences
};

/// Documents where every other sentence boundary carries a planted artifact:
/// dash and dot leader runs, HTML tags and comments, or a whitespace run.
/// Roughly one document in five is left clean.
ArtifactFixture artifact_corpus(std::size_t documents, std::uint64_t seed);

struct DedupFixture {
    std::vector<corpus::Document> docs;  ///< seeded order
    std::vector<std::pair<std::string, std::string>> exact;  ///< (duplicate id, original id)
    std::vector<std::pair<std::string, std::string>> near;   ///< (near-duplicate id, original id)
};

/// `unique` distinct documents plus `exact` byte copies and `near` edited
/// copies whose true 5-shingle Jaccard with their original is at least
/// `min_jaccard`. Each original is copied at most once.
DedupFixture dedup_fixture(std::size_t unique, std::size_t exact, std::size_t near, std::uint64_t seed,
                           double min_jaccard = 0.8);

/// The shipped demo corpus: legal documents across sources and categories with
/// planted artifacts, gibberish paragraphs, exact and near duplicates.
std::vector<corpus::Document> demo_corpus(std::size_t documents, std::uint64_t seed);
std::vector<corpus::Document> replay_corpus(std::size_t documents, std::uint64_t seed);
std::vector<corpus::Document> instruction_corpus(std::size_t documents, std::uint64_t seed);

/// Labeled examples for conversation generation, led by the forum-post example
/// {"My employer fired me because ... Is it legal?", "employment"}.
std::vector<instruct::LabeledExample> labeled_examples(std::size_t count, std::uint64_t seed);
instruct::TemplateSet default_templates();

/// The few-shot Telemarketing Sales Rule prompt in plain text with its
/// "{{text}}" placeholder.
std::string telemarketing_original_prompt();

/// Miniature task suite in the curated-prompt shape, one task per ability.
/// Prompts are produced by curate_prompt from few-shot originals.
std::vector<eval::EvalTask> task_suite(std::uint64_t seed);

/// MMLU-format CSV (question, A, B, C, D, answer) with `rows` rows.
std::string mmlu_csv(std::string_view subject, std::size_t rows, std::uint64_t seed);

/// Row counts of the three MMLU legal subsets used for the synthetic files.
inline constexpr std::size_t kMmluInternationalLaw = 120;
inline constexpr std::size_t kMmluProfessionalLaw = 1500;
inline constexpr std::size_t kMmluJurisprudence = 110;

/// Writes the sample data set under `dir`: demo, seed, replay and instruction
/// corpora, labeled examples, templates, tasks/, mmlu/ and rules.json.
void write_sample_data(const std::filesystem::path& dir, std::uint64_t seed);

}  // namespace lexcurate::synth
