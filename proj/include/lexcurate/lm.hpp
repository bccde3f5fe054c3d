#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lexcurate/corpus.hpp"
#include "lexcurate/parallel.hpp"
#include "lexcurate/tokenizer.hpp"

namespace lexcurate::lm {

using TokenId = std::uint32_t;

inline constexpr TokenId kUnk = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kBosToken = "<s>";
inline constexpr std::string_view kEosToken = "</s>";

/// Splits text into paragraphs: maximal runs of non-blank lines. A line holding
/// only spaces or tabs counts as blank. Returned views point into `text`.
std::vector<std::string_view> split_paragraphs(std::string_view text);

enum class DiscountMode {
    estimated,  ///< D = n1 / (n1 + 2 n2) per order, from adjusted count-of-counts
    disabled,   ///< D = 0 (maximum likelihood at the highest order; for tests)
    fixed,      ///< the same caller-supplied D at every order
};

struct TrainOptions {
    std::size_t order = 5;
    DiscountMode discount_mode = DiscountMode::estimated;
    double fixed_discount = 0.7;
    /// Pad each paragraph with <s> ... </s>.
    bool sentence_markers = true;
};

/// Estimated discounts are clamped into this range; the lower bound keeps the
/// unseen-word mass (and so p(<unk>)) strictly positive.
inline constexpr double kMinDiscount = 0.01;
inline constexpr double kMaxDiscount = 0.99;

struct PerplexityScore {
    double log_prob_sum = 0.0;     ///< natural log
    std::uint64_t token_count = 0; ///< predicted tokens, including </s> when markers are on
    double perplexity = 0.0;
};

/// Interpolated Kneser-Ney n-gram model.
///
/// Highest-order n-grams keep raw counts; lower orders use continuation counts
/// (number of distinct left extensions), except n-grams starting with <s>,
/// which have no left context and keep raw counts. With adjusted count a(h w),
/// context total S(h), N1+(h .) distinct continuations and discount D_k:
///
///   p_k(w | h) = max(a(h w) - D_k, 0) / S(h) + D_k N1+(h .) / S(h) * p_{k-1}(w | h')
///
/// where h' drops the oldest word, unseen contexts fall through to p_{k-1},
/// and the recursion ends in a uniform distribution over the predictable
/// vocabulary (every id except <s>, so <unk> is covered). The model is
/// immutable after training and safe for concurrent scoring.
class NGramLM {
public:
    std::size_t order() const noexcept { return order_; }
    bool sentence_markers() const noexcept { return sentence_markers_; }
    std::span<const double> discounts() const noexcept { return discounts_; }

    /// Includes <unk>, <s> and </s>.
    std::size_t vocab_size() const noexcept { return vocab_.size(); }
    const std::string& token(TokenId id) const { return vocab_.at(id); }
    /// Id of `token`, or kUnk when it was never seen in training.
    TokenId id_of(std::string_view token) const;
    /// Every id that can be predicted: the whole vocabulary except <s>.
    std::vector<TokenId> predictable_vocabulary() const;

    /// p(word | history). Only the last order-1 ids of `history` are used.
    double prob(std::span<const TokenId> history, TokenId word) const;

    /// Contexts (length k-1) observed at order k, in deterministic order.
    std::vector<std::vector<TokenId>> observed_contexts(std::size_t k) const;

    /// Natural-log probability of every predicted token of every paragraph.
    std::vector<double> token_log_probs(std::string_view text, const Tokenizer& tok) const;

    /// Throws InvalidArgument when the text has no tokens.
    PerplexityScore score(std::string_view text, const Tokenizer& tok) const;

    /// Versioned text format; see README for the layout.
    std::string serialize() const;
    static NGramLM deserialize(std::string_view data);
    void save(const std::filesystem::path& path) const;
    static NGramLM load(const std::filesystem::path& path);

    bool operator==(const NGramLM& other) const;

private:
    friend class NGramCounter;

    struct ContextStats {
        std::uint64_t total = 0;       ///< sum of adjusted counts
        std::uint64_t continuations = 0;  ///< number of distinct next words
        bool operator==(const ContextStats&) const = default;
    };

    void rebuild_contexts();
    void score_ids(std::span<const TokenId> sentence, std::size_t first_predicted, double& log_sum,
                   std::uint64_t& count, std::vector<double>* per_token) const;
    std::vector<TokenId> to_ids(std::span<const std::string_view> tokens) const;

    std::size_t order_ = 0;
    bool sentence_markers_ = true;
    std::vector<double> discounts_;
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, TokenId> ids_;
    /// counts_[k-1]: adjusted counts of k-grams, keyed by the ids as a u32string.
    std::vector<std::unordered_map<std::u32string, std::uint64_t>> counts_;
    /// contexts_[k-1]: statistics of (k-1)-length contexts at order k.
    std::vector<std::unordered_map<std::u32string, ContextStats>> contexts_;
};

/// Raw n-gram counts for orders 1..order. Workers count into private counters
/// that are merged by pointwise addition; finalize() is single-threaded.
class NGramCounter {
public:
    NGramCounter(std::size_t order, bool sentence_markers);

    /// Counts a batch of documents. Vocabulary ids are assigned serially in
    /// document order, so serial and parallel kernels build identical models.
    void add_documents(std::span<const corpus::Document> docs, const Tokenizer& tok,
                       Execution exec = Execution::parallel);
    void add_text(std::string_view text, const Tokenizer& tok);

    std::uint64_t token_count() const noexcept { return tokens_; }

    NGramLM finalize(const TrainOptions& options) const;

private:
    void count_sentence(std::span<const TokenId> sentence,
                        std::vector<std::unordered_map<std::u32string, std::uint64_t>>& into) const;
    TokenId intern(std::string_view token);

    std::size_t order_;
    bool sentence_markers_;
    std::uint64_t tokens_ = 0;
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, TokenId> ids_;
    std::vector<std::unordered_map<std::u32string, std::uint64_t>> raw_;
};

/// Throws InvalidArgument on an empty seed corpus or order < 1.
NGramLM train_lm(std::span<const corpus::Document> seed, const Tokenizer& tok, const TrainOptions& options = {},
                 Execution exec = Execution::parallel);
NGramLM train_lm(corpus::CorpusReader& seed, const Tokenizer& tok, const TrainOptions& options = {},
                 Execution exec = Execution::parallel, std::size_t batch_size = kDefaultBatchSize);

/// Perplexity of every paragraph of every document.
std::vector<double> paragraph_perplexities(const NGramLM& lm, std::span<const corpus::Document> docs,
                                           const Tokenizer& tok, Execution exec = Execution::parallel);

/// Threshold at `percentile` (0-100) of the paragraph perplexities of `docs` under `lm`.
double calibrate_threshold(const NGramLM& lm, std::span<const corpus::Document> docs, const Tokenizer& tok,
                           double percentile = 99.0);

/// Cross-fitted calibration: the seed documents are split into `folds` groups,
/// each group is scored by a model trained on the others, and the threshold is
/// the percentile of those held-out paragraph perplexities. Self-scoring the
/// training text underestimates perplexity on unseen in-domain text.
double calibrate_threshold_heldout(std::span<const corpus::Document> seed, const Tokenizer& tok,
                                   const TrainOptions& options, double percentile = 99.0, std::size_t folds = 5);

enum class Granularity { paragraph, document };

std::string_view to_string(Granularity g) noexcept;
Granularity parse_granularity(std::string_view name);

struct SourceFilterStats {
    std::uint64_t input_documents = 0;
    std::uint64_t kept_documents = 0;     ///< documents with at least one surviving paragraph
    std::uint64_t dropped_documents = 0;  ///< documents removed entirely
    std::uint64_t kept_paragraphs = 0;
    std::uint64_t dropped_paragraphs = 0;
    std::uint64_t input_tokens = 0;
    std::uint64_t kept_tokens = 0;
    std::uint64_t dropped_tokens = 0;

    void add(const SourceFilterStats& o);
};

struct FilterReport {
    double threshold = 0.0;
    Granularity granularity = Granularity::paragraph;
    std::map<std::string, SourceFilterStats> per_source;

    SourceFilterStats totals() const;
    std::string to_json() const;
};

struct FilterResult {
    std::vector<corpus::Document> kept;
    std::vector<corpus::Document> dropped;
    FilterReport report;
};

/// Drops paragraphs (or whole documents) whose perplexity exceeds `threshold`.
/// A kept document is reassembled from its surviving paragraphs joined by a
/// blank line, and passes through unchanged when nothing was dropped. The
/// dropped stream holds, per document, the removed paragraphs.
FilterResult filter_by_perplexity(std::span<const corpus::Document> docs, const NGramLM& lm, const Tokenizer& tok,
                                  double threshold, Granularity granularity = Granularity::paragraph,
                                  Execution exec = Execution::parallel);

/// Streaming variant; `dropped` may be null.
FilterReport filter_by_perplexity(corpus::CorpusReader& reader, corpus::CorpusWriter& kept,
                                  corpus::CorpusWriter* dropped, const NGramLM& lm, const Tokenizer& tok,
                                  double threshold, Granularity granularity = Granularity::paragraph,
                                  Execution exec = Execution::parallel, std::size_t batch_size = kDefaultBatchSize);

inline constexpr double kNoThreshold = std::numeric_limits<double>::infinity();

}  // namespace lexcurate::lm
