#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lexcurate/corpus.hpp"
#include "lexcurate/parallel.hpp"
#include "lexcurate/tokenizer.hpp"

namespace lexcurate::cleaning {

/// Exact n-gram counts keyed by the tokens joined with kNgramSeparator.
/// N-grams never span document boundaries.
using NgramCounts = std::unordered_map<std::string, std::uint64_t>;

/// NUL sorts below every other byte, so byte order of joined keys equals
/// lexicographic order of the token sequences.
inline constexpr char kNgramSeparator = '\0';

struct NgramEntry {
    std::vector<std::string> tokens;
    std::uint64_t count = 0;

    bool operator==(const NgramEntry&) const = default;
};

/// Top-k n-grams, sorted by count descending, ties by token sequence ascending.
struct NgramTable {
    std::size_t n = 0;
    std::vector<NgramEntry> entries;
    std::uint64_t total = 0;     ///< sum of entry counts
    std::uint64_t observed = 0;  ///< all n-gram occurrences in the corpus
    std::uint64_t distinct = 0;  ///< distinct n-grams in the corpus
};

/// Counts n-grams over a batch. The parallel kernel builds one map per worker
/// and merges them by pointwise addition.
NgramCounts count_ngrams(std::span<const corpus::Document> docs, const Tokenizer& tok, std::size_t n,
                         Execution exec = Execution::parallel);

void merge_counts(NgramCounts& into, const NgramCounts& from);

NgramTable top_ngrams(const NgramCounts& counts, std::size_t n, std::size_t top_k);

NgramTable mine_ngrams(std::span<const corpus::Document> docs, const Tokenizer& tok, std::size_t n,
                       std::size_t top_k, Execution exec = Execution::parallel);

/// Streams the corpus in batches; memory is the count table plus one batch.
NgramTable mine_ngrams(corpus::CorpusReader& reader, const Tokenizer& tok, std::size_t n, std::size_t top_k,
                       Execution exec = Execution::parallel, std::size_t batch_size = kDefaultBatchSize);

/// Tab-separated `count<TAB>ngram` lines, tokens joined by single spaces, in table order.
void write_ngram_report(const NgramTable& table, std::ostream& out);
void write_ngram_report(const NgramTable& table, const std::filesystem::path& path);

}  // namespace lexcurate::cleaning
