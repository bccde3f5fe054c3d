#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lexcurate/corpus.hpp"
#include "lexcurate/parallel.hpp"
#include "lexcurate/tokenizer.hpp"

namespace lexcurate::dedup {

struct MinHashParams {
    std::size_t shingle_n = 5;
    std::size_t permutations = 128;
    std::uint64_t seed = 1;

    bool operator==(const MinHashParams&) const = default;
};

struct MinHashSignature {
    std::string doc_id;
    std::vector<std::uint64_t> values;  ///< one minimum per permutation
    std::size_t shingle_count = 0;
    MinHashParams params;

    bool operator==(const MinHashSignature&) const = default;
};

/// Universal hash family h_i(x) = (a_i x + b_i) mod (2^61 - 1) drawn from the seed.
class MinHasher {
public:
    explicit MinHasher(MinHashParams params = {});

    const MinHashParams& params() const noexcept { return params_; }

    /// Shingles are shingle_n consecutive tokens. A text with fewer tokens than
    /// shingle_n hashes as the single shingle made of all its tokens (possibly none).
    MinHashSignature signature(std::string_view doc_id, std::string_view text, const Tokenizer& tok) const;

    /// Signature of a precomputed set of 64-bit shingle hashes.
    MinHashSignature signature_of_hashes(std::string_view doc_id, std::span<const std::uint64_t> hashes) const;

private:
    MinHashParams params_;
    std::vector<std::uint64_t> a_;
    std::vector<std::uint64_t> b_;
};

MinHashSignature minhash_signature(std::string_view text, const Tokenizer& tok, std::size_t shingle_n,
                                   std::size_t permutations, std::uint64_t seed);

/// Distinct 64-bit shingle hashes of `text` (same shingling as MinHasher).
std::vector<std::uint64_t> shingle_hashes(std::string_view text, const Tokenizer& tok, std::size_t shingle_n);

/// Distinct shingles as strings (tokens joined by a space); for exact Jaccard oracles.
std::vector<std::string> shingle_set(std::string_view text, const Tokenizer& tok, std::size_t shingle_n);

/// Fraction of positions where the signatures agree. Throws InvalidArgument
/// when the signatures were built with different parameters.
double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

/// Batch signature kernel; the parallel variant splits documents across workers.
std::vector<MinHashSignature> compute_signatures(std::span<const corpus::Document> docs, const MinHasher& hasher,
                                                 const Tokenizer& tok, Execution exec = Execution::parallel);

struct LshParams {
    std::size_t bands = 0;
    std::size_t rows = 0;
};

/// Weighted false-positive / false-negative area of the banding S-curve
/// 1 - (1 - s^r)^b around `threshold`.
double lsh_error(double threshold, std::size_t bands, std::size_t rows, double fp_weight, double fn_weight);

/// Band/row split with bands * rows <= permutations minimizing lsh_error.
/// LSH misses cannot be recovered later while false positives are filtered
/// by signature verification, so the default weights favour recall.
LshParams optimal_lsh_params(double threshold, std::size_t permutations, double fp_weight = 0.1,
                             double fn_weight = 0.9);

/// Candidate pairs (i < j, indices into `signatures`) colliding in at least one
/// band, sorted and unique. The parallel kernel gives each band's bucket map to
/// one worker and merges the per-band pair lists in a single reduction.
std::vector<std::pair<std::uint32_t, std::uint32_t>> lsh_candidate_pairs(
    std::span<const MinHashSignature> signatures, const LshParams& lsh, Execution exec = Execution::parallel);

/// Disjoint-set forest with path halving and union by size.
class UnionFind {
public:
    explicit UnionFind(std::size_t n);
    std::size_t find(std::size_t x);
    bool unite(std::size_t a, std::size_t b);

private:
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> size_;
};

struct Cluster {
    std::string kept_id;
    std::vector<std::string> removed_ids;

    bool operator==(const Cluster&) const = default;
};

struct DedupReport {
    std::vector<Cluster> clusters;
    std::uint64_t documents_before = 0;
    std::uint64_t documents_after = 0;
    std::uint64_t exact_removed = 0;
    std::uint64_t near_removed = 0;
    std::uint64_t tokens_before = 0;
    std::uint64_t tokens_after = 0;
    std::uint64_t candidate_pairs = 0;
    std::uint64_t verified_pairs = 0;

    bool operator==(const DedupReport&) const = default;

    std::string to_json() const;
    /// `kept_id<TAB>removed_id` per removed document, cluster order.
    std::string cluster_dump() const;
};

struct DedupResult {
    std::vector<corpus::Document> unique;
    DedupReport report;
};

/// Collapses documents whose NFKC-normalized text is byte-identical to an
/// earlier one. Single pass; keys are SHA-256 digests.
DedupResult exact_dedup(std::span<const corpus::Document> docs, const Tokenizer& tok = whitespace_tokenizer());

struct NearDedupParams {
    MinHashParams minhash;
    double threshold = 0.7;
    /// Zero bands/rows selects optimal_lsh_params(threshold, permutations).
    LshParams lsh;
};

/// MinHash/LSH near-duplicate removal. Candidate pairs are verified with
/// estimate_jaccard >= threshold, verified pairs are merged with union-find, and
/// the first document of each component in stream order is kept.
DedupResult near_dedup(std::span<const corpus::Document> docs, const NearDedupParams& params,
                       const Tokenizer& tok = whitespace_tokenizer(), Execution exec = Execution::parallel);

/// Which indices near-dedup removes, and the clusters, without copying documents.
struct NearDedupPlan {
    std::vector<bool> removed;
    std::vector<Cluster> clusters;
    std::uint64_t candidate_pairs = 0;
    std::uint64_t verified_pairs = 0;
};

NearDedupPlan plan_near_dedup(std::span<const MinHashSignature> signatures, double threshold, const LshParams& lsh,
                              Execution exec = Execution::parallel);

/// Accumulates exact keys and signatures batch by batch, then resolves exact
/// and near duplicates into one set of clusters. Exact duplicates are linked to
/// their first occurrence and only first occurrences are signed, so a document
/// never ends up kept in one cluster and removed in another.
class DedupAccumulator {
public:
    DedupAccumulator(NearDedupParams params, const Tokenizer& tok, Execution exec = Execution::parallel);

    void add_batch(std::span<const corpus::Document> docs);

    struct Outcome {
        std::vector<bool> removed;  ///< per input document, stream order
        DedupReport report;
    };
    Outcome finish() const;

private:
    NearDedupParams params_;
    LshParams lsh_;
    const Tokenizer& tok_;
    Execution exec_;
    MinHasher hasher_;

    std::vector<std::string> ids_;
    std::vector<std::uint64_t> tokens_;
    std::vector<std::int64_t> exact_parent_;  ///< -1 for first occurrences
    std::unordered_map<std::string, std::uint32_t> first_by_key_;
    std::vector<MinHashSignature> signatures_;  ///< first occurrences only
    std::vector<std::uint32_t> signed_index_;   ///< input index of each signature
};

/// Exact dedup followed by near dedup over an in-memory corpus.
DedupResult deduplicate(std::span<const corpus::Document> docs, const NearDedupParams& params,
                        const Tokenizer& tok = whitespace_tokenizer(), Execution exec = Execution::parallel);

/// File-level driver: exact dedup then near dedup, two streaming passes over
/// the input (signatures in batches, then emission of survivors).
DedupReport dedup_file(const std::filesystem::path& input, const std::filesystem::path& output,
                       const NearDedupParams& params, const Tokenizer& tok, bool strict = true,
                       Execution exec = Execution::parallel, std::size_t batch_size = kDefaultBatchSize);

}  // namespace lexcurate::dedup
