#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lexcurate/corpus.hpp"
#include "lexcurate/parallel.hpp"
#include "lexcurate/tokenizer.hpp"

namespace lexcurate::mix {

struct MixEntry {
    std::string source;
    double fraction = 0.0;

    bool operator==(const MixEntry&) const = default;
};

/// Target composition of a continued-pretraining mix.
struct MixSpec {
    std::vector<MixEntry> entries;
    std::uint64_t token_budget = 0;
    std::uint64_t seed = 0;

    /// Checks fractions in [0, 1] summing to 1 +- kFractionTolerance, unique
    /// sources known to `registry`, and a positive budget. Throws ConfigError.
    void validate(const corpus::SourceRegistry& registry) const;

    /// {"token_budget": N, "seed": S, "entries": [{"source": ..., "fraction": ...}]}
    static MixSpec from_json(std::string_view text);
    std::string to_json() const;
    static MixSpec load(const std::filesystem::path& path);
};

inline constexpr double kFractionTolerance = 1e-9;

/// legal 0.96, replay 0.02, instruction 0.02. Only the replay share is a
/// published figure; the instruction share is a configurable default.
MixSpec default_mix_spec(std::uint64_t token_budget, std::uint64_t seed);

struct SourceManifest {
    std::uint64_t requested_tokens = 0;
    std::uint64_t realized_tokens = 0;
    std::uint64_t available_tokens = 0;
    std::uint64_t documents = 0;
    std::string id_digest;  ///< SHA-256 of the sampled ids, newline-terminated, in sampling order

    bool operator==(const SourceManifest&) const = default;
};

struct MixManifest {
    std::map<std::string, SourceManifest> sources;
    std::uint64_t total_tokens = 0;
    std::uint64_t total_documents = 0;
    std::uint64_t token_budget = 0;
    std::uint64_t seed = 0;
    std::string order_digest;  ///< SHA-256 of all emitted ids in output order

    bool operator==(const MixManifest&) const = default;

    std::string to_json() const;
    static MixManifest from_json(std::string_view text);
};

struct MixResult {
    std::vector<corpus::Document> documents;
    MixManifest manifest;
};

/// Samples each source without replacement (a seeded shuffle, then the shortest
/// prefix whose tokens reach the source's share of the budget) and emits the
/// union in one global seeded order. A source's realized tokens exceed its
/// request by less than one document. Throws ConfigError for an invalid spec or
/// a spec source with no corpus, and InvalidArgument when a source cannot cover
/// its share or a document id occurs twice.
MixResult assemble_mix(const std::map<std::string, std::span<const corpus::Document>>& sources,
                       const MixSpec& spec, const Tokenizer& tok = whitespace_tokenizer(),
                       Execution exec = Execution::parallel,
                       const corpus::SourceRegistry& registry = corpus::SourceRegistry::defaults());

/// Largest budget every source can cover: floor(min over entries with a
/// positive fraction of available_tokens / fraction).
std::uint64_t max_feasible_budget(const std::map<std::string, std::span<const corpus::Document>>& sources,
                                  const MixSpec& spec, const Tokenizer& tok = whitespace_tokenizer());

struct SourceCheck {
    std::string source;
    double target_fraction = 0.0;
    double realized_fraction = 0.0;
    bool pass = false;
};

struct MixValidation {
    std::vector<SourceCheck> checks;  ///< spec entry order
    bool passed() const;
    std::string to_json() const;
};

/// Per source: pass when |realized - target| <= tolerance, with realized
/// fractions taken over the manifest's total tokens. Throws InvalidArgument
/// when the manifest and spec name different sources.
MixValidation validate_mix(const MixManifest& manifest, const MixSpec& spec, double tolerance);

}  // namespace lexcurate::mix
