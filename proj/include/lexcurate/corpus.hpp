#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "lexcurate/tokenizer.hpp"

namespace lexcurate::corpus {

enum class SourceKind { legal, replay, instruction };

std::string_view to_string(SourceKind kind) noexcept;
SourceKind parse_source_kind(std::string_view name);

struct SourceTag {
    std::string name;
    SourceKind kind = SourceKind::legal;

    bool operator==(const SourceTag&) const = default;
};

/// Known corpus sources and their kind. Defaults cover the legal pretraining
/// sources, the general-domain replay sets and the instruction collections,
/// plus the three umbrella classes "legal", "replay" and "instruction".
class SourceRegistry {
public:
    static SourceRegistry defaults();

    /// Adds a source; re-adding an existing name with a different kind is a ConfigError.
    void add(SourceTag tag);
    bool contains(std::string_view name) const;
    const SourceTag& at(std::string_view name) const;
    std::vector<SourceTag> entries() const;

private:
    std::map<std::string, SourceTag, std::less<>> tags_;
};

using Metadata = std::map<std::string, std::string>;

/// One corpus record. Immutable by convention once constructed and shared between workers.
struct Document {
    std::string id;
    std::string source;
    std::string text;
    Metadata meta;
    std::optional<std::uint64_t> token_count;

    bool operator==(const Document&) const = default;
};

/// Counts tokens of `doc.text` and caches the result in `doc.token_count`.
std::uint64_t count_tokens(Document& doc, const Tokenizer& tok);

/// Parses one JSONL record. Throws FormatError on malformed input.
Document parse_document(std::string_view line);

/// Serializes one record without the trailing newline. Throws FormatError when
/// any field is not valid UTF-8.
std::string serialize_document(const Document& doc);

struct ReadOptions {
    bool strict = true;
};

/// Streaming reader over a JSONL corpus file. Holds one line in memory at a time
/// plus the set of ids seen so far (duplicate ids are always fatal).
class CorpusReader {
public:
    explicit CorpusReader(const std::filesystem::path& path, ReadOptions options = {});

    /// Next document in file order, or nullopt at end of stream.
    std::optional<Document> next();

    /// Malformed records skipped so far (lenient mode only).
    std::size_t skipped() const noexcept { return skipped_; }
    std::size_t documents_read() const noexcept { return read_; }
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    ReadOptions options_;
    std::ifstream in_;
    std::string line_;
    std::size_t line_no_ = 0;
    std::size_t skipped_ = 0;
    std::size_t read_ = 0;
    std::unordered_set<std::string> ids_;
};

/// Reads up to `max_docs` documents from `reader` into a batch.
std::vector<Document> read_batch(CorpusReader& reader, std::size_t max_docs);

/// Reads the whole file. `skipped` receives the lenient-mode skip count.
std::vector<Document> read_documents(const std::filesystem::path& path, bool strict = true,
                                     std::size_t* skipped = nullptr);

/// Writes JSONL to a temporary sibling file and renames it into place on commit(),
/// so an interrupted stage never leaves a truncated output behind.
class CorpusWriter {
public:
    explicit CorpusWriter(std::filesystem::path path);
    ~CorpusWriter();
    CorpusWriter(const CorpusWriter&) = delete;
    CorpusWriter& operator=(const CorpusWriter&) = delete;

    void write(const Document& doc);
    std::size_t count() const noexcept { return count_; }
    /// Flushes and atomically moves the file into place. Returns the record count.
    std::size_t commit();

private:
    std::filesystem::path path_;
    std::filesystem::path tmp_path_;
    std::ofstream out_;
    std::size_t count_ = 0;
    bool committed_ = false;
};

std::size_t write_documents(std::span<const Document> docs, const std::filesystem::path& path);

}  // namespace lexcurate::corpus
