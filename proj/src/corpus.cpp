#include "lexcurate/corpus.hpp"

#include <json.hpp>

#include <system_error>

#include "lexcurate/error.hpp"
#include "lexcurate/unicode.hpp"

namespace lexcurate::corpus {

using nlohmann::json;

std::string_view to_string(SourceKind kind) noexcept {
    switch (kind) {
        case SourceKind::legal: return "legal";
        case SourceKind::replay: return "replay";
        case SourceKind::instruction: return "instruction";
    }
    return "legal";
}

SourceKind parse_source_kind(std::string_view name) {
    if (name == "legal") return SourceKind::legal;
    if (name == "replay") return SourceKind::replay;
    if (name == "instruction") return SourceKind::instruction;
    throw ConfigError("unknown source kind '" + std::string(name) + "'");
}

SourceRegistry SourceRegistry::defaults() {
    SourceRegistry r;
    for (const char* name :
         {"legal", "freelaw", "edgar", "multi_legal_pile", "europarl", "govinfo", "law_stack_exchange",
          "open_australian_legal_corpus", "eu_legislation", "uk_legislation", "court_transcripts",
          "uspto"}) {
        r.add({name, SourceKind::legal});
    }
    for (const char* name : {"replay", "wikipedia", "stackexchange", "github"}) {
        r.add({name, SourceKind::replay});
    }
    for (const char* name : {"instruction", "super_natural_instructions", "flan", "legal_conversations",
                             "slimorca", "metamath", "ultrachat", "glaive_code_assistant"}) {
        r.add({name, SourceKind::instruction});
    }
    return r;
}

void SourceRegistry::add(SourceTag tag) {
    if (tag.name.empty()) throw ConfigError("source name must not be empty");
    auto it = tags_.find(tag.name);
    if (it != tags_.end()) {
        if (it->second.kind != tag.kind) {
            throw ConfigError("source '" + tag.name + "' already registered as " +
                              std::string(to_string(it->second.kind)));
        }
        return;
    }
    std::string key = tag.name;
    tags_.emplace(std::move(key), std::move(tag));
}

bool SourceRegistry::contains(std::string_view name) const { return tags_.find(name) != tags_.end(); }

const SourceTag& SourceRegistry::at(std::string_view name) const {
    auto it = tags_.find(name);
    if (it == tags_.end()) throw ConfigError("unknown source '" + std::string(name) + "'");
    return it->second;
}

std::vector<SourceTag> SourceRegistry::entries() const {
    std::vector<SourceTag> out;
    out.reserve(tags_.size());
    for (const auto& [_, tag] : tags_) out.push_back(tag);
    return out;
}

std::uint64_t count_tokens(Document& doc, const Tokenizer& tok) {
    const std::uint64_t n = tok.count(doc.text);
    doc.token_count = n;
    return n;
}

namespace {

std::string scalar_to_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean() || v.is_number()) return v.dump();
    throw FormatError("metadata values must be scalars");
}

}  // namespace

Document parse_document(std::string_view line) {
    if (!unicode::is_valid_utf8(line)) throw FormatError("record is not valid UTF-8");
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("record is not a JSON object");

    Document doc;
    auto require_string = [&](const char* key) -> std::string {
        auto it = j.find(key);
        if (it == j.end()) throw FormatError(std::string("missing field '") + key + "'");
        if (!it->is_string()) throw FormatError(std::string("field '") + key + "' must be a string");
        return it->get<std::string>();
    };
    doc.id = require_string("id");
    if (doc.id.empty()) throw FormatError("field 'id' must be non-empty");
    doc.source = require_string("source");
    doc.text = require_string("text");

    if (auto it = j.find("meta"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) throw FormatError("field 'meta' must be an object");
        for (const auto& [k, v] : it->items()) doc.meta.emplace(k, scalar_to_string(v));
    }
    if (auto it = j.find("token_count"); it != j.end() && !it->is_null()) {
        if (!it->is_number_unsigned()) {
            throw FormatError("field 'token_count' must be a nonnegative integer");
        }
        doc.token_count = it->get<std::uint64_t>();
    }
    return doc;
}

std::string serialize_document(const Document& doc) {
    json j = json::object();
    j["id"] = doc.id;
    j["source"] = doc.source;
    j["text"] = doc.text;
    j["meta"] = json::object();
    for (const auto& [k, v] : doc.meta) j["meta"][k] = v;
    if (doc.token_count) j["token_count"] = *doc.token_count;
    try {
        return j.dump();
    } catch (const json::type_error& e) {
        throw FormatError("document '" + doc.id + "' is not UTF-8 clean: " + e.what());
    }
}

CorpusReader::CorpusReader(const std::filesystem::path& path, ReadOptions options)
    : path_(path), options_(options), in_(path, std::ios::binary) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec) || !in_) {
        throw IoError("cannot open corpus file '" + path.string() + "'");
    }
}

std::optional<Document> CorpusReader::next() {
    while (std::getline(in_, line_)) {
        ++line_no_;
        if (!line_.empty() && line_.back() == '\r') line_.pop_back();
        if (line_.find_first_not_of(" \t") == std::string::npos) continue;

        Document doc;
        try {
            doc = parse_document(line_);
        } catch (const FormatError& e) {
            if (options_.strict) {
                throw FormatError(path_.string() + ":" + std::to_string(line_no_) + ": " + e.what());
            }
            ++skipped_;
            continue;
        }
        if (!ids_.insert(doc.id).second) {
            throw FormatError(path_.string() + ":" + std::to_string(line_no_) + ": duplicate id '" +
                              doc.id + "'");
        }
        ++read_;
        return doc;
    }
    if (in_.bad()) throw IoError("read error on '" + path_.string() + "'");
    return std::nullopt;
}

std::vector<Document> read_batch(CorpusReader& reader, std::size_t max_docs) {
    std::vector<Document> batch;
    batch.reserve(std::min<std::size_t>(max_docs, 4096));
    while (batch.size() < max_docs) {
        auto doc = reader.next();
        if (!doc) break;
        batch.push_back(std::move(*doc));
    }
    return batch;
}

std::vector<Document> read_documents(const std::filesystem::path& path, bool strict, std::size_t* skipped) {
    CorpusReader reader(path, ReadOptions{strict});
    std::vector<Document> docs;
    while (auto doc = reader.next()) docs.push_back(std::move(*doc));
    if (skipped != nullptr) *skipped = reader.skipped();
    return docs;
}

CorpusWriter::CorpusWriter(std::filesystem::path path) : path_(std::move(path)) {
    tmp_path_ = path_;
    tmp_path_ += ".partial";
    const auto parent = path_.parent_path();
    std::error_code ec;
    if (!parent.empty() && !std::filesystem::is_directory(parent, ec)) {
        throw IoError("output directory '" + parent.string() + "' does not exist");
    }
    out_.open(tmp_path_, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot write '" + path_.string() + "'");
}

CorpusWriter::~CorpusWriter() {
    if (!committed_) {
        out_.close();
        std::error_code ec;
        std::filesystem::remove(tmp_path_, ec);
    }
}

void CorpusWriter::write(const Document& doc) {
    const std::string line = serialize_document(doc);
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.put('\n');
    if (!out_) throw IoError("write failed on '" + path_.string() + "'");
    ++count_;
}

std::size_t CorpusWriter::commit() {
    if (committed_) return count_;
    out_.flush();
    out_.close();
    if (!out_) throw IoError("flush failed on '" + path_.string() + "'");
    std::error_code ec;
    std::filesystem::rename(tmp_path_, path_, ec);
    if (ec) throw IoError("cannot move output into place at '" + path_.string() + "': " + ec.message());
    committed_ = true;
    return count_;
}

std::size_t write_documents(std::span<const Document> docs, const std::filesystem::path& path) {
    CorpusWriter writer(path);
    for (const auto& doc : docs) writer.write(doc);
    return writer.commit();
}

}  // namespace lexcurate::corpus
