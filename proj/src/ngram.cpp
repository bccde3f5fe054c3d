#include "lexcurate/ngram.hpp"

#include <omp.h>

#include <algorithm>
#include <fstream>
#include <ostream>

#include "lexcurate/error.hpp"

namespace lexcurate::cleaning {

namespace {

void validate(std::size_t n, std::size_t top_k) {
    if (n < 1) throw InvalidArgument("n-gram order must be >= 1");
    if (top_k < 1) throw InvalidArgument("top_k must be >= 1");
}

void count_document(const corpus::Document& doc, const Tokenizer& tok, std::size_t n,
                    std::vector<std::string_view>& tokens, std::string& key, NgramCounts& counts) {
    tok.tokenize(doc.text, tokens);
    if (tokens.size() < n) return;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        key.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j) key.push_back(kNgramSeparator);
            key.append(tokens[i + j]);
        }
        ++counts[key];
    }
}

std::vector<std::string> split_key(std::string_view key) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = key.find(kNgramSeparator, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(key.substr(start));
            return out;
        }
        out.emplace_back(key.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace

NgramCounts count_ngrams(std::span<const corpus::Document> docs, const Tokenizer& tok, std::size_t n,
                         Execution exec) {
    if (n < 1) throw InvalidArgument("n-gram order must be >= 1");
    const auto count = static_cast<std::ptrdiff_t>(docs.size());
    if (exec == Execution::serial) {
        NgramCounts counts;
        std::vector<std::string_view> tokens;
        std::string key;
        for (std::ptrdiff_t i = 0; i < count; ++i) count_document(docs[i], tok, n, tokens, key, counts);
        return counts;
    }

    std::vector<NgramCounts> partial(static_cast<std::size_t>(omp_get_max_threads()));
#pragma omp parallel
    {
        auto& local = partial[static_cast<std::size_t>(omp_get_thread_num())];
        std::vector<std::string_view> tokens;
        std::string key;
#pragma omp for schedule(dynamic, 32)
        for (std::ptrdiff_t i = 0; i < count; ++i) count_document(docs[i], tok, n, tokens, key, local);
    }
    auto largest = std::max_element(partial.begin(), partial.end(),
                                     [](const auto& a, const auto& b) { return a.size() < b.size(); });
    NgramCounts merged = std::move(*largest);
    for (auto& p : partial) {
        if (&p != &*largest) merge_counts(merged, p);
    }
    return merged;
}

void merge_counts(NgramCounts& into, const NgramCounts& from) {
    for (const auto& [key, c] : from) into[key] += c;
}

NgramTable top_ngrams(const NgramCounts& counts, std::size_t n, std::size_t top_k) {
    validate(n, top_k);
    NgramTable table;
    table.n = n;
    table.distinct = counts.size();

    std::vector<std::pair<std::string_view, std::uint64_t>> items;
    items.reserve(counts.size());
    for (const auto& [key, c] : counts) {
        items.emplace_back(key, c);
        table.observed += c;
    }
    const auto by_rank = [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    };
    const std::size_t k = std::min(top_k, items.size());
    std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(k), items.end(), by_rank);

    table.entries.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        table.entries.push_back({split_key(items[i].first), items[i].second});
        table.total += items[i].second;
    }
    return table;
}

NgramTable mine_ngrams(std::span<const corpus::Document> docs, const Tokenizer& tok, std::size_t n,
                       std::size_t top_k, Execution exec) {
    validate(n, top_k);
    return top_ngrams(count_ngrams(docs, tok, n, exec), n, top_k);
}

NgramTable mine_ngrams(corpus::CorpusReader& reader, const Tokenizer& tok, std::size_t n, std::size_t top_k,
                       Execution exec, std::size_t batch_size) {
    validate(n, top_k);
    NgramCounts counts;
    for (;;) {
        auto batch = corpus::read_batch(reader, batch_size);
        if (batch.empty()) break;
        auto partial = count_ngrams(batch, tok, n, exec);
        if (counts.empty()) {
            counts = std::move(partial);
        } else {
            merge_counts(counts, partial);
        }
    }
    return top_ngrams(counts, n, top_k);
}

void write_ngram_report(const NgramTable& table, std::ostream& out) {
    for (const auto& e : table.entries) {
        out << e.count << '\t';
        for (std::size_t i = 0; i < e.tokens.size(); ++i) {
            if (i) out << ' ';
            out << e.tokens[i];
        }
        out << '\n';
    }
}

void write_ngram_report(const NgramTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write n-gram report '" + path.string() + "'");
    write_ngram_report(table, out);
}

}  // namespace lexcurate::cleaning
