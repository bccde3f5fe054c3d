#include "lexcurate/lm.hpp"

#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lexcurate/error.hpp"
#include "lexcurate/stats.hpp"

namespace lexcurate::lm {

namespace {

using Key = std::u32string;

constexpr std::string_view kFormatTag = "lexcurate-kn-lm";
constexpr int kFormatVersion = 1;

Key make_key(std::span<const TokenId> ids) {
    Key k;
    k.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) k[i] = static_cast<char32_t>(ids[i]);
    return k;
}

bool is_blank_line(std::string_view line) {
    return line.find_first_not_of(" \t\r\f\v") == std::string_view::npos;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<std::string_view> split_paragraphs(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    std::size_t para_start = std::string_view::npos;
    std::size_t para_end = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const auto line = text.substr(pos, eol - pos);
        if (is_blank_line(line)) {
            if (para_start != std::string_view::npos) {
                out.push_back(text.substr(para_start, para_end - para_start));
                para_start = std::string_view::npos;
            }
        } else {
            if (para_start == std::string_view::npos) para_start = pos;
            para_end = eol;
        }
        if (eol == text.size()) break;
        pos = eol + 1;
    }
    if (para_start != std::string_view::npos) out.push_back(text.substr(para_start, para_end - para_start));
    return out;
}

// ---------------------------------------------------------------------------
// NGramLM

TokenId NGramLM::id_of(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() ? kUnk : it->second;
}

std::vector<TokenId> NGramLM::predictable_vocabulary() const {
    std::vector<TokenId> out;
    out.reserve(vocab_.size());
    for (TokenId id = 0; id < vocab_.size(); ++id) {
        if (id != kBos) out.push_back(id);
    }
    return out;
}

double NGramLM::prob(std::span<const TokenId> history, TokenId word) const {
    const double uniform = 1.0 / static_cast<double>(vocab_.size() - 1);
    double p = uniform;
    Key key;
    key.reserve(order_);
    for (std::size_t k = 1; k <= order_; ++k) {
        const std::size_t ctx_len = k - 1;
        if (ctx_len > history.size()) break;
        key.clear();
        for (std::size_t i = history.size() - ctx_len; i < history.size(); ++i) {
            key.push_back(static_cast<char32_t>(history[i]));
        }
        const auto ctx = contexts_[k - 1].find(key);
        // An unseen context implies every longer context is unseen too.
        if (ctx == contexts_[k - 1].end()) break;
        key.push_back(static_cast<char32_t>(word));
        const auto hit = counts_[k - 1].find(key);
        const double a = hit == counts_[k - 1].end() ? 0.0 : static_cast<double>(hit->second);
        const double d = discounts_[k - 1];
        const double total = static_cast<double>(ctx->second.total);
        const double backoff = d * static_cast<double>(ctx->second.continuations) / total;
        p = std::max(a - d, 0.0) / total + backoff * p;
    }
    return p;
}

std::vector<std::vector<TokenId>> NGramLM::observed_contexts(std::size_t k) const {
    if (k < 1 || k > order_) throw InvalidArgument("order out of range");
    std::vector<std::vector<TokenId>> out;
    out.reserve(contexts_[k - 1].size());
    for (const auto& [key, _] : contexts_[k - 1]) {
        std::vector<TokenId> ids(key.size());
        for (std::size_t i = 0; i < key.size(); ++i) ids[i] = static_cast<TokenId>(key[i]);
        out.push_back(std::move(ids));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<TokenId> NGramLM::to_ids(std::span<const std::string_view> tokens) const {
    std::vector<TokenId> ids;
    ids.reserve(tokens.size() + 2);
    if (sentence_markers_) ids.push_back(kBos);
    for (auto t : tokens) ids.push_back(id_of(t));
    if (sentence_markers_) ids.push_back(kEos);
    return ids;
}

void NGramLM::score_ids(std::span<const TokenId> sentence, std::size_t first_predicted, double& log_sum,
                        std::uint64_t& count, std::vector<double>* per_token) const {
    const std::size_t max_history = order_ - 1;
    for (std::size_t i = first_predicted; i < sentence.size(); ++i) {
        const std::size_t h = std::min(i, max_history);
        const double lp = std::log(prob(sentence.subspan(i - h, h), sentence[i]));
        log_sum += lp;
        ++count;
        if (per_token != nullptr) per_token->push_back(lp);
    }
}

std::vector<double> NGramLM::token_log_probs(std::string_view text, const Tokenizer& tok) const {
    std::vector<double> out;
    double sum = 0.0;
    std::uint64_t count = 0;
    std::vector<std::string_view> tokens;
    for (auto para : split_paragraphs(text)) {
        tok.tokenize(para, tokens);
        if (tokens.empty()) continue;
        const auto ids = to_ids(tokens);
        score_ids(ids, sentence_markers_ ? 1 : 0, sum, count, &out);
    }
    return out;
}

PerplexityScore NGramLM::score(std::string_view text, const Tokenizer& tok) const {
    PerplexityScore s;
    std::vector<std::string_view> tokens;
    for (auto para : split_paragraphs(text)) {
        tok.tokenize(para, tokens);
        if (tokens.empty()) continue;
        const auto ids = to_ids(tokens);
        score_ids(ids, sentence_markers_ ? 1 : 0, s.log_prob_sum, s.token_count, nullptr);
    }
    if (s.token_count == 0) throw InvalidArgument("cannot score text with no tokens");
    s.perplexity = std::exp(-s.log_prob_sum / static_cast<double>(s.token_count));
    return s;
}

void NGramLM::rebuild_contexts() {
    contexts_.assign(order_, {});
    for (std::size_t k = 1; k <= order_; ++k) {
        auto& ctx = contexts_[k - 1];
        for (const auto& [gram, a] : counts_[k - 1]) {
            auto& stats = ctx[gram.substr(0, k - 1)];
            stats.total += a;
            stats.continuations += 1;
        }
    }
}

bool NGramLM::operator==(const NGramLM& o) const {
    return order_ == o.order_ && sentence_markers_ == o.sentence_markers_ && discounts_ == o.discounts_ &&
           vocab_ == o.vocab_ && counts_ == o.counts_;
}

// Format (line oriented, UTF-8):
//   lexcurate-kn-lm 1
//   order <N>
//   sentence_markers <0|1>
//   discounts <D_1> ... <D_N>          (%.17g, exact round trip)
//   vocab <V>
//   <token as JSON string>             (V lines, line i = id i)
//   ngrams <k> <count>                 (for k = 1..N)
//   <id_1> ... <id_k> <adjusted count> (sorted by ids)
//   end
std::string NGramLM::serialize() const {
    std::ostringstream out;
    out << kFormatTag << ' ' << kFormatVersion << '\n';
    out << "order " << order_ << '\n';
    out << "sentence_markers " << (sentence_markers_ ? 1 : 0) << '\n';
    out << "discounts";
    for (double d : discounts_) out << ' ' << format_double(d);
    out << '\n';
    out << "vocab " << vocab_.size() << '\n';
    for (const auto& t : vocab_) out << nlohmann::json(t).dump() << '\n';
    for (std::size_t k = 1; k <= order_; ++k) {
        std::vector<std::pair<Key, std::uint64_t>> grams(counts_[k - 1].begin(), counts_[k - 1].end());
        std::sort(grams.begin(), grams.end());
        out << "ngrams " << k << ' ' << grams.size() << '\n';
        for (const auto& [key, a] : grams) {
            for (char32_t c : key) out << static_cast<TokenId>(c) << ' ';
            out << a << '\n';
        }
    }
    out << "end\n";
    return out.str();
}

NGramLM NGramLM::deserialize(std::string_view data) {
    std::istringstream in{std::string(data)};
    std::string line;
    auto fail = [](const std::string& what) -> FormatError { return FormatError("model file: " + what); };
    auto next_line = [&]() -> std::string {
        if (!std::getline(in, line)) throw fail("unexpected end of file");
        return line;
    };

    NGramLM lm;
    {
        std::istringstream hdr(next_line());
        std::string tag;
        int version = 0;
        hdr >> tag >> version;
        if (tag != kFormatTag) throw fail("not a lexcurate n-gram model");
        if (version != kFormatVersion) throw fail("unsupported format version " + std::to_string(version));
    }
    auto keyed = [&](std::string_view key) {
        std::istringstream s(next_line());
        std::string k;
        s >> k;
        if (k != key) throw fail("expected '" + std::string(key) + "'");
        return s;
    };
    {
        auto s = keyed("order");
        s >> lm.order_;
        if (!s || lm.order_ < 1) throw fail("bad order");
    }
    {
        auto s = keyed("sentence_markers");
        int m = -1;
        s >> m;
        if (m != 0 && m != 1) throw fail("bad sentence_markers");
        lm.sentence_markers_ = m == 1;
    }
    {
        auto s = keyed("discounts");
        std::string tok;
        while (s >> tok) lm.discounts_.push_back(std::stod(tok));
        if (lm.discounts_.size() != lm.order_) throw fail("discount count does not match order");
    }
    std::size_t vocab_size = 0;
    {
        auto s = keyed("vocab");
        s >> vocab_size;
        if (!s || vocab_size < 3) throw fail("bad vocab size");
    }
    lm.vocab_.reserve(vocab_size);
    for (std::size_t i = 0; i < vocab_size; ++i) {
        try {
            lm.vocab_.push_back(nlohmann::json::parse(next_line()).get<std::string>());
        } catch (const nlohmann::json::exception&) {
            throw fail("bad vocabulary entry " + std::to_string(i));
        }
        lm.ids_.emplace(lm.vocab_.back(), static_cast<TokenId>(i));
    }
    lm.counts_.assign(lm.order_, {});
    for (std::size_t k = 1; k <= lm.order_; ++k) {
        auto s = keyed("ngrams");
        std::size_t kk = 0, n = 0;
        s >> kk >> n;
        if (kk != k) throw fail("n-gram sections out of order");
        auto& table = lm.counts_[k - 1];
        table.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::istringstream g(next_line());
            Key key(k, U'\0');
            for (std::size_t j = 0; j < k; ++j) {
                TokenId id = 0;
                g >> id;
                if (!g || id >= vocab_size) throw fail("bad n-gram id");
                key[j] = static_cast<char32_t>(id);
            }
            std::uint64_t a = 0;
            g >> a;
            if (!g || a == 0) throw fail("bad n-gram count");
            table.emplace(std::move(key), a);
        }
    }
    if (next_line() != "end") throw fail("missing end marker");
    lm.rebuild_contexts();
    if (lm.contexts_[0].empty()) throw fail("model has no unigrams");
    return lm;
}

void NGramLM::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write model '" + path.string() + "'");
    out << serialize();
    if (!out) throw IoError("write failed on '" + path.string() + "'");
}

NGramLM NGramLM::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
}

// ---------------------------------------------------------------------------
// Training

NGramCounter::NGramCounter(std::size_t order, bool sentence_markers)
    : order_(order), sentence_markers_(sentence_markers), raw_(order) {
    if (order < 1) throw InvalidArgument("model order must be >= 1");
    vocab_ = {std::string(kUnkToken), std::string(kBosToken), std::string(kEosToken)};
}

TokenId NGramCounter::intern(std::string_view token) {
    auto [it, inserted] = ids_.try_emplace(std::string(token), static_cast<TokenId>(vocab_.size()));
    if (inserted) vocab_.emplace_back(token);
    return it->second;
}

void NGramCounter::count_sentence(std::span<const TokenId> sentence,
                                  std::vector<std::unordered_map<std::u32string, std::uint64_t>>& into) const {
    for (std::size_t k = 1; k <= order_; ++k) {
        if (sentence.size() < k) break;
        auto& table = into[k - 1];
        for (std::size_t i = 0; i + k <= sentence.size(); ++i) {
            if (k == 1 && sentence[i] == kBos) continue;
            ++table[make_key(sentence.subspan(i, k))];
        }
    }
}

void NGramCounter::add_text(std::string_view text, const Tokenizer& tok) {
    corpus::Document doc;
    doc.text = std::string(text);
    add_documents(std::span<const corpus::Document>(&doc, 1), tok, Execution::serial);
}

void NGramCounter::add_documents(std::span<const corpus::Document> docs, const Tokenizer& tok, Execution exec) {
    const auto n = static_cast<std::ptrdiff_t>(docs.size());
    // Tokens per paragraph, per document. Views point into the documents.
    std::vector<std::vector<std::vector<std::string_view>>> tokenized(docs.size());
    auto tokenize_one = [&](std::ptrdiff_t i) {
        for (auto para : split_paragraphs(docs[i].text)) {
            auto tokens = tok.tokenize(para);
            if (!tokens.empty()) tokenized[i].push_back(std::move(tokens));
        }
    };
    if (exec == Execution::serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) tokenize_one(i);
    } else {
#pragma omp parallel for schedule(dynamic, 16)
        for (std::ptrdiff_t i = 0; i < n; ++i) tokenize_one(i);
    }

    std::vector<std::vector<TokenId>> sentences;
    for (const auto& doc : tokenized) {
        for (const auto& para : doc) {
            std::vector<TokenId> ids;
            ids.reserve(para.size() + 2);
            if (sentence_markers_) ids.push_back(kBos);
            for (auto t : para) ids.push_back(intern(t));
            if (sentence_markers_) ids.push_back(kEos);
            tokens_ += para.size();
            sentences.push_back(std::move(ids));
        }
    }

    const auto m = static_cast<std::ptrdiff_t>(sentences.size());
    if (exec == Execution::serial) {
        for (std::ptrdiff_t i = 0; i < m; ++i) count_sentence(sentences[i], raw_);
        return;
    }
    using Tables = std::vector<std::unordered_map<std::u32string, std::uint64_t>>;
    std::vector<Tables> partial(static_cast<std::size_t>(omp_get_max_threads()), Tables(order_));
#pragma omp parallel
    {
        auto& local = partial[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(dynamic, 64)
        for (std::ptrdiff_t i = 0; i < m; ++i) count_sentence(sentences[i], local);
    }
    for (const auto& tables : partial) {
        for (std::size_t k = 0; k < order_; ++k) {
            for (const auto& [key, c] : tables[k]) raw_[k][key] += c;
        }
    }
}

NGramLM NGramCounter::finalize(const TrainOptions& options) const {
    if (options.order != order_) throw InvalidArgument("TrainOptions order does not match the counter");
    if (raw_[0].empty()) throw InvalidArgument("cannot train a language model on an empty seed corpus");

    NGramLM lm;
    lm.order_ = order_;
    lm.sentence_markers_ = sentence_markers_;
    lm.vocab_ = vocab_;
    lm.ids_ = ids_;
    lm.counts_.assign(order_, {});

    lm.counts_[order_ - 1] = raw_[order_ - 1];
    for (std::size_t k = order_ - 1; k >= 1; --k) {
        auto& adjusted = lm.counts_[k - 1];
        // Continuation count: distinct left extensions seen at order k+1.
        for (const auto& [gram, _] : raw_[k]) ++adjusted[gram.substr(1)];
        // N-grams anchored at <s> have no left context; they keep raw counts.
        for (const auto& [gram, c] : raw_[k - 1]) {
            if (static_cast<TokenId>(gram[0]) == kBos) adjusted[gram] = c;
        }
    }

    lm.discounts_.assign(order_, 0.0);
    for (std::size_t k = 1; k <= order_; ++k) {
        double d = 0.0;
        switch (options.discount_mode) {
            case DiscountMode::disabled: d = 0.0; break;
            case DiscountMode::fixed:
                if (!(options.fixed_discount >= 0.0 && options.fixed_discount < 1.0)) {
                    throw InvalidArgument("fixed discount must be in [0, 1)");
                }
                d = options.fixed_discount;
                break;
            case DiscountMode::estimated: {
                std::uint64_t n1 = 0, n2 = 0;
                for (const auto& [_, a] : lm.counts_[k - 1]) {
                    n1 += (a == 1);
                    n2 += (a == 2);
                }
                d = (n1 + 2 * n2) == 0 ? 0.5
                                       : static_cast<double>(n1) / static_cast<double>(n1 + 2 * n2);
                d = std::clamp(d, kMinDiscount, kMaxDiscount);
                break;
            }
        }
        lm.discounts_[k - 1] = d;
    }
    lm.rebuild_contexts();
    return lm;
}

NGramLM train_lm(std::span<const corpus::Document> seed, const Tokenizer& tok, const TrainOptions& options,
                 Execution exec) {
    if (options.order < 1) throw InvalidArgument("model order must be >= 1");
    NGramCounter counter(options.order, options.sentence_markers);
    counter.add_documents(seed, tok, exec);
    if (counter.token_count() == 0) throw InvalidArgument("cannot train a language model on an empty seed corpus");
    return counter.finalize(options);
}

NGramLM train_lm(corpus::CorpusReader& seed, const Tokenizer& tok, const TrainOptions& options, Execution exec,
                 std::size_t batch_size) {
    if (options.order < 1) throw InvalidArgument("model order must be >= 1");
    NGramCounter counter(options.order, options.sentence_markers);
    for (;;) {
        auto batch = corpus::read_batch(seed, batch_size);
        if (batch.empty()) break;
        counter.add_documents(batch, tok, exec);
    }
    if (counter.token_count() == 0) throw InvalidArgument("cannot train a language model on an empty seed corpus");
    return counter.finalize(options);
}

// ---------------------------------------------------------------------------
// Calibration and filtering

std::vector<double> paragraph_perplexities(const NGramLM& lm, std::span<const corpus::Document> docs,
                                           const Tokenizer& tok, Execution exec) {
    std::vector<std::string_view> paragraphs;
    for (const auto& doc : docs) {
        for (auto p : split_paragraphs(doc.text)) {
            if (tok.count(p) > 0) paragraphs.push_back(p);
        }
    }
    std::vector<double> out(paragraphs.size());
    const auto n = static_cast<std::ptrdiff_t>(paragraphs.size());
    if (exec == Execution::serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = lm.score(paragraphs[i], tok).perplexity;
    } else {
#pragma omp parallel for schedule(dynamic, 16)
        for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = lm.score(paragraphs[i], tok).perplexity;
    }
    return out;
}

double calibrate_threshold(const NGramLM& lm, std::span<const corpus::Document> docs, const Tokenizer& tok,
                           double percentile) {
    if (!(percentile > 0.0 && percentile <= 100.0)) throw InvalidArgument("percentile must be in (0, 100]");
    auto ppl = paragraph_perplexities(lm, docs, tok);
    if (ppl.empty()) throw InvalidArgument("calibration corpus has no paragraphs");
    return stats::quantile(std::move(ppl), percentile / 100.0);
}

double calibrate_threshold_heldout(std::span<const corpus::Document> seed, const Tokenizer& tok,
                                   const TrainOptions& options, double percentile, std::size_t folds) {
    if (!(percentile > 0.0 && percentile <= 100.0)) throw InvalidArgument("percentile must be in (0, 100]");
    if (seed.empty()) throw InvalidArgument("calibration corpus is empty");
    folds = std::min(folds, seed.size());
    if (folds < 2) return calibrate_threshold(train_lm(seed, tok, options), seed, tok, percentile);

    std::vector<double> held_out;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<corpus::Document> train, test;
        for (std::size_t i = 0; i < seed.size(); ++i) (i % folds == f ? test : train).push_back(seed[i]);
        const auto model = train_lm(train, tok, options);
        auto ppl = paragraph_perplexities(model, test, tok);
        held_out.insert(held_out.end(), ppl.begin(), ppl.end());
    }
    if (held_out.empty()) throw InvalidArgument("calibration corpus has no paragraphs");
    return stats::quantile(std::move(held_out), percentile / 100.0);
}

std::string_view to_string(Granularity g) noexcept {
    return g == Granularity::paragraph ? "paragraph" : "document";
}

Granularity parse_granularity(std::string_view name) {
    if (name == "paragraph") return Granularity::paragraph;
    if (name == "document") return Granularity::document;
    throw ConfigError("unknown filter granularity '" + std::string(name) + "'");
}

void SourceFilterStats::add(const SourceFilterStats& o) {
    input_documents += o.input_documents;
    kept_documents += o.kept_documents;
    dropped_documents += o.dropped_documents;
    kept_paragraphs += o.kept_paragraphs;
    dropped_paragraphs += o.dropped_paragraphs;
    input_tokens += o.input_tokens;
    kept_tokens += o.kept_tokens;
    dropped_tokens += o.dropped_tokens;
}

SourceFilterStats FilterReport::totals() const {
    SourceFilterStats t;
    for (const auto& [_, s] : per_source) t.add(s);
    return t;
}

std::string FilterReport::to_json() const {
    using nlohmann::json;
    auto stats_json = [](const SourceFilterStats& s) {
        return json{{"input_documents", s.input_documents},   {"kept_documents", s.kept_documents},
                    {"dropped_documents", s.dropped_documents}, {"kept_paragraphs", s.kept_paragraphs},
                    {"dropped_paragraphs", s.dropped_paragraphs}, {"input_tokens", s.input_tokens},
                    {"kept_tokens", s.kept_tokens},           {"dropped_tokens", s.dropped_tokens}};
    };
    json j;
    j["threshold"] = std::isinf(threshold) ? json("inf") : json(threshold);
    j["granularity"] = to_string(granularity);
    j["per_source"] = json::object();
    for (const auto& [name, s] : per_source) j["per_source"][name] = stats_json(s);
    j["totals"] = stats_json(totals());
    return j.dump(2) + "\n";
}

namespace {

struct DocVerdict {
    std::vector<std::string_view> paragraphs;
    std::vector<bool> keep;
    std::vector<std::uint64_t> tokens;
};

DocVerdict judge(const corpus::Document& doc, const NGramLM& lm, const Tokenizer& tok, double threshold,
                 Granularity granularity) {
    DocVerdict v;
    v.paragraphs = split_paragraphs(doc.text);
    v.keep.assign(v.paragraphs.size(), true);
    v.tokens.resize(v.paragraphs.size());
    for (std::size_t i = 0; i < v.paragraphs.size(); ++i) v.tokens[i] = tok.count(v.paragraphs[i]);

    if (granularity == Granularity::document) {
        bool any_tokens = false;
        for (auto t : v.tokens) any_tokens |= t > 0;
        if (any_tokens && lm.score(doc.text, tok).perplexity > threshold) v.keep.assign(v.keep.size(), false);
        return v;
    }
    for (std::size_t i = 0; i < v.paragraphs.size(); ++i) {
        if (v.tokens[i] == 0) continue;
        v.keep[i] = !(lm.score(v.paragraphs[i], tok).perplexity > threshold);
    }
    return v;
}

std::string join_paragraphs(const DocVerdict& v, bool kept) {
    std::string out;
    for (std::size_t i = 0; i < v.paragraphs.size(); ++i) {
        if (v.keep[i] != kept) continue;
        if (!out.empty()) out += "\n\n";
        out += v.paragraphs[i];
    }
    return out;
}

template <typename EmitKept, typename EmitDropped>
void filter_batch(std::span<const corpus::Document> docs, const NGramLM& lm, const Tokenizer& tok, double threshold,
                  Granularity granularity, Execution exec, FilterReport& report, EmitKept&& emit_kept,
                  EmitDropped&& emit_dropped) {
    std::vector<DocVerdict> verdicts(docs.size());
    const auto n = static_cast<std::ptrdiff_t>(docs.size());
    if (exec == Execution::serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) verdicts[i] = judge(docs[i], lm, tok, threshold, granularity);
    } else {
#pragma omp parallel for schedule(dynamic, 8)
        for (std::ptrdiff_t i = 0; i < n; ++i) verdicts[i] = judge(docs[i], lm, tok, threshold, granularity);
    }

    for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto& doc = docs[i];
        const auto& v = verdicts[i];
        auto& s = report.per_source[doc.source];
        ++s.input_documents;
        s.input_tokens += tok.count(doc.text);

        std::uint64_t kept_tokens = 0, dropped_tokens = 0;
        std::size_t kept_paras = 0;
        for (std::size_t p = 0; p < v.paragraphs.size(); ++p) {
            if (v.keep[p]) {
                kept_tokens += v.tokens[p];
                ++kept_paras;
            } else {
                dropped_tokens += v.tokens[p];
            }
        }
        const std::size_t dropped_paras = v.paragraphs.size() - kept_paras;
        s.kept_paragraphs += kept_paras;
        s.dropped_paragraphs += dropped_paras;
        s.kept_tokens += kept_tokens;
        s.dropped_tokens += dropped_tokens;

        if (kept_paras > 0) {
            ++s.kept_documents;
            corpus::Document out = doc;
            if (dropped_paras > 0) out.text = join_paragraphs(v, true);
            out.token_count = kept_tokens;
            emit_kept(std::move(out));
        } else {
            ++s.dropped_documents;
        }
        if (dropped_paras > 0) {
            corpus::Document out = doc;
            out.text = join_paragraphs(v, false);
            out.token_count = dropped_tokens;
            emit_dropped(std::move(out));
        }
    }
}

void check_threshold(double threshold) {
    if (!(threshold > 0.0)) throw InvalidArgument("perplexity threshold must be > 0");
}

}  // namespace

FilterResult filter_by_perplexity(std::span<const corpus::Document> docs, const NGramLM& lm, const Tokenizer& tok,
                                  double threshold, Granularity granularity, Execution exec) {
    check_threshold(threshold);
    FilterResult result;
    result.report.threshold = threshold;
    result.report.granularity = granularity;
    filter_batch(
        docs, lm, tok, threshold, granularity, exec, result.report,
        [&](corpus::Document d) { result.kept.push_back(std::move(d)); },
        [&](corpus::Document d) { result.dropped.push_back(std::move(d)); });
    return result;
}

FilterReport filter_by_perplexity(corpus::CorpusReader& reader, corpus::CorpusWriter& kept,
                                  corpus::CorpusWriter* dropped, const NGramLM& lm, const Tokenizer& tok,
                                  double threshold, Granularity granularity, Execution exec,
                                  std::size_t batch_size) {
    check_threshold(threshold);
    FilterReport report;
    report.threshold = threshold;
    report.granularity = granularity;
    for (;;) {
        auto batch = corpus::read_batch(reader, batch_size);
        if (batch.empty()) break;
        filter_batch(
            batch, lm, tok, threshold, granularity, exec, report, [&](corpus::Document d) { kept.write(d); },
            [&](corpus::Document d) {
                if (dropped != nullptr) dropped->write(d);
            });
    }
    return report;
}

}  // namespace lexcurate::lm
