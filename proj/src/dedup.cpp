#include "lexcurate/dedup.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "lexcurate/error.hpp"
#include "lexcurate/hash.hpp"
#include "lexcurate/unicode.hpp"

namespace lexcurate::dedup {

namespace {

__extension__ typedef unsigned __int128 u128;

constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;

inline std::uint64_t mod_mersenne61(u128 x) {
    std::uint64_t lo = static_cast<std::uint64_t>(x & kMersenne61);
    std::uint64_t hi = static_cast<std::uint64_t>(x >> 61);
    std::uint64_t r = lo + hi;
    // hi < 2^67, so one fold leaves r < 2^62 + 2^61; two conditional subtractions finish it.
    r = (r & kMersenne61) + (r >> 61);
    if (r >= kMersenne61) r -= kMersenne61;
    return r;
}

constexpr std::uint64_t kEmptyShingle = hash64("");

std::vector<std::uint64_t> hash_tokens(std::string_view text, const Tokenizer& tok) {
    std::vector<std::string_view> tokens;
    tok.tokenize(text, tokens);
    std::vector<std::uint64_t> h(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) h[i] = hash64(tokens[i]);
    return h;
}

}  // namespace

MinHasher::MinHasher(MinHashParams params) : params_(params) {
    if (params_.shingle_n < 1) throw InvalidArgument("shingle size must be >= 1");
    if (params_.permutations < 1) throw InvalidArgument("permutation count must be >= 1");
    std::mt19937_64 rng(params_.seed);
    a_.resize(params_.permutations);
    b_.resize(params_.permutations);
    for (std::size_t i = 0; i < params_.permutations; ++i) {
        // Raw engine output reduced into range; std distributions are not portable across libraries.
        a_[i] = 1 + rng() % (kMersenne61 - 1);
        b_[i] = rng() % kMersenne61;
    }
}

std::vector<std::uint64_t> shingle_hashes(std::string_view text, const Tokenizer& tok, std::size_t shingle_n) {
    if (shingle_n < 1) throw InvalidArgument("shingle size must be >= 1");
    const auto tokens = hash_tokens(text, tok);
    std::vector<std::uint64_t> out;
    if (tokens.size() < shingle_n) {
        std::uint64_t h = kEmptyShingle;
        for (auto t : tokens) h = hash_combine(h, t);
        out.push_back(h);
        return out;
    }
    out.reserve(tokens.size() - shingle_n + 1);
    for (std::size_t i = 0; i + shingle_n <= tokens.size(); ++i) {
        std::uint64_t h = kEmptyShingle;
        for (std::size_t j = 0; j < shingle_n; ++j) h = hash_combine(h, tokens[i + j]);
        out.push_back(h);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<std::string> shingle_set(std::string_view text, const Tokenizer& tok, std::size_t shingle_n) {
    if (shingle_n < 1) throw InvalidArgument("shingle size must be >= 1");
    const auto tokens = tok.tokenize(text);
    std::vector<std::string> out;
    auto join = [&](std::size_t from, std::size_t count) {
        std::string s;
        for (std::size_t j = 0; j < count; ++j) {
            if (j) s.push_back(' ');
            s.append(tokens[from + j]);
        }
        return s;
    };
    if (tokens.size() < shingle_n) {
        out.push_back(join(0, tokens.size()));
        return out;
    }
    for (std::size_t i = 0; i + shingle_n <= tokens.size(); ++i) out.push_back(join(i, shingle_n));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

MinHashSignature MinHasher::signature_of_hashes(std::string_view doc_id, std::span<const std::uint64_t> hashes) const {
    MinHashSignature sig;
    sig.doc_id = std::string(doc_id);
    sig.params = params_;
    sig.shingle_count = hashes.size();
    sig.values.assign(params_.permutations, std::numeric_limits<std::uint64_t>::max());
    const std::size_t p = params_.permutations;
    for (std::uint64_t raw : hashes) {
        const std::uint64_t x = raw % kMersenne61;
        for (std::size_t i = 0; i < p; ++i) {
            const auto v = mod_mersenne61(static_cast<u128>(a_[i]) * x + b_[i]);
            sig.values[i] = std::min(sig.values[i], v);
        }
    }
    return sig;
}

MinHashSignature MinHasher::signature(std::string_view doc_id, std::string_view text, const Tokenizer& tok) const {
    const auto hashes = shingle_hashes(text, tok, params_.shingle_n);
    return signature_of_hashes(doc_id, hashes);
}

MinHashSignature minhash_signature(std::string_view text, const Tokenizer& tok, std::size_t shingle_n,
                                   std::size_t permutations, std::uint64_t seed) {
    return MinHasher({shingle_n, permutations, seed}).signature("", text, tok);
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
    if (!(a.params == b.params) || a.values.size() != b.values.size()) {
        throw InvalidArgument("signatures were built with different MinHash parameters");
    }
    if (a.values.empty()) throw InvalidArgument("empty signature");
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) same += (a.values[i] == b.values[i]);
    return static_cast<double>(same) / static_cast<double>(a.values.size());
}

std::vector<MinHashSignature> compute_signatures(std::span<const corpus::Document> docs, const MinHasher& hasher,
                                                 const Tokenizer& tok, Execution exec) {
    std::vector<MinHashSignature> out(docs.size());
    const auto n = static_cast<std::ptrdiff_t>(docs.size());
    if (exec == Execution::serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = hasher.signature(docs[i].id, docs[i].text, tok);
    } else {
#pragma omp parallel for schedule(dynamic, 16)
        for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = hasher.signature(docs[i].id, docs[i].text, tok);
    }
    return out;
}

// ---------------------------------------------------------------------------
// LSH

double lsh_error(double threshold, std::size_t bands, std::size_t rows, double fp_weight, double fn_weight) {
    const auto b = static_cast<double>(bands);
    const auto r = static_cast<double>(rows);
    auto collide = [&](double s) { return 1.0 - std::pow(1.0 - std::pow(s, r), b); };
    // Composite Simpson's rule; the integrands are smooth polynomials in s.
    auto simpson = [](auto&& f, double lo, double hi) {
        constexpr int kIntervals = 200;
        const double h = (hi - lo) / kIntervals;
        double acc = f(lo) + f(hi);
        for (int i = 1; i < kIntervals; ++i) acc += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
        return acc * h / 3.0;
    };
    const double fp = simpson(collide, 0.0, threshold);
    const double fn = simpson([&](double s) { return 1.0 - collide(s); }, threshold, 1.0);
    return fp_weight * fp + fn_weight * fn;
}

LshParams optimal_lsh_params(double threshold, std::size_t permutations, double fp_weight, double fn_weight) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw InvalidArgument("threshold must be in (0, 1]");
    if (permutations < 1) throw InvalidArgument("permutation count must be >= 1");
    LshParams best{1, permutations};
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t b = 1; b <= permutations; ++b) {
        for (std::size_t r = 1; r <= permutations / b; ++r) {
            const double err = lsh_error(threshold, b, r, fp_weight, fn_weight);
            if (err < best_err) {
                best_err = err;
                best = {b, r};
            }
        }
    }
    return best;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> lsh_candidate_pairs(std::span<const MinHashSignature> signatures,
                                                                         const LshParams& lsh, Execution exec) {
    using Pair = std::pair<std::uint32_t, std::uint32_t>;
    if (signatures.empty()) return {};
    if (lsh.bands < 1 || lsh.rows < 1) throw InvalidArgument("LSH needs at least one band and one row");
    if (lsh.bands * lsh.rows > signatures.front().values.size()) {
        throw InvalidArgument("bands * rows exceeds the signature length");
    }
    if (signatures.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidArgument("too many signatures for one LSH index");
    }

    std::vector<std::vector<Pair>> per_band(lsh.bands);
    auto run_band = [&](std::size_t band) {
        std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets;
        buckets.reserve(signatures.size());
        const std::size_t offset = band * lsh.rows;
        for (std::size_t i = 0; i < signatures.size(); ++i) {
            std::uint64_t key = mix64(band + 1);
            for (std::size_t r = 0; r < lsh.rows; ++r) key = hash_combine(key, signatures[i].values[offset + r]);
            buckets[key].push_back(static_cast<std::uint32_t>(i));
        }
        auto& out = per_band[band];
        for (const auto& [_, members] : buckets) {
            for (std::size_t x = 0; x < members.size(); ++x) {
                for (std::size_t y = x + 1; y < members.size(); ++y) out.emplace_back(members[x], members[y]);
            }
        }
    };
    const auto bands = static_cast<std::ptrdiff_t>(lsh.bands);
    if (exec == Execution::serial) {
        for (std::ptrdiff_t b = 0; b < bands; ++b) run_band(static_cast<std::size_t>(b));
    } else {
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t b = 0; b < bands; ++b) run_band(static_cast<std::size_t>(b));
    }

    std::vector<Pair> pairs;
    for (auto& band : per_band) pairs.insert(pairs.end(), band.begin(), band.end());
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    return pairs;
}

UnionFind::UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
}

std::size_t UnionFind::find(std::size_t x) {
    while (parent_[x] != x) {
        parent_[x] = parent_[parent_[x]];
        x = parent_[x];
    }
    return x;
}

bool UnionFind::unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
}

namespace {

/// Components of size >= 2 as clusters; the smallest index is kept.
std::vector<Cluster> clusters_from(UnionFind& uf, std::span<const std::string> ids, std::vector<bool>& removed) {
    const std::size_t n = ids.size();
    std::map<std::size_t, std::vector<std::size_t>> members;  // keyed by smallest member index
    std::vector<std::size_t> first_of_root(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto root = uf.find(i);
        if (first_of_root[root] == n) first_of_root[root] = i;
        members[first_of_root[root]].push_back(i);
    }
    removed.assign(n, false);
    std::vector<Cluster> clusters;
    for (auto& [kept, group] : members) {
        if (group.size() < 2) continue;
        Cluster c;
        c.kept_id = ids[kept];
        for (auto idx : group) {
            if (idx == kept) continue;
            removed[idx] = true;
            c.removed_ids.push_back(ids[idx]);
        }
        clusters.push_back(std::move(c));
    }
    return clusters;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> verify_pairs(
    std::span<const MinHashSignature> signatures, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& candidates,
    double threshold, Execution exec) {
    std::vector<char> ok(candidates.size(), 0);
    const auto n = static_cast<std::ptrdiff_t>(candidates.size());
    auto check = [&](std::ptrdiff_t i) {
        const auto [a, b] = candidates[static_cast<std::size_t>(i)];
        ok[i] = estimate_jaccard(signatures[a], signatures[b]) >= threshold;
    };
    if (exec == Execution::serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) check(i);
    } else {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) check(i);
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> verified;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (ok[i]) verified.push_back(candidates[i]);
    }
    return verified;
}

LshParams resolve_lsh(const NearDedupParams& params) {
    if (!(params.threshold > 0.0 && params.threshold <= 1.0)) {
        throw InvalidArgument("near-dedup threshold must be in (0, 1]");
    }
    if (params.lsh.bands == 0 || params.lsh.rows == 0) {
        return optimal_lsh_params(params.threshold, params.minhash.permutations);
    }
    return params.lsh;
}

}  // namespace

NearDedupPlan plan_near_dedup(std::span<const MinHashSignature> signatures, double threshold, const LshParams& lsh,
                              Execution exec) {
    NearDedupPlan plan;
    const auto candidates = lsh_candidate_pairs(signatures, lsh, exec);
    plan.candidate_pairs = candidates.size();
    const auto verified = verify_pairs(signatures, candidates, threshold, exec);
    plan.verified_pairs = verified.size();

    UnionFind uf(signatures.size());
    for (const auto& [a, b] : verified) uf.unite(a, b);
    std::vector<std::string> ids;
    ids.reserve(signatures.size());
    for (const auto& s : signatures) ids.push_back(s.doc_id);
    plan.clusters = clusters_from(uf, ids, plan.removed);
    return plan;
}

// ---------------------------------------------------------------------------
// Exact / near / combined

DedupResult exact_dedup(std::span<const corpus::Document> docs, const Tokenizer& tok) {
    DedupResult result;
    auto& report = result.report;
    std::unordered_map<std::string, std::size_t> cluster_of_key;
    std::unordered_map<std::string, std::string> first_id_of_key;
    report.documents_before = docs.size();
    for (const auto& doc : docs) {
        const auto tokens = tok.count(doc.text);
        report.tokens_before += tokens;
        auto key = sha256_hex(unicode::nfkc(doc.text));
        auto [it, inserted] = first_id_of_key.try_emplace(key, doc.id);
        if (inserted) {
            result.unique.push_back(doc);
            report.tokens_after += tokens;
            continue;
        }
        ++report.exact_removed;
        auto [cit, new_cluster] = cluster_of_key.try_emplace(key, report.clusters.size());
        if (new_cluster) report.clusters.push_back({it->second, {}});
        report.clusters[cit->second].removed_ids.push_back(doc.id);
    }
    report.documents_after = result.unique.size();
    // Clusters in order of their kept document.
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < docs.size(); ++i) position.emplace(docs[i].id, i);
    std::stable_sort(report.clusters.begin(), report.clusters.end(), [&](const Cluster& a, const Cluster& b) {
        return position[a.kept_id] < position[b.kept_id];
    });
    return result;
}

DedupResult near_dedup(std::span<const corpus::Document> docs, const NearDedupParams& params, const Tokenizer& tok,
                       Execution exec) {
    const auto lsh = resolve_lsh(params);
    const MinHasher hasher(params.minhash);
    const auto signatures = compute_signatures(docs, hasher, tok, exec);
    auto plan = plan_near_dedup(signatures, params.threshold, lsh, exec);

    DedupResult result;
    auto& report = result.report;
    report.documents_before = docs.size();
    report.clusters = std::move(plan.clusters);
    report.candidate_pairs = plan.candidate_pairs;
    report.verified_pairs = plan.verified_pairs;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto tokens = tok.count(docs[i].text);
        report.tokens_before += tokens;
        if (plan.removed[i]) {
            ++report.near_removed;
        } else {
            report.tokens_after += tokens;
            result.unique.push_back(docs[i]);
        }
    }
    report.documents_after = result.unique.size();
    return result;
}

DedupAccumulator::DedupAccumulator(NearDedupParams params, const Tokenizer& tok, Execution exec)
    : params_(params), lsh_(resolve_lsh(params)), tok_(tok), exec_(exec), hasher_(params.minhash) {}

void DedupAccumulator::add_batch(std::span<const corpus::Document> docs) {
    const auto n = static_cast<std::ptrdiff_t>(docs.size());
    std::vector<std::string> keys(docs.size());
    std::vector<std::uint64_t> tokens(docs.size());
    auto key_one = [&](std::ptrdiff_t i) {
        keys[i] = sha256_hex(unicode::nfkc(docs[i].text));
        tokens[i] = tok_.count(docs[i].text);
    };
    if (exec_ == Execution::serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) key_one(i);
    } else {
#pragma omp parallel for schedule(dynamic, 16)
        for (std::ptrdiff_t i = 0; i < n; ++i) key_one(i);
    }

    std::vector<std::size_t> to_sign;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto index = static_cast<std::uint32_t>(ids_.size());
        ids_.push_back(docs[i].id);
        tokens_.push_back(tokens[i]);
        auto [it, inserted] = first_by_key_.try_emplace(std::move(keys[i]), index);
        if (inserted) {
            exact_parent_.push_back(-1);
            to_sign.push_back(i);
            signed_index_.push_back(index);
        } else {
            exact_parent_.push_back(it->second);
        }
    }

    std::vector<MinHashSignature> sigs(to_sign.size());
    const auto m = static_cast<std::ptrdiff_t>(to_sign.size());
    auto sign_one = [&](std::ptrdiff_t j) {
        const auto& doc = docs[to_sign[static_cast<std::size_t>(j)]];
        sigs[j] = hasher_.signature(doc.id, doc.text, tok_);
    };
    if (exec_ == Execution::serial) {
        for (std::ptrdiff_t j = 0; j < m; ++j) sign_one(j);
    } else {
#pragma omp parallel for schedule(dynamic, 16)
        for (std::ptrdiff_t j = 0; j < m; ++j) sign_one(j);
    }
    for (auto& s : sigs) signatures_.push_back(std::move(s));
}

DedupAccumulator::Outcome DedupAccumulator::finish() const {
    Outcome out;
    auto& report = out.report;
    const std::size_t n = ids_.size();
    report.documents_before = n;

    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (exact_parent_[i] >= 0) uf.unite(static_cast<std::size_t>(exact_parent_[i]), i);
    }
    const auto candidates = lsh_candidate_pairs(signatures_, lsh_, exec_);
    const auto verified = verify_pairs(signatures_, candidates, params_.threshold, exec_);
    report.candidate_pairs = candidates.size();
    report.verified_pairs = verified.size();
    for (const auto& [a, b] : verified) uf.unite(signed_index_[a], signed_index_[b]);

    report.clusters = clusters_from(uf, ids_, out.removed);
    for (std::size_t i = 0; i < n; ++i) {
        report.tokens_before += tokens_[i];
        if (!out.removed[i]) {
            report.tokens_after += tokens_[i];
            ++report.documents_after;
        } else if (exact_parent_[i] >= 0) {
            ++report.exact_removed;
        } else {
            ++report.near_removed;
        }
    }
    return out;
}

DedupResult deduplicate(std::span<const corpus::Document> docs, const NearDedupParams& params, const Tokenizer& tok,
                        Execution exec) {
    DedupAccumulator acc(params, tok, exec);
    acc.add_batch(docs);
    auto outcome = acc.finish();
    DedupResult result;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (!outcome.removed[i]) result.unique.push_back(docs[i]);
    }
    result.report = std::move(outcome.report);
    return result;
}

DedupReport dedup_file(const std::filesystem::path& input, const std::filesystem::path& output,
                       const NearDedupParams& params, const Tokenizer& tok, bool strict, Execution exec,
                       std::size_t batch_size) {
    DedupAccumulator acc(params, tok, exec);
    {
        corpus::CorpusReader reader(input, {strict});
        for (;;) {
            auto batch = corpus::read_batch(reader, batch_size);
            if (batch.empty()) break;
            acc.add_batch(batch);
        }
    }
    auto outcome = acc.finish();

    corpus::CorpusReader reader(input, {strict});
    corpus::CorpusWriter writer(output);
    std::size_t index = 0;
    while (auto doc = reader.next()) {
        if (index >= outcome.removed.size()) throw IoError("input changed between dedup passes");
        if (!outcome.removed[index++]) writer.write(*doc);
    }
    writer.commit();
    return outcome.report;
}

std::string DedupReport::to_json() const {
    using nlohmann::json;
    json clusters_json = json::array();
    for (const auto& c : clusters) clusters_json.push_back({{"kept", c.kept_id}, {"removed", c.removed_ids}});
    json j{{"documents_before", documents_before},
           {"documents_after", documents_after},
           {"exact_removed", exact_removed},
           {"near_removed", near_removed},
           {"tokens_before", tokens_before},
           {"tokens_after", tokens_after},
           {"candidate_pairs", candidate_pairs},
           {"verified_pairs", verified_pairs},
           {"clusters", clusters_json}};
    return j.dump(2) + "\n";
}

std::string DedupReport::cluster_dump() const {
    std::ostringstream out;
    for (const auto& c : clusters) {
        for (const auto& r : c.removed_ids) out << c.kept_id << '\t' << r << '\n';
    }
    return out.str();
}

}  // namespace lexcurate::dedup
