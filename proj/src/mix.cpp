#include "lexcurate/mix.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "lexcurate/error.hpp"
#include "lexcurate/hash.hpp"
#include "lexcurate/random.hpp"

namespace lexcurate::mix {

using nlohmann::json;

void MixSpec::validate(const corpus::SourceRegistry& registry) const {
    if (entries.empty()) throw ConfigError("mix spec has no entries");
    if (token_budget == 0) throw ConfigError("mix token_budget must be positive");
    double sum = 0.0;
    std::unordered_set<std::string> seen;
    for (const auto& e : entries) {
        if (!registry.contains(e.source)) throw ConfigError("mix spec names unknown source '" + e.source + "'");
        if (!seen.insert(e.source).second) throw ConfigError("mix spec lists source '" + e.source + "' twice");
        if (!(e.fraction >= 0.0 && e.fraction <= 1.0)) {
            throw ConfigError("mix fraction for '" + e.source + "' must be in [0, 1]");
        }
        sum += e.fraction;
    }
    if (std::abs(sum - 1.0) > kFractionTolerance) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "mix fractions sum to " << sum << ", expected 1";
        throw ConfigError(msg.str());
    }
}

MixSpec MixSpec::from_json(std::string_view text) {
    try {
        const auto j = json::parse(text);
        MixSpec spec;
        spec.token_budget = j.at("token_budget").get<std::uint64_t>();
        spec.seed = j.value("seed", std::uint64_t{0});
        for (const auto& e : j.at("entries")) {
            spec.entries.push_back({e.at("source").get<std::string>(), e.at("fraction").get<double>()});
        }
        return spec;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid mix spec: ") + e.what());
    }
}

std::string MixSpec::to_json() const {
    json entries_json = json::array();
    for (const auto& e : entries) entries_json.push_back({{"source", e.source}, {"fraction", e.fraction}});
    return json{{"token_budget", token_budget}, {"seed", seed}, {"entries", entries_json}}.dump(2) + "\n";
}

MixSpec MixSpec::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mix spec " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

MixSpec default_mix_spec(std::uint64_t token_budget, std::uint64_t seed) {
    return {{{"legal", 0.96}, {"replay", 0.02}, {"instruction", 0.02}}, token_budget, seed};
}

std::string MixManifest::to_json() const {
    json src = json::object();
    for (const auto& [name, s] : sources) {
        src[name] = {{"requested_tokens", s.requested_tokens},
                     {"realized_tokens", s.realized_tokens},
                     {"available_tokens", s.available_tokens},
                     {"documents", s.documents},
                     {"id_digest", s.id_digest}};
    }
    return json{{"sources", src},
                {"total_tokens", total_tokens},
                {"total_documents", total_documents},
                {"token_budget", token_budget},
                {"seed", seed},
                {"order_digest", order_digest}}
               .dump(2) +
           "\n";
}

MixManifest MixManifest::from_json(std::string_view text) {
    try {
        const auto j = json::parse(text);
        MixManifest m;
        for (const auto& [name, s] : j.at("sources").items()) {
            m.sources[name] = {s.at("requested_tokens").get<std::uint64_t>(),
                               s.at("realized_tokens").get<std::uint64_t>(),
                               s.value("available_tokens", std::uint64_t{0}),
                               s.at("documents").get<std::uint64_t>(),
                               s.value("id_digest", std::string{})};
        }
        m.total_tokens = j.at("total_tokens").get<std::uint64_t>();
        m.total_documents = j.value("total_documents", std::uint64_t{0});
        m.token_budget = j.value("token_budget", std::uint64_t{0});
        m.seed = j.value("seed", std::uint64_t{0});
        m.order_digest = j.value("order_digest", std::string{});
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("invalid mix manifest: ") + e.what());
    }
}

namespace {

struct Sample {
    std::vector<std::size_t> picked;  // indices into the source corpus, sampling order
    SourceManifest manifest;
};

Sample sample_source(std::span<const corpus::Document> docs, const std::string& name, std::uint64_t requested,
                     std::uint64_t seed, const Tokenizer& tok) {
    Sample s;
    s.manifest.requested_tokens = requested;
    std::vector<std::uint64_t> tokens(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        tokens[i] = docs[i].token_count ? *docs[i].token_count : tok.count(docs[i].text);
        s.manifest.available_tokens += tokens[i];
    }
    if (s.manifest.available_tokens < requested) {
        throw InvalidArgument("source '" + name + "' has " + std::to_string(s.manifest.available_tokens) +
                              " tokens, mix requests " + std::to_string(requested));
    }
    std::vector<std::size_t> order(docs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, name));
    shuffle(std::span<std::size_t>(order), rng);

    Sha256 digest;
    for (auto idx : order) {
        if (s.manifest.realized_tokens >= requested) break;
        s.picked.push_back(idx);
        s.manifest.realized_tokens += tokens[idx];
        digest.update(docs[idx].id);
        digest.update("\n");
    }
    s.manifest.documents = s.picked.size();
    s.manifest.id_digest = digest.hex_digest();
    return s;
}

}  // namespace

MixResult assemble_mix(const std::map<std::string, std::span<const corpus::Document>>& sources, const MixSpec& spec,
                       const Tokenizer& tok, Execution exec, const corpus::SourceRegistry& registry) {
    spec.validate(registry);
    for (const auto& e : spec.entries) {
        if (!sources.contains(e.source)) throw ConfigError("no corpus supplied for mix source '" + e.source + "'");
    }

    const auto n = static_cast<std::ptrdiff_t>(spec.entries.size());
    std::vector<Sample> samples(spec.entries.size());
    std::vector<std::exception_ptr> errors(spec.entries.size());
    auto run = [&](std::ptrdiff_t i) {
        const auto& e = spec.entries[static_cast<std::size_t>(i)];
        const auto requested =
            static_cast<std::uint64_t>(std::llround(e.fraction * static_cast<double>(spec.token_budget)));
        try {
            samples[i] = sample_source(sources.at(e.source), e.source, requested, spec.seed, tok);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (exec == Execution::serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) run(i);
    } else {
#pragma omp parallel for schedule(dynamic, 1)
        for (std::ptrdiff_t i = 0; i < n; ++i) run(i);
    }
    for (auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }

    MixResult result;
    auto& manifest = result.manifest;
    manifest.token_budget = spec.token_budget;
    manifest.seed = spec.seed;
    std::unordered_set<std::string> ids;
    for (std::size_t i = 0; i < spec.entries.size(); ++i) {
        const auto& name = spec.entries[i].source;
        const auto docs = sources.at(name);
        for (auto idx : samples[i].picked) {
            if (!ids.insert(docs[idx].id).second) {
                throw InvalidArgument("document id '" + docs[idx].id + "' occurs in more than one mix source");
            }
            result.documents.push_back(docs[idx]);
        }
        manifest.total_tokens += samples[i].manifest.realized_tokens;
        manifest.sources[name] = std::move(samples[i].manifest);
    }

    Rng rng(derive_seed(spec.seed, "mix-order"));
    shuffle(std::span<corpus::Document>(result.documents), rng);
    Sha256 order;
    for (const auto& d : result.documents) {
        order.update(d.id);
        order.update("\n");
    }
    manifest.order_digest = order.hex_digest();
    manifest.total_documents = result.documents.size();
    return result;
}

std::uint64_t max_feasible_budget(const std::map<std::string, std::span<const corpus::Document>>& sources,
                                  const MixSpec& spec, const Tokenizer& tok) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : spec.entries) {
        if (e.fraction <= 0.0) continue;
        const auto it = sources.find(e.source);
        if (it == sources.end()) throw ConfigError("no corpus supplied for mix source '" + e.source + "'");
        std::uint64_t available = 0;
        for (const auto& d : it->second) available += d.token_count ? *d.token_count : tok.count(d.text);
        best = std::min(best, static_cast<double>(available) / e.fraction);
    }
    if (!std::isfinite(best)) throw ConfigError("mix spec has no source with a positive fraction");
    return static_cast<std::uint64_t>(std::floor(best));
}

bool MixValidation::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const SourceCheck& c) { return c.pass; });
}

std::string MixValidation::to_json() const {
    json arr = json::array();
    for (const auto& c : checks) {
        arr.push_back({{"source", c.source},
                       {"target_fraction", c.target_fraction},
                       {"realized_fraction", c.realized_fraction},
                       {"pass", c.pass}});
    }
    return json{{"passed", passed()}, {"sources", arr}}.dump(2) + "\n";
}

MixValidation validate_mix(const MixManifest& manifest, const MixSpec& spec, double tolerance) {
    if (!(tolerance >= 0.0)) throw InvalidArgument("tolerance must be non-negative");
    if (manifest.sources.size() != spec.entries.size()) {
        throw InvalidArgument("manifest and spec name different source sets");
    }
    MixValidation v;
    for (const auto& e : spec.entries) {
        auto it = manifest.sources.find(e.source);
        if (it == manifest.sources.end()) throw InvalidArgument("manifest has no source '" + e.source + "'");
        const double realized = manifest.total_tokens == 0
                                    ? 0.0
                                    : static_cast<double>(it->second.realized_tokens) /
                                          static_cast<double>(manifest.total_tokens);
        v.checks.push_back({e.source, e.fraction, realized, std::abs(realized - e.fraction) <= tolerance});
    }
    return v;
}

}  // namespace lexcurate::mix
