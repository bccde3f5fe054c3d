#include "lexcurate/pipeline.hpp"

#include <cmath>
#include <sstream>

#include "lexcurate/cleaning.hpp"
#include "lexcurate/eval.hpp"
#include "lexcurate/hash.hpp"
#include "lexcurate/instruct.hpp"
#include "lexcurate/io.hpp"
#include "lexcurate/ngram.hpp"
#include "lexcurate/parallel.hpp"

namespace lexcurate::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

std::string default_config_json() {
    const json j = {
        {"seed", 1234},
        {"workers", 0},
        {"strict", true},
        {"tokenizer", "whitespace"},
        {"paths",
         {{"input", "corpus.jsonl"},
          {"seed_corpus", "seed.jsonl"},
          {"work_dir", "../runs/demo"},
          {"rules", "rules.json"},
          {"examples", "examples.jsonl"},
          {"templates", "templates.json"},
          {"tasks", "tasks"},
          {"mmlu", "mmlu"}}},
        {"cleaning", {{"normalize", true}, {"ngram_n", 10}, {"top_k", 50}}},
        {"lm",
         {{"order", 5},
          {"discount_mode", "estimated"},
          {"fixed_discount", 0.7},
          {"sentence_markers", true},
          {"percentile", 99.0},
          {"granularity", "paragraph"},
          {"calibration", "heldout"},
          {"folds", 5}}},
        {"dedup",
         {{"shingle_n", 5}, {"permutations", 128}, {"minhash_seed", 1}, {"threshold", 0.7}, {"bands", 0}, {"rows", 0}}},
        {"mix",
         {{"token_budget", 0},
          {"entries",
           json::array({{{"source", "legal"}, {"fraction", 0.96}},
                        {{"source", "replay"}, {"fraction", 0.02}},
                        {{"source", "instruction"}, {"fraction", 0.02}}})},
          {"sources", {{"legal", "@pipeline"}, {"replay", "replay.jsonl"}, {"instruction", "instruction.jsonl"}}}}},
        {"instruct",
         {{"turn_pairs", 0},
          {"concurrency", 4},
          {"backend",
           {{"type", "stub"},
            {"endpoint", ""},
            {"model", ""},
            {"token_env", "LEXCURATE_API_TOKEN"},
            {"temperature", 0.0},
            {"max_tokens", 512},
            {"timeout_ms", 60000},
            {"max_retries", 3}}}}},
        {"eval",
         {{"concurrency", 4},
          {"ppl_categories", json::array({"contracts", "decisions", "legislation", "party_submissions"})},
          {"backend",
           {{"type", "label-stub"},
            {"endpoint", ""},
            {"model", ""},
            {"token_env", "LEXCURATE_API_TOKEN"},
            {"temperature", 0.0},
            {"max_tokens", 16},
            {"timeout_ms", 60000},
            {"max_retries", 3}}}}},
    };
    return j.dump(2) + "\n";
}

Config Config::defaults(fs::path base_dir) { return from_json(default_config_json(), std::move(base_dir)); }

Config Config::load(const fs::path& path) {
    std::string text;
    try {
        text = read_text(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    return from_json(text, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

Config Config::from_json(std::string_view text, fs::path base_dir) {
    Config c;
    try {
        c.json_ = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!c.json_.is_object()) throw ConfigError("config must be a JSON object");
    c.base_dir_ = std::move(base_dir);
    return c;
}

void Config::set(std::string_view key, std::string_view value) {
    nlohmann::json* node = &json_;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const auto part = std::string(key.substr(start, dot == std::string_view::npos ? key.npos : dot - start));
        if (!node->is_object() || !node->contains(part)) {
            throw ConfigError("unknown config key '" + std::string(key) + "'");
        }
        node = &(*node)[part];
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    if (node->is_object() || node->is_array()) {
        throw ConfigError("config key '" + std::string(key) + "' is not a scalar");
    }
    if (node->is_string()) {
        *node = std::string(value);
        return;
    }
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
        throw ConfigError("invalid value '" + std::string(value) + "' for config key '" + std::string(key) + "'");
    }
    const bool compatible = node->is_null() || (node->is_boolean() && parsed.is_boolean()) ||
                            (node->is_number() && parsed.is_number());
    if (!compatible) {
        throw ConfigError("value '" + std::string(value) + "' has the wrong type for config key '" + std::string(key) +
                          "'");
    }
    *node = std::move(parsed);
}

void Config::set_assignment(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("override must look like key=value, got '" + std::string(assignment) + "'");
    }
    set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::string Config::hash() const { return sha256_hex(json_.dump()); }

fs::path Config::resolve(std::string_view relative) const {
    fs::path p(relative);
    if (p.is_absolute()) return p.lexically_normal();
    return (base_dir_ / p).lexically_normal();
}

namespace {

const json& at(const json& root, std::string_view dotted) {
    const json* node = &root;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        const auto part = std::string(dotted.substr(start, dot == std::string_view::npos ? dotted.npos : dot - start));
        if (!node->is_object() || !node->contains(part)) {
            throw ConfigError("config is missing '" + std::string(dotted) + "'");
        }
        node = &(*node)[part];
        if (dot == std::string_view::npos) return *node;
        start = dot + 1;
    }
}

template <typename T>
T get(const json& root, std::string_view dotted) {
    const auto& v = at(root, dotted);
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError("");
        } else if constexpr (std::is_unsigned_v<T>) {
            if (!v.is_number_unsigned()) throw ConfigError("");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError("");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError("");
        } else {
            if (!v.is_string()) throw ConfigError("");
        }
        return v.get<T>();
    } catch (const std::exception&) {
        throw ConfigError("config value '" + std::string(dotted) + "' has the wrong type");
    }
}

BackendSettings parse_backend(const json& root, std::string_view prefix) {
    const std::string p(prefix);
    BackendSettings b;
    b.type = get<std::string>(root, p + ".type");
    if (b.type != "stub" && b.type != "label-stub" && b.type != "remote") {
        throw ConfigError("unknown backend type '" + b.type + "' at " + p + ".type");
    }
    b.remote.endpoint = get<std::string>(root, p + ".endpoint");
    b.remote.model = get<std::string>(root, p + ".model");
    b.remote.token_env = get<std::string>(root, p + ".token_env");
    b.remote.temperature = get<double>(root, p + ".temperature");
    b.remote.max_tokens = get<int>(root, p + ".max_tokens");
    b.remote.timeout = std::chrono::milliseconds(get<std::int64_t>(root, p + ".timeout_ms"));
    b.remote.max_retries = get<int>(root, p + ".max_retries");
    if (b.type == "remote" && (b.remote.endpoint.empty() || b.remote.model.empty())) {
        throw ConfigError(p + ": a remote backend needs endpoint and model");
    }
    return b;
}

lm::DiscountMode parse_discount_mode(const std::string& s) {
    if (s == "estimated") return lm::DiscountMode::estimated;
    if (s == "disabled") return lm::DiscountMode::disabled;
    if (s == "fixed") return lm::DiscountMode::fixed;
    throw ConfigError("unknown lm.discount_mode '" + s + "'");
}

}  // namespace

Settings parse_settings(const Config& config) {
    const auto& j = config.json();
    Settings s;
    if (!j.contains("seed")) throw ConfigError("config has no seed");
    s.seed = get<std::uint64_t>(j, "seed");
    s.workers = get<int>(j, "workers");
    if (s.workers < 0) throw ConfigError("workers must be >= 0");
    s.strict = get<bool>(j, "strict");
    s.tokenizer = get<std::string>(j, "tokenizer");
    (void)make_tokenizer(s.tokenizer);

    s.input = config.resolve(get<std::string>(j, "paths.input"));
    s.seed_corpus = config.resolve(get<std::string>(j, "paths.seed_corpus"));
    s.work_dir = config.resolve(get<std::string>(j, "paths.work_dir"));
    if (const auto rules = get<std::string>(j, "paths.rules"); !rules.empty()) s.rules = config.resolve(rules);
    s.examples = config.resolve(get<std::string>(j, "paths.examples"));
    s.templates = config.resolve(get<std::string>(j, "paths.templates"));
    s.tasks = config.resolve(get<std::string>(j, "paths.tasks"));
    s.mmlu = config.resolve(get<std::string>(j, "paths.mmlu"));

    s.normalize = get<bool>(j, "cleaning.normalize");
    s.ngram_n = get<std::size_t>(j, "cleaning.ngram_n");
    s.top_k = get<std::size_t>(j, "cleaning.top_k");
    if (s.ngram_n < 1 || s.top_k < 1) throw ConfigError("cleaning.ngram_n and cleaning.top_k must be >= 1");

    s.lm.order = get<std::size_t>(j, "lm.order");
    if (s.lm.order < 1) throw ConfigError("lm.order must be >= 1");
    s.lm.discount_mode = parse_discount_mode(get<std::string>(j, "lm.discount_mode"));
    s.lm.fixed_discount = get<double>(j, "lm.fixed_discount");
    if (!(s.lm.fixed_discount >= 0.0 && s.lm.fixed_discount < 1.0)) {
        throw ConfigError("lm.fixed_discount must be in [0, 1)");
    }
    s.lm.sentence_markers = get<bool>(j, "lm.sentence_markers");
    s.percentile = get<double>(j, "lm.percentile");
    if (!(s.percentile > 0.0 && s.percentile <= 100.0)) throw ConfigError("lm.percentile must be in (0, 100]");
    try {
        s.granularity = lm::parse_granularity(get<std::string>(j, "lm.granularity"));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    const auto calibration = get<std::string>(j, "lm.calibration");
    if (calibration != "heldout" && calibration != "self") {
        throw ConfigError("lm.calibration must be 'heldout' or 'self'");
    }
    s.heldout_calibration = calibration == "heldout";
    s.folds = get<std::size_t>(j, "lm.folds");
    if (s.folds < 2) throw ConfigError("lm.folds must be >= 2");

    s.dedup.minhash.shingle_n = get<std::size_t>(j, "dedup.shingle_n");
    s.dedup.minhash.permutations = get<std::size_t>(j, "dedup.permutations");
    s.dedup.minhash.seed = get<std::uint64_t>(j, "dedup.minhash_seed");
    s.dedup.threshold = get<double>(j, "dedup.threshold");
    s.dedup.lsh.bands = get<std::size_t>(j, "dedup.bands");
    s.dedup.lsh.rows = get<std::size_t>(j, "dedup.rows");
    if (s.dedup.minhash.shingle_n < 1 || s.dedup.minhash.permutations < 1) {
        throw ConfigError("dedup.shingle_n and dedup.permutations must be >= 1");
    }
    if (!(s.dedup.threshold > 0.0 && s.dedup.threshold <= 1.0)) throw ConfigError("dedup.threshold must be in (0, 1]");
    if (s.dedup.lsh.bands * s.dedup.lsh.rows > s.dedup.minhash.permutations) {
        throw ConfigError("dedup.bands * dedup.rows exceeds dedup.permutations");
    }

    s.mix.token_budget = get<std::uint64_t>(j, "mix.token_budget");
    s.mix.seed = s.seed;
    for (const auto& e : at(j, "mix.entries")) {
        if (!e.is_object() || !e.contains("source") || !e.contains("fraction") || !e["source"].is_string() ||
            !e["fraction"].is_number()) {
            throw ConfigError("mix.entries items need a string source and a numeric fraction");
        }
        s.mix.entries.push_back({e["source"].get<std::string>(), e["fraction"].get<double>()});
    }
    for (const auto& [name, path] : at(j, "mix.sources").items()) {
        if (!path.is_string()) throw ConfigError("mix.sources." + name + " must be a string");
        const auto value = path.get<std::string>();
        s.mix_sources[name] = value == "@pipeline" ? value : config.resolve(value).string();
    }
    {
        auto check = s.mix;
        if (check.token_budget == 0) check.token_budget = 1;
        check.validate(corpus::SourceRegistry::defaults());
    }
    for (const auto& e : s.mix.entries) {
        if (!s.mix_sources.contains(e.source)) throw ConfigError("mix.sources has no path for '" + e.source + "'");
    }

    s.turn_pairs = get<std::size_t>(j, "instruct.turn_pairs");
    s.instruct_concurrency = std::max<std::size_t>(1, get<std::size_t>(j, "instruct.concurrency"));
    s.instruct_backend = parse_backend(j, "instruct.backend");

    s.eval_concurrency = std::max<std::size_t>(1, get<std::size_t>(j, "eval.concurrency"));
    s.eval_backend = parse_backend(j, "eval.backend");
    for (const auto& c : at(j, "eval.ppl_categories")) {
        if (!c.is_string()) throw ConfigError("eval.ppl_categories must hold strings");
        s.ppl_categories.push_back(c.get<std::string>());
    }
    if (s.ppl_categories.empty()) throw ConfigError("eval.ppl_categories is empty");
    return s;
}

void validate_pipeline_paths(const Settings& s) {
    auto require_file = [](const fs::path& p, std::string_view what) {
        std::error_code ec;
        if (!fs::is_regular_file(p, ec)) throw ConfigError(std::string(what) + " '" + p.string() + "' not found");
    };
    require_file(s.input, "input corpus");
    require_file(s.seed_corpus, "seed corpus");
    if (s.rules) {
        require_file(*s.rules, "rule file");
        (void)cleaning::RuleSet::load(*s.rules);
    }
    for (const auto& [name, path] : s.mix_sources) {
        if (path == "@pipeline") continue;
        require_file(path, "mix source " + name);
    }
}

std::unique_ptr<chat::ChatBackend> make_backend(const BackendSettings& b) {
    if (b.type == "stub") return std::make_unique<chat::StubBackend>();
    if (b.type == "label-stub") return std::make_unique<chat::LabelStubBackend>();
    if (b.type == "remote") return std::make_unique<chat::RemoteChatBackend>(b.remote);
    throw ConfigError("unknown backend type '" + b.type + "'");
}

json StageStats::to_json() const {
    return {{"stage", stage},
            {"output", output},
            {"documents_in", documents_in},
            {"documents_out", documents_out},
            {"tokens_in", tokens_in},
            {"tokens_out", tokens_out},
            {"extra", extra}};
}

void write_sidecar(const fs::path& output, const StageStats& stats, std::string_view config_hash, std::uint64_t seed) {
    json j = stats.to_json();
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["output_sha256"] = file_sha256(output);
    json aux = json::array();
    for (const auto& a : stats.auxiliary) {
        aux.push_back({{"file", a.filename().string()}, {"sha256", file_sha256(a)}});
    }
    j["auxiliary"] = aux;
    auto path = output;
    path += ".manifest.json";
    write_text(path, j.dump(2) + "\n");
}

namespace {

Execution exec_of(const Settings&) { return Execution::parallel; }

template <typename Fn>
StageStats clean_stream(const fs::path& in, const fs::path& out, const Settings& s, std::string stage, Fn&& clean) {
    const auto tok = make_tokenizer(s.tokenizer);
    StageStats st;
    st.stage = std::move(stage);
    st.output = out.filename().string();
    corpus::CorpusReader reader(in, {s.strict});
    corpus::CorpusWriter writer(out);
    std::uint64_t emptied = 0;
    for (;;) {
        auto batch = corpus::read_batch(reader, kDefaultBatchSize);
        if (batch.empty()) break;
        for (const auto& d : batch) st.tokens_in += tok->count(d.text);
        st.documents_in += batch.size();
        clean(std::span<corpus::Document>(batch), *tok);
        for (const auto& d : batch) {
            const auto n = d.token_count.value_or(tok->count(d.text));
            if (n == 0) {
                ++emptied;
                continue;
            }
            st.tokens_out += n;
            ++st.documents_out;
            writer.write(d);
        }
    }
    writer.commit();
    st.extra["emptied_documents"] = emptied;
    st.extra["skipped_records"] = reader.skipped();
    return st;
}

}  // namespace

StageStats run_normalize(const fs::path& in, const fs::path& out, const Settings& s) {
    return clean_stream(in, out, s, "normalize", [&](std::span<corpus::Document> batch, const Tokenizer& tok) {
        cleaning::clean_documents(batch, {s.normalize, nullptr}, tok, exec_of(s));
    });
}

StageStats run_filter_rules(const fs::path& in, const fs::path& out, const Settings& s) {
    const auto rules = s.rules ? cleaning::RuleSet::load(*s.rules) : cleaning::build_default_ruleset();
    auto st = clean_stream(in, out, s, "filter-rules", [&](std::span<corpus::Document> batch, const Tokenizer& tok) {
        cleaning::clean_documents(batch, {false, &rules}, tok, exec_of(s));
    });
    st.extra["rules"] = rules.rules().size();
    return st;
}

StageStats run_mine_ngrams(const fs::path& in, const fs::path& out, const Settings& s) {
    const auto tok = make_tokenizer(s.tokenizer);
    corpus::CorpusReader reader(in, {s.strict});
    const auto table = cleaning::mine_ngrams(reader, *tok, s.ngram_n, s.top_k, exec_of(s));
    cleaning::write_ngram_report(table, out);
    StageStats st;
    st.stage = "mine-ngrams";
    st.output = out.filename().string();
    st.documents_in = reader.documents_read();
    st.extra = {{"n", table.n}, {"top_k", s.top_k}, {"observed", table.observed}, {"distinct", table.distinct}};
    return st;
}

StageStats run_train_lm(const fs::path& seed, const fs::path& model_out, const Settings& s) {
    const auto tok = make_tokenizer(s.tokenizer);
    const auto docs = corpus::read_documents(seed, s.strict);
    const auto model = lm::train_lm(docs, *tok, s.lm, exec_of(s));
    model.save(model_out);
    const double threshold = s.heldout_calibration
                                 ? lm::calibrate_threshold_heldout(docs, *tok, s.lm, s.percentile, s.folds)
                                 : lm::calibrate_threshold(model, docs, *tok, s.percentile);
    StageStats st;
    st.stage = "train-lm";
    st.output = model_out.filename().string();
    st.documents_in = docs.size();
    for (const auto& d : docs) st.tokens_in += tok->count(d.text);
    st.extra = {{"threshold", threshold},
                {"percentile", s.percentile},
                {"calibration", s.heldout_calibration ? "heldout" : "self"},
                {"order", model.order()},
                {"vocab_size", model.vocab_size()},
                {"discounts", std::vector<double>(model.discounts().begin(), model.discounts().end())}};
    return st;
}

StageStats run_filter_ppl(const fs::path& in, const fs::path& out, const fs::path* dropped, const lm::NGramLM& model,
                          double threshold, const Settings& s) {
    const auto tok = make_tokenizer(s.tokenizer);
    corpus::CorpusReader reader(in, {s.strict});
    corpus::CorpusWriter kept(out);
    std::optional<corpus::CorpusWriter> drop;
    if (dropped) drop.emplace(*dropped);
    const auto report = lm::filter_by_perplexity(reader, kept, drop ? &*drop : nullptr, model, *tok, threshold,
                                                 s.granularity, exec_of(s));
    kept.commit();
    if (drop) drop->commit();
    std::vector<fs::path> aux;
    if (dropped) aux.push_back(*dropped);
    const auto totals = report.totals();
    StageStats st;
    st.stage = "filter-ppl";
    st.output = out.filename().string();
    st.documents_in = totals.input_documents;
    st.documents_out = totals.kept_documents;
    st.tokens_in = totals.input_tokens;
    st.tokens_out = totals.kept_tokens;
    st.extra = json::parse(report.to_json());
    st.auxiliary = std::move(aux);
    return st;
}

StageStats run_dedup(const fs::path& in, const fs::path& out, const fs::path& clusters, const Settings& s) {
    const auto tok = make_tokenizer(s.tokenizer);
    const auto report = dedup::dedup_file(in, out, s.dedup, *tok, s.strict, exec_of(s));
    write_text(clusters, report.cluster_dump());
    StageStats st;
    st.auxiliary = {clusters};
    st.stage = "dedup";
    st.output = out.filename().string();
    st.documents_in = report.documents_before;
    st.documents_out = report.documents_after;
    st.tokens_in = report.tokens_before;
    st.tokens_out = report.tokens_after;
    const auto lsh = s.dedup.lsh.bands == 0 || s.dedup.lsh.rows == 0
                         ? dedup::optimal_lsh_params(s.dedup.threshold, s.dedup.minhash.permutations)
                         : s.dedup.lsh;
    st.extra = {{"exact_removed", report.exact_removed},
                {"near_removed", report.near_removed},
                {"clusters", report.clusters.size()},
                {"candidate_pairs", report.candidate_pairs},
                {"verified_pairs", report.verified_pairs},
                {"bands", lsh.bands},
                {"rows", lsh.rows}};
    return st;
}

StageStats run_mix(const std::map<std::string, fs::path>& sources, const fs::path& out, const Settings& s) {
    const auto tok = make_tokenizer(s.tokenizer);
    std::map<std::string, std::vector<corpus::Document>> corpora;
    StageStats st;
    st.stage = "mix";
    st.output = out.filename().string();
    for (const auto& e : s.mix.entries) {
        const auto it = sources.find(e.source);
        if (it == sources.end()) throw ConfigError("no corpus path for mix source '" + e.source + "'");
        auto docs = corpus::read_documents(it->second, s.strict);
        for (auto& d : docs) st.tokens_in += corpus::count_tokens(d, *tok);
        st.documents_in += docs.size();
        corpora[e.source] = std::move(docs);
    }
    std::map<std::string, std::span<const corpus::Document>> views;
    for (const auto& [name, docs] : corpora) views[name] = docs;

    auto spec = s.mix;
    if (spec.token_budget == 0) spec.token_budget = mix::max_feasible_budget(views, spec, *tok);
    const auto result = mix::assemble_mix(views, spec, *tok, exec_of(s));
    corpus::write_documents(result.documents, out);
    auto manifest_path = out;
    manifest_path += ".mix.json";
    write_text(manifest_path, result.manifest.to_json());

    st.documents_out = result.documents.size();
    st.tokens_out = result.manifest.total_tokens;
    st.auxiliary = {manifest_path};
    const auto validation = mix::validate_mix(result.manifest, spec, 0.005);
    st.extra = {{"token_budget", spec.token_budget},
                {"manifest", json::parse(result.manifest.to_json())},
                {"validation", json::parse(validation.to_json())}};
    return st;
}

StageStats run_gen_instructions(const fs::path& examples_path, const fs::path& out, const Settings& s) {
    const auto examples = instruct::read_examples(examples_path);
    const auto templates = instruct::TemplateSet::load(s.templates);
    const auto pairs = s.turn_pairs > 0 ? s.turn_pairs : templates.extra_turn_pairs();

    std::vector<instruct::Conversation> scaffolds;
    json rejected = json::array();
    for (const auto& ex : examples) {
        try {
            scaffolds.push_back(instruct::scaffold_conversation(ex, templates));
        } catch (const InvalidArgument& e) {
            rejected.push_back({{"id", ex.id}, {"reason", e.what()}});
        }
    }
    const auto user = make_backend(s.instruct_backend);
    const auto assistant = make_backend(s.instruct_backend);
    const auto convs = instruct::extend_all(scaffolds, *user, *assistant, pairs, s.instruct_concurrency);
    instruct::write_conversations(convs, out);

    StageStats st;
    st.stage = "gen-instructions";
    st.output = out.filename().string();
    st.documents_in = examples.size();
    st.documents_out = convs.size();
    std::size_t failed = 0;
    for (const auto& c : convs) failed += c.status == instruct::Status::failed;
    st.extra = {{"turn_pairs", pairs}, {"failed", failed}, {"rejected", rejected}};
    return st;
}

StageStats run_decontaminate(const fs::path& conversations, const fs::path& tasks_dir, const fs::path& out,
                             const Settings& s) {
    const auto tok = make_tokenizer(s.tokenizer);
    const auto convs = instruct::read_conversations(conversations);
    std::vector<std::string> inputs;
    for (const auto& t : eval::load_task_dir(tasks_dir)) {
        for (const auto& i : t.instances) inputs.push_back(cleaning::normalize_text(i.input));
    }
    const auto result = instruct::decontaminate(convs, inputs, instruct::kDecontaminationShingle, *tok, exec_of(s));
    instruct::write_conversations(result.kept, out);
    StageStats st;
    st.stage = "decontaminate";
    st.output = out.filename().string();
    st.documents_in = convs.size();
    st.documents_out = result.kept.size();
    st.extra = {{"benchmark_inputs", inputs.size()}, {"removed", result.removed_ids}};
    return st;
}

StageStats run_curate_prompt(const fs::path& original, const std::vector<std::string>& labels, const fs::path& out) {
    const auto curated = eval::curate_prompt(read_text(original), labels);
    write_text(out, curated + "\n");
    StageStats st;
    st.stage = "curate-prompts";
    st.output = out.filename().string();
    st.documents_in = 1;
    st.documents_out = 1;
    st.extra = {{"labels", labels}};
    return st;
}

StageStats run_eval(const fs::path& tasks_dir, const fs::path& mmlu_dir, const fs::path& out, const Settings& s) {
    auto tasks = eval::load_task_dir(tasks_dir);
    if (!mmlu_dir.empty()) {
        for (auto& t : eval::load_mmlu_legal(mmlu_dir)) tasks.push_back(std::move(t));
    }
    const auto backend = make_backend(s.eval_backend);
    const auto run = eval::run_benchmark(tasks, *backend, {s.eval_concurrency, s.seed});
    write_text(out, run.report.to_json());
    auto table = out;
    table += ".txt";
    write_text(table, run.report.to_table());
    auto dump = out;
    dump += ".predictions.jsonl";
    std::string lines;
    for (const auto& p : run.predictions) lines += eval::serialize_prediction(p) + "\n";
    write_text(dump, lines);

    StageStats st;
    st.stage = "eval";
    st.auxiliary = {table, dump};
    st.output = out.filename().string();
    st.documents_in = run.predictions.size();
    st.documents_out = run.predictions.size();
    json counts = json::object();
    for (const auto& t : tasks) counts[t.name] = t.instances.size();
    st.extra = {{"backend", backend->name()}, {"overall", run.report.overall}, {"instances", counts}};
    return st;
}

StageStats run_ppl_report(const fs::path& docs_path, const fs::path& model_path, const fs::path* baseline_path,
                          const fs::path& out, const Settings& s) {
    const auto tok = make_tokenizer(s.tokenizer);
    const auto docs = corpus::read_documents(docs_path, s.strict);
    const auto model = lm::NGramLM::load(model_path);
    const eval::NGramScorer scorer(model, *tok, model_path.filename().string());
    std::optional<lm::NGramLM> base_model;
    std::optional<eval::NGramScorer> base_scorer;
    if (baseline_path) {
        base_model = lm::NGramLM::load(*baseline_path);
        base_scorer.emplace(*base_model, *tok, baseline_path->filename().string());
    }
    const auto report =
        eval::perplexity_report(docs, s.ppl_categories, scorer, base_scorer ? &*base_scorer : nullptr);
    write_text(out, report.to_json());
    auto table = out;
    table += ".txt";
    write_text(table, report.to_table());
    StageStats st;
    st.stage = "ppl-report";
    st.auxiliary = {table};
    st.output = out.filename().string();
    st.documents_in = docs.size();
    st.extra = json::parse(report.to_json());
    return st;
}

json run_pipeline(const Config& config) {
    const auto s = parse_settings(config);
    validate_pipeline_paths(s);
    std::error_code ec;
    fs::create_directories(s.work_dir, ec);
    if (ec) throw ConfigError("cannot create work_dir '" + s.work_dir.string() + "': " + ec.message());
    set_worker_count(s.workers);
    const auto hash = config.hash();

    json stages = json::array();
    auto stage = [&](const std::string& name, const fs::path& output, auto&& body) {
        StageStats st;
        try {
            st = body();
            write_sidecar(output, st, hash, s.seed);
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(name, e.what());
        }
        stages.push_back(st.to_json());
        return st;
    };

    const auto normalized = s.work_dir / "01_normalized.jsonl";
    const auto ruled = s.work_dir / "02_rules.jsonl";
    const auto model_path = s.work_dir / "03_lm.model";
    const auto filtered = s.work_dir / "04_ppl.jsonl";
    const auto dropped = s.work_dir / "04_ppl_dropped.jsonl";
    const auto deduped = s.work_dir / "05_dedup.jsonl";
    const auto clusters = s.work_dir / "05_dedup_clusters.tsv";
    const auto mixed = s.work_dir / "06_mix.jsonl";

    stage("normalize", normalized, [&] { return run_normalize(s.input, normalized, s); });
    stage("filter-rules", ruled, [&] { return run_filter_rules(normalized, ruled, s); });
    const auto trained = stage("train-lm", model_path, [&] { return run_train_lm(s.seed_corpus, model_path, s); });
    const double threshold = trained.extra.at("threshold").get<double>();
    stage("filter-ppl", filtered, [&] {
        const auto model = lm::NGramLM::load(model_path);
        return run_filter_ppl(ruled, filtered, &dropped, model, threshold, s);
    });
    stage("dedup", deduped, [&] { return run_dedup(filtered, deduped, clusters, s); });
    stage("mix", mixed, [&] {
        std::map<std::string, fs::path> sources;
        for (const auto& [name, path] : s.mix_sources) {
            sources[name] = path == "@pipeline" ? deduped : fs::path(path);
        }
        return run_mix(sources, mixed, s);
    });

    json manifest = {{"config_hash", hash}, {"seed", s.seed}, {"stages", stages}};
    write_text(s.work_dir / "run_manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

}  // namespace lexcurate::pipeline
