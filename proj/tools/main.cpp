// lexcurate command-line driver.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lexcurate/error.hpp"
#include "lexcurate/io.hpp"
#include "lexcurate/lm.hpp"
#include "lexcurate/pipeline.hpp"
#include "lexcurate/synth.hpp"

namespace fs = std::filesystem;
using namespace lexcurate;
using nlohmann::json;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<bool> strict;
    std::vector<std::string> overrides;
};

pipeline::Config build_config(const Globals& g) {
    auto config = g.config_path.empty() ? pipeline::Config::defaults(fs::current_path())
                                        : pipeline::Config::load(g.config_path);
    if (g.seed) config.set("seed", std::to_string(*g.seed));
    if (g.workers) config.set("workers", std::to_string(*g.workers));
    if (g.strict) config.set("strict", *g.strict ? "true" : "false");
    for (const auto& o : g.overrides) config.set_assignment(o);
    return config;
}

void report(const pipeline::StageStats& st) { std::cout << st.to_json().dump(2) << "\n"; }

void finish(const fs::path& out, const pipeline::StageStats& st, const pipeline::Config& config,
            const pipeline::Settings& s) {
    pipeline::write_sidecar(out, st, config.hash(), s.seed);
    report(st);
}

double threshold_from_sidecar(const fs::path& model) {
    auto sidecar = model;
    sidecar += ".manifest.json";
    std::string text;
    try {
        text = read_text(sidecar);
    } catch (const IoError&) {
        throw ConfigError("no --threshold given and no model manifest at '" + sidecar.string() + "'");
    }
    const auto j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.contains("extra") || !j["extra"].contains("threshold")) {
        throw ConfigError("model manifest '" + sidecar.string() + "' has no threshold");
    }
    return j["extra"]["threshold"].get<double>();
}

std::vector<std::string> split_labels(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    for (const auto& l : out) {
        if (l.empty()) throw ConfigError("empty label in --labels '" + csv + "'");
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lexcurate: legal-domain corpus curation, instruction data and evaluation"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("-c,--config", g.config_path, "JSON config file; relative paths resolve against its directory");
    app.add_option("--seed", g.seed, "Override the config seed");
    app.add_option("--workers", g.workers, "Worker threads (0 = all cores)");
    bool strict_flag = false;
    bool lenient_flag = false;
    auto* strict_opt = app.add_flag("--strict", strict_flag, "Fail on the first malformed record");
    app.add_flag("--lenient", lenient_flag, "Skip and count malformed records")->excludes(strict_opt);
    app.add_option("--set", g.overrides, "Override a config scalar, key=value (repeatable)");

    std::function<void()> action;
    std::string in, out, model, baseline, extra_path, labels_csv, tasks_dir, mmlu_dir, dropped, clusters;
    std::optional<double> threshold;
    std::optional<std::size_t> ngram_n, top_k, turn_pairs;
    std::optional<std::uint64_t> budget;
    std::vector<std::string> sources;

    auto settings = [&] {
        const auto config = build_config(g);
        auto s = pipeline::parse_settings(config);
        set_worker_count(s.workers);
        return std::pair{config, s};
    };

    auto* normalize = app.add_subcommand("normalize", "NFKC-normalize text and collapse whitespace");
    normalize->add_option("--in", in, "Input JSONL")->required();
    normalize->add_option("--out", out, "Output JSONL")->required();
    normalize->callback([&] {
        action = [&] {
            const auto [config, s] = settings();
            finish(out, pipeline::run_normalize(in, out, s), config, s);
        };
    });

    auto* mine = app.add_subcommand("mine-ngrams", "Report the most frequent n-grams");
    mine->add_option("--in", in, "Input JSONL")->required();
    mine->add_option("--out", out, "Output TSV")->required();
    mine->add_option("-n", ngram_n, "n-gram length");
    mine->add_option("--top-k", top_k, "Number of n-grams to report");
    mine->callback([&] {
        action = [&] {
            auto [config, s] = settings();
            if (ngram_n) s.ngram_n = *ngram_n;
            if (top_k) s.top_k = *top_k;
            if (s.ngram_n == 0 || s.top_k == 0) throw ConfigError("-n and --top-k must be >= 1");
            finish(out, pipeline::run_mine_ngrams(in, out, s), config, s);
        };
    });

    auto* rules = app.add_subcommand("filter-rules", "Apply the artifact rule set");
    rules->add_option("--in", in, "Input JSONL")->required();
    rules->add_option("--out", out, "Output JSONL")->required();
    rules->add_option("--rules", extra_path, "Rule file (default: config paths.rules)");
    rules->callback([&] {
        action = [&] {
            auto [config, s] = settings();
            if (!extra_path.empty()) s.rules = fs::path(extra_path);
            finish(out, pipeline::run_filter_rules(in, out, s), config, s);
        };
    });

    auto* train = app.add_subcommand("train-lm", "Train the n-gram model and calibrate the threshold");
    train->add_option("--seed-corpus", in, "Seed corpus JSONL (default: config paths.seed_corpus)");
    train->add_option("--out", out, "Model file")->required();
    train->callback([&] {
        action = [&] {
            const auto [config, s] = settings();
            const fs::path seed = in.empty() ? s.seed_corpus : fs::path(in);
            finish(out, pipeline::run_train_lm(seed, out, s), config, s);
        };
    });

    auto* ppl = app.add_subcommand("filter-ppl", "Drop high-perplexity paragraphs or documents");
    ppl->add_option("--in", in, "Input JSONL")->required();
    ppl->add_option("--out", out, "Kept JSONL")->required();
    ppl->add_option("--model", model, "Model file")->required();
    ppl->add_option("--threshold", threshold, "Perplexity threshold (default: the model manifest's)");
    ppl->add_option("--dropped", dropped, "Write dropped units here");
    ppl->callback([&] {
        action = [&] {
            const auto [config, s] = settings();
            const double t = threshold ? *threshold : threshold_from_sidecar(model);
            const auto lm = lm::NGramLM::load(model);
            const fs::path dropped_path(dropped);
            finish(out, pipeline::run_filter_ppl(in, out, dropped.empty() ? nullptr : &dropped_path, lm, t, s), config,
                   s);
        };
    });

    auto* dedup = app.add_subcommand("dedup", "Remove exact and near duplicates");
    dedup->add_option("--in", in, "Input JSONL")->required();
    dedup->add_option("--out", out, "Output JSONL")->required();
    dedup->add_option("--clusters", clusters, "Cluster dump TSV (default: <out>.clusters.tsv)");
    dedup->callback([&] {
        action = [&] {
            const auto [config, s] = settings();
            fs::path c = clusters;
            if (c.empty()) {
                c = out;
                c += ".clusters.tsv";
            }
            finish(out, pipeline::run_dedup(in, out, c, s), config, s);
        };
    });

    auto* mix = app.add_subcommand("mix", "Assemble the continued-pretraining mix");
    mix->add_option("--out", out, "Output JSONL")->required();
    mix->add_option("--source", sources, "name=path corpus for a mix source (default: config mix.sources)");
    mix->add_option("--budget", budget, "Token budget (0 = largest feasible)");
    mix->callback([&] {
        action = [&] {
            auto [config, s] = settings();
            if (budget) s.mix.token_budget = *budget;
            std::map<std::string, fs::path> paths;
            for (const auto& [name, path] : s.mix_sources) {
                if (path != "@pipeline") paths[name] = path;
            }
            for (const auto& a : sources) {
                const auto eq = a.find('=');
                if (eq == std::string::npos || eq == 0) throw ConfigError("--source must be name=path, got '" + a + "'");
                paths[a.substr(0, eq)] = a.substr(eq + 1);
            }
            finish(out, pipeline::run_mix(paths, out, s), config, s);
        };
    });

    auto* gen = app.add_subcommand("gen-instructions", "Generate multi-turn conversations from labeled examples");
    gen->add_option("--examples", in, "Labeled examples JSONL (default: config paths.examples)");
    gen->add_option("--templates", extra_path, "Template file (default: config paths.templates)");
    gen->add_option("--out", out, "Conversations JSONL")->required();
    gen->add_option("--turn-pairs", turn_pairs, "Extra turn pairs k per conversation");
    gen->callback([&] {
        action = [&] {
            auto [config, s] = settings();
            if (!extra_path.empty()) s.templates = extra_path;
            if (turn_pairs) {
                if (*turn_pairs == 0) throw ConfigError("--turn-pairs must be >= 1");
                s.turn_pairs = *turn_pairs;
            }
            const fs::path examples = in.empty() ? s.examples : fs::path(in);
            finish(out, pipeline::run_gen_instructions(examples, out, s), config, s);
        };
    });

    auto* decon = app.add_subcommand("decontaminate", "Drop conversations overlapping benchmark inputs");
    decon->add_option("--in", in, "Conversations JSONL")->required();
    decon->add_option("--tasks", tasks_dir, "Benchmark task directory (default: config paths.tasks)");
    decon->add_option("--out", out, "Output JSONL")->required();
    decon->callback([&] {
        action = [&] {
            const auto [config, s] = settings();
            const fs::path t = tasks_dir.empty() ? s.tasks : fs::path(tasks_dir);
            finish(out, pipeline::run_decontaminate(in, t, out, s), config, s);
        };
    });

    auto* curate = app.add_subcommand("curate-prompts", "Rewrite a few-shot prompt into the curated form");
    curate->add_option("--in", in, "Original prompt text")->required();
    curate->add_option("--labels", labels_csv, "Comma-separated label set, e.g. Yes,No")->required();
    curate->add_option("--out", out, "Curated prompt text")->required();
    curate->callback([&] {
        action = [&] {
            const auto [config, s] = settings();
            finish(out, pipeline::run_curate_prompt(in, split_labels(labels_csv), out), config, s);
        };
    });

    auto* ev = app.add_subcommand("eval", "Run the benchmark tasks against the eval backend");
    ev->add_option("--tasks", tasks_dir, "Task directory (default: config paths.tasks)");
    ev->add_option("--mmlu", mmlu_dir, "MMLU CSV directory (default: config paths.mmlu; 'none' to skip)");
    ev->add_option("--out", out, "Report JSON")->required();
    ev->callback([&] {
        action = [&] {
            const auto [config, s] = settings();
            const fs::path t = tasks_dir.empty() ? s.tasks : fs::path(tasks_dir);
            const fs::path m = mmlu_dir == "none" ? fs::path() : mmlu_dir.empty() ? s.mmlu : fs::path(mmlu_dir);
            finish(out, pipeline::run_eval(t, m, out, s), config, s);
        };
    });

    auto* pr = app.add_subcommand("ppl-report", "Per-category perplexity, optionally against a baseline model");
    pr->add_option("--docs", in, "Documents JSONL with meta.category")->required();
    pr->add_option("--model", model, "Model file")->required();
    pr->add_option("--baseline", baseline, "Baseline model file");
    pr->add_option("--out", out, "Report JSON")->required();
    pr->callback([&] {
        action = [&] {
            const auto [config, s] = settings();
            const fs::path b(baseline);
            finish(out, pipeline::run_ppl_report(in, model, baseline.empty() ? nullptr : &b, out, s), config, s);
        };
    });

    auto* pipe = app.add_subcommand("pipeline", "Run normalize through mix from the config");
    pipe->callback([&] {
        action = [&] {
            const auto config = build_config(g);
            std::cout << pipeline::run_pipeline(config).dump(2) << "\n";
        };
    });

    auto* synth = app.add_subcommand("synth", "Write the synthetic sample data set and a config for it");
    synth->add_option("--out", out, "Target directory")->required();
    synth->callback([&] {
        action = [&] {
            const std::uint64_t seed = g.seed.value_or(1234);
            synth::write_sample_data(out, seed);
            auto config = pipeline::Config::from_json(pipeline::default_config_json(), out);
            config.set("seed", std::to_string(seed));
            write_text(fs::path(out) / "config.json", config.dump());
            std::cout << "wrote sample data to " << out << "\n";
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << "\n" << app.help();
        return 1;
    }

    if (strict_flag) g.strict = true;
    if (lenient_flag) g.strict = false;
    try {
        action();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const pipeline::StageError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
