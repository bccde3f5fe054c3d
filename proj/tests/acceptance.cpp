// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lexcurate/cleaning.hpp"
#include "lexcurate/dedup.hpp"
#include "lexcurate/eval.hpp"
#include "lexcurate/instruct.hpp"
#include "lexcurate/io.hpp"
#include "lexcurate/lm.hpp"
#include "lexcurate/mix.hpp"
#include "lexcurate/ngram.hpp"
#include "lexcurate/stats.hpp"
#include "lexcurate/synth.hpp"

using namespace lexcurate;
using corpus::Document;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            if (pass) detail << "failed: ";
            else detail << "; ";
            detail << what;
            pass = false;
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

const Tokenizer& ws() { return whitespace_tokenizer(); }

std::vector<std::string> split_ws(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string t;
    while (in >> t) out.push_back(t);
    return out;
}

fs::path scratch_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("lexcurate-acceptance-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// 1. Planted artifacts removed, clean sentences intact, 10k documents in < 10 s.
void cleaning_fidelity(Outcome& o) {
    auto fx = synth::artifact_corpus(10'000, 2024);
    const auto rules = cleaning::build_default_ruleset();
    const auto t0 = Clock::now();
    cleaning::clean_documents(fx.docs, {true, &rules}, ws());
    const double secs = seconds_since(t0);

    std::size_t remaining = 0;
    std::size_t altered = 0;
    std::size_t sentences = 0;
    for (std::size_t i = 0; i < fx.docs.size(); ++i) {
        const auto& text = fx.docs[i].text;
        for (const auto& a : fx.artifacts) {
            for (auto pos = text.find(a); pos != std::string::npos; pos = text.find(a, pos + 1)) ++remaining;
        }
        if (text.find("<") != std::string::npos || text.find("  ") != std::string::npos ||
            text.find("\n\n\n") != std::string::npos) {
            ++remaining;
        }
        for (const auto& s : fx.sentences[i]) {
            ++sentences;
            if (text.find(s) == std::string::npos) ++altered;
        }
    }
    o.detail << "planted=" << fx.planted << " remaining=" << remaining << " sentences=" << sentences
             << " altered=" << altered << " time=" << secs << "s ";
    o.require(fx.planted > 0, "fixture plants nothing");
    o.require(remaining == 0, "artifacts survive");
    o.require(altered == 0, "clean sentences altered");
    o.require(secs < 10.0, "slower than 10 s");
}

// 2. Top-k 10-gram counts equal a nested-loop count.
void ngram_oracle(Outcome& o) {
    Rng rng(77);
    std::vector<Document> docs;
    for (std::size_t i = 0; i < 1000; ++i) {
        std::string text;
        const auto len = uniform_below(rng, 60);
        for (std::size_t w = 0; w < len; ++w) {
            text += (w ? " " : "") + std::string(1, static_cast<char>('a' + uniform_below(rng, 2)));
        }
        docs.push_back({"d" + std::to_string(i), "legal", text, {}, std::nullopt});
    }
    const std::size_t n = 10;
    const std::size_t k = 50;

    std::vector<std::vector<std::string>> toks;
    for (const auto& d : docs) toks.push_back(split_ws(d.text));
    std::map<std::vector<std::string>, std::uint64_t> oracle;
    for (const auto& t : toks) {
        for (std::size_t i = 0; i + n <= t.size(); ++i) {
            const std::vector<std::string> gram(t.begin() + static_cast<std::ptrdiff_t>(i),
                                                t.begin() + static_cast<std::ptrdiff_t>(i + n));
            if (oracle.contains(gram)) continue;
            std::uint64_t c = 0;
            for (const auto& u : toks) {
                for (std::size_t j = 0; j + n <= u.size(); ++j) {
                    if (std::equal(gram.begin(), gram.end(), u.begin() + static_cast<std::ptrdiff_t>(j))) ++c;
                }
            }
            oracle[gram] = c;
        }
    }
    std::vector<std::pair<std::vector<std::string>, std::uint64_t>> ranked(oracle.begin(), oracle.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    ranked.resize(std::min(k, ranked.size()));

    const auto table = cleaning::mine_ngrams(docs, ws(), n, k);
    bool equal = table.entries.size() == ranked.size();
    for (std::size_t i = 0; equal && i < ranked.size(); ++i) {
        equal = table.entries[i].tokens == ranked[i].first && table.entries[i].count == ranked[i].second;
    }
    o.detail << "distinct=" << oracle.size() << " top=" << table.entries.size();
    o.require(table.distinct == oracle.size(), "distinct count differs");
    o.require(equal, "top-k table differs from nested-loop oracle");
}

// 3. Conditional distributions sum to one; hand unigram case.
void lm_normalization(Outcome& o) {
    const auto seed = synth::seed_corpus(50'000, 3);
    const auto model = lm::train_lm(seed, ws(), {});
    const auto vocab = model.predictable_vocabulary();
    Rng rng(5);
    std::size_t sampled = 0;
    double worst = 0.0;
    for (std::size_t k = 1; k <= model.order(); ++k) {
        const auto contexts = model.observed_contexts(k);
        for (std::size_t i = 0; i < 20 && !contexts.empty(); ++i) {
            const auto& h = contexts[uniform_below(rng, contexts.size())];
            double sum = 0.0;
            for (auto w : vocab) sum += model.prob(h, w);
            worst = std::max(worst, std::abs(sum - 1.0));
            ++sampled;
        }
    }
    o.detail << "contexts=" << sampled << " max|sum-1|=" << worst;
    o.require(sampled == 100, "fewer than 100 contexts sampled");
    o.require(worst <= 1e-6, "distribution does not sum to 1");

    lm::TrainOptions opt;
    opt.order = 1;
    opt.discount_mode = lm::DiscountMode::disabled;
    opt.sentence_markers = false;
    const std::vector<Document> abc = {{"x", "legal", "a a b", {}, std::nullopt}};
    const auto uni = lm::train_lm(abc, ws(), opt);
    const double pa = uni.prob({}, uni.id_of("a"));
    const double pb = uni.prob({}, uni.id_of("b"));
    o.detail << " p(a)=" << pa << " p(b)=" << pb;
    o.require(pa == 2.0 / 3.0 && pb == 1.0 / 3.0, "hand unigram case");
}

// 4. In-domain vs shuffled-gibberish separation and percentile-calibrated filtering.
void perplexity_separation(Outcome& o) {
    const auto t0 = Clock::now();
    const auto seed = synth::seed_corpus(50'000, 4);
    const lm::TrainOptions opt;
    const auto model = lm::train_lm(seed, ws(), opt);
    const double threshold = lm::calibrate_threshold_heldout(seed, ws(), opt, 99.0, 5);

    Rng rng(8);
    std::vector<Document> docs;
    for (int i = 0; i < 10; ++i) {
        const auto cat = synth::legal_categories()[static_cast<std::size_t>(i) % 4];
        docs.push_back({"in-" + std::to_string(i), "legal", synth::legal_paragraph(rng, cat), {}, std::nullopt});
    }
    for (int i = 0; i < 10; ++i) {
        const auto cat = synth::legal_categories()[static_cast<std::size_t>(i) % 4];
        const auto para = synth::scramble_words(synth::legal_paragraph(rng, cat), rng);
        docs.push_back({"gib-" + std::to_string(i), "legal", para, {}, std::nullopt});
    }
    std::vector<double> in_ppl, gib_ppl;
    for (const auto& d : docs) {
        (d.id.starts_with("in-") ? in_ppl : gib_ppl).push_back(model.score(d.text, ws()).perplexity);
    }
    const double ratio = stats::median(gib_ppl) / stats::median(in_ppl);
    const auto res = lm::filter_by_perplexity(docs, model, ws(), threshold);
    std::size_t dropped_gib = 0;
    for (const auto& d : res.dropped) dropped_gib += d.id.starts_with("gib-");
    const double secs = seconds_since(t0);
    o.detail << "median_in=" << stats::median(in_ppl) << " median_gib=" << stats::median(gib_ppl)
             << " ratio=" << ratio << " threshold=" << threshold << " dropped=" << res.dropped.size()
             << " (gibberish " << dropped_gib << ") time=" << secs << "s";
    o.require(ratio >= 5.0, "median ratio below 5");
    o.require(res.dropped.size() == 10 && dropped_gib == 10, "filter does not drop exactly the gibberish");
    o.require(secs < 5.0, "slower than 5 s");
}

double true_jaccard(const std::string& a, const std::string& b) {
    const auto sa = dedup::shingle_set(a, ws(), 5);
    const auto sb = dedup::shingle_set(b, ws(), 5);
    const std::set<std::string> A(sa.begin(), sa.end()), B(sb.begin(), sb.end());
    std::size_t inter = 0;
    for (const auto& s : A) inter += B.count(s);
    const auto uni = A.size() + B.size() - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// 5. Exact and near recall, no false removals, clusters against transitive closure.
void dedup_quality(Outcome& o) {
    const dedup::NearDedupParams params;
    const dedup::MinHasher hasher(params.minhash);
    std::size_t exact_found = 0, exact_total = 0, near_found = 0, near_total = 0, false_removals = 0;
    std::size_t oracle_violations = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto fx = synth::dedup_fixture(100, 20, 10, seed);
        const auto& docs = fx.docs;
        const auto n = docs.size();
        const auto res = dedup::deduplicate(docs, params);

        // Either member of a planted pair may be removed, since the stream is shuffled.
        std::set<std::pair<std::string, std::string>> merged;
        std::map<std::string, std::string> kept_of;
        for (const auto& d : docs) kept_of[d.id] = d.id;
        for (const auto& c : res.report.clusters) {
            for (const auto& r : c.removed_ids) {
                merged.insert(std::minmax(r, c.kept_id));
                kept_of[r] = c.kept_id;
            }
        }
        std::set<std::pair<std::string, std::string>> planted;
        for (const auto& [dup, orig] : fx.exact) {
            ++exact_total;
            exact_found += merged.contains(std::minmax(dup, orig));
            planted.insert(std::minmax(dup, orig));
        }
        for (const auto& [dup, orig] : fx.near) {
            ++near_total;
            near_found += merged.contains(std::minmax(dup, orig));
            planted.insert(std::minmax(dup, orig));
        }
        for (const auto& m : merged) false_removals += !planted.contains(m);

        std::vector<std::string> norm;
        std::vector<dedup::MinHashSignature> sigs;
        for (const auto& d : docs) {
            norm.push_back(cleaning::normalize_text(d.text));
            sigs.push_back(hasher.signature(d.id, d.text, ws()));
        }
        dedup::UnionFind must(n), may(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const bool exact = norm[i] == norm[j];
                if (exact || true_jaccard(docs[i].text, docs[j].text) >= 0.8) must.unite(i, j);
                if (exact || dedup::estimate_jaccard(sigs[i], sigs[j]) >= params.threshold) may.unite(i, j);
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const bool together = kept_of[docs[i].id] == kept_of[docs[j].id];
                if (must.find(i) == must.find(j) && !together) ++oracle_violations;
                if (together && may.find(i) != may.find(j)) ++oracle_violations;
            }
        }
    }
    const double near_recall = static_cast<double>(near_found) / static_cast<double>(near_total);
    o.detail << "exact " << exact_found << "/" << exact_total << " near " << near_found << "/" << near_total
             << " false_removals=" << false_removals << " oracle_violations=" << oracle_violations;
    o.require(exact_found == exact_total, "exact recall below 100%");
    o.require(near_recall >= 0.9, "near recall below 90%");
    o.require(false_removals == 0, "false removals");
    o.require(oracle_violations == 0, "clusters disagree with the transitive-closure oracle");
}

// 6. Replay share at a 1M-token budget and byte-identical reruns.
void mix_audit(Outcome& o) {
    const auto legal = synth::seed_corpus(1'100'000, 61);
    const auto replay = synth::replay_corpus(2'000, 62);
    const std::map<std::string, std::span<const Document>> sources = {{"legal", legal}, {"replay", replay}};
    const mix::MixSpec spec{{{"legal", 0.98}, {"replay", 0.02}}, 1'000'000, 7};
    const auto a = mix::assemble_mix(sources, spec);
    const auto b = mix::assemble_mix(sources, spec);
    const auto check = mix::validate_mix(a.manifest, spec, 0.005);
    const double replay_frac = check.checks.at(1).realized_fraction;

    const auto dir = scratch_dir("mix");
    corpus::write_documents(a.documents, dir / "a.jsonl");
    corpus::write_documents(b.documents, dir / "b.jsonl");
    const bool identical = read_text(dir / "a.jsonl") == read_text(dir / "b.jsonl") &&
                           a.manifest.to_json() == b.manifest.to_json();
    fs::remove_all(dir);
    o.detail << "total_tokens=" << a.manifest.total_tokens << " replay_fraction=" << replay_frac;
    o.require(std::abs(replay_frac - 0.02) <= 0.005, "replay fraction outside 0.02 +- 0.005");
    o.require(check.passed(), "mix validation failed");
    o.require(identical, "reruns differ");
}

// 7. Forum-post scaffold and golden stub extensions.
void instruction_scaffold(Outcome& o) {
    const instruct::LabeledExample ex{
        "fig2", "forum_topic",
        "My employer fired me because I reported a safety problem to the state inspector. Is it legal?",
        "employment", {{"source", "forum"}, {"posted", "2021-03-04"}}};
    const auto templates = synth::default_templates();
    const auto conv = instruct::scaffold_conversation(ex, templates);
    o.require(conv.turns.size() == 3, "scaffold is not 3 turns");
    o.require(conv.turns.size() == 3 && conv.turns[1].role == chat::Role::assistant &&
                  conv.turns[1].content.find("employment") != std::string::npos,
              "assistant turn lacks the label");

    const chat::StubBackend stub;
    std::vector<instruct::Conversation> scaffolds = {conv};
    for (const auto& e : synth::labeled_examples(6, 42)) scaffolds.push_back(instruct::scaffold_conversation(e, templates));
    const auto convs = instruct::extend_all(scaffolds, stub, stub, 2, 3);
    std::string text;
    for (const auto& c : convs) text += instruct::serialize_conversation(c) + "\n";
    const auto again = instruct::extend_all(scaffolds, stub, stub, 2, 1);
    std::string text2;
    for (const auto& c : again) text2 += instruct::serialize_conversation(c) + "\n";
    const fs::path golden = fs::path(LEXCURATE_TEST_DATA) / "golden_conversations.jsonl";
    const bool matches = fs::exists(golden) && read_text(golden) == text;
    o.detail << "turns=" << conv.turns.size() << " golden_conversations=" << convs.size();
    o.require(text == text2, "extension not deterministic");
    o.require(matches, "differs from golden file");
}

// 8. 8-token shared window removes, 7-token windows keep.
void decontamination_boundary(Outcome& o) {
    const std::string bench = "the lessee shall pay rent monthly to the lessor without demand or setoff";
    const auto btoks = split_ws(bench);
    const auto window = [&](std::size_t start, std::size_t len) {
        std::string s;
        for (std::size_t i = start; i < start + len; ++i) s += (i > start ? " " : "") + btoks[i];
        return s;
    };
    const auto conv_with = [](std::string id, std::string text) {
        instruct::Conversation c;
        c.id = std::move(id);
        c.turns = {{chat::Role::user, "Question about leases."},
                   {chat::Role::assistant, std::move(text)},
                   {chat::Role::user, "Why?"}};
        return c;
    };
    // Two 7-token windows from different positions, separated so no 8-window forms.
    const auto eight = conv_with("eight", "Note that " + window(2, 8) + " always.");
    const auto seven = conv_with("seven", "Note that " + window(0, 7) + " and also " + window(6, 7) + " here.");

    const auto oracle_shares = [&](const instruct::Conversation& c, std::size_t n) {
        std::set<std::string> bw;
        for (std::size_t i = 0; i + n <= btoks.size(); ++i) bw.insert(window(i, n));
        for (const auto& t : c.turns) {
            const auto ct = split_ws(t.content);
            for (std::size_t i = 0; i + n <= ct.size(); ++i) {
                std::string s;
                for (std::size_t j = i; j < i + n; ++j) s += (j > i ? " " : "") + ct[j];
                if (bw.contains(s)) return true;
            }
        }
        return false;
    };
    const std::vector<instruct::Conversation> convs = {eight, seven};
    const std::vector<std::string> inputs = {bench};
    const auto res = instruct::decontaminate(convs, inputs);
    const bool eight_removed = res.removed_ids == std::vector<std::string>{"eight"};
    o.detail << "removed=" << res.removed_ids.size() << " kept=" << res.kept.size();
    o.require(oracle_shares(eight, 8) && !oracle_shares(seven, 8) && oracle_shares(seven, 7), "fixture mis-built");
    o.require(eight_removed, "8-token overlap not removed alone");
    o.require(res.kept.size() == 1 && res.kept[0].id == "seven", "7-token overlap not kept");
}

// 9. Telemarketing few-shot prompt curates to the instruction ending.
void prompt_curation(Outcome& o) {
    const std::vector<std::string> labels = {"Yes", "No"};
    const auto curated = eval::curate_prompt(synth::telemarketing_original_prompt(), labels);
    const std::string ending = "Answer by only outputting \"Yes\" or \"No\"";
    const std::string expected =
        "The Telemarketing Sales Rule is provided by 16 C.F.R. \xC2\xA7 310.3(a)(1) and 16 C.F.R. \xC2\xA7 "
        "310.3(a)(2).\n\nAnswer the following question: {text}\n\n" + ending;
    o.detail << "length=" << curated.size();
    o.require(curated.ends_with(ending), "curated prompt has the wrong ending");
    o.require(curated == expected, "curated prompt differs from the golden text");
}

// 10. Balanced accuracy against a per-class recall oracle.
void metric_oracle(Outcome& o) {
    Rng rng(10);
    const std::vector<std::string> labels = {"A", "B", "C", "D"};
    std::vector<std::string> golds;
    std::vector<std::optional<std::string>> preds;
    for (int i = 0; i < 1000; ++i) {
        golds.push_back(labels[uniform_below(rng, 3)]);  // D never gold
        const auto r = uniform_below(rng, 5);
        preds.push_back(r == 4 ? std::nullopt : std::optional<std::string>(labels[r]));
    }
    std::map<std::string, std::pair<double, double>> per_class;
    for (std::size_t i = 0; i < golds.size(); ++i) {
        auto& [hit, total] = per_class[golds[i]];
        total += 1;
        if (preds[i] && *preds[i] == golds[i]) hit += 1;
    }
    double sum = 0.0;
    for (const auto& [c, ht] : per_class) sum += ht.first / ht.second;
    const double expected = sum / static_cast<double>(per_class.size());
    const double got = eval::balanced_accuracy(preds, golds);

    const std::vector<std::string> hand_g = {"A", "A", "A", "B"};
    const std::vector<std::optional<std::string>> hand_p = {"A", "A", "B", "B"};
    const double hand = eval::balanced_accuracy(hand_p, hand_g);
    o.detail << "|diff|=" << std::abs(got - expected) << " hand=" << hand;
    o.require(std::abs(got - expected) <= 1e-12, "oracle mismatch");
    o.require(std::abs(hand - 5.0 / 6.0) <= 1e-15, "hand case is not 5/6");
}

// 11. Oracle backend scores 1, adversarial backend matches hand values, MMLU counts.
void harness(Outcome& o) {
    const auto tasks = synth::task_suite(11);
    auto answers = std::make_shared<std::map<std::string, std::string>>();
    for (const auto& t : tasks) {
        for (const auto& in : t.instances) (*answers)[eval::render_prompt(t.prompt_template, in.input)] = in.gold;
    }
    const chat::FunctionBackend oracle("oracle", [answers](std::span<const chat::Message> m, chat::Role) {
        return answers->at(m.back().content);
    });
    const auto run = eval::run_benchmark(tasks, oracle);
    bool all_one = run.report.tasks.size() == tasks.size();
    for (const auto& [name, s] : run.report.tasks) all_one = all_one && s.balanced_accuracy == 1.0;

    const auto make_task = [](std::string name, std::vector<std::string> golds, std::vector<std::string> labels) {
        eval::EvalTask t;
        t.name = std::move(name);
        t.category = eval::Category::rule_conclusion;
        t.label_set = std::move(labels);
        t.prompt_template = "Decide: {text}\n\n" + eval::answer_instruction(t.label_set);
        for (std::size_t i = 0; i < golds.size(); ++i) t.instances.push_back({"case " + std::to_string(i), golds[i]});
        return t;
    };
    const std::vector<eval::EvalTask> adv_tasks = {make_task("t1", {"Yes", "No", "No", "No"}, {"Yes", "No"}),
                                                   make_task("t2", {"No", "No"}, {"Yes", "No"}),
                                                   make_task("t3", {"A", "B", "C", "A"}, {"A", "B", "C"})};
    const chat::FunctionBackend first("first-label", [](std::span<const chat::Message> m, chat::Role) {
        const auto& p = m.back().content;
        const auto q = p.find('"');
        return p.substr(q + 1, p.find('"', q + 1) - q - 1);
    });
    const auto adv = eval::run_benchmark(adv_tasks, first);
    const bool adv_ok = adv.report.tasks.at("t1").balanced_accuracy == 0.5 &&
                        adv.report.tasks.at("t2").balanced_accuracy == 0.0 &&
                        std::abs(adv.report.tasks.at("t3").balanced_accuracy - 1.0 / 3.0) < 1e-15;

    const auto mmlu = eval::load_mmlu_legal(fs::path(LEXCURATE_SAMPLE_DATA) / "mmlu");
    std::map<std::string, std::size_t> counts;
    for (const auto& t : mmlu) counts[t.name] = t.instances.size();
    const std::map<std::string, std::size_t> want = {{"mmlu_international_law", synth::kMmluInternationalLaw},
                                                     {"mmlu_professional_law", synth::kMmluProfessionalLaw},
                                                     {"mmlu_jurisprudence", synth::kMmluJurisprudence}};
    o.detail << "oracle_tasks=" << run.report.tasks.size() << " overall=" << run.report.overall
             << " adversarial=" << adv.report.tasks.at("t1").balanced_accuracy << "/"
             << adv.report.tasks.at("t2").balanced_accuracy << "/" << adv.report.tasks.at("t3").balanced_accuracy
             << " mmlu=";
    for (const auto& [n, c] : counts) o.detail << c << " ";
    o.require(all_one, "oracle backend below 1.0");
    o.require(adv_ok, "adversarial scores differ from hand computation");
    o.require(counts == want, "MMLU counts differ from 120/1500/110");
}

// 12. Relative reduction arithmetic for medians 8.69 and 9.20.
void perplexity_arithmetic(Outcome& o) {
    const std::map<std::string, std::vector<double>> cand = {{"legislation", {8.0, 8.69, 10.0}}};
    const std::map<std::string, std::vector<double>> base = {{"legislation", {7.5, 9.20, 11.0}}};
    const auto rep = eval::perplexity_report_from_values(cand, &base, "candidate", "baseline");
    const auto& c = rep.categories.at("legislation");
    const double r = c.reduction.value_or(-1.0);
    o.detail << "median=" << c.median << " baseline=" << c.baseline_median.value_or(0) << " reduction=" << r * 100
             << "%";
    o.require(std::abs(r - 0.055) <= 0.001, "reduction outside 5.5% +- 0.1%");
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(LEXCURATE_CLI) + " " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> manifests(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name.ends_with(".json")) out[name] = read_text(e.path());
    }
    return out;
}

// 13. CLI pipeline on the shipped data: < 60 s, byte-identical manifests.
void pipeline_determinism(Outcome& o) {
    const fs::path data(LEXCURATE_SAMPLE_DATA);
    const auto work = scratch_dir("pipeline");
    const std::string args = "--config '" + (data / "config.json").string() + "' --set paths.work_dir='" +
                             (work / "run").string() + "' pipeline";
    const auto t0 = Clock::now();
    const int rc1 = run_cli(args, work / "log1");
    const double secs = seconds_since(t0);
    if (rc1 != 0) {
        o.require(false, "pipeline exited with " + std::to_string(rc1) + ": " + read_text(work / "log1"));
        return;
    }
    const auto first = manifests(work / "run");
    const int rc2 = run_cli(args, work / "log2");
    const auto second = rc2 == 0 ? manifests(work / "run") : std::map<std::string, std::string>{};
    o.detail << "manifests=" << first.size() << " first_run=" << secs << "s";
    o.require(first.contains("run_manifest.json"), "no run manifest");
    o.require(rc2 == 0 && first == second, "manifests differ across runs");
    o.require(secs < 60.0, "slower than 60 s");
    fs::remove_all(work);
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
        {"cleaning fidelity", cleaning_fidelity},
        {"n-gram mining oracle", ngram_oracle},
        {"LM normalization", lm_normalization},
        {"perplexity filter separation", perplexity_separation},
        {"dedup recall/precision", dedup_quality},
        {"mix audit", mix_audit},
        {"instruction scaffold", instruction_scaffold},
        {"decontamination boundary", decontamination_boundary},
        {"prompt curation", prompt_curation},
        {"metric oracle", metric_oracle},
        {"harness end-to-end", harness},
        {"perplexity report arithmetic", perplexity_arithmetic},
        {"end-to-end determinism", pipeline_determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        failed += !o.pass;
        std::printf("%s %2zu %-30s %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed == 0 ? 0 : 1;
}
