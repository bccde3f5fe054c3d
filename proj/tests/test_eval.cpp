#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "lexcurate/error.hpp"
#include "lexcurate/eval.hpp"
#include "lexcurate/io.hpp"
#include "lexcurate/synth.hpp"
#include "test_util.hpp"

using namespace lexcurate;
using namespace lexcurate::eval;
using lexcurate::testing::TempDir;

namespace {

using Preds = std::vector<std::optional<std::string>>;
using Golds = std::vector<std::string>;

/// Oracle: per-class recall computed with explicit counting loops.
double recall_oracle(const Preds& preds, const Golds& golds) {
    std::map<std::string, std::pair<double, double>> per_class;  // hits, total
    for (std::size_t i = 0; i < golds.size(); ++i) {
        auto& [hits, total] = per_class[golds[i]];
        total += 1;
        if (preds[i].has_value() && *preds[i] == golds[i]) hits += 1;
    }
    double sum = 0;
    for (const auto& [cls, ht] : per_class) sum += ht.first / ht.second;
    return sum / static_cast<double>(per_class.size());
}

const std::vector<std::string> kYesNo = {"Yes", "No"};

EvalTask tiny_task(std::string name, std::vector<std::string> golds, std::vector<std::string> labels) {
    EvalTask t;
    t.name = std::move(name);
    t.category = Category::rule_conclusion;
    t.label_set = std::move(labels);
    t.prompt_template = "Decide: {text}\n\n" + answer_instruction(t.label_set);
    for (std::size_t i = 0; i < golds.size(); ++i) t.instances.push_back({"case " + std::to_string(i), golds[i]});
    return t;
}

/// Looks the gold label up by rendered prompt.
chat::FunctionBackend oracle_backend(std::span<const EvalTask> tasks) {
    auto answers = std::make_shared<std::map<std::string, std::string>>();
    for (const auto& t : tasks) {
        for (const auto& inst : t.instances) (*answers)[render_prompt(t.prompt_template, inst.input)] = inst.gold;
    }
    return chat::FunctionBackend("oracle", [answers](std::span<const chat::Message> m, chat::Role) {
        return "The answer is " + answers->at(m.back().content) + ".";
    });
}

}  // namespace

TEST(Curate, TelemarketingGolden) {
    const auto original = synth::telemarketing_original_prompt();
    const auto curated = curate_prompt(original, kYesNo);
    EXPECT_EQ(curated,
              "The Telemarketing Sales Rule is provided by 16 C.F.R. \xC2\xA7 310.3(a)(1) and 16 C.F.R. \xC2\xA7 "
              "310.3(a)(2).\n\nAnswer the following question: {text}\n\nAnswer by only outputting \"Yes\" or \"No\"");
    EXPECT_TRUE(curated.ends_with("Answer by only outputting \"Yes\" or \"No\""));
    EXPECT_EQ(curated.find("Acme"), std::string::npos);
}

TEST(Curate, InstructionWording) {
    EXPECT_EQ(answer_instruction(kYesNo), "Answer by only outputting \"Yes\" or \"No\"");
    const std::vector<std::string> three = {"A", "B", "C"};
    EXPECT_EQ(answer_instruction(three), "Answer by only outputting \"A\", \"B\" or \"C\"");
}

TEST(Curate, NoQuestionBlocksKeepsText) {
    const auto out = curate_prompt("Classify the clause:\n{text}\n", kYesNo);
    EXPECT_EQ(out, "Classify the clause:\n{text}\n\nAnswer by only outputting \"Yes\" or \"No\"");
}

TEST(Curate, MalformedPrompts) {
    EXPECT_THROW(curate_prompt("Question: x?\nAnswer: Yes", kYesNo), FormatError);
    EXPECT_THROW(curate_prompt("Question: {text}\n\nQuestion: {text}", kYesNo), FormatError);
    EXPECT_THROW(curate_prompt("Question: {{text}}\nAnswer:\n\nQuestion: later\nAnswer: No", kYesNo), FormatError);
    EXPECT_THROW(curate_prompt("Question: shot\n\nQuestion: {text}\nAnswer:", kYesNo), FormatError);
}

TEST(Curate, RenderedPromptContainsInput) {
    const auto t = curate_prompt(synth::telemarketing_original_prompt(), kYesNo);
    const auto r = render_prompt(t, "Is this a violation?");
    EXPECT_NE(r.find("Answer the following question: Is this a violation?"), std::string::npos);
}

TEST(ParseAnswer, EarliestWholeWordCaseInsensitive) {
    EXPECT_EQ(parse_answer("Yes.", kYesNo), "Yes");
    EXPECT_EQ(parse_answer("no, not yes", kYesNo), "No");
    EXPECT_EQ(parse_answer("I think YES", kYesNo), "Yes");
    EXPECT_EQ(parse_answer("Yesterday nobody knew", kYesNo), std::nullopt);
    EXPECT_EQ(parse_answer("", kYesNo), std::nullopt);
    const std::vector<std::string> letters = {"A", "B", "C", "D"};
    EXPECT_EQ(parse_answer("Answer: (C)", letters), "C");
    EXPECT_EQ(parse_answer("a", letters), "A");
    EXPECT_EQ(parse_answer("Because B", letters), "B");
}

TEST(ParseAnswer, TiesResolveToLongestLabel) {
    const std::vector<std::string> labels = {"not", "not guilty", "guilty"};
    EXPECT_EQ(parse_answer("Not guilty, clearly.", labels), "not guilty");
    EXPECT_EQ(parse_answer("Not, guilty", labels), "not");
}

TEST(ParseAnswer, NeverReturnsForeignLabel) {
    Rng rng(3);
    const std::vector<std::string> labels = {"yes", "no", "maybe", "a"};
    for (int i = 0; i < 2000; ++i) {
        std::string raw;
        for (int w = 0; w < 5; ++w) raw += lexcurate::testing::random_word(rng, 26, 5) + (w % 2 ? " " : ",");
        const auto p = parse_answer(raw, labels);
        if (p) {
            EXPECT_NE(std::find(labels.begin(), labels.end(), *p), labels.end());
        }
    }
}

TEST(BalancedAccuracy, HandCase) {
    const Golds golds = {"A", "A", "A", "B"};
    const Preds preds = {"A", "A", "B", "B"};
    EXPECT_NEAR(balanced_accuracy(preds, golds), 5.0 / 6.0, 1e-15);
}

TEST(BalancedAccuracy, MatchesOracleOnRandomInstances) {
    Rng rng(10);
    const std::vector<std::string> labels = {"A", "B", "C", "D", "E"};
    for (int trial = 0; trial < 20; ++trial) {
        Golds golds;
        Preds preds;
        for (int i = 0; i < 1000; ++i) {
            golds.push_back(labels[uniform_below(rng, 1 + trial % 5)]);
            const auto r = uniform_below(rng, 7);
            preds.push_back(r < 5 ? std::optional<std::string>(labels[r]) : std::nullopt);
        }
        EXPECT_NEAR(balanced_accuracy(preds, golds), recall_oracle(preds, golds), 1e-12);
    }
}

TEST(BalancedAccuracy, InvariantUnderRelabeling) {
    Rng rng(11);
    std::vector<std::string> labels = {"w", "x", "y", "z"};
    Golds golds;
    Preds preds;
    for (int i = 0; i < 300; ++i) {
        golds.push_back(labels[uniform_below(rng, 4)]);
        preds.push_back(labels[uniform_below(rng, 4)]);
    }
    const double base = balanced_accuracy(preds, golds);
    auto perm = labels;
    for (int t = 0; t < 10; ++t) {
        shuffle(std::span<std::string>(perm), rng);
        std::map<std::string, std::string> map;
        for (std::size_t i = 0; i < labels.size(); ++i) map[labels[i]] = perm[i];
        Golds g2;
        Preds p2;
        for (std::size_t i = 0; i < golds.size(); ++i) {
            g2.push_back(map[golds[i]]);
            p2.push_back(map[*preds[i]]);
        }
        EXPECT_NEAR(balanced_accuracy(p2, g2), base, 1e-12);
    }
}

TEST(BalancedAccuracy, Errors) {
    EXPECT_THROW(balanced_accuracy({}, {}), InvalidArgument);
    const Golds g = {"a"};
    const Preds p = {"a", "b"};
    EXPECT_THROW(balanced_accuracy(p, g), InvalidArgument);
}

TEST(Tasks, ValidateAndJsonRoundTrip) {
    TempDir dir;
    auto t = tiny_task("t", {"Yes", "No"}, kYesNo);
    t.save(dir / "t.json");
    EXPECT_EQ(EvalTask::load(dir / "t.json"), t);
    auto bad = t;
    bad.instances[0].gold = "Maybe";
    EXPECT_THROW(bad.validate(), FormatError);
    bad = t;
    bad.instances.clear();
    EXPECT_THROW(bad.validate(), FormatError);
    bad = t;
    bad.prompt_template = "no placeholder";
    EXPECT_THROW(bad.validate(), FormatError);
    EXPECT_THROW(parse_category("torts"), FormatError);
    EXPECT_EQ(all_categories().size(), 6u);
}

TEST(Tasks, SuiteIsValidAndCoversFiveAbilities) {
    const auto suite = synth::task_suite(1);
    std::set<Category> cats;
    for (const auto& t : suite) {
        EXPECT_NO_THROW(t.validate());
        cats.insert(t.category);
    }
    EXPECT_EQ(cats.size(), 5u);
    EXPECT_FALSE(cats.contains(Category::mmlu_legal));
}

TEST(Benchmark, OracleBackendScoresOne) {
    const auto suite = synth::task_suite(2);
    const auto backend = oracle_backend(suite);
    const auto run = run_benchmark(suite, backend, {4, 1});
    for (const auto& [name, s] : run.report.tasks) EXPECT_DOUBLE_EQ(s.balanced_accuracy, 1.0) << name;
    EXPECT_DOUBLE_EQ(run.report.overall, 1.0);
    EXPECT_DOUBLE_EQ(run.report.abstain_rate, 0.0);
}

TEST(Benchmark, AdversarialBackendMatchesHandComputation) {
    // Always answers the first label: recall 1 on that class, 0 on the rest.
    const std::vector<EvalTask> tasks = {tiny_task("t1", {"Yes", "No", "No", "No"}, kYesNo),
                                         tiny_task("t2", {"No", "No"}, kYesNo),
                                         tiny_task("t3", {"A", "B", "C", "A"}, {"A", "B", "C"})};
    const chat::FunctionBackend first("first", [](std::span<const chat::Message> m, chat::Role) {
        const auto& p = m.back().content;
        return p.substr(p.find('"') + 1, p.find('"', p.find('"') + 1) - p.find('"') - 1);
    });
    const auto run = run_benchmark(tasks, first);
    EXPECT_DOUBLE_EQ(run.report.tasks.at("t1").balanced_accuracy, 0.5);
    EXPECT_DOUBLE_EQ(run.report.tasks.at("t2").balanced_accuracy, 0.0);
    EXPECT_NEAR(run.report.tasks.at("t3").balanced_accuracy, 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(run.report.overall, (0.5 + 0.0 + 1.0 / 3.0) / 3.0, 1e-15);
    EXPECT_NEAR(run.report.categories.at("rule_conclusion"), run.report.overall, 1e-15);
}

TEST(Benchmark, ReproducibleAndConsistentWithDump) {
    auto tasks = synth::task_suite(3);
    const chat::LabelStubBackend stub;
    const auto a = run_benchmark(tasks, stub, {1, 5});
    const auto b = run_benchmark(tasks, stub, {8, 99});
    EXPECT_EQ(a.report, b.report);
    EXPECT_EQ(a.predictions, b.predictions);
    EXPECT_EQ(a.report.to_json(), b.report.to_json());
    EXPECT_EQ(score_predictions(a.predictions), a.report);
    for (const auto& p : a.predictions) EXPECT_EQ(parse_prediction(serialize_prediction(p)), p);
    for (const auto& [n, s] : a.report.tasks) {
        EXPECT_GE(s.balanced_accuracy, 0.0);
        EXPECT_LE(s.balanced_accuracy, 1.0);
    }
}

TEST(Benchmark, BackendFailuresBecomeAbstentions) {
    const std::vector<EvalTask> tasks = {tiny_task("t", {"Yes", "No"}, kYesNo)};
    const chat::FunctionBackend down("down", [](std::span<const chat::Message>, chat::Role) -> std::string {
        throw chat::ChatError("http_503", "unavailable");
    });
    const auto run = run_benchmark(tasks, down);
    ASSERT_EQ(run.predictions.size(), 2u);
    for (const auto& p : run.predictions) {
        EXPECT_FALSE(p.parsed.has_value());
        EXPECT_EQ(p.failure_reason, "http_503");
    }
    EXPECT_DOUBLE_EQ(run.report.abstain_rate, 1.0);
    EXPECT_DOUBLE_EQ(run.report.overall, 0.0);
}

TEST(Mmlu, CsvParsing) {
    const auto rows = parse_csv("a,\"b, c\",\"say \"\"hi\"\"\"\r\nd,e,f\n");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"a", "b, c", "say \"hi\""}));
    EXPECT_EQ(rows[1], (std::vector<std::string>{"d", "e", "f"}));
    EXPECT_THROW(parse_csv("\"unterminated"), FormatError);
}

TEST(Mmlu, ShippedSyntheticCounts) {
    const auto tasks = load_mmlu_legal(std::filesystem::path(LEXCURATE_SAMPLE_DATA) / "mmlu");
    std::map<std::string, std::size_t> counts;
    for (const auto& t : tasks) {
        counts[t.name] = t.instances.size();
        EXPECT_EQ(t.category, Category::mmlu_legal);
        EXPECT_EQ(t.label_set, (std::vector<std::string>{"A", "B", "C", "D"}));
    }
    EXPECT_EQ(counts.at("mmlu_international_law"), 120u);
    EXPECT_EQ(counts.at("mmlu_professional_law"), 1500u);
    EXPECT_EQ(counts.at("mmlu_jurisprudence"), 110u);
}

TEST(Mmlu, BadRowsRejected) {
    TempDir dir;
    write_text(dir / "x_test.csv", "q,a,b,c,d,E\n");
    EXPECT_THROW(load_mmlu_csv(dir / "x_test.csv", "x", "x"), FormatError);
    write_text(dir / "y_test.csv", "q,a,b\n");
    EXPECT_THROW(load_mmlu_csv(dir / "y_test.csv", "y", "y"), FormatError);
}

TEST(Perplexity, UniformScorerGivesVocabularySize) {
    const UniformScorer uniform(50.0, whitespace_tokenizer());
    std::vector<corpus::Document> docs;
    for (int i = 0; i < 6; ++i) {
        docs.push_back({"d" + std::to_string(i), "legal", "some words here " + std::to_string(i),
                        {{"category", i % 2 ? "contracts" : "decisions"}}, std::nullopt});
    }
    const std::vector<std::string> cats = {"contracts", "decisions"};
    const auto report = perplexity_report(docs, cats, uniform);
    for (const auto& [c, p] : report.categories) {
        EXPECT_NEAR(p.median, 50.0, 1e-9);
        EXPECT_NEAR(p.iqr, 0.0, 1e-9);
        EXPECT_EQ(p.documents, 3u);
    }
    const std::vector<std::string> missing = {"legislation"};
    EXPECT_THROW(perplexity_report(docs, missing, uniform), InvalidArgument);
}

TEST(Perplexity, ReductionArithmetic) {
    EXPECT_NEAR(relative_reduction(9.20, 8.69), 0.0554, 1e-4);
    const std::map<std::string, std::vector<double>> cand = {{"contracts", {8.69}}};
    const std::map<std::string, std::vector<double>> base = {{"contracts", {9.20}}};
    const auto r = perplexity_report_from_values(cand, &base, "ours", "base");
    EXPECT_NEAR(*r.categories.at("contracts").reduction, 0.055, 0.001);
    EXPECT_DOUBLE_EQ(r.categories.at("contracts").median, 8.69);
}

TEST(Perplexity, MedianInvariantUnderReordering) {
    const auto seed = synth::seed_corpus(10'000, 3);
    const auto model = lm::train_lm(seed, whitespace_tokenizer());
    const NGramScorer scorer(model, whitespace_tokenizer());
    auto docs = synth::demo_corpus(80, 4);
    const auto cats = default_ppl_categories();
    const auto a = perplexity_report(docs, cats, scorer);
    Rng rng(1);
    shuffle(std::span<corpus::Document>(docs), rng);
    const auto b = perplexity_report(docs, cats, scorer);
    for (const auto& c : cats) {
        EXPECT_DOUBLE_EQ(a.categories.at(c).median, b.categories.at(c).median);
        EXPECT_DOUBLE_EQ(a.categories.at(c).iqr, b.categories.at(c).iqr);
    }
}
