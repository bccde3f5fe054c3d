#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <set>
#include <sstream>
#include <thread>

#include "lexcurate/cleaning.hpp"
#include "lexcurate/error.hpp"
#include "lexcurate/instruct.hpp"
#include "lexcurate/io.hpp"
#include "lexcurate/synth.hpp"
#include "test_util.hpp"

using namespace lexcurate;
using namespace lexcurate::instruct;
using chat::Role;
using lexcurate::testing::TempDir;

namespace {

const std::filesystem::path kGolden = std::filesystem::path(LEXCURATE_TEST_DATA) / "golden_conversations.jsonl";

LabeledExample fig2_example() {
    return {"fig2", "forum_topic",
            "My employer fired me because I reported a safety problem to the state inspector. Is it legal?",
            "employment", {{"source", "forum"}, {"posted", "2021-03-04"}}};
}

/// Oracle: every n-token window of the benchmark input, as a joined string.
std::set<std::string> windows(const std::string& text, std::size_t n) {
    std::vector<std::string> toks;
    std::istringstream in(cleaning::normalize_text(text));
    std::string t;
    while (in >> t) toks.push_back(t);
    std::set<std::string> out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        std::string w;
        for (std::size_t k = i; k < i + n; ++k) w += toks[k] + '\x1f';
        out.insert(w);
    }
    return out;
}

bool oracle_contaminated(const Conversation& c, const std::vector<std::string>& bench, std::size_t n) {
    std::set<std::string> bw;
    for (const auto& b : bench) {
        const auto w = windows(b, n);
        bw.insert(w.begin(), w.end());
    }
    for (const auto& turn : c.turns) {
        for (const auto& w : windows(turn.content, n)) {
            if (bw.contains(w)) return true;
        }
    }
    return false;
}

Conversation conv_with(const std::string& id, const std::string& user_text) {
    Conversation c;
    c.id = id;
    c.origin = id;
    c.generator = "template";
    c.turns = {{Role::user, user_text}, {Role::assistant, "Noted."}, {Role::user, "Why?"}};
    return c;
}

}  // namespace

TEST(Scaffold, Fig2ExampleHasThreeTurnsAndLabel) {
    const auto templates = synth::default_templates();
    const auto conv = scaffold_conversation(fig2_example(), templates);
    ASSERT_EQ(conv.turns.size(), 3u);
    EXPECT_EQ(conv.turns[0].role, Role::user);
    EXPECT_EQ(conv.turns[1].role, Role::assistant);
    EXPECT_EQ(conv.turns[2].role, Role::user);
    EXPECT_NE(conv.turns[1].content.find("employment"), std::string::npos);
    EXPECT_NE(conv.turns[0].content.find("Is it legal?"), std::string::npos);
    EXPECT_EQ(conv.generator, "template");
    EXPECT_EQ(conv.origin, "fig2");
    EXPECT_TRUE(well_formed(conv));
}

TEST(Scaffold, ContainsLabelAndEveryMetadataValue) {
    const auto templates = synth::default_templates();
    for (const auto& ex : synth::labeled_examples(60, 3)) {
        const auto conv = scaffold_conversation(ex, templates);
        std::string all;
        for (const auto& t : conv.turns) all += t.content + "\n";
        EXPECT_NE(all.find(ex.label), std::string::npos) << ex.id;
        for (const auto& [k, v] : ex.meta) EXPECT_NE(all.find(v), std::string::npos) << ex.id << " " << k;
    }
}

TEST(Scaffold, RejectsEmptyFieldsAndMissingTemplates) {
    const auto templates = synth::default_templates();
    auto ex = fig2_example();
    ex.label.clear();
    EXPECT_THROW(scaffold_conversation(ex, templates), InvalidArgument);
    ex = fig2_example();
    ex.input_text.clear();
    EXPECT_THROW(scaffold_conversation(ex, templates), InvalidArgument);
    ex = fig2_example();
    ex.task_type = "unknown";
    EXPECT_THROW(scaffold_conversation(ex, templates), ConfigError);
}

TEST(Templates, RenderPlaceholders) {
    const auto ex = fig2_example();
    EXPECT_EQ(render_template("{label}/{meta.source}", ex), "employment/forum");
    EXPECT_EQ(render_template("{meta}", ex), "posted: 2021-03-04; source: forum");
    LabeledExample bare{"b", "t", "in", "lab", {}};
    EXPECT_EQ(render_template("{meta}", bare), "none");
    EXPECT_THROW(render_template("{meta.judge}", ex), ConfigError);
    EXPECT_THROW(render_template("{nope}", ex), ConfigError);
    EXPECT_THROW(render_template("{label", ex), ConfigError);
}

TEST(Templates, AnswerMustCarryLabelAndMeta) {
    TemplateSet set;
    EXPECT_THROW(set.add("x", {"{input}", "It is {label}.", "Why?"}), ConfigError);
    EXPECT_NO_THROW(set.add("x", {"{input}", "It is {label} ({meta}).", "Why?"}));
    EXPECT_THROW(set.set_extra_turn_pairs(0), ConfigError);
}

TEST(Templates, JsonRoundTrip) {
    const auto set = synth::default_templates();
    const auto back = TemplateSet::from_json(set.to_json());
    EXPECT_EQ(back.to_json(), set.to_json());
    EXPECT_EQ(back.extra_turn_pairs(), set.extra_turn_pairs());
    EXPECT_THROW(TemplateSet::from_json("[]"), ConfigError);
}

TEST(Examples, JsonlRoundTrip) {
    for (const auto& ex : synth::labeled_examples(20, 1)) EXPECT_EQ(parse_example(serialize_example(ex)), ex);
    EXPECT_THROW(parse_example(R"({"id":"a"})"), FormatError);
}

TEST(Extend, AlternatesAndEndsOnAssistant) {
    const auto templates = synth::default_templates();
    const chat::StubBackend stub;
    const auto scaffold = scaffold_conversation(fig2_example(), templates);
    for (std::size_t k = 1; k <= 4; ++k) {
        const auto conv = extend_conversation(scaffold, stub, stub, k);
        EXPECT_EQ(conv.status, Status::ok);
        ASSERT_EQ(conv.turns.size(), 2 + 2 * k);
        EXPECT_TRUE(well_formed(conv));
        EXPECT_EQ(conv.turns.back().role, Role::assistant);
        for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(conv.turns[i], scaffold.turns[i]);
        EXPECT_EQ(conv.generator, "user=stub;assistant=stub");
    }
    EXPECT_THROW(extend_conversation(scaffold, stub, stub, 0), InvalidArgument);
}

TEST(Extend, AlternationHoldsForArbitraryBackendOutput) {
    const auto templates = synth::default_templates();
    Rng rng(4);
    const chat::FunctionBackend noisy("noisy", [&](std::span<const chat::Message> m, Role) {
        return "reply " + std::to_string(m.size()) + " " + lexcurate::testing::random_word(rng, 26, 10);
    });
    for (const auto& ex : synth::labeled_examples(10, 2)) {
        const auto conv = extend_conversation(scaffold_conversation(ex, templates), noisy, noisy, 2);
        EXPECT_TRUE(well_formed(conv));
        EXPECT_EQ(conv.turns.back().role, Role::assistant);
    }
}

TEST(Extend, FailureKeepsScaffoldWithReason) {
    const auto templates = synth::default_templates();
    const auto scaffold = scaffold_conversation(fig2_example(), templates);
    const chat::StubBackend stub;
    const chat::FunctionBackend blank("blank", [](std::span<const chat::Message>, Role) { return std::string("  "); });
    auto conv = extend_conversation(scaffold, blank, stub, 2);  // assistant succeeds, user turn is blank
    EXPECT_EQ(conv.status, Status::failed);
    EXPECT_EQ(conv.failure_reason, "empty_completion");
    EXPECT_EQ(conv.turns, scaffold.turns);

    const chat::FunctionBackend down("down", [](std::span<const chat::Message>, Role) -> std::string {
        throw chat::ChatError("transport", "connection refused");
    });
    conv = extend_conversation(scaffold, stub, down, 2);
    EXPECT_EQ(conv.status, Status::failed);
    EXPECT_EQ(conv.failure_reason, "transport");
    EXPECT_EQ(conv.turns, scaffold.turns);
}

TEST(Extend, StubConversationsMatchGoldenFile) {
    const auto templates = synth::default_templates();
    const chat::StubBackend stub;
    std::vector<Conversation> scaffolds;
    scaffolds.push_back(scaffold_conversation(fig2_example(), templates));
    for (const auto& ex : synth::labeled_examples(6, 42)) scaffolds.push_back(scaffold_conversation(ex, templates));
    const auto convs = extend_all(scaffolds, stub, stub, 2, 3);
    std::string text;
    for (const auto& c : convs) text += serialize_conversation(c) + "\n";
    if (std::getenv("LEXCURATE_UPDATE_GOLDEN")) write_text(kGolden, text);
    EXPECT_EQ(text, read_text(kGolden));
}

TEST(Extend, ExtendAllPreservesOrderAndBoundsConcurrency) {
    const auto templates = synth::default_templates();
    std::vector<Conversation> scaffolds;
    for (const auto& ex : synth::labeled_examples(24, 5)) scaffolds.push_back(scaffold_conversation(ex, templates));
    std::atomic<int> in_flight{0};
    std::atomic<int> peak{0};
    const chat::StubBackend stub;
    const chat::FunctionBackend slow("slow", [&](std::span<const chat::Message> m, Role r) {
        const int now = ++in_flight;
        int p = peak.load();
        while (now > p && !peak.compare_exchange_weak(p, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
        --in_flight;
        return stub.complete(m, r);
    });
    const auto parallel = extend_all(scaffolds, slow, slow, 2, 3);
    EXPECT_LE(peak.load(), 3);
    for (std::size_t i = 0; i < scaffolds.size(); ++i) {
        EXPECT_EQ(parallel[i].turns, extend_conversation(scaffolds[i], stub, stub, 2).turns);
    }
}

TEST(Conversations, JsonlRoundTrip) {
    TempDir dir;
    const auto templates = synth::default_templates();
    const chat::StubBackend stub;
    std::vector<Conversation> convs;
    for (const auto& ex : synth::labeled_examples(5, 1)) {
        convs.push_back(extend_conversation(scaffold_conversation(ex, templates), stub, stub, 1));
    }
    convs[1].status = Status::failed;
    convs[1].failure_reason = "http_503";
    write_conversations(convs, dir / "c.jsonl");
    EXPECT_EQ(read_conversations(dir / "c.jsonl"), convs);
    EXPECT_THROW(parse_conversation(R"({"id":"a","turns":[{"role":"robot","text":"x"}]})"), FormatError);
}

TEST(Decontaminate, EightTokenBoundary) {
    const std::vector<std::string> bench = {"w1 w2 w3 w4 w5 w6 w7 w8 w9 w10 w11 w12"};
    const std::vector<Conversation> convs = {
        conv_with("none", "completely unrelated words here"),
        conv_with("eight", "prefix w3 w4 w5 w6 w7 w8 w9 w10 suffix"),
        conv_with("seven", "w1 w2 w3 w4 w5 w6 w7 x w8 w9 w10 w11 w12 y w2 w3 w4 w5 w6 w7 w8"),
    };
    const auto res = decontaminate(convs, bench);
    ASSERT_EQ(res.kept.size(), 2u);
    EXPECT_EQ(res.kept[0].id, "none");
    EXPECT_EQ(res.kept[1].id, "seven");
    EXPECT_EQ(res.removed_ids, std::vector<std::string>{"eight"});
    for (const auto& c : convs) EXPECT_EQ(oracle_contaminated(c, bench, 8), c.id == "eight") << c.id;
}

TEST(Decontaminate, ShortBenchmarkInputsNeverMatch) {
    const std::vector<std::string> bench = {"a b c"};
    const std::vector<Conversation> convs = {conv_with("x", "a b c d e f g h i j")};
    EXPECT_EQ(decontaminate(convs, bench).kept.size(), 1u);
}

TEST(Decontaminate, NormalizesBothSides) {
    const std::vector<std::string> bench = {"the \xEF\xAC\x81nal rule applies to every telemarketer in this state"};
    const std::vector<Conversation> convs = {conv_with("x", "Note: the final rule applies to every telemarketer in this")};
    EXPECT_TRUE(decontaminate(convs, bench).kept.empty());
}

TEST(Decontaminate, MatchesOracleAndIsMonotone) {
    Rng rng(6);
    std::vector<std::string> bench;
    for (int i = 0; i < 30; ++i) {
        std::string s;
        for (int w = 0; w < 14; ++w) s += lexcurate::testing::random_word(rng, 3, 1) + " ";
        bench.push_back(s);
    }
    std::vector<Conversation> convs;
    for (int i = 0; i < 80; ++i) {
        std::string s;
        for (int w = 0; w < 30; ++w) s += lexcurate::testing::random_word(rng, 3, 1) + " ";
        convs.push_back(conv_with("c" + std::to_string(i), s));
    }
    const std::vector<std::string> half(bench.begin(), bench.begin() + 15);
    const auto small = decontaminate(convs, half, 8, whitespace_tokenizer(), Execution::serial);
    const auto full = decontaminate(convs, bench, 8, whitespace_tokenizer(), Execution::parallel);
    const auto full_serial = decontaminate(convs, bench, 8, whitespace_tokenizer(), Execution::serial);
    EXPECT_EQ(full.removed_ids, full_serial.removed_ids);
    std::set<std::string> removed_full(full.removed_ids.begin(), full.removed_ids.end());
    for (const auto& id : small.removed_ids) EXPECT_TRUE(removed_full.contains(id)) << id;
    for (const auto& c : convs) EXPECT_EQ(oracle_contaminated(c, bench, 8), removed_full.contains(c.id)) << c.id;
    EXPECT_FALSE(full.removed_ids.empty());
    EXPECT_FALSE(full.kept.empty());
}
