#include "lexcurate/synth.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <set>

#include "lexcurate/cleaning.hpp"
#include "lexcurate/dedup.hpp"
#include "lexcurate/error.hpp"
#include "lexcurate/io.hpp"

namespace lexcurate::synth {

namespace {

using Words = std::vector<std::string_view>;

const std::map<std::string_view, Words>& slots() {
    static const std::map<std::string_view, Words> table = {
        {"party", {"Buyer", "Seller", "Licensee", "Licensor", "Tenant", "Landlord", "Contractor", "Client", "Supplier",
                   "Distributor", "Employer", "Employee", "Borrower", "Lender"}},
        {"obligation", {"deliver the goods", "pay the invoiced amount", "provide written notice",
                        "return all confidential materials", "maintain adequate insurance", "perform the services",
                        "remedy the defect", "furnish a performance bond", "keep accurate records",
                        "obtain all necessary permits"}},
        {"event", {"closing date", "termination", "effective date", "receipt of notice", "completion of the work",
                   "delivery", "final payment"}},
        {"days", {"five", "seven", "ten", "fourteen", "fifteen", "twenty", "thirty", "sixty", "ninety"}},
        {"state", {"New York", "Delaware", "California", "Texas", "Illinois", "Ohio", "Florida", "Washington"}},
        {"breach_event", {"a material breach", "the insolvency of either party", "a change of control", "nonpayment",
                          "a force majeure event lasting more than sixty days", "repeated late delivery"}},
        {"damage", {"indirect damages", "consequential damages", "lost profits", "punitive damages",
                    "incidental losses"}},
        {"cause", {"the performance of this Agreement", "any delay in delivery", "the negligence of its employees",
                   "a breach of warranty", "the use of the licensed software", "any third party claim"}},
        {"loss", {"claims", "losses", "liabilities", "costs and expenses", "penalties"}},
        {"amount", {"$250", "$500", "$1,000", "$2,500", "$10,000", "$25,000", "$50,000", "$100,000"}},
        {"surname", {"Smith", "Johnson", "Garcia", "Miller", "Davis", "Rodriguez", "Martinez", "Wilson", "Anderson",
                     "Taylor", "Thomas", "Moore", "Jackson", "Martin", "Lee", "Thompson", "White", "Harris",
                     "Clark", "Lewis"}},
        {"court", {"district court", "court of appeals", "trial court", "bankruptcy court", "supreme court",
                   "tax court", "superior court"}},
        {"party_l", {"plaintiff", "defendant", "appellant", "appellee", "petitioner", "respondent", "claimant",
                     "government"}},
        {"element", {"a prima facie case", "standing", "causation", "actual damages", "a breach of duty",
                     "the existence of a contract", "irreparable harm", "probable cause"}},
        {"error", {"admitting the hearsay testimony", "denying the motion to suppress", "granting summary judgment",
                   "excluding the expert report", "instructing the jury on negligence", "dismissing the complaint"}},
        {"review_object", {"grant of summary judgment", "interpretation of the statute",
                           "dismissal for failure to state a claim", "legal conclusions of the trial court"}},
        {"disposition", {"affirmed", "reversed", "vacated and remanded", "affirmed in part and reversed in part"}},
        {"fact_verb", {"signed", "received", "inspected", "delivered", "rejected", "returned", "sold", "purchased",
                       "filed"}},
        {"object", {"contract", "lease", "shipment", "invoice", "deed", "promissory note", "settlement agreement",
                    "warranty claim", "building permit"}},
        {"waived", {"waived", "forfeited", "not preserved for review"}},
        {"statute_thing", {"statute of limitations", "exclusion clause", "arbitration provision", "notice requirement",
                           "implied warranty", "automatic stay"}},
        {"facts", {"facts of this case", "disputed transaction", "agreement of the parties", "claims of the plaintiff",
                   "conduct at issue"}},
        {"number", {"2", "3", "4", "5", "7", "10", "12", "15", "21", "101", "204"}},
        {"prohibited", {"operate a commercial vehicle", "discharge pollutants into navigable waters",
                        "sell alcoholic beverages", "practice law", "collect personal data", "construct a dwelling"}},
        {"permit", {"license", "permit", "certificate of registration", "written authorization"}},
        {"agency", {"Secretary", "Commission", "Department", "Board", "Administrator", "Agency"}},
        {"instrument", {"Act", "chapter", "part", "title", "section"}},
        {"letter", {"a", "b", "c", "d", "e"}},
        {"term", {"\"person\"", "\"vehicle\"", "\"consumer\"", "\"employer\"", "\"dwelling\"", "\"personal data\""}},
        {"definition", {"any individual, partnership, corporation, or association",
                        "any device used to transport persons or property",
                        "a natural person who purchases goods for personal use",
                        "any entity employing fifteen or more workers", "a building used primarily as a residence",
                        "information relating to an identified natural person"}},
        {"body", {"Congress", "the legislature", "the Governor", "the appropriate committee", "the public"}},
        {"subject", {"enforcement actions taken during the year", "the number of permits issued",
                     "complaints received from the public", "the costs of administration"}},
        {"motion", {"motion to dismiss", "motion for summary judgment", "motion to compel discovery",
                    "application for an injunction", "petition for review"}},
        {"granted", {"granted", "denied", "granted in part", "dismissed with prejudice"}},
        {"evidence", {"expert testimony", "email correspondence", "surveillance footage", "medical report",
                      "witness statement", "bank records"}},
        {"relief", {"enter judgment in its favor", "award reasonable attorney fees", "stay the proceedings",
                    "order specific performance", "extend the filing deadline"}},
        {"filing", {"brief", "memorandum", "submission", "response", "motion"}},
        {"discovery", {"the outstanding documents", "the deposition transcripts", "further disclosures",
                       "the expert report"}},
        {"month", {"January", "February", "March", "April", "May", "June", "July", "August", "September", "October",
                   "November", "December"}},
        {"place", {"Riverton", "the northern valley", "Lake Marren", "the coastal plain", "Port Ellis",
                   "the old quarter", "Greyfield"}},
        {"thing", {"town", "river", "bridge", "museum", "railway line", "forest", "harbour", "library"}},
        {"field", {"chemistry", "history", "music", "engineering", "botany", "economics", "astronomy"}},
        {"era", {"the nineteenth century", "the early modern period", "the last decade", "the postwar years"}},
        {"lang", {"Python", "C++", "Rust", "JavaScript", "Go", "Java"}},
        {"task", {"read a file line by line", "sort a list of records", "parse a date string", "merge two maps",
                  "format a number with commas", "retry a failed request"}},
        {"fn", {"load_config", "merge_records", "parse_line", "count_words", "retry_call", "normalize_path"}},
        {"arg", {"items", "path", "record", "text", "options", "limit"}},
    };
    return table;
}

const std::map<std::string_view, Words>& templates() {
    static const std::map<std::string_view, Words> table = {
        {"contracts",
         {"The {party} shall {obligation} within {days} days of the {event}.",
          "This Agreement shall be governed by the laws of the State of {state}.",
          "In the event of {breach_event}, the {party} may terminate this Agreement upon {days} days written notice.",
          "The {party} represents and warrants that it has full authority to enter into this Agreement.",
          "Payment of {amount} shall be made to the {party} on or before {date}.",
          "Neither party shall be liable for any {damage} arising out of {cause}.",
          "The {party} agrees to indemnify the {party} against all {loss} resulting from {cause}.",
          "Any notice under this Agreement shall be delivered in writing to the address of the {party}."}},
        {"decisions",
         {"The {court} held that the {party_l} had failed to establish {element}.",
          "On appeal, the {party_l} argues that the {court} erred in {error}.",
          "We review the {review_object} de novo.",
          "The judgment of the {court} is {disposition}.",
          "Judge {surname} delivered the opinion of the court on {date}.",
          "The record shows that the {party_l} {fact_verb} the {object} before the {event}.",
          "Because the {party_l} did not raise this argument below, it is {waived}.",
          "The {court} concluded that the {statute_thing} did not apply to the {facts}."}},
        {"legislation",
         {"Section {number} of this Act shall take effect on {date}.",
          "No person shall {prohibited} without a valid {permit}.",
          "The {agency} may issue regulations necessary to carry out the purposes of this {instrument}.",
          "A person who violates subsection ({letter}) shall be liable to a civil penalty not exceeding {amount}.",
          "For the purposes of this {instrument}, the term {term} means {definition}.",
          "The {agency} shall submit an annual report to {body} describing {subject}.",
          "Nothing in this {instrument} shall be construed to limit the authority of the {agency}."}},
        {"party_submissions",
         {"The {party_l} respectfully submits that the {motion} should be {granted}.",
          "Counsel for the {party_l} contends that the {evidence} is inadmissible.",
          "The {party_l} requests that the court {relief}.",
          "As set out in the accompanying affidavit, the {party_l} {fact_verb} the {object} on {date}.",
          "The {party_l} reserves the right to supplement this {filing} upon receipt of {discovery}.",
          "The {party_l} further submits that the {evidence} supports a finding of {element}."}},
        {"wikipedia",
         {"{place} is a {thing} known for its role in {era}.",
          "The {thing} at {place} was rebuilt after a flood in {year}.",
          "Local historians have studied the {thing} since {era}.",
          "A small museum in {place} holds records on {field} from {era}.",
          "The population of {place} grew steadily during {era}."}},
        {"stackexchange",
         {"How do I {task} in {lang} without loading everything into memory?",
          "The simplest way to {task} in {lang} is to use the standard library.",
          "Note that this approach can fail if the input is empty.",
          "You could also {task} with a small helper function and a loop."}},
        {"github",
         {"def {fn}({arg}): return {arg}",
          "# {fn} returns early when {arg} is empty",
          "if not {arg}: raise ValueError(\"missing {arg}\")",
          "for entry in {arg}: {fn}(entry)"}},
    };
    return table;
}

std::string_view pick(Rng& rng, const Words& words) { return words[uniform_below(rng, words.size())]; }

std::string expand(Rng& rng, std::string_view tmpl) {
    std::string out;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find('{', pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        out.append(tmpl.substr(pos, open - pos));
        const auto close = tmpl.find('}', open);
        const auto name = tmpl.substr(open + 1, close - open - 1);
        if (name == "date") {
            out += std::string(pick(rng, slots().at("month"))) + " " + std::to_string(1 + uniform_below(rng, 28)) +
                   ", " + std::to_string(1990 + uniform_below(rng, 34));
        } else if (name == "year") {
            out += std::to_string(1850 + uniform_below(rng, 170));
        } else {
            out += pick(rng, slots().at(name));
        }
        pos = close + 1;
    }
    return out;
}

std::vector<std::string_view> split_ws(std::string_view text) {
    std::vector<std::string_view> out;
    whitespace_tokenizer().tokenize(text, out);
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string numbered(std::string_view prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu", i);
    return std::string(prefix) + buf;
}

constexpr std::array<std::string_view, 4> kCategories = {"contracts", "decisions", "legislation", "party_submissions"};

const Words& legal_sources() {
    static const Words s = {"freelaw", "edgar", "multi_legal_pile", "europarl", "govinfo", "law_stack_exchange",
                            "open_australian_legal_corpus", "eu_legislation", "uk_legislation", "court_transcripts",
                            "uspto"};
    return s;
}

/// Own-line artifacts: leader runs stay off sentence lines so that a leader
/// never touches a sentence's final period.
const Words& line_artifacts() {
    static const Words a = {"- - - - - - - - - -", ". . . . . . . . . .", "----------", "==========",
                            "__________",          "* * * * * * *",       "=  =  =  =  =  ="};
    return a;
}

const Words& inline_artifacts() {
    static const Words a = {"<p>", "</p>", "<div class=\"page\">", "</div>", "<br/>", "<!-- page break -->",
                            "<span style=\"font-weight:bold\">", "</span>", "<td>", "<tr align=\"left\">"};
    return a;
}

const Words& whitespace_runs() {
    static const Words w = {"   ", " \t ", "\t\t", "  \t  \t", "     "};
    return w;
}

/// Builds a document from sentences, planting an artifact at every other
/// sentence boundary when `plant` is set.
std::string assemble(Rng& rng, const std::vector<std::vector<std::string>>& paragraphs, bool plant,
                     std::vector<std::string>* planted_strings, std::size_t* planted) {
    std::string text;
    for (std::size_t p = 0; p < paragraphs.size(); ++p) {
        if (p) text += "\n\n";
        const auto& sentences = paragraphs[p];
        for (std::size_t s = 0; s < sentences.size(); ++s) {
            if (s > 0) {
                if (plant && s % 2 == 1) {
                    const auto kind = uniform_below(rng, 3);
                    if (kind == 0) {
                        const auto a = pick(rng, line_artifacts());
                        text += "\n" + std::string(a) + "\n";
                        if (planted_strings) planted_strings->emplace_back(a);
                    } else if (kind == 1) {
                        const auto a = pick(rng, inline_artifacts());
                        text += " " + std::string(a) + " ";
                        if (planted_strings) planted_strings->emplace_back(a);
                    } else {
                        text += pick(rng, whitespace_runs());
                    }
                    if (planted) ++*planted;
                } else {
                    text += " ";
                }
            }
            text += sentences[s];
        }
    }
    return text;
}

std::vector<std::vector<std::string>> sentence_blocks(Rng& rng, std::string_view category, std::size_t paragraphs,
                                                      std::size_t min_s, std::size_t max_s) {
    std::vector<std::vector<std::string>> out(paragraphs);
    for (auto& p : out) {
        const auto n = min_s + uniform_below(rng, max_s - min_s + 1);
        for (std::size_t i = 0; i < n; ++i) p.push_back(legal_sentence(rng, category));
    }
    return out;
}

std::string date_string(Rng& rng) { return expand(rng, "{date}"); }

}  // namespace

std::span<const std::string_view> legal_categories() noexcept { return kCategories; }

std::string legal_sentence(Rng& rng, std::string_view category) {
    const auto it = templates().find(category);
    if (it == templates().end()) throw InvalidArgument("unknown text category '" + std::string(category) + "'");
    return expand(rng, pick(rng, it->second));
}

std::string legal_paragraph(Rng& rng, std::string_view category, std::size_t min_sentences,
                            std::size_t max_sentences) {
    const auto n = min_sentences + uniform_below(rng, max_sentences - min_sentences + 1);
    std::vector<std::string> s;
    for (std::size_t i = 0; i < n; ++i) s.push_back(legal_sentence(rng, category));
    return join(s, " ");
}

std::string legal_text(Rng& rng, std::string_view category, std::size_t paragraphs) {
    std::vector<std::string> p;
    for (std::size_t i = 0; i < paragraphs; ++i) p.push_back(legal_paragraph(rng, category));
    return join(p, "\n\n");
}

std::string scramble_words(std::string_view paragraph, Rng& rng) {
    std::vector<std::string> words;
    for (auto w : split_ws(paragraph)) {
        std::string s(w);
        shuffle(std::span<char>(s), rng);
        words.push_back(std::move(s));
    }
    return join(words, " ");
}

std::string gibberish_paragraph(Rng& rng, std::size_t words) {
    static constexpr std::string_view kLetters = "abcdefghijklmnopqrstuvwxyz";
    std::vector<std::string> out;
    for (std::size_t i = 0; i < words; ++i) {
        std::string w;
        const auto len = 2 + uniform_below(rng, 8);
        for (std::size_t k = 0; k < len; ++k) w.push_back(kLetters[uniform_below(rng, kLetters.size())]);
        out.push_back(std::move(w));
    }
    return join(out, " ");
}

std::string general_paragraph(Rng& rng, std::string_view source) {
    const auto it = templates().find(source);
    if (it == templates().end()) throw InvalidArgument("unknown replay source '" + std::string(source) + "'");
    const auto n = 3 + uniform_below(rng, 4);
    std::vector<std::string> s;
    for (std::size_t i = 0; i < n; ++i) s.push_back(expand(rng, pick(rng, it->second)));
    return join(s, source == "github" ? "\n" : " ");
}

std::vector<corpus::Document> seed_corpus(std::uint64_t target_tokens, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "seed-corpus"));
    std::vector<corpus::Document> docs;
    std::uint64_t tokens = 0;
    while (tokens < target_tokens) {
        const auto category = kCategories[docs.size() % kCategories.size()];
        corpus::Document d;
        d.id = numbered("seed-", docs.size());
        d.source = "legal";
        d.text = legal_text(rng, category, 2 + uniform_below(rng, 3));
        d.meta["category"] = std::string(category);
        tokens += whitespace_tokenizer().count(d.text);
        docs.push_back(std::move(d));
    }
    return docs;
}

ArtifactFixture artifact_corpus(std::size_t documents, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "artifact-corpus"));
    ArtifactFixture fx;
    std::set<std::string> distinct;
    for (std::size_t i = 0; i < documents; ++i) {
        const auto category = kCategories[uniform_below(rng, kCategories.size())];
        const auto blocks = sentence_blocks(rng, category, 2 + uniform_below(rng, 3), 3, 5);
        const bool plant = uniform_below(rng, 5) != 0;
        std::vector<std::string> planted;
        corpus::Document d;
        d.id = numbered("art-", i);
        d.source = std::string(pick(rng, legal_sources()));
        d.meta["category"] = std::string(category);
        d.text = assemble(rng, blocks, plant, &planted, &fx.planted);
        distinct.insert(planted.begin(), planted.end());
        std::vector<std::string> sentences;
        for (const auto& b : blocks) sentences.insert(sentences.end(), b.begin(), b.end());
        fx.sentences.push_back(std::move(sentences));
        fx.docs.push_back(std::move(d));
    }
    fx.artifacts.assign(distinct.begin(), distinct.end());
    return fx;
}

namespace {

double true_jaccard(std::string_view a, std::string_view b) {
    const auto sa = dedup::shingle_set(a, whitespace_tokenizer(), 5);
    const auto sb = dedup::shingle_set(b, whitespace_tokenizer(), 5);
    std::vector<std::string> inter;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
    const auto uni = sa.size() + sb.size() - inter.size();
    return uni == 0 ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni);
}

/// Replaces `edits` tokens with a marker word, keeping the whitespace layout.
std::string edit_tokens(std::string_view text, std::size_t edits, Rng& rng) {
    const auto tokens = split_ws(text);
    std::string out(text);
    std::set<std::size_t> positions;
    while (positions.size() < std::min(edits, tokens.size())) positions.insert(uniform_below(rng, tokens.size()));
    // Apply from the back so earlier offsets stay valid.
    for (auto it = positions.rbegin(); it != positions.rend(); ++it) {
        const auto tok = tokens[*it];
        const auto offset = static_cast<std::size_t>(tok.data() - text.data());
        out.replace(offset, tok.size(), "revised");
    }
    return out;
}

}  // namespace

DedupFixture dedup_fixture(std::size_t unique, std::size_t exact, std::size_t near, std::uint64_t seed,
                           double min_jaccard) {
    if (exact + near > unique) throw InvalidArgument("not enough originals for the requested duplicates");
    Rng rng(derive_seed(seed, "dedup-fixture"));
    std::vector<corpus::Document> originals;
    for (std::size_t i = 0; i < unique; ++i) {
        const auto category = kCategories[i % kCategories.size()];
        corpus::Document d;
        d.id = numbered("orig-", i);
        d.source = "legal";
        d.text = legal_text(rng, category, 3);
        originals.push_back(std::move(d));
    }
    std::vector<std::size_t> order(unique);
    for (std::size_t i = 0; i < unique; ++i) order[i] = i;
    shuffle(std::span<std::size_t>(order), rng);

    DedupFixture fx;
    fx.docs = originals;
    for (std::size_t k = 0; k < exact; ++k) {
        const auto& o = originals[order[k]];
        corpus::Document d = o;
        d.id = numbered("exact-", k);
        fx.exact.emplace_back(d.id, o.id);
        fx.docs.push_back(std::move(d));
    }
    for (std::size_t k = 0; k < near; ++k) {
        const auto& o = originals[order[exact + k]];
        corpus::Document d = o;
        d.id = numbered("near-", k);
        for (std::size_t edits = 3;; --edits) {
            d.text = edit_tokens(o.text, edits, rng);
            const double j = true_jaccard(o.text, d.text);
            if ((j >= min_jaccard && j < 1.0) || edits == 1) break;
        }
        fx.near.emplace_back(d.id, o.id);
        fx.docs.push_back(std::move(d));
    }
    shuffle(std::span<corpus::Document>(fx.docs), rng);
    return fx;
}

std::vector<corpus::Document> demo_corpus(std::size_t documents, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "demo-corpus"));
    std::vector<corpus::Document> docs;
    for (std::size_t i = 0; i < documents; ++i) {
        const auto roll = uniform_below(rng, 100);
        if (i >= 20 && roll < 5) {
            corpus::Document d = docs[uniform_below(rng, docs.size())];
            d.id = numbered("doc-", i);
            docs.push_back(std::move(d));
            continue;
        }
        if (i >= 20 && roll < 8) {
            const auto& o = docs[uniform_below(rng, docs.size())];
            corpus::Document d = o;
            d.id = numbered("doc-", i);
            d.text = edit_tokens(o.text, 1, rng);
            docs.push_back(std::move(d));
            continue;
        }
        const auto category = kCategories[uniform_below(rng, kCategories.size())];
        auto blocks = sentence_blocks(rng, category, 2 + uniform_below(rng, 3), 3, 6);
        corpus::Document d;
        d.id = numbered("doc-", i);
        d.source = std::string(pick(rng, legal_sources()));
        d.meta["category"] = std::string(category);
        d.meta["date"] = date_string(rng);
        d.text = assemble(rng, blocks, uniform_below(rng, 10) < 6, nullptr, nullptr);
        if (uniform_below(rng, 100) < 8) {
            const auto para = legal_paragraph(rng, category, 4, 6);
            d.text += "\n\n" + (uniform_below(rng, 2) ? scramble_words(para, rng)
                                                      : gibberish_paragraph(rng, split_ws(para).size()));
        }
        docs.push_back(std::move(d));
    }
    return docs;
}

std::vector<corpus::Document> replay_corpus(std::size_t documents, std::uint64_t seed) {
    static constexpr std::array<std::string_view, 3> kSources = {"wikipedia", "stackexchange", "github"};
    Rng rng(derive_seed(seed, "replay-corpus"));
    std::vector<corpus::Document> docs;
    for (std::size_t i = 0; i < documents; ++i) {
        const auto source = kSources[i % kSources.size()];
        corpus::Document d;
        d.id = numbered("replay-", i);
        d.source = std::string(source);
        d.text = general_paragraph(rng, source) + "\n\n" + general_paragraph(rng, source);
        docs.push_back(std::move(d));
    }
    return docs;
}

std::vector<corpus::Document> instruction_corpus(std::size_t documents, std::uint64_t seed) {
    static constexpr std::array<std::string_view, 2> kSources = {"super_natural_instructions", "flan"};
    static constexpr std::array<std::string_view, 4> kInstructions = {
        "Summarize the following clause in one sentence.", "Identify the party that bears the obligation.",
        "State whether the provision limits liability.", "Rewrite the sentence in plain English."};
    Rng rng(derive_seed(seed, "instruction-corpus"));
    std::vector<corpus::Document> docs;
    for (std::size_t i = 0; i < documents; ++i) {
        const auto sentence = legal_sentence(rng, "contracts");
        corpus::Document d;
        d.id = numbered("instr-", i);
        d.source = std::string(kSources[i % kSources.size()]);
        d.text = "Instruction: " + std::string(kInstructions[uniform_below(rng, kInstructions.size())]) +
                 "\nInput: " + sentence + "\nResponse: " + legal_sentence(rng, "contracts");
        docs.push_back(std::move(d));
    }
    return docs;
}

std::vector<instruct::LabeledExample> labeled_examples(std::size_t count, std::uint64_t seed) {
    static const std::vector<std::pair<std::string_view, std::string_view>> kForum = {
        {"My employer fired me because I reported a safety problem to the state inspector. Is it legal?",
         "employment"},
        {"My landlord kept my whole deposit and never sent an itemized list. Can they do that?", "housing"},
        {"My ex wants to move abroad with our daughter without asking me. What are my options?", "family"},
        {"A contractor took a deposit for my roof and stopped answering calls. Can I get the money back?",
         "contracts"},
        {"I was stopped and searched on my way home without any explanation. Was that allowed?", "criminal"},
        {"My manager has not paid me for overtime in three months. What should I do?", "employment"},
        {"The building owner refuses to fix the heating in my apartment. Can I withhold rent?", "housing"},
    };
    static constexpr std::array<std::string_view, 3> kClauseLabels = {"termination", "payment", "governing law"};
    static constexpr std::array<std::string_view, 3> kClauseTemplates = {
        "In the event of {breach_event}, the {party} may terminate this Agreement upon {days} days written notice.",
        "Payment of {amount} shall be made to the {party} on or before {date}.",
        "This Agreement shall be governed by the laws of the State of {state}."};

    Rng rng(derive_seed(seed, "labeled-examples"));
    std::vector<instruct::LabeledExample> out;
    for (std::size_t i = 0; i < count; ++i) {
        instruct::LabeledExample ex;
        ex.id = numbered("ex-", i);
        const auto kind = i % 3;
        if (kind == 0) {
            const auto& [text, label] = i == 0 ? kForum[0] : kForum[uniform_below(rng, kForum.size())];
            ex.task_type = "forum_topic";
            ex.input_text = std::string(text);
            ex.label = std::string(label);
            ex.meta["source"] = "forum";
            ex.meta["posted"] = date_string(rng);
        } else if (kind == 1) {
            const auto c = uniform_below(rng, kClauseLabels.size());
            ex.task_type = "clause_type";
            ex.input_text = expand(rng, kClauseTemplates[c]);
            ex.label = std::string(kClauseLabels[c]);
            ex.meta["type"] = "contract";
            ex.meta["date"] = date_string(rng);
        } else {
            ex.task_type = "case_outcome";
            ex.input_text = legal_paragraph(rng, "decisions", 2, 3);
            ex.label = std::string(pick(rng, slots().at("disposition")));
            ex.meta["type"] = "decision";
            ex.meta["judge"] = "J. " + std::string(pick(rng, slots().at("surname")));
            ex.meta["date"] = date_string(rng);
        }
        out.push_back(std::move(ex));
    }
    return out;
}

instruct::TemplateSet default_templates() {
    instruct::TemplateSet set;
    set.set_extra_turn_pairs(2);
    set.add("forum_topic", {"Someone posted this question online: \"{input}\" Which area of law does it concern?",
                            "This question falls under {label} law. Record details: {meta}.",
                            "Could you explain why this is a question of {label} law and what the person should check first?"});
    set.add("clause_type", {"What kind of clause is this? \"{input}\"",
                            "It is a {label} clause. Record details: {meta}.",
                            "Why does the wording point to a {label} clause rather than something else?"});
    set.add("case_outcome", {"Here is an excerpt from a court opinion: \"{input}\" How was the case decided?",
                             "The judgment was {label}. Record details: {meta}.",
                             "Can you walk me through the reasoning that leads to that outcome?"});
    return set;
}

std::string telemarketing_original_prompt() {
    return "The Telemarketing Sales Rule is provided by 16 C.F.R. § 310.3(a)(1) and 16 C.F.R. § "
           "310.3(a)(2).\n\n"
           "Question: Acme Toys is a telemarketer subject to the Telemarketing Sales Rule. Acme Toys told a customer "
           "that its frisbees cost $10 each, when in fact the frisbees cost $12 each. The customer agreed to the "
           "sale and was charged $12. Is this a violation of the Telemarketing Sales Rule?\n"
           "Answer: Yes\n\n"
           "Question: Acme Toys is a telemarketer subject to the Telemarketing Sales Rule. Acme Toys told a customer "
           "that its frisbees cost $10 each, when in fact the frisbees did cost $10, but Acme Toys did not disclose "
           "that shipping would cost an additional $5. The customer agreed to the sale. Is this a violation of the "
           "Telemarketing Sales Rule?\n"
           "Answer: Yes\n\n"
           "Question: Acme Industrial Products is a telemarketer subject to the Telemarketing Sales Rule. Acme "
           "Industrial Products told a customer that its brooms cost $12 each, and the brooms did in fact cost $12. "
           "The customer agreed to the sale. Is this a violation of the Telemarketing Sales Rule?\n"
           "Answer: No\n\n"
           "Question: Acme Industrial Products is a telemarketer subject to the Telemarketing Sales Rule. Acme "
           "Industrial Products told a customer that it would sell them 4 brooms for $10 and that shipping would be "
           "$5. Then, the customer agreed to the sale. Is this a violation of the Telemarketing Sales Rule?\n"
           "Answer: No\n\n"
           "Question:  {{text}}\n"
           "Answer:";
}

namespace {

std::string few_shot_prompt(std::string_view preamble, const std::vector<eval::Instance>& shots) {
    std::string out(preamble);
    for (const auto& s : shots) out += "\n\nQuestion: " + s.input + "\nAnswer: " + s.gold;
    out += "\n\nQuestion: {{text}}\nAnswer:";
    return out;
}

eval::EvalTask make_task(std::string name, eval::Category category, std::vector<std::string> labels,
                         std::string_view preamble, std::vector<eval::Instance> instances, std::size_t shots) {
    eval::EvalTask t;
    t.name = std::move(name);
    t.category = category;
    t.label_set = std::move(labels);
    const std::vector<eval::Instance> few(instances.begin(), instances.begin() + static_cast<std::ptrdiff_t>(shots));
    t.prompt_template = eval::curate_prompt(few_shot_prompt(preamble, few), t.label_set);
    t.instances.assign(instances.begin() + static_cast<std::ptrdiff_t>(shots), instances.end());
    return t;
}

}  // namespace

std::vector<eval::EvalTask> task_suite(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "task-suite"));
    std::vector<eval::EvalTask> tasks;

    {
        static const Words kCompanies = {"Acme Toys", "Acme Industrial Products", "Beacon Outfitters",
                                         "Crestline Supplies", "Dunmore Garden Co.", "Everly Home Goods"};
        static const Words kItems = {"frisbees", "brooms", "lamps", "kettles", "umbrellas", "notebooks"};
        std::vector<eval::Instance> inst;
        for (std::size_t i = 0; i < 20; ++i) {
            const auto company = std::string(pick(rng, kCompanies));
            const auto item = std::string(pick(rng, kItems));
            const auto price = 5 + uniform_below(rng, 20);
            const auto kind = uniform_below(rng, 3);
            std::string facts;
            std::string gold;
            if (kind == 0) {
                facts = "its " + item + " cost $" + std::to_string(price) + " each, when in fact the " + item +
                        " cost $" + std::to_string(price + 2) + " each. The customer agreed to the sale and was "
                        "charged $" + std::to_string(price + 2) + ".";
                gold = "Yes";
            } else if (kind == 1) {
                facts = "its " + item + " cost $" + std::to_string(price) + " each, but did not disclose a $" +
                        std::to_string(3 + uniform_below(rng, 5)) + " handling fee. The customer agreed to the sale.";
                gold = "Yes";
            } else {
                facts = "its " + item + " cost $" + std::to_string(price) + " each, and the " + item +
                        " did in fact cost $" + std::to_string(price) + ". The customer agreed to the sale.";
                gold = "No";
            }
            inst.push_back({company + " is a telemarketer subject to the Telemarketing Sales Rule. " + company +
                                " told a customer that " + facts + " Is this a violation of the Telemarketing "
                                "Sales Rule?",
                            gold});
        }
        eval::EvalTask t;
        t.name = "telemarketing_sales_rule";
        t.category = eval::Category::rule_conclusion;
        t.label_set = {"Yes", "No"};
        t.prompt_template = eval::curate_prompt(telemarketing_original_prompt(), t.label_set);
        t.instances = std::move(inst);
        tasks.push_back(std::move(t));
    }

    {
        std::vector<eval::Instance> inst;
        for (std::size_t i = 0; i < 22; ++i) {
            const bool termination = uniform_below(rng, 2) == 0;
            const auto text = termination
                                  ? expand(rng, "In the event of {breach_event}, the {party} may terminate this "
                                                "Agreement upon {days} days written notice.")
                                  : expand(rng, "The {party} shall {obligation} within {days} days of the {event}.");
            inst.push_back({text, termination ? "Yes" : "No"});
        }
        tasks.push_back(make_task("termination_issue", eval::Category::issue_spotting, {"Yes", "No"},
                                  "Does the clause give a party a right to end the contract?", std::move(inst), 2));
    }

    {
        std::vector<eval::Instance> inst;
        static const Words kDays = {"10", "14", "30", "45", "60"};
        for (std::size_t i = 0; i < 22; ++i) {
            const auto days = std::string(pick(rng, kDays));
            inst.push_back({"Under the sample housing code, a tenant must receive " + days +
                                " days written notice before the landlord ends a monthly tenancy.",
                            days == "30" ? "True" : "False"});
        }
        tasks.push_back(make_task("notice_period_recall", eval::Category::rule_recall, {"True", "False"},
                                  "The sample housing code requires 30 days written notice to end a monthly tenancy. "
                                  "Decide whether each statement is correct.",
                                  std::move(inst), 2));
    }

    {
        static const std::array<std::pair<std::string_view, std::string_view>, 3> kKinds = {{
            {"termination",
             "In the event of {breach_event}, the {party} may terminate this Agreement upon {days} days written "
             "notice."},
            {"payment", "Payment of {amount} shall be made to the {party} on or before {date}."},
            {"liability", "Neither party shall be liable for any {damage} arising out of {cause}."},
        }};
        std::vector<eval::Instance> inst;
        for (std::size_t i = 0; i < 24; ++i) {
            const auto& [label, tmpl] = kKinds[uniform_below(rng, kKinds.size())];
            inst.push_back({expand(rng, tmpl), std::string(label)});
        }
        tasks.push_back(make_task("clause_classification", eval::Category::interpretation,
                                  {"termination", "payment", "liability"},
                                  "Classify the contract clause by its main function.", std::move(inst), 3));
    }

    {
        static const Words kConclusions = {"Therefore, the motion should be denied.",
                                           "Accordingly, the judgment below must be reversed.",
                                           "It follows that the claim is time-barred.",
                                           "For these reasons, the petition is granted."};
        std::vector<eval::Instance> inst;
        for (std::size_t i = 0; i < 20; ++i) {
            const bool conclusion = uniform_below(rng, 2) == 0;
            inst.push_back({conclusion ? std::string(pick(rng, kConclusions)) : legal_sentence(rng, "decisions"),
                            conclusion ? "conclusion" : "premise"});
        }
        tasks.push_back(make_task("argument_role", eval::Category::rhetoric_understanding, {"premise", "conclusion"},
                                  "Decide whether the sentence states a premise or the conclusion of an argument.",
                                  std::move(inst), 2));
    }
    for (const auto& t : tasks) t.validate();
    return tasks;
}

std::string mmlu_csv(std::string_view subject, std::size_t rows, std::uint64_t seed) {
    static const Words kConcepts = {"state sovereignty", "the doctrine of precedent", "adverse possession",
                                    "consideration", "mens rea", "the rule of law", "treaty interpretation",
                                    "legal positivism", "hearsay", "diplomatic immunity", "natural law",
                                    "strict liability"};
    static const Words kOptions = {"It depends only on written statutes.", "It requires the consent of the parties.",
                                   "It applies only to criminal proceedings.", "It is a matter of customary practice.",
                                   "It limits the discretion of courts.", "It protects the reliance of third parties.",
                                   "It can be waived by agreement.", "It has no effect on remedies."};
    Rng rng(derive_seed(seed, subject));
    auto quote = [](std::string_view s) {
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out.push_back('"');
            out.push_back(c);
        }
        return out + "\"";
    };
    std::string out;
    for (std::size_t r = 0; r < rows; ++r) {
        const auto concept_name = pick(rng, kConcepts);
        std::string q = "Question " + std::to_string(r + 1) + " on " + std::string(subject) +
                        ": which statement best describes " + std::string(concept_name) + ", as discussed in \"" +
                        std::string(subject) + "\" materials?";
        out += quote(q);
        std::vector<std::size_t> opts(kOptions.size());
        for (std::size_t k = 0; k < opts.size(); ++k) opts[k] = k;
        shuffle(std::span<std::size_t>(opts), rng);
        for (std::size_t k = 0; k < 4; ++k) out += "," + quote(kOptions[opts[k]]);
        out += ",";
        out.push_back(static_cast<char>('A' + uniform_below(rng, 4)));
        out += "\r\n";
    }
    return out;
}

void write_sample_data(const std::filesystem::path& dir, std::uint64_t seed) {
    std::filesystem::create_directories(dir / "tasks");
    std::filesystem::create_directories(dir / "mmlu");
    corpus::write_documents(demo_corpus(1000, seed), dir / "corpus.jsonl");
    corpus::write_documents(seed_corpus(50'000, seed), dir / "seed.jsonl");
    corpus::write_documents(replay_corpus(300, seed), dir / "replay.jsonl");
    corpus::write_documents(instruction_corpus(300, seed), dir / "instruction.jsonl");

    std::string examples;
    for (const auto& ex : labeled_examples(60, seed)) examples += instruct::serialize_example(ex) + "\n";
    write_text(dir / "examples.jsonl", examples);
    write_text(dir / "templates.json", default_templates().to_json());
    write_text(dir / "telemarketing_original.txt", telemarketing_original_prompt() + "\n");

    for (const auto& t : task_suite(seed)) t.save(dir / "tasks" / (t.name + ".json"));
    write_text(dir / "mmlu" / "international_law_test.csv", mmlu_csv("international law", kMmluInternationalLaw, seed));
    write_text(dir / "mmlu" / "professional_law_test.csv", mmlu_csv("professional law", kMmluProfessionalLaw, seed));
    write_text(dir / "mmlu" / "jurisprudence_test.csv", mmlu_csv("jurisprudence", kMmluJurisprudence, seed));
    cleaning::build_default_ruleset().save(dir / "rules.json");
}

}  // namespace lexcurate::synth
