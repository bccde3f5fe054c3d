#include "lexcurate/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "lexcurate/error.hpp"
#include "lexcurate/io.hpp"
#include "lexcurate/random.hpp"
#include "lexcurate/stats.hpp"

namespace lexcurate::eval {

using nlohmann::json;

namespace {

constexpr std::array<Category, 6> kCategories = {Category::issue_spotting, Category::rule_recall,
                                                 Category::interpretation, Category::rhetoric_understanding,
                                                 Category::rule_conclusion, Category::mmlu_legal};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

std::size_t count_occurrences(std::string_view s, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = s.find(needle); pos != std::string_view::npos; pos = s.find(needle, pos + needle.size())) ++n;
    return n;
}

}  // namespace

std::string_view to_string(Category c) noexcept {
    switch (c) {
        case Category::issue_spotting: return "issue_spotting";
        case Category::rule_recall: return "rule_recall";
        case Category::interpretation: return "interpretation";
        case Category::rhetoric_understanding: return "rhetoric_understanding";
        case Category::rule_conclusion: return "rule_conclusion";
        case Category::mmlu_legal: return "mmlu_legal";
    }
    return "issue_spotting";
}

Category parse_category(std::string_view name) {
    for (auto c : kCategories) {
        if (to_string(c) == name) return c;
    }
    throw FormatError("unknown task category '" + std::string(name) + "'");
}

std::span<const Category> all_categories() noexcept { return kCategories; }

void EvalTask::validate() const {
    if (name.empty()) throw FormatError("task has no name");
    if (instances.empty()) throw FormatError("task '" + name + "' has no instances");
    if (label_set.empty()) throw FormatError("task '" + name + "' has an empty label set");
    std::unordered_set<std::string> labels;
    for (const auto& l : label_set) {
        if (l.empty()) throw FormatError("task '" + name + "' has an empty label");
        if (!labels.insert(l).second) throw FormatError("task '" + name + "' repeats label '" + l + "'");
    }
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (!labels.contains(instances[i].gold)) {
            throw FormatError("task '" + name + "' instance " + std::to_string(i) + " has gold label '" +
                              instances[i].gold + "' outside the label set");
        }
    }
    if (count_occurrences(prompt_template, kInputPlaceholder) != 1) {
        throw FormatError("prompt template of task '" + name + "' must contain {text} exactly once");
    }
}

EvalTask EvalTask::from_json(std::string_view text) {
    EvalTask t;
    try {
        const auto j = json::parse(text);
        t.name = j.at("name").get<std::string>();
        t.category = parse_category(j.at("category").get<std::string>());
        t.label_set = j.at("label_set").get<std::vector<std::string>>();
        t.prompt_template = j.at("prompt_template").get<std::string>();
        for (const auto& inst : j.at("instances")) {
            t.instances.push_back({inst.at("input").get<std::string>(), inst.at("gold").get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("invalid task file: ") + e.what());
    }
    t.validate();
    return t;
}

std::string EvalTask::to_json() const {
    json inst = json::array();
    for (const auto& i : instances) inst.push_back({{"input", i.input}, {"gold", i.gold}});
    return json{{"name", name},
                {"category", to_string(category)},
                {"label_set", label_set},
                {"prompt_template", prompt_template},
                {"instances", inst}}
               .dump(2) +
           "\n";
}

EvalTask EvalTask::load(const std::filesystem::path& path) {
    try {
        return from_json(read_text(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void EvalTask::save(const std::filesystem::path& path) const { write_text(path, to_json()); }

std::vector<EvalTask> load_task_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw IoError("task directory '" + dir.string() + "' not found");
    std::vector<EvalTask> tasks;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") tasks.push_back(EvalTask::load(entry.path()));
    }
    std::sort(tasks.begin(), tasks.end(), [](const EvalTask& a, const EvalTask& b) { return a.name < b.name; });
    for (std::size_t i = 1; i < tasks.size(); ++i) {
        if (tasks[i].name == tasks[i - 1].name) throw FormatError("duplicate task name '" + tasks[i].name + "'");
    }
    return tasks;
}

std::string answer_instruction(std::span<const std::string> label_set) {
    if (label_set.empty()) throw InvalidArgument("label set is empty");
    std::string out = "Answer by only outputting ";
    for (std::size_t i = 0; i < label_set.size(); ++i) {
        if (i > 0) out += i + 1 == label_set.size() ? " or " : ", ";
        out += "\"" + label_set[i] + "\"";
    }
    return out;
}

namespace {

struct Block {
    std::string text;
    bool question = false;
    std::string question_text;
    std::optional<std::string> answer;  // text after "Answer:", when present
};

bool starts_with_label(std::string_view line, std::string_view label) {
    line = trim(line);
    return line.starts_with(label);
}

Block classify(std::string text) {
    Block b;
    b.text = std::move(text);
    const std::string_view view = b.text;
    if (!starts_with_label(view, "Question:")) return b;
    b.question = true;
    std::string question;
    std::istringstream lines(b.text);
    std::string line;
    bool in_answer = false;
    std::string answer;
    while (std::getline(lines, line)) {
        if (!in_answer && starts_with_label(line, "Answer:")) {
            in_answer = true;
            const auto t = trim(line);
            answer = std::string(trim(t.substr(std::string_view("Answer:").size())));
            continue;
        }
        if (in_answer) {
            answer += "\n" + line;
        } else {
            question += line + "\n";
        }
    }
    const auto q = trim(question);
    b.question_text = std::string(trim(q.substr(std::string_view("Question:").size())));
    if (in_answer) b.answer = std::string(trim(answer));
    return b;
}

}  // namespace

std::string curate_prompt(std::string_view original, std::span<const std::string> label_set) {
    std::string text = replace_all(std::string(original), "\r\n", "\n");
    text = replace_all(std::move(text), "{{text}}", std::string(kInputPlaceholder));
    const auto placeholders = count_occurrences(text, kInputPlaceholder);
    if (placeholders == 0) throw FormatError("prompt has no {text} or {{text}} input placeholder");
    if (placeholders > 1) throw FormatError("prompt has " + std::to_string(placeholders) + " input placeholders");
    const auto instruction = answer_instruction(label_set);

    std::vector<Block> blocks;
    {
        std::istringstream lines(text);
        std::string line;
        std::string current;
        auto flush = [&] {
            const auto t = trim(current);
            if (!t.empty()) blocks.push_back(classify(std::string(t)));
            current.clear();
        };
        while (std::getline(lines, line)) {
            if (trim(line).empty()) {
                flush();
            } else {
                current += line + "\n";
            }
        }
        flush();
    }

    const bool any_question = std::any_of(blocks.begin(), blocks.end(), [](const Block& b) { return b.question; });
    if (!any_question) return std::string(trim(text)) + "\n\n" + instruction;

    std::size_t final_index = blocks.size();
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].text.find(kInputPlaceholder) != std::string::npos) final_index = i;
    }
    if (final_index + 1 != blocks.size()) {
        throw FormatError("prompt continues after the block holding the input placeholder");
    }

    std::string preamble;
    for (std::size_t i = 0; i < final_index; ++i) {
        const auto& b = blocks[i];
        if (b.question) {
            if (!b.answer) throw FormatError("few-shot question block has no Answer line: '" + b.text.substr(0, 60) + "'");
            continue;
        }
        if (!preamble.empty()) preamble += "\n\n";
        preamble += b.text;
    }

    const auto& last = blocks[final_index];
    std::string question;
    if (last.question) {
        if (last.answer && !last.answer->empty()) {
            throw FormatError("final question block already carries an answer");
        }
        question = last.question_text;
    } else {
        // A trailing bare "Answer:" line is the completion slot, not question text.
        std::string body = last.text;
        const auto pos = body.rfind("\nAnswer:");
        if (pos != std::string::npos && trim(std::string_view(body).substr(pos + 8)).empty()) body.erase(pos);
        question = std::string(trim(body));
    }
    if (question.find(kInputPlaceholder) == std::string::npos) {
        throw FormatError("input placeholder is not inside the final question");
    }

    std::string out;
    if (!preamble.empty()) out = preamble + "\n\n";
    out += "Answer the following question: " + question + "\n\n" + instruction;
    return out;
}

std::string render_prompt(std::string_view prompt_template, std::string_view input) {
    const auto pos = prompt_template.find(kInputPlaceholder);
    if (pos == std::string_view::npos) throw InvalidArgument("prompt template has no {text} placeholder");
    std::string out(prompt_template.substr(0, pos));
    out.append(input);
    out.append(prompt_template.substr(pos + kInputPlaceholder.size()));
    return out;
}

namespace {

inline bool is_word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80;
}

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

}  // namespace

std::optional<std::string> parse_answer(std::string_view raw, std::span<const std::string> label_set) {
    const auto text = ascii_lower(raw);
    std::vector<std::string> labels;
    labels.reserve(label_set.size());
    for (const auto& l : label_set) labels.push_back(ascii_lower(l));

    for (std::size_t pos = 0; pos < text.size(); ++pos) {
        if (pos > 0 && is_word_byte(static_cast<unsigned char>(text[pos - 1])) &&
            is_word_byte(static_cast<unsigned char>(text[pos]))) {
            continue;
        }
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const auto& l = labels[i];
            if (l.empty() || text.compare(pos, l.size(), l) != 0) continue;
            const std::size_t end = pos + l.size();
            if (end < text.size() && is_word_byte(static_cast<unsigned char>(text[end])) &&
                is_word_byte(static_cast<unsigned char>(l.back()))) {
                continue;
            }
            if (pos > 0 && is_word_byte(static_cast<unsigned char>(text[pos - 1])) &&
                is_word_byte(static_cast<unsigned char>(l.front()))) {
                continue;
            }
            if (!best || l.size() > labels[*best].size()) best = i;
        }
        if (best) return label_set[*best];
    }
    return std::nullopt;
}

double balanced_accuracy(std::span<const std::optional<std::string>> preds, std::span<const std::string> golds) {
    if (golds.empty()) throw InvalidArgument("balanced accuracy of an empty sample");
    if (preds.size() != golds.size()) throw InvalidArgument("predictions and golds differ in length");
    std::map<std::string_view, std::pair<std::size_t, std::size_t>> per_class;  // correct, total
    for (std::size_t i = 0; i < golds.size(); ++i) {
        auto& [correct, total] = per_class[golds[i]];
        ++total;
        if (preds[i] && *preds[i] == golds[i]) ++correct;
    }
    double sum = 0.0;
    for (const auto& [_, c] : per_class) sum += static_cast<double>(c.first) / static_cast<double>(c.second);
    return sum / static_cast<double>(per_class.size());
}

std::string serialize_prediction(const PredictionRecord& r) {
    json j{{"task", r.task},
           {"category", to_string(r.category)},
           {"index", r.index},
           {"gold", r.gold},
           {"raw", r.raw_output},
           {"parsed", r.parsed ? json(*r.parsed) : json(nullptr)}};
    if (!r.failure_reason.empty()) j["failure_reason"] = r.failure_reason;
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

PredictionRecord parse_prediction(std::string_view line) {
    try {
        const auto j = json::parse(line);
        PredictionRecord r;
        r.task = j.at("task").get<std::string>();
        r.category = parse_category(j.at("category").get<std::string>());
        r.index = j.at("index").get<std::size_t>();
        r.gold = j.at("gold").get<std::string>();
        r.raw_output = j.at("raw").get<std::string>();
        if (const auto& p = j.at("parsed"); !p.is_null()) r.parsed = p.get<std::string>();
        r.failure_reason = j.value("failure_reason", std::string{});
        return r;
    } catch (const json::exception& e) {
        throw FormatError(std::string("invalid prediction record: ") + e.what());
    }
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<PredictionRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(parse_prediction(line));
    }
    return out;
}

std::string EvalReport::to_json() const {
    json t = json::object();
    for (const auto& [name, s] : tasks) {
        t[name] = {{"category", to_string(s.category)},
                   {"instances", s.instances},
                   {"abstained", s.abstained},
                   {"balanced_accuracy", s.balanced_accuracy}};
    }
    return json{{"tasks", t}, {"categories", categories}, {"overall", overall}, {"abstain_rate", abstain_rate}}.dump(2) +
           "\n";
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-40s %-24s %9s %9s %8s\n", "task", "category", "instances", "abstained",
                  "bal_acc");
    out << line;
    for (const auto& [name, s] : tasks) {
        std::snprintf(line, sizeof line, "%-40s %-24s %9zu %9zu %8.4f\n", name.c_str(),
                      std::string(to_string(s.category)).c_str(), s.instances, s.abstained, s.balanced_accuracy);
        out << line;
    }
    out << "\n";
    for (const auto& [name, v] : categories) {
        std::snprintf(line, sizeof line, "%-40s %8.4f\n", name.c_str(), v);
        out << line;
    }
    std::snprintf(line, sizeof line, "%-40s %8.4f\n%-40s %8.4f\n", "overall", overall, "abstain_rate", abstain_rate);
    out << line;
    return out.str();
}

EvalReport score_predictions(std::span<const PredictionRecord> predictions) {
    if (predictions.empty()) throw InvalidArgument("no predictions to score");
    std::vector<const PredictionRecord*> sorted;
    sorted.reserve(predictions.size());
    for (const auto& p : predictions) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(), [](const PredictionRecord* a, const PredictionRecord* b) {
        return std::tie(a->task, a->index) < std::tie(b->task, b->index);
    });

    EvalReport report;
    std::size_t abstained_total = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        std::vector<std::optional<std::string>> preds;
        std::vector<std::string> golds;
        TaskScore score;
        score.category = sorted[i]->category;
        for (; j < sorted.size() && sorted[j]->task == sorted[i]->task; ++j) {
            if (sorted[j]->category != score.category) {
                throw FormatError("task '" + sorted[i]->task + "' has predictions in two categories");
            }
            preds.push_back(sorted[j]->parsed);
            golds.push_back(sorted[j]->gold);
            if (!sorted[j]->parsed) ++score.abstained;
        }
        score.instances = golds.size();
        score.balanced_accuracy = balanced_accuracy(preds, golds);
        abstained_total += score.abstained;
        report.tasks[sorted[i]->task] = score;
        i = j;
    }

    std::map<std::string, std::vector<double>> by_category;
    double sum = 0.0;
    for (const auto& [_, s] : report.tasks) {
        by_category[std::string(to_string(s.category))].push_back(s.balanced_accuracy);
        sum += s.balanced_accuracy;
    }
    for (const auto& [c, values] : by_category) report.categories[c] = stats::mean(values);
    report.overall = sum / static_cast<double>(report.tasks.size());
    report.abstain_rate = static_cast<double>(abstained_total) / static_cast<double>(predictions.size());
    return report;
}

BenchmarkRun run_benchmark(std::span<const EvalTask> tasks, const chat::ChatBackend& backend,
                           const BenchmarkOptions& options) {
    std::unordered_set<std::string> names;
    for (const auto& t : tasks) {
        t.validate();
        if (!names.insert(t.name).second) throw InvalidArgument("duplicate task name '" + t.name + "'");
    }

    struct Job {
        std::size_t task;
        std::size_t index;
    };
    std::vector<Job> jobs;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        for (std::size_t i = 0; i < tasks[t].instances.size(); ++i) jobs.push_back({t, i});
    }
    if (jobs.empty()) throw InvalidArgument("no tasks to evaluate");
    Rng rng(derive_seed(options.seed, "eval-dispatch"));
    shuffle(std::span<Job>(jobs), rng);

    std::vector<PredictionRecord> records(jobs.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++) {
            const auto& task = tasks[jobs[k].task];
            const auto& inst = task.instances[jobs[k].index];
            auto& r = records[k];
            r.task = task.name;
            r.category = task.category;
            r.index = jobs[k].index;
            r.gold = inst.gold;
            const std::vector<chat::Message> messages{
                {chat::Role::user, render_prompt(task.prompt_template, inst.input)}};
            try {
                r.raw_output = backend.complete(messages, chat::Role::assistant);
                r.parsed = parse_answer(r.raw_output, task.label_set);
            } catch (const chat::ChatError& e) {
                r.failure_reason = e.reason();
            } catch (const std::exception& e) {
                r.failure_reason = std::string("error: ") + e.what();
            }
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(options.concurrency, 1, jobs.size());
    std::vector<std::thread> threads;
    for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work);
    work();
    for (auto& t : threads) t.join();

    std::sort(records.begin(), records.end(), [](const PredictionRecord& a, const PredictionRecord& b) {
        return std::tie(a.task, a.index) < std::tie(b.task, b.index);
    });
    BenchmarkRun run;
    run.report = score_predictions(records);
    run.predictions = std::move(records);
    return run;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
        row.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            end_row();
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            continue;
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (quoted) throw FormatError("unterminated quoted CSV field");
    if (field_started || !row.empty()) end_row();
    return rows;
}

EvalTask load_mmlu_csv(const std::filesystem::path& path, std::string name, std::string subject) {
    const auto rows = parse_csv(read_text(path));
    EvalTask task;
    task.name = std::move(name);
    task.category = Category::mmlu_legal;
    task.label_set = {"A", "B", "C", "D"};
    task.prompt_template = "The following are multiple choice questions about " + subject +
                           ".\n\nAnswer the following question: {text}\n\n" + answer_instruction(task.label_set);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 6) {
            throw FormatError(path.string() + ": row " + std::to_string(r + 1) + " has " +
                              std::to_string(row.size()) + " fields, expected 6");
        }
        std::string input = row[0];
        for (std::size_t k = 0; k < 4; ++k) input += "\n" + task.label_set[k] + ". " + row[k + 1];
        task.instances.push_back({std::move(input), std::string(trim(row[5]))});
    }
    task.validate();
    return task;
}

std::vector<EvalTask> load_mmlu_legal(const std::filesystem::path& dir) {
    const std::array<std::pair<const char*, const char*>, 3> subsets = {{
        {"international_law", "international law"},
        {"professional_law", "professional law"},
        {"jurisprudence", "jurisprudence"},
    }};
    std::vector<EvalTask> tasks;
    for (const auto& [file, subject] : subsets) {
        tasks.push_back(load_mmlu_csv(dir / (std::string(file) + "_test.csv"), std::string("mmlu_") + file, subject));
    }
    return tasks;
}

std::vector<double> UniformScorer::token_log_probs(std::string_view text) const {
    return std::vector<double>(tok_.count(text), -std::log(vocab_size_));
}

double document_perplexity(std::string_view text, const LogProbScorer& scorer) {
    const auto lp = scorer.token_log_probs(text);
    if (lp.empty()) throw InvalidArgument("scorer returned no tokens");
    const double sum = std::accumulate(lp.begin(), lp.end(), 0.0);
    return std::exp(-sum / static_cast<double>(lp.size()));
}

double relative_reduction(double baseline, double candidate) {
    if (!(baseline > 0.0)) throw InvalidArgument("baseline perplexity must be positive");
    return (baseline - candidate) / baseline;
}

std::vector<std::string> default_ppl_categories() {
    return {"contracts", "decisions", "legislation", "party_submissions"};
}

std::string PerplexityReport::to_json() const {
    json cats = json::object();
    for (const auto& [name, c] : categories) {
        json j{{"documents", c.documents}, {"median", c.median}, {"iqr", c.iqr}};
        if (c.baseline_median) j["baseline_median"] = *c.baseline_median;
        if (c.baseline_iqr) j["baseline_iqr"] = *c.baseline_iqr;
        if (c.reduction) j["reduction"] = *c.reduction;
        cats[name] = j;
    }
    json j{{"scorer", scorer}, {"categories", cats}};
    if (!baseline.empty()) j["baseline"] = baseline;
    return j.dump(2) + "\n";
}

std::string PerplexityReport::to_table() const {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-20s %9s %10s %10s %10s %10s %9s\n", "category", "documents", "median",
                  "iqr", "base_med", "base_iqr", "reduction");
    out << line;
    for (const auto& [name, c] : categories) {
        if (c.reduction) {
            std::snprintf(line, sizeof line, "%-20s %9zu %10.4f %10.4f %10.4f %10.4f %8.2f%%\n", name.c_str(),
                          c.documents, c.median, c.iqr, *c.baseline_median, *c.baseline_iqr, *c.reduction * 100.0);
        } else {
            std::snprintf(line, sizeof line, "%-20s %9zu %10.4f %10.4f\n", name.c_str(), c.documents, c.median, c.iqr);
        }
        out << line;
    }
    return out.str();
}

PerplexityReport perplexity_report_from_values(const std::map<std::string, std::vector<double>>& scorer_values,
                                               const std::map<std::string, std::vector<double>>* baseline_values,
                                               std::string scorer_name, std::string baseline_name) {
    PerplexityReport report;
    report.scorer = std::move(scorer_name);
    if (baseline_values) report.baseline = std::move(baseline_name);
    for (const auto& [name, values] : scorer_values) {
        if (values.empty()) throw InvalidArgument("category '" + name + "' has no documents");
        CategoryPerplexity c;
        c.documents = values.size();
        c.median = stats::median(values);
        c.iqr = stats::interquartile_range(values);
        if (baseline_values) {
            const auto it = baseline_values->find(name);
            if (it == baseline_values->end() || it->second.empty()) {
                throw InvalidArgument("baseline has no documents in category '" + name + "'");
            }
            c.baseline_median = stats::median(it->second);
            c.baseline_iqr = stats::interquartile_range(it->second);
            c.reduction = relative_reduction(*c.baseline_median, c.median);
        }
        report.categories[name] = c;
    }
    return report;
}

PerplexityReport perplexity_report(std::span<const corpus::Document> docs, std::span<const std::string> categories,
                                   const LogProbScorer& scorer, const LogProbScorer* baseline) {
    if (categories.empty()) throw InvalidArgument("no perplexity categories requested");
    std::unordered_map<std::string, std::size_t> wanted;
    for (std::size_t i = 0; i < categories.size(); ++i) wanted.emplace(categories[i], i);

    std::vector<std::size_t> selected;
    std::vector<std::size_t> category_of;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto it = docs[i].meta.find(std::string(kCategoryKey));
        if (it == docs[i].meta.end()) continue;
        const auto w = wanted.find(it->second);
        if (w == wanted.end()) continue;
        selected.push_back(i);
        category_of.push_back(w->second);
    }

    const auto n = static_cast<std::ptrdiff_t>(selected.size());
    std::vector<double> ours(selected.size());
    std::vector<double> theirs(baseline ? selected.size() : 0);
    std::vector<std::exception_ptr> errors(selected.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        try {
            const auto& text = docs[selected[k]].text;
            ours[k] = document_perplexity(text, scorer);
            if (baseline) theirs[k] = document_perplexity(text, *baseline);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::map<std::string, std::vector<double>> a;
    std::map<std::string, std::vector<double>> b;
    for (const auto& c : categories) {
        a[c];
        if (baseline) b[c];
    }
    for (std::size_t k = 0; k < selected.size(); ++k) {
        a[categories[category_of[k]]].push_back(ours[k]);
        if (baseline) b[categories[category_of[k]]].push_back(theirs[k]);
    }
    return perplexity_report_from_values(a, baseline ? &b : nullptr, scorer.name(),
                                         baseline ? baseline->name() : std::string{});
}

}  // namespace lexcurate::eval
