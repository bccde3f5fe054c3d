#include "lexcurate/instruct.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>
#include <unordered_set>

#include "lexcurate/cleaning.hpp"
#include "lexcurate/error.hpp"
#include "lexcurate/io.hpp"

namespace lexcurate::instruct {

using nlohmann::json;

namespace {

template <typename T, typename Parse>
std::vector<T> read_jsonl(const std::filesystem::path& path, Parse parse) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<T> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(parse(line));
        } catch (const FormatError& e) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::string required_string(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw FormatError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

std::string meta_summary(const corpus::Metadata& meta) {
    if (meta.empty()) return "none";
    std::string out;
    for (const auto& [k, v] : meta) {
        if (!out.empty()) out += "; ";
        out += k + ": " + v;
    }
    return out;
}

}  // namespace

LabeledExample parse_example(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("example must be a JSON object");
    LabeledExample ex;
    ex.id = required_string(j, "id");
    ex.task_type = required_string(j, "task_type");
    ex.input_text = required_string(j, "input");
    ex.label = required_string(j, "label");
    if (auto it = j.find("meta"); it != j.end()) {
        if (!it->is_object()) throw FormatError("field 'meta' must be an object");
        for (const auto& [k, v] : it->items()) {
            if (!v.is_string()) throw FormatError("meta value '" + k + "' must be a string");
            ex.meta[k] = v.get<std::string>();
        }
    }
    return ex;
}

std::string serialize_example(const LabeledExample& ex) {
    return json{{"id", ex.id}, {"task_type", ex.task_type}, {"input", ex.input_text}, {"label", ex.label},
                {"meta", ex.meta}}
        .dump();
}

std::vector<LabeledExample> read_examples(const std::filesystem::path& path) {
    return read_jsonl<LabeledExample>(path, parse_example);
}

bool well_formed(const Conversation& conv) {
    if (conv.turns.size() < 3) return false;
    for (std::size_t i = 0; i < conv.turns.size(); ++i) {
        const auto expected = i % 2 == 0 ? chat::Role::user : chat::Role::assistant;
        if (conv.turns[i].role != expected) return false;
    }
    return true;
}

Conversation parse_conversation(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("conversation must be a JSON object");
    Conversation c;
    c.id = required_string(j, "id");
    c.origin = j.value("origin", std::string{});
    c.generator = j.value("generator", std::string{});
    const auto status = j.value("status", std::string("ok"));
    if (status == "ok") {
        c.status = Status::ok;
    } else if (status == "failed") {
        c.status = Status::failed;
    } else {
        throw FormatError("unknown conversation status '" + status + "'");
    }
    c.failure_reason = j.value("failure_reason", std::string{});
    const auto it = j.find("turns");
    if (it == j.end() || !it->is_array()) throw FormatError("field 'turns' must be an array");
    for (const auto& t : *it) {
        if (!t.is_object()) throw FormatError("turn must be an object");
        c.turns.push_back({chat::parse_role(required_string(t, "role")), required_string(t, "text")});
    }
    return c;
}

std::string serialize_conversation(const Conversation& conv) {
    json turns = json::array();
    for (const auto& t : conv.turns) turns.push_back({{"role", chat::to_string(t.role)}, {"text", t.content}});
    json j{{"id", conv.id},
           {"origin", conv.origin},
           {"generator", conv.generator},
           {"status", conv.status == Status::ok ? "ok" : "failed"},
           {"turns", turns}};
    if (conv.status == Status::failed) j["failure_reason"] = conv.failure_reason;
    try {
        return j.dump();
    } catch (const json::type_error& e) {
        throw FormatError(std::string("conversation is not valid UTF-8: ") + e.what());
    }
}

std::vector<Conversation> read_conversations(const std::filesystem::path& path) {
    return read_jsonl<Conversation>(path, parse_conversation);
}

void write_conversations(std::span<const Conversation> convs, const std::filesystem::path& path) {
    std::string out;
    for (const auto& c : convs) {
        out += serialize_conversation(c);
        out.push_back('\n');
    }
    write_text(path, out);
}

void TemplateSet::add(std::string task_type, TaskTemplate t) {
    if (t.answer.find("{label}") == std::string::npos || t.answer.find("{meta}") == std::string::npos) {
        throw ConfigError("answer template for '" + task_type + "' must contain {label} and {meta}");
    }
    if (t.request.empty() || t.elaborate.empty()) {
        throw ConfigError("template for '" + task_type + "' has an empty turn");
    }
    templates_[std::move(task_type)] = std::move(t);
}

const TaskTemplate& TemplateSet::at(std::string_view task_type) const {
    const auto it = templates_.find(task_type);
    if (it == templates_.end()) throw ConfigError("no conversation template for task type '" + std::string(task_type) + "'");
    return it->second;
}

bool TemplateSet::contains(std::string_view task_type) const { return templates_.find(task_type) != templates_.end(); }

void TemplateSet::set_extra_turn_pairs(std::size_t k) {
    if (k < 1) throw ConfigError("extra_turn_pairs must be >= 1");
    extra_turn_pairs_ = k;
}

TemplateSet TemplateSet::from_json(std::string_view text) {
    try {
        const auto j = json::parse(text);
        TemplateSet set;
        set.set_extra_turn_pairs(j.value("extra_turn_pairs", std::size_t{2}));
        for (const auto& [name, t] : j.at("tasks").items()) {
            set.add(name, {t.at("request").get<std::string>(), t.at("answer").get<std::string>(),
                           t.at("elaborate").get<std::string>()});
        }
        return set;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid template file: ") + e.what());
    }
}

TemplateSet TemplateSet::load(const std::filesystem::path& path) { return from_json(read_text(path)); }

std::string TemplateSet::to_json() const {
    json tasks = json::object();
    for (const auto& [name, t] : templates_) {
        tasks[name] = {{"request", t.request}, {"answer", t.answer}, {"elaborate", t.elaborate}};
    }
    return json{{"extra_turn_pairs", extra_turn_pairs_}, {"tasks", tasks}}.dump(2) + "\n";
}

std::string render_template(std::string_view tmpl, const LabeledExample& ex) {
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
        if (close == std::string_view::npos) throw ConfigError("unterminated placeholder in template");
        const auto name = tmpl.substr(open + 1, close - open - 1);
        if (name == "input") {
            out += ex.input_text;
        } else if (name == "label") {
            out += ex.label;
        } else if (name == "meta") {
            out += meta_summary(ex.meta);
        } else if (name.starts_with("meta.")) {
            const auto key = std::string(name.substr(5));
            const auto it = ex.meta.find(key);
            if (it == ex.meta.end()) {
                throw ConfigError("example '" + ex.id + "' has no meta key '" + key + "' used by the template");
            }
            out += it->second;
        } else {
            throw ConfigError("unknown template placeholder {" + std::string(name) + "}");
        }
        pos = close + 1;
    }
    return out;
}

Conversation scaffold_conversation(const LabeledExample& ex, const TemplateSet& templates) {
    if (ex.input_text.empty()) throw InvalidArgument("example '" + ex.id + "' has an empty input");
    if (ex.label.empty()) throw InvalidArgument("example '" + ex.id + "' has an empty label");
    const auto& t = templates.at(ex.task_type);
    Conversation c;
    c.id = ex.id;
    c.origin = ex.id;
    c.generator = "template";
    c.turns = {{chat::Role::user, render_template(t.request, ex)},
               {chat::Role::assistant, render_template(t.answer, ex)},
               {chat::Role::user, render_template(t.elaborate, ex)}};
    return c;
}

Conversation extend_conversation(const Conversation& conv, const chat::ChatBackend& user_backend,
                                 const chat::ChatBackend& assistant_backend, std::size_t extra_turn_pairs) {
    if (extra_turn_pairs < 1) throw InvalidArgument("extra_turn_pairs must be >= 1");
    if (conv.turns.size() != 3 || !well_formed(conv)) {
        throw InvalidArgument("conversation '" + conv.id + "' is not a three-turn scaffold");
    }
    Conversation out = conv;
    out.generator = "user=" + user_backend.name() + ";assistant=" + assistant_backend.name();
    out.status = Status::ok;
    out.failure_reason.clear();

    const std::size_t appended = 2 * extra_turn_pairs - 1;
    try {
        for (std::size_t i = 0; i < appended; ++i) {
            const auto role = i % 2 == 0 ? chat::Role::assistant : chat::Role::user;
            const auto& backend = role == chat::Role::assistant ? assistant_backend : user_backend;
            auto text = backend.complete(out.turns, role);
            if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
                throw chat::ChatError("empty_completion", backend.name() + " returned no text");
            }
            out.turns.push_back({role, std::move(text)});
        }
    } catch (const chat::ChatError& e) {
        out.turns = conv.turns;
        out.status = Status::failed;
        out.failure_reason = e.reason();
    }
    return out;
}

std::vector<Conversation> extend_all(std::span<const Conversation> convs, const chat::ChatBackend& user_backend,
                                     const chat::ChatBackend& assistant_backend, std::size_t extra_turn_pairs,
                                     std::size_t concurrency) {
    std::vector<Conversation> out(convs.size());
    if (convs.empty()) return out;
    const std::size_t workers = std::clamp<std::size_t>(concurrency, 1, convs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto work = [&] {
        for (std::size_t i = next++; i < convs.size() && !failed; i = next++) {
            try {
                out[i] = extend_conversation(convs[i], user_backend, assistant_backend, extra_turn_pairs);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work);
    work();
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

namespace {

void add_shingles(std::string_view text, std::size_t n, const Tokenizer& tok,
                  std::unordered_set<std::string>& into) {
    const auto normalized = cleaning::normalize_text(text);
    const auto tokens = tok.tokenize(normalized);
    if (tokens.size() < n) return;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key;
        for (std::size_t j = 0; j < n; ++j) {
            if (j) key.push_back('\0');
            key.append(tokens[i + j]);
        }
        into.insert(std::move(key));
    }
}

}  // namespace

DecontaminationResult decontaminate(std::span<const Conversation> convs, std::span<const std::string> benchmark_inputs,
                                    std::size_t shingle_n, const Tokenizer& tok, Execution exec) {
    if (shingle_n < 1) throw InvalidArgument("shingle size must be >= 1");
    std::unordered_set<std::string> bench;
    for (const auto& b : benchmark_inputs) add_shingles(b, shingle_n, tok, bench);

    std::vector<char> contaminated(convs.size(), 0);
    auto check = [&](std::ptrdiff_t i) {
        for (const auto& turn : convs[static_cast<std::size_t>(i)].turns) {
            std::unordered_set<std::string> own;
            add_shingles(turn.content, shingle_n, tok, own);
            for (const auto& s : own) {
                if (bench.contains(s)) {
                    contaminated[i] = 1;
                    return;
                }
            }
        }
    };
    const auto n = static_cast<std::ptrdiff_t>(convs.size());
    if (exec == Execution::serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) check(i);
    } else {
#pragma omp parallel for schedule(dynamic, 8)
        for (std::ptrdiff_t i = 0; i < n; ++i) check(i);
    }

    DecontaminationResult result;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        if (contaminated[i]) {
            result.removed_ids.push_back(convs[i].id);
        } else {
            result.kept.push_back(convs[i]);
        }
    }
    return result;
}

}  // namespace lexcurate::instruct
