#include "lvqa/query_parser.hpp"

#include <algorithm>
#include <fstream>
#include <regex>

#include "lvqa/errors.hpp"
#include "lvqa/lane_store.hpp"
#include "lvqa/text.hpp"

namespace lvqa {
namespace {

using json = nlohmann::json;

constexpr std::pair<Intent, std::string_view> kIntents[] = {
    {Intent::who, "who"},     {Intent::where, "where"}, {Intent::when, "when"},
    {Intent::what, "what"},   {Intent::count, "count"}, {Intent::order_before_after, "order_before_after"},
    {Intent::other, "other"}};

constexpr std::string_view kWhWords[] = {"who", "whom", "whose", "where", "when", "what", "which", "how"};

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

/// One catalog surface form, pre-tokenised for run matching.
struct Surface {
    std::vector<std::string> tokens;
    enum class Kind { person, place, object } kind;
    std::string value;
};

std::vector<Surface> surfaces_of(const Catalogs& c) {
    std::vector<Surface> out;
    for (const auto& p : c.persons) {
        for (const auto& n : p.names) out.push_back({tokenize(n), Surface::Kind::person, p.id});
        out.push_back({tokenize(p.id), Surface::Kind::person, p.id});
    }
    for (const auto& pl : c.places) out.push_back({tokenize(pl), Surface::Kind::place, pl});
    for (const auto& o : c.objects) out.push_back({tokenize(o), Surface::Kind::object, o});
    std::erase_if(out, [](const Surface& s) { return s.tokens.empty(); });
    // Longest first so the scan below takes the longest match at each position.
    std::stable_sort(out.begin(), out.end(),
                     [](const Surface& a, const Surface& b) { return a.tokens.size() > b.tokens.size(); });
    return out;
}

void extract_entities(const std::vector<std::string>& tokens, const std::vector<Surface>& surfaces,
                      ParsedQuery& pq) {
    std::size_t i = 0;
    while (i < tokens.size()) {
        const Surface* hit = nullptr;
        for (const auto& s : surfaces) {
            if (i + s.tokens.size() > tokens.size()) continue;
            if (std::equal(s.tokens.begin(), s.tokens.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
                hit = &s;
                break;
            }
        }
        if (hit == nullptr) {
            ++i;
            continue;
        }
        switch (hit->kind) {
            case Surface::Kind::person: pq.persons.insert(hit->value); break;
            case Surface::Kind::place: pq.places.insert(hit->value); break;
            case Surface::Kind::object: pq.objects.insert(hit->value); break;
        }
        i += hit->tokens.size();
    }
}

std::optional<int> clock_minutes(int hour, int minute, const std::string& meridiem) {
    if (minute < 0 || minute > 59) return std::nullopt;
    if (meridiem.empty()) {
        if (hour < 0 || hour > 23) return std::nullopt;
    } else {
        if (hour < 1 || hour > 12) return std::nullopt;
        hour %= 12;
        if (meridiem == "pm") hour += 12;
    }
    return hour * 60 + minute;
}

std::vector<int> clock_times(const std::string& lower) {
    static const std::regex pattern(R"((\d{1,2})(?::(\d{2}))?\s*(am\b|pm\b|a\.m\.|p\.m\.)?)");
    std::vector<int> out;
    for (auto it = std::sregex_iterator(lower.begin(), lower.end(), pattern); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        bool has_minutes = m[2].matched;
        std::string meridiem = m[3].matched ? m[3].str() : "";
        std::erase(meridiem, '.');
        if (!has_minutes && meridiem.empty()) continue;  // a bare number is not a time
        auto pos = static_cast<std::size_t>(m.position(0));
        if (pos > 0 && std::isalnum(static_cast<unsigned char>(lower[pos - 1]))) continue;
        auto t = clock_minutes(std::stoi(m[1].str()), has_minutes ? std::stoi(m[2].str()) : 0, meridiem);
        if (t) out.push_back(*t);
    }
    return out;
}

std::string padded(const std::vector<std::string>& tokens) {
    std::string s = " ";
    for (const auto& t : tokens) s += t + " ";
    return s;
}

bool phrase_in(const std::string& padded_text, const std::string& phrase) {
    auto p = normalize_text(phrase);
    return !p.empty() && padded_text.find(" " + p + " ") != std::string::npos;
}

}  // namespace

// ---------------------------------------------------------------- questions

bool is_choice_label(std::string_view s) {
    return s.size() == 1 && std::find(kChoiceLabels.begin(), kChoiceLabels.end(), s[0]) != kChoiceLabels.end();
}

void Question::validate() const {
    if (choices.size() != kChoiceLabels.size()) {
        throw ValidationError("question " + id + " has " + std::to_string(choices.size()) + " choices, expected 4");
    }
    for (std::size_t i = 0; i < choices.size(); ++i) {
        if (choices[i].label != std::string(1, kChoiceLabels[i])) {
            throw ValidationError("question " + id + " choice " + std::to_string(i) + " is labelled '" +
                                  choices[i].label + "'");
        }
    }
    if (answer && !is_choice_label(*answer)) throw ValidationError("question " + id + " has answer " + *answer);
}

const Choice* Question::choice(std::string_view label) const {
    for (const auto& c : choices) {
        if (c.label == label) return &c;
    }
    return nullptr;
}

std::string Question::prompt_text() const {
    std::string out = text;
    for (const auto& c : choices) out += "\n" + c.label + ". " + c.text;
    return out;
}

json to_json(const Question& q) {
    json choices = json::object();
    for (const auto& c : q.choices) choices[c.label] = c.text;
    json j{{"id", q.id}, {"question", q.text}, {"choices", choices}};
    if (q.answer) j["answer"] = *q.answer;
    return j;
}

Question question_from_json(const json& j) {
    Question q;
    try {
        q.id = j.at("id").get<std::string>();
        q.text = j.contains("question") ? j.at("question").get<std::string>() : j.at("text").get<std::string>();
        const auto& cs = j.at("choices");
        if (cs.is_object()) {
            for (auto label : kChoiceLabels) {
                std::string l(1, label);
                if (cs.contains(l)) q.choices.push_back({l, cs.at(l).get<std::string>()});
            }
        } else {
            for (std::size_t i = 0; i < cs.size(); ++i) {
                const auto& c = cs.at(i);
                if (c.is_string()) {
                    q.choices.push_back({i < kChoiceLabels.size() ? std::string(1, kChoiceLabels[i]) : "?",
                                         c.get<std::string>()});
                } else {
                    q.choices.push_back({c.at("label").get<std::string>(), c.at("text").get<std::string>()});
                }
            }
        }
        if (j.contains("answer") && !j.at("answer").is_null()) q.answer = j.at("answer").get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad question: ") + e.what(), 0);
    }
    q.validate();
    return q;
}

std::vector<Question> load_questions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open questions " + path.string());
    std::vector<Question> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(question_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ": " + e.what(), n);
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ": " + e.what(), n);
        }
    }
    return out;
}

void save_questions(const std::vector<Question>& qs, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& q : qs) out << to_json(q).dump() << '\n';
}

std::string to_string(Intent i) {
    for (auto [v, name] : kIntents) {
        if (v == i) return std::string(name);
    }
    return "other";
}

Intent intent_from_string(std::string_view s) {
    for (auto [v, name] : kIntents) {
        if (name == s) return v;
    }
    throw ValidationError("unknown intent '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- catalogs

Catalogs Catalogs::from_manifest(const CorpusManifest& m, std::vector<std::string> places,
                                 std::vector<std::string> objects) {
    Catalogs c;
    for (const auto& p : m.roster) {
        Person person{p.id, {}};
        if (!p.name.empty()) person.names.push_back(p.name);
        c.persons.push_back(std::move(person));
    }
    c.places = std::move(places);
    c.objects = std::move(objects);
    return c;
}

Catalogs Catalogs::load(const std::filesystem::path& dir) {
    Catalogs c;
    try {
        for (const auto& p : read_json_file(dir / "persons.json")) {
            c.persons.push_back({p.at("id").get<std::string>(), p.value("names", std::vector<std::string>{})});
        }
        c.places = read_json_file(dir / "places.json").get<std::vector<std::string>>();
        c.objects = read_json_file(dir / "objects.json").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad catalog: ") + e.what(), 0);
    }
    return c;
}

void Catalogs::save(const std::filesystem::path& dir) const {
    json persons_json = json::array();
    for (const auto& p : persons) persons_json.push_back({{"id", p.id}, {"names", p.names}});
    write_json_file(persons_json, dir / "persons.json");
    write_json_file(places, dir / "places.json");
    write_json_file(objects, dir / "objects.json");
}

// ---------------------------------------------------------------- lexicons

Lexicons Lexicons::defaults() {
    Lexicons lx;
    lx.dayparts = {{"morning", {6 * 60, 12 * 60 - 1}},   {"noon", {12 * 60, 12 * 60}},
                   {"afternoon", {12 * 60, 17 * 60 - 1}}, {"evening", {17 * 60, 21 * 60 - 1}},
                   {"night", {21 * 60, 24 * 60 - 1}}};
    constexpr std::string_view ordinals[] = {"first", "second", "third", "fourth", "fifth", "sixth", "seventh"};
    constexpr std::string_view cardinals[] = {"one", "two", "three", "four", "five", "six", "seven"};
    for (int d = 1; d <= 7; ++d) {
        lx.day_names[std::string(ordinals[d - 1]) + " day"] = d;
        lx.day_names["day " + std::string(cardinals[d - 1])] = d;
    }
    // A leading '^' anchors the phrase at the first wh-word of the question.
    lx.intent_phrases = {{"immediately before", Intent::order_before_after},
                         {"immediately after", Intent::order_before_after},
                         {"how many", Intent::count},
                         {"^what time", Intent::when},
                         {"^which person", Intent::who},
                         {"^who", Intent::who},
                         {"^whom", Intent::who},
                         {"^whose", Intent::who},
                         {"^where", Intent::where},
                         {"^when", Intent::when},
                         {"^what", Intent::what}};
    lx.verbs = {"set",   "cook", "wash",  "play",  "read", "eat",   "drink", "talk",  "clean", "watch",
                "open",  "pour", "cut",   "write", "carry", "fold", "sweep", "water", "chop",  "stir",
                "serve", "bake", "paint", "sing",  "knit",  "sort", "peel",  "mop",   "build", "draw"};
    return lx;
}

Lexicons Lexicons::load(const std::filesystem::path& path) {
    auto j = read_json_file(path);
    Lexicons lx;
    try {
        for (auto& [name, r] : j.at("dayparts").items()) lx.dayparts[name] = {r.at(0).get<int>(), r.at(1).get<int>()};
        lx.day_names = j.at("day_names").get<std::map<std::string, int>>();
        for (const auto& p : j.at("intent_phrases")) {
            lx.intent_phrases.emplace_back(p.at(0).get<std::string>(), intent_from_string(p.at(1).get<std::string>()));
        }
        lx.verbs = j.at("verbs").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
    return lx;
}

void Lexicons::save(const std::filesystem::path& path) const {
    json dp = json::object();
    for (const auto& [name, r] : dayparts) dp[name] = {r.start, r.end};
    json phrases = json::array();
    for (const auto& [p, intent] : intent_phrases) phrases.push_back({p, to_string(intent)});
    write_json_file({{"dayparts", dp}, {"day_names", day_names}, {"intent_phrases", phrases}, {"verbs", verbs}},
                    path);
}

// ---------------------------------------------------------------- parsing

ParsedQuery parse_question(const Question& q, const CorpusManifest& m, const Catalogs& catalogs,
                           const Lexicons& lexicons) {
    ParsedQuery pq;
    pq.raw = q.text;

    auto q_tokens = tokenize(q.text);
    auto surfaces = surfaces_of(catalogs);
    extract_entities(q_tokens, surfaces, pq);
    for (const auto& c : q.choices) extract_entities(tokenize(c.text), surfaces, pq);

    for (const auto& verb : lexicons.verbs) {
        bool hit = mentions_verb(q.text, verb);
        for (const auto& c : q.choices) hit = hit || mentions_verb(c.text, verb);
        if (hit) pq.actions.insert(verb);
    }

    // Day: "day N" first, then named forms.
    auto text = padded(q_tokens);
    for (std::size_t i = 0; i + 1 < q_tokens.size() && !pq.day; ++i) {
        if (q_tokens[i] != "day") continue;
        const auto& n = q_tokens[i + 1];
        if (!n.empty() && n.size() <= 3 && std::all_of(n.begin(), n.end(), ::isdigit)) pq.day = std::stoi(n);
    }
    if (!pq.day) {
        for (const auto& [phrase, d] : lexicons.day_names) {
            if (phrase_in(text, phrase)) {
                pq.day = d;
                break;
            }
        }
    }
    if (pq.day && (*pq.day < 1 || *pq.day > m.days)) pq.day.reset();

    // Time: clock patterns win over dayparts.
    std::string lower;
    for (char ch : q.text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    auto times = clock_times(lower);
    bool ranged = phrase_in(text, "between") || phrase_in(text, "from");
    if (times.size() >= 2 && ranged) {
        pq.time_range = MinuteRange{std::min(times[0], times[1]), std::max(times[0], times[1])};
    } else if (!times.empty()) {
        pq.time_range = MinuteRange{times[0], times[0]};
    } else {
        for (const auto& [name, r] : lexicons.dayparts) {
            if (phrase_in(text, name)) {
                pq.time_range = r;
                break;
            }
        }
    }

    // Intent: ordered rules, first hit wins.
    auto wh = std::find_if(q_tokens.begin(), q_tokens.end(), [](const std::string& t) {
        return std::find(std::begin(kWhWords), std::end(kWhWords), t) != std::end(kWhWords);
    });
    std::vector<std::string> from_wh(wh, q_tokens.end());
    auto anchored = padded(from_wh);
    for (const auto& [phrase, intent] : lexicons.intent_phrases) {
        bool hit = false;
        if (phrase.starts_with('^')) {
            auto p = normalize_text(phrase.substr(1));
            hit = !p.empty() && anchored.starts_with(" " + p + " ");
        } else {
            hit = phrase_in(text, phrase);
        }
        if (!hit) continue;
        pq.intent = intent;
        if (intent == Intent::order_before_after) {
            pq.direction = phrase_in(text, "immediately before") ? OrderDirection::before : OrderDirection::after;
        }
        break;
    }
    return pq;
}

}  // namespace lvqa
