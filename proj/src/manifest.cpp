#include "lvqa/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "lvqa/errors.hpp"

namespace lvqa {

std::string clock_string(Seconds second_of_day) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d:%02d", static_cast<int>(second_of_day / 3600),
                  static_cast<int>((second_of_day % 3600) / 60));
    return buf;
}

std::string to_string(CameraKind kind) { return kind == CameraKind::ego ? "ego" : "exo"; }

const DaySpan& CorpusManifest::span_for_day(int day) const {
    if (!day_spans.empty() && day >= 1 && day <= static_cast<int>(day_spans.size())) {
        return day_spans[static_cast<std::size_t>(day - 1)];
    }
    return day_span;
}

TimeWindow CorpusManifest::day_window(int day) const {
    const auto& s = span_for_day(day);
    return {day_start(day) + s.start, day_start(day) + s.end};
}

bool CorpusManifest::covers(const TimeWindow& w) const {
    if (w.start < 0 || w.start >= w.end) return false;
    int day = day_of(w.start);
    if (day < 1 || day > days) return false;
    return contains(day_window(day), w);
}

const CameraInfo* CorpusManifest::find_camera(const CameraId& id) const {
    for (const auto& c : cameras) {
        if (c.id == id) return &c;
    }
    return nullptr;
}

bool CorpusManifest::has_person(const PersonId& id) const {
    for (const auto& p : roster) {
        if (p.id == id) return true;
    }
    return false;
}

bool CorpusManifest::is_exo(const CameraId& id) const {
    const auto* c = find_camera(id);
    return c != nullptr && c->kind == CameraKind::exo;
}

void CorpusManifest::validate() const {
    if (days < 1) throw ValidationError("manifest: days must be >= 1");
    if (embedding_dim < 1) throw ValidationError("manifest: embedding_dim must be >= 1");
    if (roster.empty()) throw ValidationError("manifest: roster is empty");
    if (!day_spans.empty() && static_cast<int>(day_spans.size()) != days) {
        throw ValidationError("manifest: day_spans must list one span per day");
    }
    auto check_span = [](const DaySpan& s) {
        if (!(0 <= s.start && s.start < s.end && s.end <= kDaySeconds)) {
            throw ValidationError("manifest: day_span requires 0 <= start < end <= 86400");
        }
        if (s.start % kSlotSeconds != 0 || s.end % kSlotSeconds != 0) {
            throw ValidationError("manifest: day_span must be aligned to 300 s");
        }
    };
    check_span(day_span);
    for (const auto& s : day_spans) check_span(s);

    std::set<PersonId> people;
    for (const auto& p : roster) {
        if (p.id.empty()) throw ValidationError("manifest: empty person id");
        if (!people.insert(p.id).second) throw ValidationError("manifest: duplicate person id " + p.id);
    }
    std::set<CameraId> ids;
    for (const auto& c : cameras) {
        if (c.id.empty()) throw ValidationError("manifest: empty camera id");
        if (!ids.insert(c.id).second) throw ValidationError("manifest: duplicate camera id " + c.id);
        if (c.kind == CameraKind::ego) {
            if (!c.wearer || !people.contains(*c.wearer)) {
                throw ValidationError("manifest: ego camera " + c.id + " has no wearer in roster");
            }
        }
    }
}

CorpusManifest manifest_from_json(const nlohmann::json& j) {
    CorpusManifest m;
    try {
        m.days = j.at("days").get<int>();
        m.epoch = j.value("epoch", Seconds{0});
        m.day_span = {j.at("day_span").at("start").get<Seconds>(), j.at("day_span").at("end").get<Seconds>()};
        if (j.contains("day_spans")) {
            for (const auto& s : j.at("day_spans")) {
                m.day_spans.push_back({s.at("start").get<Seconds>(), s.at("end").get<Seconds>()});
            }
        }
        for (const auto& c : j.at("cameras")) {
            CameraInfo info;
            info.id = c.at("id").get<std::string>();
            auto kind = c.at("kind").get<std::string>();
            if (kind == "ego") {
                info.kind = CameraKind::ego;
            } else if (kind == "exo") {
                info.kind = CameraKind::exo;
            } else {
                throw ValidationError("manifest: camera kind must be ego or exo, got " + kind);
            }
            if (c.contains("wearer") && !c.at("wearer").is_null()) {
                info.wearer = c.at("wearer").get<std::string>();
            }
            m.cameras.push_back(std::move(info));
        }
        for (const auto& p : j.at("roster")) {
            m.roster.push_back({p.at("id").get<std::string>(), p.value("name", p.at("id").get<std::string>())});
        }
        m.embedding_dim = j.at("embedding_dim").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
    return m;
}

nlohmann::json to_json(const CorpusManifest& m) {
    nlohmann::json j;
    j["days"] = m.days;
    j["epoch"] = m.epoch;
    j["day_span"] = {{"start", m.day_span.start}, {"end", m.day_span.end}};
    if (!m.day_spans.empty()) {
        auto spans = nlohmann::json::array();
        for (const auto& s : m.day_spans) spans.push_back({{"start", s.start}, {"end", s.end}});
        j["day_spans"] = spans;
    }
    auto cams = nlohmann::json::array();
    for (const auto& c : m.cameras) {
        nlohmann::json cj = {{"id", c.id}, {"kind", to_string(c.kind)}};
        if (c.wearer) cj["wearer"] = *c.wearer;
        cams.push_back(cj);
    }
    j["cameras"] = cams;
    auto roster = nlohmann::json::array();
    for (const auto& p : m.roster) roster.push_back({{"id", p.id}, {"name", p.name}});
    j["roster"] = roster;
    j["embedding_dim"] = m.embedding_dim;
    return j;
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
    auto m = manifest_from_json(j);
    m.validate();
    return m;
}

void save_manifest(const CorpusManifest& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_json(m).dump(2) << '\n';
}

}  // namespace lvqa
