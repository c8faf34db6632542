#include "lvqa/cell_index.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "lvqa/errors.hpp"

namespace lvqa {
namespace {

std::vector<std::string_view> split(std::string_view s, char sep, std::size_t max_parts) {
    std::vector<std::string_view> parts;
    while (parts.size() + 1 < max_parts) {
        auto pos = s.find(sep);
        if (pos == std::string_view::npos) break;
        parts.push_back(s.substr(0, pos));
        s.remove_prefix(pos + 1);
    }
    parts.push_back(s);
    return parts;
}

std::optional<int> to_int(std::string_view s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

// Extractive ordering: transcripts first so audio quotes survive truncation.
int lane_rank(Lane l) {
    switch (l) {
        case Lane::transcript: return 0;
        case Lane::caption: return 1;
        case Lane::action: return 2;
        case Lane::object: return 3;
        case Lane::identity: return 4;
    }
    return 5;
}

std::map<std::string, int> count_lanes(std::span<const LaneRecord> records) {
    std::map<std::string, int> counts;
    for (Lane l : kAllLanes) counts[to_string(l)] = 0;
    for (const auto& r : records) ++counts[to_string(r.lane())];
    return counts;
}

}  // namespace

TimeWindow CellKey::window() const {
    Seconds s = day_start(day) + hour * kHourSeconds;
    return {s, s + kHourSeconds};
}

TimeWindow BucketKey::window() const {
    Seconds s = cell.window().start + quarter * kBucketSeconds;
    return {s, s + kBucketSeconds};
}

TimeWindow SubWindowKey::window() const {
    Seconds s = day_start(day) + slot * kSlotSeconds;
    return {s, s + kSlotSeconds};
}

std::string to_string(Granularity g) {
    switch (g) {
        case Granularity::cell: return "cell";
        case Granularity::bucket: return "bucket";
        case Granularity::subwindow: return "subwindow";
    }
    return "?";
}

Granularity granularity_from_string(std::string_view s) {
    if (s == "cell") return Granularity::cell;
    if (s == "bucket") return Granularity::bucket;
    if (s == "subwindow") return Granularity::subwindow;
    throw ValidationError("unknown granularity '" + std::string(s) + "'");
}

std::string key_string(const CellKey& k) {
    return "cell:" + std::to_string(k.day) + ":" + std::to_string(k.hour);
}

std::string key_string(const BucketKey& k) {
    return "bucket:" + std::to_string(k.cell.day) + ":" + std::to_string(k.cell.hour) + ":" +
           std::to_string(k.quarter);
}

std::string key_string(const SubWindowKey& k) {
    return "sub:" + std::to_string(k.day) + ":" + std::to_string(k.slot) + ":" + k.camera;
}

std::string key_string(const DocKey& k) {
    return std::visit([](const auto& v) { return key_string(v); }, k);
}

std::optional<DocKey> parse_key(std::string_view s) {
    auto head = s.substr(0, s.find(':'));
    if (head == "cell") {
        auto p = split(s, ':', 3);
        if (p.size() != 3) return std::nullopt;
        auto d = to_int(p[1]), h = to_int(p[2]);
        if (!d || !h) return std::nullopt;
        return CellKey{*d, *h};
    }
    if (head == "bucket") {
        auto p = split(s, ':', 4);
        if (p.size() != 4) return std::nullopt;
        auto d = to_int(p[1]), h = to_int(p[2]), q = to_int(p[3]);
        if (!d || !h || !q || *q < 0 || *q > 3) return std::nullopt;
        return BucketKey{{*d, *h}, *q};
    }
    if (head == "sub") {
        auto p = split(s, ':', 4);
        if (p.size() != 4 || p[3].empty()) return std::nullopt;
        auto d = to_int(p[1]), sl = to_int(p[2]);
        if (!d || !sl) return std::nullopt;
        return SubWindowKey{*d, *sl, std::string(p[3])};
    }
    return std::nullopt;
}

TimeWindow key_window(const DocKey& k) {
    return std::visit([](const auto& v) { return v.window(); }, k);
}

int key_day(const DocKey& k) { return day_of(key_window(k).start); }

std::vector<DocKey> enumerate_keys(const CorpusManifest& m, Granularity g) {
    std::vector<DocKey> keys;
    for (int day = 1; day <= m.days; ++day) {
        const auto& span = m.span_for_day(day);
        switch (g) {
            case Granularity::cell: {
                auto first = static_cast<int>(span.start / kHourSeconds);
                auto last = static_cast<int>((span.end + kHourSeconds - 1) / kHourSeconds);
                for (int h = first; h < last; ++h) keys.emplace_back(CellKey{day, h});
                break;
            }
            case Granularity::bucket: {
                auto first = static_cast<int>(span.start / kBucketSeconds);
                auto last = static_cast<int>((span.end + kBucketSeconds - 1) / kBucketSeconds);
                for (int b = first; b < last; ++b) keys.emplace_back(BucketKey{{day, b / 4}, b % 4});
                break;
            }
            case Granularity::subwindow: {
                auto first = static_cast<int>(span.start / kSlotSeconds);
                auto last = static_cast<int>(span.end / kSlotSeconds);
                for (int s = first; s < last; ++s) {
                    for (const auto& cam : m.cameras) keys.emplace_back(SubWindowKey{day, s, cam.id});
                }
                break;
            }
        }
    }
    std::sort(keys.begin(), keys.end());
    return keys;
}

std::map<DocKey, std::vector<LaneRecord>> partition(std::span<const LaneRecord> records,
                                                    const CorpusManifest& m, Granularity g) {
    std::map<DocKey, std::vector<LaneRecord>> out;
    for (auto& k : enumerate_keys(m, g)) out.emplace(std::move(k), std::vector<LaneRecord>{});

    auto assign = [&](DocKey key, const LaneRecord& r) {
        auto it = out.find(key);
        if (it != out.end()) it->second.push_back(r);
    };
    for (const auto& r : records) {
        int day = day_of(r.window.start);
        Seconds s = r.window.start - day_start(day);
        Seconds e = r.window.end - day_start(day);
        switch (g) {
            case Granularity::cell:
                for (auto h = s / kHourSeconds; h * kHourSeconds < e; ++h) {
                    assign(CellKey{day, static_cast<int>(h)}, r);
                }
                break;
            case Granularity::bucket:
                for (auto b = s / kBucketSeconds; b * kBucketSeconds < e; ++b) {
                    assign(BucketKey{{day, static_cast<int>(b / 4)}, static_cast<int>(b % 4)}, r);
                }
                break;
            case Granularity::subwindow:
                for (auto sl = s / kSlotSeconds; sl * kSlotSeconds < e; ++sl) {
                    assign(SubWindowKey{day, static_cast<int>(sl), r.camera}, r);
                }
                break;
        }
    }
    return out;
}

std::string extractive_summary(std::span<const LaneRecord> records, std::size_t budget) {
    std::vector<const LaneRecord*> ordered;
    ordered.reserve(records.size());
    for (const auto& r : records) ordered.push_back(&r);
    std::stable_sort(ordered.begin(), ordered.end(), [](const LaneRecord* a, const LaneRecord* b) {
        return lane_rank(a->lane()) < lane_rank(b->lane());
    });
    std::string text;
    for (const auto* r : ordered) {
        auto line = render_record(*r);
        std::size_t need = line.size() + (text.empty() ? 0 : 1);
        if (text.size() + need > budget) break;
        if (!text.empty()) text.push_back('\n');
        text += line;
    }
    return text;
}

CellDocument summarize_cell(const DocKey& key, std::span<const LaneRecord> records,
                            std::size_t budget, const ModelBinding* model) {
    if (budget == 0) throw ValidationError("summary budget must be positive");
    CellDocument doc{key, {}, count_lanes(records)};
    if (model != nullptr && model->gateway != nullptr && model->channel != nullptr && !records.empty()) {
        ModelRequest req;
        req.role = Role::summarise;
        req.expected_schema = "summary_v1";
        req.system_text = "Summarise the timestamped observations below in plain prose. Keep quotes verbatim.";
        req.user_parts.push_back(UserPart::text("window: " + key_string(key)));
        for (const auto& r : records) req.user_parts.push_back(UserPart::evidence(render_record(r)));
        try {
            auto reply = model->gateway->send(req, *model->channel);
            if (reply.parsed) {
                auto text = reply.parsed->at("summary").get<std::string>();
                doc.text = text.size() > budget ? text.substr(0, budget) : text;
                return doc;
            }
        } catch (const GatewayError&) {
        }
        doc.source_counts["_fallback"] = 1;
    }
    doc.text = extractive_summary(records, budget);
    return doc;
}

std::pair<int, int> slot_room(const BucketKey& anchor, const CorpusManifest& m) {
    const auto& span = m.span_for_day(anchor.cell.day);
    int first_day_slot = static_cast<int>(span.start / kSlotSeconds);
    int end_day_slot = static_cast<int>(span.end / kSlotSeconds);
    int first = anchor.first_slot();
    int last = first + kSlotsPerBucket - 1;
    return {std::max(0, first - first_day_slot), std::max(0, end_day_slot - 1 - last)};
}

std::vector<SubWindowKey> adjacent_subwindows(const BucketKey& anchor,
                                              std::span<const CameraId> cameras,
                                              int span_before, int span_after,
                                              const CorpusManifest& m) {
    const auto& span = m.span_for_day(anchor.cell.day);
    int lo = std::max(anchor.first_slot() - std::max(0, span_before),
                      static_cast<int>(span.start / kSlotSeconds));
    int hi = std::min(anchor.first_slot() + kSlotsPerBucket - 1 + std::max(0, span_after),
                      static_cast<int>(span.end / kSlotSeconds) - 1);
    std::vector<CameraId> cams(cameras.begin(), cameras.end());
    std::sort(cams.begin(), cams.end());
    cams.erase(std::unique(cams.begin(), cams.end()), cams.end());
    std::vector<SubWindowKey> out;
    for (int slot = lo; slot <= hi; ++slot) {
        for (const auto& c : cams) out.push_back({anchor.cell.day, slot, c});
    }
    return out;
}

std::vector<CellDocument> build_documents(std::span<const LaneRecord> records,
                                          const CorpusManifest& m, Granularity g,
                                          std::size_t budget, const ModelBinding* model) {
    std::vector<CellDocument> docs;
    for (const auto& [key, recs] : partition(records, m, g)) {
        docs.push_back(summarize_cell(key, recs, budget, model));
    }
    return docs;
}

nlohmann::json to_json(const CellDocument& d) {
    return {{"key", key_string(d.key)}, {"text", d.text}, {"source_counts", d.source_counts}};
}

CellDocument document_from_json(const nlohmann::json& j) {
    auto key = parse_key(j.at("key").get<std::string>());
    if (!key) throw ParseError("bad document key " + j.at("key").get<std::string>());
    return {*key, j.at("text").get<std::string>(), j.at("source_counts").get<std::map<std::string, int>>()};
}

void save_documents(std::span<const CellDocument> docs, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& d : docs) out << to_json(d).dump() << '\n';
}

std::vector<CellDocument> load_documents(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<CellDocument> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(document_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(e.what(), n);
        }
    }
    return out;
}

}  // namespace lvqa
