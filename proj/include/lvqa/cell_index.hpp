#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lvqa/lane_record.hpp"
#include "lvqa/manifest.hpp"
#include "lvqa/model_gateway.hpp"

namespace lvqa {

/// One (day, hour) retrieval unit.
struct CellKey {
    int day = 1;
    int hour = 0;

    TimeWindow window() const;
    auto operator<=>(const CellKey&) const = default;
};

/// 15-minute bucket inside a cell.
struct BucketKey {
    CellKey cell;
    int quarter = 0;

    TimeWindow window() const;
    /// First 5-minute slot of the bucket (slot index within the day).
    int first_slot() const { return cell.hour * kSlotsPerHour + quarter * kSlotsPerBucket; }
    auto operator<=>(const BucketKey&) const = default;
};

/// (camera, 5-minute slot) verification unit.
struct SubWindowKey {
    int day = 1;
    int slot = 0;
    CameraId camera;

    TimeWindow window() const;
    auto operator<=>(const SubWindowKey&) const = default;
};

using DocKey = std::variant<CellKey, BucketKey, SubWindowKey>;

enum class Granularity { cell, bucket, subwindow };

std::string to_string(Granularity g);
Granularity granularity_from_string(std::string_view s);

// Textual ids: "cell:<day>:<hour>", "bucket:<day>:<hour>:<quarter>",
// "sub:<day>:<slot>:<camera>".
std::string key_string(const CellKey& k);
std::string key_string(const BucketKey& k);
std::string key_string(const SubWindowKey& k);
std::string key_string(const DocKey& k);
std::optional<DocKey> parse_key(std::string_view s);
TimeWindow key_window(const DocKey& k);
int key_day(const DocKey& k);

/// All keys the manifest defines at a granularity, in key order.
std::vector<DocKey> enumerate_keys(const CorpusManifest& m, Granularity g);

/// Assigns every record to every key its window overlaps (sub-windows: on its
/// own camera). Keys with no records are present with empty lists.
std::map<DocKey, std::vector<LaneRecord>> partition(std::span<const LaneRecord> records,
                                                    const CorpusManifest& m, Granularity g);

struct CellDocument {
    DocKey key;
    std::string text;
    /// Per-lane record counts. Keys starting with '_' are flags, not counts.
    std::map<std::string, int> source_counts;

    bool operator==(const CellDocument&) const = default;
};

/// Builds a retrieval document. With `model` the text is a model summary of
/// the canonical rendering; otherwise (or when the model fails, flagged as
/// "_fallback") an extractive concatenation ordered transcripts, captions,
/// actions, objects, identities and cut at a record boundary within `budget`.
CellDocument summarize_cell(const DocKey& key, std::span<const LaneRecord> records,
                            std::size_t budget, const ModelBinding* model = nullptr);

/// Extractive rendering alone.
std::string extractive_summary(std::span<const LaneRecord> records, std::size_t budget);

/// Sub-windows around a bucket: the bucket's three slots widened by
/// `span_before`/`span_after` slots, clipped to the day span, crossed with
/// `cameras`; ordered by (slot, camera).
std::vector<SubWindowKey> adjacent_subwindows(const BucketKey& anchor,
                                              std::span<const CameraId> cameras,
                                              int span_before, int span_after,
                                              const CorpusManifest& m);

/// Number of enumerable slots before the anchor's first slot and after its last.
std::pair<int, int> slot_room(const BucketKey& anchor, const CorpusManifest& m);

std::vector<CellDocument> build_documents(std::span<const LaneRecord> records,
                                          const CorpusManifest& m, Granularity g,
                                          std::size_t budget, const ModelBinding* model = nullptr);

nlohmann::json to_json(const CellDocument& d);
CellDocument document_from_json(const nlohmann::json& j);
/// <dir>/<granularity>.docs.jsonl
void save_documents(std::span<const CellDocument> docs, const std::filesystem::path& path);
std::vector<CellDocument> load_documents(const std::filesystem::path& path);

}  // namespace lvqa
