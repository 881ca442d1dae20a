#pragma once

// File formats. docs/formats.md has the byte-level description.
//
// Native events: 16-byte header (magic "STEV", u32 version 1, u32 width,
// u32 height) then 16-byte records (u64 t, u16 x, u16 y, u8 polarity, 3 zero
// bytes), all little-endian.
// Event CSV: "# width=W height=H", then "t,x,y,polarity", then one row per event.
// Point text: one "x y z" triple per line. Point binary: packed little-endian
// f64 triples.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stream/geometry/events.hpp"
#include "stream/geometry/points.hpp"

namespace stream::geometry {

inline constexpr char kEventMagic[4] = {'S', 'T', 'E', 'V'};
inline constexpr std::uint32_t kEventVersion = 1;
inline constexpr std::size_t kEventHeaderBytes = 16;
inline constexpr std::size_t kEventRecordBytes = 16;

std::vector<std::uint8_t> encode_events(const EventStream& stream);
/// Throws DataError naming the record on malformed content.
EventStream decode_events(const std::vector<std::uint8_t>& bytes);

void write_events_csv(std::ostream& out, const EventStream& stream);
/// Throws DataError naming the 1-based line of the first bad row.
EventStream read_events_csv(std::istream& in);

enum class EventFormat { csv, native };

struct EventReadResult {
  std::optional<EventRecord> event;  // empty when the record is malformed
  std::string error;
  std::size_t position = 0;  // CSV line number or native record index
};

/// Incremental reader for either event format. The header is read by the
/// constructor (DataError when malformed); afterwards malformed records are
/// reported through EventReadResult::error instead of thrown, so a consumer can
/// skip them. A record that goes back in time relative to the last accepted one
/// counts as malformed.
class EventReader {
 public:
  EventReader(std::istream& in, EventFormat format);

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  /// False at end of input.
  bool next(EventReadResult& result);

 private:
  std::istream& in_;
  EventFormat format_;
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::size_t line_ = 0;
  std::size_t record_ = 0;
  EventRecord last_;
  bool have_last_ = false;
};

void write_points_text(std::ostream& out, const PointCloud& points);
PointCloud read_points_text(std::istream& in);
std::vector<std::uint8_t> encode_points(const PointCloud& points);
PointCloud decode_points(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Reads events by extension: ".csv" as CSV, anything else as native binary.
EventStream load_events(const std::filesystem::path& path);
void save_events(const std::filesystem::path& path, const EventStream& stream);

}  // namespace stream::geometry
