#include "stream/geometry/formats.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>

#include "stream/common/errors.hpp"

namespace stream::geometry {
namespace {

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <class T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(p[i]) << (8 * i));
  return v;
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_le(out, bits);
}

double get_f64(const std::uint8_t* p) {
  const auto bits = get_le<std::uint64_t>(p);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_unsigned(const std::string& field, const char* what, std::size_t line) {
  const std::string f = trim(field);
  T v{};
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) {
    throw DataError(std::string("bad ") + what + " '" + f + "'", line);
  }
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::uint8_t> encode_events(const EventStream& stream) {
  stream.validate();
  std::vector<std::uint8_t> out;
  out.reserve(kEventHeaderBytes + kEventRecordBytes * stream.size());
  out.insert(out.end(), kEventMagic, kEventMagic + 4);
  put_le(out, kEventVersion);
  put_le(out, stream.width);
  put_le(out, stream.height);
  for (const auto& e : stream.events) {
    put_le(out, e.t);
    put_le(out, e.x);
    put_le(out, e.y);
    out.push_back(e.polarity);
    out.insert(out.end(), 3, 0);
  }
  return out;
}

EventStream decode_events(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kEventHeaderBytes || std::memcmp(bytes.data(), kEventMagic, 4) != 0) {
    throw DataError("not a native event file (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kEventVersion) throw DataError("unsupported event file version " + std::to_string(version));
  if ((bytes.size() - kEventHeaderBytes) % kEventRecordBytes != 0) {
    throw DataError("event file size is not a whole number of 16-byte records");
  }
  EventStream s;
  s.width = get_le<std::uint32_t>(bytes.data() + 8);
  s.height = get_le<std::uint32_t>(bytes.data() + 12);
  const std::size_t count = (bytes.size() - kEventHeaderBytes) / kEventRecordBytes;
  s.events.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* p = bytes.data() + kEventHeaderBytes + i * kEventRecordBytes;
    auto& e = s.events[i];
    e.t = get_le<std::uint64_t>(p);
    e.x = get_le<std::uint16_t>(p + 8);
    e.y = get_le<std::uint16_t>(p + 10);
    e.polarity = p[12];
    if (e.x >= s.width || e.y >= s.height || e.polarity > 1) {
      throw DataError("record " + std::to_string(i) + " is outside the sensor or has a bad polarity");
    }
    if (i > 0 && e.t < s.events[i - 1].t) throw DataError("record " + std::to_string(i) + " goes back in time");
  }
  return s;
}

void write_events_csv(std::ostream& out, const EventStream& stream) {
  stream.validate();
  out << "# width=" << stream.width << " height=" << stream.height << "\n";
  out << "t,x,y,polarity\n";
  for (const auto& e : stream.events) {
    out << e.t << ',' << e.x << ',' << e.y << ',' << static_cast<unsigned>(e.polarity) << '\n';
  }
}

namespace {

bool is_comment_or_blank(const std::string& row) { return row.empty() || row[0] == '#'; }

void read_size_comment(const std::string& row, std::uint32_t& width, std::uint32_t& height, std::size_t line_no) {
  std::istringstream fields(row.substr(1));
  for (std::string kv; fields >> kv;) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const auto key = kv.substr(0, eq);
    if (key == "width") width = parse_unsigned<std::uint32_t>(kv.substr(eq + 1), "width", line_no);
    if (key == "height") height = parse_unsigned<std::uint32_t>(kv.substr(eq + 1), "height", line_no);
  }
}

// One "t,x,y,polarity" row, checked against the sensor and the previous timestamp.
EventRecord parse_csv_row(const std::string& row, std::uint32_t width, std::uint32_t height,
                          const EventRecord* previous, std::size_t line_no) {
  std::vector<std::string> fields;
  std::istringstream cells(row);
  for (std::string cell; std::getline(cells, cell, ',');) fields.push_back(cell);
  if (fields.size() != 4) throw DataError("expected 4 fields, found " + std::to_string(fields.size()), line_no);
  EventRecord e;
  e.t = parse_unsigned<std::uint64_t>(fields[0], "timestamp", line_no);
  const auto x = parse_unsigned<std::uint32_t>(fields[1], "x", line_no);
  const auto y = parse_unsigned<std::uint32_t>(fields[2], "y", line_no);
  const auto p = parse_unsigned<std::uint32_t>(fields[3], "polarity", line_no);
  if (x >= width || y >= height) {
    throw DataError("pixel (" + std::to_string(x) + ", " + std::to_string(y) + ") outside a " +
                        std::to_string(width) + "x" + std::to_string(height) + " sensor",
                    line_no);
  }
  if (p > 1) throw DataError("polarity must be 0 or 1", line_no);
  if (previous && e.t < previous->t) throw DataError("timestamp goes back in time", line_no);
  e.x = static_cast<std::uint16_t>(x);
  e.y = static_cast<std::uint16_t>(y);
  e.polarity = static_cast<std::uint8_t>(p);
  return e;
}

// Reads comment lines and the column header; returns the line number reached.
std::size_t read_csv_header(std::istream& in, std::uint32_t& width, std::uint32_t& height) {
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    const std::string row = trim(line);
    if (row.empty()) continue;
    if (row[0] == '#') {
      read_size_comment(row, width, height, line_no);
      continue;
    }
    if (row != "t,x,y,polarity") throw DataError("expected header 't,x,y,polarity'", line_no);
    if (width == 0 || height == 0) throw DataError("missing '# width=W height=H' line before the header", line_no);
    return line_no;
  }
  throw DataError("missing CSV header");
}

}  // namespace

EventStream read_events_csv(std::istream& in) {
  EventStream s;
  std::size_t line_no = read_csv_header(in, s.width, s.height);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = trim(line);
    if (is_comment_or_blank(row)) continue;
    s.events.push_back(parse_csv_row(row, s.width, s.height, s.events.empty() ? nullptr : &s.events.back(), line_no));
  }
  return s;
}

EventReader::EventReader(std::istream& in, EventFormat format) : in_(in), format_(format) {
  if (format_ == EventFormat::csv) {
    line_ = read_csv_header(in_, width_, height_);
    return;
  }
  std::uint8_t header[kEventHeaderBytes];
  if (!in_.read(reinterpret_cast<char*>(header), sizeof header) || std::memcmp(header, kEventMagic, 4) != 0) {
    throw DataError("not a native event file (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(header + 4);
  if (version != kEventVersion) throw DataError("unsupported event file version " + std::to_string(version));
  width_ = get_le<std::uint32_t>(header + 8);
  height_ = get_le<std::uint32_t>(header + 12);
}

bool EventReader::next(EventReadResult& result) {
  result = {};
  if (format_ == EventFormat::csv) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      const std::string row = trim(line);
      if (is_comment_or_blank(row)) continue;
      result.position = line_;
      try {
        result.event = parse_csv_row(row, width_, height_, have_last_ ? &last_ : nullptr, line_);
        last_ = *result.event;
        have_last_ = true;
      } catch (const DataError& e) {
        result.error = e.what();
      }
      return true;
    }
    return false;
  }
  std::uint8_t rec[kEventRecordBytes];
  in_.read(reinterpret_cast<char*>(rec), sizeof rec);
  const auto got = static_cast<std::size_t>(in_.gcount());
  if (got == 0) return false;
  result.position = record_++;
  if (got < sizeof rec) {
    result.error = "record " + std::to_string(result.position) + " is truncated";
    return true;
  }
  EventRecord e;
  e.t = get_le<std::uint64_t>(rec);
  e.x = get_le<std::uint16_t>(rec + 8);
  e.y = get_le<std::uint16_t>(rec + 10);
  e.polarity = rec[12];
  if (e.x >= width_ || e.y >= height_ || e.polarity > 1) {
    result.error = "record " + std::to_string(result.position) + " is outside the sensor or has a bad polarity";
  } else if (have_last_ && e.t < last_.t) {
    result.error = "record " + std::to_string(result.position) + " goes back in time";
  } else {
    result.event = e;
    last_ = e;
    have_last_ = true;
  }
  return true;
}

void write_points_text(std::ostream& out, const PointCloud& points) {
  for (const auto& p : points) out << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.z) << '\n';
}

PointCloud read_points_text(std::istream& in) {
  PointCloud points;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    const std::string row = trim(line);
    if (row.empty() || row[0] == '#') continue;
    std::istringstream fields(row);
    Point3 p;
    std::string extra;
    if (!(fields >> p.x >> p.y >> p.z) || (fields >> extra)) {
      throw DataError("expected three numbers 'x y z'", line_no);
    }
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw DataError("non-finite coordinate", line_no);
    }
    points.push_back(p);
  }
  return points;
}

std::vector<std::uint8_t> encode_points(const PointCloud& points) {
  std::vector<std::uint8_t> out;
  out.reserve(24 * points.size());
  for (const auto& p : points) {
    put_f64(out, p.x);
    put_f64(out, p.y);
    put_f64(out, p.z);
  }
  return out;
}

PointCloud decode_points(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % 24 != 0) throw DataError("point file size is not a multiple of 24 bytes");
  PointCloud points(bytes.size() / 24);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::uint8_t* p = bytes.data() + 24 * i;
    points[i] = {get_f64(p), get_f64(p + 8), get_f64(p + 16)};
  }
  return points;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

EventStream load_events(const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return read_events_csv(in);
  }
  return decode_events(read_file(path));
}

void save_events(const std::filesystem::path& path, const EventStream& stream) {
  if (path.extension() == ".csv") {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    write_events_csv(out, stream);
    return;
  }
  write_file(path, encode_events(stream));
}

}  // namespace stream::geometry
