#pragma once

// Resolved run configuration: built-in defaults, then an INI file, then flags.
// Keys are "section.name"; every value is kept as text until a command reads it.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace stream::cli {

class Settings {
 public:
  /// Every known key with its default.
  static Settings defaults();

  /// Overlays an INI file. Throws ConfigError for unreadable files, unknown keys
  /// or sections.
  void load_ini(const std::filesystem::path& path);
  /// Throws ConfigError for unknown keys.
  void set(const std::string& key, const std::string& value);

  const std::string& text(const std::string& key) const;
  std::uint64_t unsigned_value(const std::string& key) const;
  double real_value(const std::string& key) const;
  bool flag_value(const std::string& key) const;
  /// Comma-separated unsigned integers.
  std::vector<std::uint64_t> unsigned_list(const std::string& key) const;

  /// "key=value" lines for the named sections, in key order.
  void write(std::ostream& out, const std::vector<std::string>& sections) const;
  /// The same sections as an INI file that load_ini reads back.
  void write_ini(std::ostream& out, const std::vector<std::string>& sections) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace stream::cli
