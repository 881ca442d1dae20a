#include "stream/cli/settings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <map>
#include <sstream>
#include <utility>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "stream/common/errors.hpp"
#include "stream/common/worker_pool.hpp"

namespace stream::cli {
namespace {

std::string section_of(const std::string& key) { return key.substr(0, key.find('.')); }

enum class Kind { text, unsigned_int, real, flag, list };

// Keys not listed here are nonnegative integers.
Kind kind_of(const std::string& key) {
  static const std::map<std::string, Kind> kinds = {
      {"verify.suite", Kind::text},       {"model.variant", Kind::text},       {"model.subsample", Kind::text},
      {"bench.worker_counts", Kind::list}, {"model.pre_norm", Kind::flag},      {"model.final_norm", Kind::flag},
      {"train.augment", Kind::flag},      {"model.typical_gap", Kind::real},   {"train.lr", Kind::real},
      {"train.weight_decay", Kind::real}, {"train.grad_clip", Kind::real},     {"train.cutmix_prob", Kind::real},
      {"task.period_us", Kind::real},     {"task.jitter", Kind::real},         {"task.alternation", Kind::real},
  };
  const auto it = kinds.find(key);
  return it == kinds.end() ? Kind::unsigned_int : it->second;
}

}  // namespace

Settings Settings::defaults() {
  Settings s;
  s.values_ = {
      {"run.seed", "0"},
      {"run.workers", std::to_string(WorkerPool::hardware_workers())},
      {"verify.suite", "all"},
      {"bench.n", "65536"},
      {"bench.channels", "16"},
      {"bench.m", "4"},
      {"bench.worker_counts", "1,2,4"},
      {"bench.repeats", "3"},
      {"model.variant", "stream-dg"},
      {"model.n", "16"},
      {"model.m", "4"},
      {"model.layers", "2"},
      {"model.subsample", "1:8:2"},
      {"model.pre_norm", "true"},
      {"model.final_norm", "true"},
      {"model.typical_gap", "0.001"},
      {"model.checkpoint_interval", "256"},
      {"train.epochs", "10"},
      {"train.lr", "0.003"},
      {"train.batch", "16"},
      {"train.weight_decay", "0"},
      {"train.grad_clip", "1"},
      {"train.warmup_steps", "0"},
      {"train.augment", "false"},
      {"train.cutmix_prob", "0"},
      {"task.train", "2000"},
      {"task.val", "500"},
      {"task.width", "4"},
      {"task.height", "4"},
      {"task.min_events", "128"},
      {"task.max_events", "256"},
      {"task.period_us", "1000"},
      {"task.jitter", "0.1"},
      {"task.alternation", "0.8"},
      {"infer.every", "1"},
  };
  return s;
}

void Settings::load_ini(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config file: " + std::string(e.what()));
  }
  for (const auto& [section, entries] : tree) {
    if (entries.empty()) throw ConfigError("config file: '" + section + "' is not inside a [section]");
    for (const auto& [name, value] : entries) set(section + "." + name, value.data());
  }
}

void Settings::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown setting '" + key + "'");
  const std::string previous = std::exchange(it->second, value);
  try {
    switch (kind_of(key)) {
      case Kind::unsigned_int: unsigned_value(key); break;
      case Kind::real: real_value(key); break;
      case Kind::flag: flag_value(key); break;
      case Kind::list: unsigned_list(key); break;
      case Kind::text: break;
    }
  } catch (const ConfigError&) {
    it->second = previous;
    throw;
  }
}

const std::string& Settings::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown setting '" + key + "'");
  return it->second;
}

std::uint64_t Settings::unsigned_value(const std::string& key) const {
  const std::string& v = text(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + " must be a nonnegative integer, got '" + v + "'");
  }
  return out;
}

double Settings::real_value(const std::string& key) const {
  const std::string& v = text(key);
  std::istringstream in(v);
  double out = 0.0;
  std::string rest;
  if (!(in >> out) || (in >> rest) || !std::isfinite(out)) {
    throw ConfigError(key + " must be a finite number, got '" + v + "'");
  }
  return out;
}

bool Settings::flag_value(const std::string& key) const {
  const std::string& v = text(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + " must be true or false, got '" + v + "'");
}

std::vector<std::uint64_t> Settings::unsigned_list(const std::string& key) const {
  std::vector<std::uint64_t> out;
  std::istringstream in(text(key));
  for (std::string item; std::getline(in, item, ',');) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      throw ConfigError(key + " must be a comma-separated list of integers, got '" + text(key) + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(key + " must not be empty");
  return out;
}

void Settings::write(std::ostream& out, const std::vector<std::string>& sections) const {
  for (const auto& [key, value] : values_) {
    if (std::find(sections.begin(), sections.end(), section_of(key)) != sections.end()) {
      out << key << '=' << value << '\n';
    }
  }
}

void Settings::write_ini(std::ostream& out, const std::vector<std::string>& sections) const {
  std::string current;
  for (const auto& [key, value] : values_) {
    const auto section = section_of(key);
    if (std::find(sections.begin(), sections.end(), section) == sections.end()) continue;
    if (section != current) {
      out << (current.empty() ? "" : "\n") << '[' << section << "]\n";
      current = section;
    }
    out << key.substr(section.size() + 1) << '=' << value << '\n';
  }
}

}  // namespace stream::cli
