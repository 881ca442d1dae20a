#include "stream/layer/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "stream/common/errors.hpp"

namespace stream::layer {
namespace {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Writer {
 public:
  template <class T>
  void put(T v) {
    v = to_little(v);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
  }
  void put_bytes(const std::string& s) { out.insert(out.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(v);
  }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t parse_size(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw DataError("checkpoint manifest lacks '" + key + "'");
  try {
    std::size_t used = 0;
    const auto v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw DataError("checkpoint manifest has bad value for '" + key + "': " + it->second);
  }
}

const std::string& lookup(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw DataError("checkpoint manifest lacks '" + key + "'");
  return it->second;
}

}  // namespace

std::map<std::string, std::string> checkpoint_manifest(const EventModel& model) {
  const ModelConfig& c = model.stack.config;
  return {
      {"n", std::to_string(c.n)},
      {"m", std::to_string(c.m)},
      {"layers", std::to_string(c.layers)},
      {"classes", std::to_string(c.classes)},
      {"group_size", std::to_string(c.group_size)},
      {"variant", std::string(to_string(c.variant))},
      {"pre_norm", c.pre_norm ? "1" : "0"},
      {"final_norm", c.final_norm ? "1" : "0"},
      {"typical_gap", format_double(c.typical_gap)},
      {"checkpoint_interval", std::to_string(c.checkpoint_interval)},
      {"subsample", c.schedule_string()},
      {"sensor_width", std::to_string(model.sensor_width)},
      {"sensor_height", std::to_string(model.sensor_height)},
  };
}

std::vector<std::uint8_t> encode_checkpoint(const EventModel& model) {
  Writer w;
  w.put_bytes(std::string(kCheckpointMagic, sizeof kCheckpointMagic));
  w.put(kCheckpointVersion);
  std::string manifest;
  for (const auto& [k, v] : checkpoint_manifest(model)) manifest += k + "=" + v + "\n";
  w.put(static_cast<std::uint32_t>(manifest.size()));
  w.put_bytes(manifest);

  EventModel& mutable_model = const_cast<EventModel&>(model);  // for_each_param only reads here
  std::vector<ParamRef> tensors;
  mutable_model.for_each_param([&](const ParamRef& r) { tensors.push_back(r); });
  w.put(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.put(static_cast<std::uint32_t>(t.name.size()));
    w.put_bytes(t.name);
    w.put(static_cast<std::uint64_t>(t.rows));
    w.put(static_cast<std::uint64_t>(t.cols));
    for (std::size_t i = 0; i < t.size(); ++i) w.put(t.data[i]);
  }
  return std::move(w.out);
}

EventModel decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.get_bytes(8) != std::string(kCheckpointMagic, 8)) throw DataError("not a checkpoint file (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto manifest_size = r.get<std::uint32_t>();
  std::map<std::string, std::string> kv;
  std::istringstream manifest(r.get_bytes(manifest_size));
  for (std::string line; std::getline(manifest, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("bad checkpoint manifest line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }

  ModelConfig c;
  try {
    c.n = parse_size(kv, "n");
    c.m = parse_size(kv, "m");
    c.layers = parse_size(kv, "layers");
    c.classes = parse_size(kv, "classes");
    c.group_size = parse_size(kv, "group_size");
    c.variant = parse_ablation_row(lookup(kv, "variant"));
    c.pre_norm = lookup(kv, "pre_norm") == "1";
    c.final_norm = lookup(kv, "final_norm") == "1";
    c.typical_gap = std::stod(lookup(kv, "typical_gap"));
    c.checkpoint_interval = parse_size(kv, "checkpoint_interval");
    c.subsample_schedule = ModelConfig::parse_schedule(lookup(kv, "subsample"));
    c.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint manifest: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw DataError("checkpoint manifest has a malformed number");
  }
  const auto width = parse_size(kv, "sensor_width");
  const auto height = parse_size(kv, "sensor_height");

  // Build the shapes, then fill every tensor from the file.
  CounterRng unused(0);
  EventModel model = EventModel::init(c, static_cast<std::uint32_t>(width),
                                      static_cast<std::uint32_t>(height), unused);
  std::vector<ParamRef> tensors;
  model.for_each_param([&](const ParamRef& p) { tensors.push_back(p); });
  const auto count = r.get<std::uint32_t>();
  if (count != tensors.size()) {
    throw DataError("checkpoint has " + std::to_string(count) + " tensors, model expects " +
                    std::to_string(tensors.size()));
  }
  for (const auto& t : tensors) {
    const auto name = r.get_bytes(r.get<std::uint32_t>());
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (name != t.name || rows != t.rows || cols != t.cols) {
      throw DataError("checkpoint tensor '" + name + "' does not match expected '" + t.name + "' shape");
    }
    for (std::size_t i = 0; i < t.size(); ++i) t.data[i] = r.get<double>();
  }
  if (!r.done()) throw DataError("trailing bytes after checkpoint tensors");
  return model;
}

void save_checkpoint(const EventModel& model, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

EventModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace stream::layer
