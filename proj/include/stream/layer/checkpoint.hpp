#pragma once

// Versioned binary checkpoint. Layout (all integers little-endian):
//
//   8 bytes   magic "STRMCKPT"
//   u32       format version (1)
//   u32       manifest byte count, then that many bytes of "key=value\n" text
//   u32       tensor count
//   per tensor:
//     u32 name length, name bytes, u64 rows, u64 cols, rows*cols f64 values (row-major)
//
// The manifest carries dims, variant, schedule and sensor size; tensors appear
// in for_each_param order. Save followed by load reproduces every value bit for bit.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stream/layer/event_model.hpp"

namespace stream::layer {

inline constexpr char kCheckpointMagic[8] = {'S', 'T', 'R', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const EventModel& model);
/// Throws DataError on malformed or inconsistent content.
EventModel decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const EventModel& model, const std::filesystem::path& path);
EventModel load_checkpoint(const std::filesystem::path& path);

/// Manifest entries of a model, as written into the container.
std::map<std::string, std::string> checkpoint_manifest(const EventModel& model);

}  // namespace stream::layer
