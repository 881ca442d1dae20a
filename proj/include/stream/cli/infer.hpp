#pragma once

// Streaming inference over an event source: one O(1) update per event and a
// posterior line at a fixed cadence.

#include <cstddef>
#include <iosfwd>

#include "stream/geometry/formats.hpp"
#include "stream/layer/event_model.hpp"

namespace stream::cli {

struct InferOptions {
  /// Emit posteriors after every `every`-th accepted event (once logits exist).
  std::size_t every = 1;
};

struct InferSummary {
  std::size_t events = 0;   // accepted
  std::size_t skipped = 0;  // malformed, reported on the log stream
  std::size_t emitted = 0;
};

/// Throws DataError when the source's sensor does not match the checkpoint.
/// Output lines read "event=I t=T posterior=P0,P1,...".
InferSummary infer_stream(const layer::EventModel& model, geometry::EventReader& reader, std::ostream& out,
                          std::ostream& log, const InferOptions& options = {});

}  // namespace stream::cli
