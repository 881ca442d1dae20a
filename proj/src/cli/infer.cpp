#include "stream/cli/infer.hpp"

#include <cstdio>
#include <ostream>

#include "stream/common/errors.hpp"
#include "stream/train/optim.hpp"

namespace stream::cli {

InferSummary infer_stream(const layer::EventModel& model, geometry::EventReader& reader, std::ostream& out,
                          std::ostream& log, const InferOptions& options) {
  if (options.every == 0) throw ConfigError("posterior cadence must be at least 1");
  if (reader.width() != model.sensor_width || reader.height() != model.sensor_height) {
    throw DataError("checkpoint expects a " + std::to_string(model.sensor_width) + "x" +
                    std::to_string(model.sensor_height) + " sensor, input is " + std::to_string(reader.width()) +
                    "x" + std::to_string(reader.height()));
  }
  layer::StreamingClassifier classifier(model);
  InferSummary summary;
  geometry::EventReadResult item;
  char buf[64];
  while (reader.next(item)) {
    if (!item.event) {
      ++summary.skipped;
      log << "skipped " << item.error << '\n';
      continue;
    }
    const auto& e = *item.event;
    classifier.push(geometry::token_id(e, model.sensor_width, model.sensor_height), static_cast<double>(e.t) * 1e-6);
    ++summary.events;
    if (summary.events % options.every != 0) continue;
    const auto logits = classifier.logits();
    if (!logits) continue;
    const layer::Vector p = train::softmax(*logits);
    out << "event=" << summary.events - 1 << " t=" << e.t << " posterior=";
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9g", p[i]);
      out << (i ? "," : "") << buf;
    }
    out << '\n';
    ++summary.emitted;
  }
  return summary;
}

}  // namespace stream::cli
