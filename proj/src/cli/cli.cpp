#include "stream/cli/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "stream/cli/bench.hpp"
#include "stream/cli/infer.hpp"
#include "stream/cli/settings.hpp"
#include "stream/common/errors.hpp"
#include "stream/geometry/formats.hpp"
#include "stream/layer/checkpoint.hpp"
#include "stream/train/trainer.hpp"
#include "stream/verify/suites.hpp"

namespace stream::cli {
namespace {

namespace fs = std::filesystem;

// Flags are captured as text and applied over the config file, so "given on the
// command line" is simply a nonzero count.
struct Flag {
  std::string value;
  CLI::Option* option = nullptr;
  std::string key;  // settings key, empty for flags that are not settings
};

struct Invocation {
  std::string config_path;
  std::string out_path;
  std::string format;
  std::vector<Flag*> flags;

  Flag seed{"", nullptr, "run.seed"};
  Flag workers{"", nullptr, "run.workers"};
  Flag suite{"", nullptr, "verify.suite"};
  std::string fault;
  Flag bench_n{"", nullptr, "bench.n"};
  Flag bench_channels{"", nullptr, "bench.channels"};
  Flag bench_m{"", nullptr, "bench.m"};
  Flag bench_workers{"", nullptr, "bench.worker_counts"};
  Flag bench_repeats{"", nullptr, "bench.repeats"};
  Flag model_n{"", nullptr, "model.n"};
  Flag model_m{"", nullptr, "model.m"};
  Flag variant{"", nullptr, "model.variant"};
  Flag epochs{"", nullptr, "train.epochs"};
  Flag lr{"", nullptr, "train.lr"};
  Flag every{"", nullptr, "infer.every"};
  std::string checkpoint;
  std::string input;
  std::string output;
};

void add_flag(CLI::App& app, Invocation& inv, Flag& flag, const std::string& name, const std::string& help) {
  flag.option = app.add_option(name, flag.value, help);
  inv.flags.push_back(&flag);
}

Settings resolve(const Invocation& inv) {
  Settings s = Settings::defaults();
  if (!inv.config_path.empty()) s.load_ini(inv.config_path);
  for (const Flag* f : inv.flags) {
    if (f->option && f->option->count() > 0) s.set(f->key, f->value);
  }
  return s;
}

void log_config(std::ostream& err, const std::string& command, const Settings& s,
                const std::vector<std::string>& sections) {
  err << "# command=" << command << '\n';
  std::ostringstream body;
  s.write(body, sections);
  std::istringstream lines(body.str());
  for (std::string line; std::getline(lines, line);) err << "# " << line << '\n';
}

std::size_t positive(const Settings& s, const std::string& key) {
  const auto v = s.unsigned_value(key);
  if (v == 0) throw ConfigError(key + " must be positive");
  return static_cast<std::size_t>(v);
}

// Writes to --out when given, otherwise to stdout.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (path.empty()) return;
    file_.open(path);
    if (!file_) throw DataError("cannot write '" + path + "'");
    out_ = &file_;
  }
  std::ostream& stream() { return *out_; }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

int cmd_verify(const Invocation& inv, const Settings& s, WorkerPool& pool, std::ostream& out) {
  verify::SuiteContext ctx{s.unsigned_value("run.seed"), &pool, false};
  if (inv.fault == "flip-combine") {
    ctx.flip_combine_sign = true;
  } else if (!inv.fault.empty()) {
    throw ConfigError("unknown fault '" + inv.fault + "' (known: flip-combine)");
  }
  const std::string suite = s.text("verify.suite");
  const auto checks = verify::run_suite(suite, ctx);
  std::ostringstream report;
  verify::write_report(report, suite, ctx, checks);
  out << report.str();
  if (!inv.out_path.empty()) {
    Sink sink(inv.out_path, out);
    sink.stream() << report.str();
  }
  return verify::all_passed(checks) ? kOk : kVerificationFailed;
}

int cmd_bench(const Invocation& inv, const Settings& s, std::ostream& out) {
  BenchConfig config;
  config.length = positive(s, "bench.n");
  config.channels = positive(s, "bench.channels");
  config.m = positive(s, "bench.m");
  config.repeats = positive(s, "bench.repeats");
  config.seed = s.unsigned_value("run.seed");
  config.worker_counts.clear();
  for (auto w : s.unsigned_list("bench.worker_counts")) config.worker_counts.push_back(static_cast<std::size_t>(w));
  config.validate();
  const auto result = run_bench(config);
  std::ostringstream table;
  write_bench(table, config, result);
  out << table.str();
  if (!inv.out_path.empty()) {
    Sink sink(inv.out_path, out);
    sink.stream() << table.str();
  }
  return kOk;
}

layer::ModelConfig model_config(const Settings& s) {
  layer::ModelConfig c;
  c.variant = layer::parse_ablation_row(s.text("model.variant"));
  c.n = positive(s, "model.n");
  c.m = positive(s, "model.m");
  c.layers = positive(s, "model.layers");
  c.subsample_schedule = layer::ModelConfig::parse_schedule(s.text("model.subsample"));
  c.pre_norm = s.flag_value("model.pre_norm");
  c.final_norm = s.flag_value("model.final_norm");
  c.typical_gap = s.real_value("model.typical_gap");
  c.checkpoint_interval = positive(s, "model.checkpoint_interval");
  c.classes = 2;
  c.validate();
  return c;
}

int cmd_train(const Invocation& inv, const Settings& s, WorkerPool& pool, std::ostream& out, std::ostream& err) {
  const std::uint64_t seed = s.unsigned_value("run.seed");
  const auto mc = model_config(s);

  train::TrainConfig tc;
  tc.seed = seed;
  tc.epochs = s.unsigned_value("train.epochs");
  tc.lr = s.real_value("train.lr");
  tc.batch = positive(s, "train.batch");
  tc.weight_decay = s.real_value("train.weight_decay");
  tc.grad_clip = s.real_value("train.grad_clip");
  tc.warmup_steps = s.unsigned_value("train.warmup_steps");
  tc.augment = s.flag_value("train.augment");
  tc.cutmix_prob = s.real_value("train.cutmix_prob");
  tc.validate();

  train::GapTaskConfig task;
  task.train = s.unsigned_value("task.train");
  task.val = s.unsigned_value("task.val");
  task.width = static_cast<std::uint32_t>(positive(s, "task.width"));
  task.height = static_cast<std::uint32_t>(positive(s, "task.height"));
  task.min_events = s.unsigned_value("task.min_events");
  task.max_events = s.unsigned_value("task.max_events");
  task.period_us = s.real_value("task.period_us");
  task.jitter = s.real_value("task.jitter");
  task.alternation = s.real_value("task.alternation");
  CounterRng data_rng(seed, 1);
  const auto data = train::make_gap_task(data_rng, task);

  if (!inv.out_path.empty()) fs::create_directories(inv.out_path);
  train::TrainHooks hooks;
  hooks.pool = &pool;
  // wall time stays out of stdout so equal seeds print equal text
  hooks.on_epoch = [&](const train::EpochMetrics& m) {
    char line[128];
    std::snprintf(line, sizeof line, "epoch=%zu split=%s loss=%.17g accuracy=%.17g\n", m.epoch, m.split.c_str(),
                  m.loss, m.accuracy);
    out << line << std::flush;
  };
  train::TrainResult result;
  try {
    result = train::train_toy(mc, tc, data, hooks);
  } catch (const train::DivergenceError& e) {
    err << "error: training diverged: " << e.what() << '\n';
    return kDataError;
  }
  if (result.skipped_steps) err << "# skipped_steps=" << result.skipped_steps << '\n';

  if (!inv.out_path.empty()) {
    const fs::path dir = inv.out_path;
    std::ofstream metrics(dir / "metrics.txt");
    train::write_metrics(metrics, result.history);
    layer::save_checkpoint(result.model, dir / "model.ckpt");
    std::ofstream ini(dir / "config.ini");
    s.write_ini(ini, {"run", "model", "train", "task"});
    if (!metrics || !ini) throw DataError("cannot write results under '" + inv.out_path + "'");
  }
  return kOk;
}

geometry::EventFormat event_format(const std::string& flag, const std::string& path) {
  if (flag == "csv") return geometry::EventFormat::csv;
  if (flag == "native" || flag == "bin") return geometry::EventFormat::native;
  if (!flag.empty()) throw ConfigError("unknown event format '" + flag + "' (known: csv, native)");
  if (path.empty() || path == "-") return geometry::EventFormat::csv;
  return fs::path(path).extension() == ".csv" ? geometry::EventFormat::csv : geometry::EventFormat::native;
}

int cmd_infer(const Invocation& inv, const Settings& s, std::istream& in, std::ostream& out, std::ostream& err) {
  if (inv.checkpoint.empty()) throw ConfigError("infer needs --checkpoint");
  const auto model = layer::load_checkpoint(inv.checkpoint);
  const auto format = event_format(inv.format, inv.input);
  std::ifstream file;
  std::istream* source = &in;
  if (!inv.input.empty() && inv.input != "-") {
    file.open(inv.input, std::ios::binary);
    if (!file) throw DataError("cannot open '" + inv.input + "'");
    source = &file;
  }
  // an empty source has no header to read and simply produces no output
  if (source->peek() == std::char_traits<char>::eof()) return kOk;
  geometry::EventReader reader(*source, format);
  Sink sink(inv.out_path, out);
  InferOptions options;
  options.every = positive(s, "infer.every");
  const auto summary = infer_stream(model, reader, sink.stream(), err, options);
  err << "# events=" << summary.events << " skipped=" << summary.skipped << " emitted=" << summary.emitted << '\n';
  return kOk;
}

int cmd_convert(const Invocation& inv, std::ostream& out) {
  if (inv.input.empty() || inv.output.empty()) throw ConfigError("convert needs an input and an output path");
  const fs::path src = inv.input, dst = inv.output;
  const std::string kind = inv.format.empty() ? "events" : inv.format;
  if (kind == "events") {
    geometry::save_events(dst, geometry::load_events(src));
  } else if (kind == "points") {
    auto is_text = [](const fs::path& p) { return p.extension() == ".txt" || p.extension() == ".xyz"; };
    geometry::PointCloud points;
    if (is_text(src)) {
      std::ifstream f(src);
      if (!f) throw DataError("cannot open '" + src.string() + "'");
      points = geometry::read_points_text(f);
    } else {
      points = geometry::decode_points(geometry::read_file(src));
    }
    if (is_text(dst)) {
      std::ofstream f(dst);
      geometry::write_points_text(f, points);
      if (!f) throw DataError("cannot write '" + dst.string() + "'");
    } else {
      geometry::write_file(dst, geometry::encode_points(points));
    }
  } else {
    throw ConfigError("unknown convert format '" + kind + "' (known: events, points)");
  }
  out << "wrote " << dst.string() << '\n';
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"STREAM state-space models on irregular coordinates", "stream"};
  app.require_subcommand(1);
  app.fallthrough();
  Invocation inv;
  add_flag(app, inv, inv.seed, "--seed", "Random seed");
  add_flag(app, inv, inv.workers, "--workers", "Worker pool size (default: logical cores)");
  app.add_option("--config", inv.config_path, "INI file; flags override its values");
  app.add_option("--out", inv.out_path, "Report file, or output directory for train");
  app.add_option("--format", inv.format, "infer: csv|native; convert: events|points");

  auto* verify = app.add_subcommand("verify", "Run property suites");
  add_flag(*verify, inv, inv.suite, "--suite", "ssm, scan, grad, geometry, layer, train or all");
  verify->add_option("--inject-fault", inv.fault, "Test only: flip-combine")->group("");

  auto* bench = app.add_subcommand("bench", "Sequential vs parallel scan throughput");
  add_flag(*bench, inv, inv.bench_n, "--n", "Sequence length");
  add_flag(*bench, inv, inv.bench_channels, "--channels", "Channels");
  add_flag(*bench, inv, inv.bench_m, "--m", "State size per channel");
  add_flag(*bench, inv, inv.bench_workers, "--worker-counts", "Comma-separated worker counts");
  add_flag(*bench, inv, inv.bench_repeats, "--repeats", "Timing repeats per measurement");

  auto* train_cmd = app.add_subcommand("train", "Train the toy classifier on the gap task");
  add_flag(*train_cmd, inv, inv.model_n, "--n", "Model width");
  add_flag(*train_cmd, inv, inv.model_m, "--m", "State size");
  add_flag(*train_cmd, inv, inv.variant, "--variant", "mamba, stream-00, stream-0g, stream-d0, stream-dg");
  add_flag(*train_cmd, inv, inv.epochs, "--epochs", "Epochs");
  add_flag(*train_cmd, inv, inv.lr, "--lr", "Learning rate");

  auto* infer = app.add_subcommand("infer", "Streaming posteriors from a checkpoint");
  infer->add_option("--checkpoint", inv.checkpoint, "Checkpoint written by train")->required();
  infer->add_option("input", inv.input, "Event file, or - for stdin (default)");
  add_flag(*infer, inv, inv.every, "--every", "Emit posteriors every N events");

  auto* convert = app.add_subcommand("convert", "Convert between event or point formats");
  convert->add_option("input", inv.input, "Input file")->required();
  convert->add_option("output", inv.output, "Output file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsageError;
  }

  try {
    const Settings settings = resolve(inv);
    const std::size_t workers = positive(settings, "run.workers");
    WorkerPool pool(workers);
    if (verify->parsed()) {
      log_config(err, "verify", settings, {"run", "verify"});
      return cmd_verify(inv, settings, pool, out);
    }
    if (bench->parsed()) {
      log_config(err, "bench", settings, {"run", "bench"});
      return cmd_bench(inv, settings, out);
    }
    if (train_cmd->parsed()) {
      log_config(err, "train", settings, {"run", "model", "train", "task"});
      return cmd_train(inv, settings, pool, out, err);
    }
    if (infer->parsed()) {
      log_config(err, "infer", settings, {"run", "infer"});
      return cmd_infer(inv, settings, in, out, err);
    }
    log_config(err, "convert", settings, {"run"});
    return cmd_convert(inv, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace stream::cli
