// SPDX-License-Identifier: Apache-2.0
#include "qkdsim/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "qkdsim/config.hpp"
#include "qkdsim/errors.hpp"
#include "qkdsim/keyrate.hpp"
#include "qkdsim/pipeline.hpp"

namespace qkdsim {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Raised for bad command-line input detected after parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

enum class Format { csv, json };

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  sink->set_pattern("[qkdsim] [%l] %v");
  auto logger = std::make_shared<spdlog::logger>("qkdsim", std::move(sink));
  logger->set_level(spdlog::level::err);
  if (const char* env = std::getenv("QKDSIM_LOG")) {
    const std::string_view level(env);
    if (level == "error") {
      logger->set_level(spdlog::level::err);
    } else if (level == "info") {
      logger->set_level(spdlog::level::info);
    } else if (level == "debug") {
      logger->set_level(spdlog::level::debug);
    } else {
      logger->error("ignoring QKDSIM_LOG='{}'; expected error, info or debug", level);
    }
  }
  return logger;
}

// Writes to --out when given, else to the command's output stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw UsageError(fmt::format("cannot open '{}' for writing", path));
      stream_ = &file_;
    }
  }
  std::ostream& stream() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

std::string format_number(std::optional<double> v) {
  return v ? fmt::format("{:.9g}", *v) : std::string("nan");
}

json load_json(const std::string& path) {
  if (path.empty()) throw UsageError("--config is required");
  std::ifstream in(path);
  if (!in) throw ConfigError("config", fmt::format("cannot open '{}'", path));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", fmt::format("'{}' is not valid JSON: {}", path, e.what()));
  }
}

struct SessionFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> rounds;
  std::string out_path;
  std::string format = "json";
  unsigned threads = std::max(1U, std::thread::hardware_concurrency());

  void add_to(CLI::App& cmd, std::string default_format) {
    format = std::move(default_format);
    cmd.add_option("--config", config_path, "Session configuration (JSON)")->required();
    cmd.add_option("--seed", seed, "Override the master seed");
    cmd.add_option("--rounds", rounds, "Override the round count");
    cmd.add_option("--out", out_path, "Output file (default: stdout)");
    cmd.add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    cmd.add_option("--threads", threads, "Worker threads for the session")
        ->check(CLI::PositiveNumber);
  }

  json document() const {
    json doc = load_json(config_path);
    if (!doc.is_object()) throw ConfigError("config", "expected a JSON object");
    if (seed) doc["seed"] = *seed;
    if (rounds) doc["rounds"] = *rounds;
    return doc;
  }
};

// simulate ---------------------------------------------------------------

struct SimulateArgs {
  SessionFlags session;
  std::string transcript_path;
  std::string reconciliation_path;
  bool omit_elapsed = false;
};

void write_report_csv(std::ostream& os, const RunReport& r, bool include_elapsed) {
  const ordered_json j = to_json(r, include_elapsed);
  os << "field,value\n";
  for (const auto& [key, value] : j.items()) {
    if (key == "config_echo" || key == "warnings") continue;
    if (value.is_string()) {
      fmt::print(os, "{},{}\n", key, value.get<std::string>());
    } else {
      fmt::print(os, "{},{}\n", key, value.dump());
    }
  }
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err,
                 spdlog::logger& log) {
  const RunConfig config = parse_config_json(args.session.document());
  log.info("simulating {} rounds, seed {}, {} thread(s)", config.session.rounds,
           config.session.master_seed, args.session.threads);
  const SimulationOutcome outcome = simulate(config, args.session.threads);
  const RunReport& report = outcome.report;

  if (!args.transcript_path.empty()) {
    std::ofstream t(args.transcript_path, std::ios::binary | std::ios::trunc);
    if (!t) throw UsageError(fmt::format("cannot open '{}' for writing", args.transcript_path));
    write_transcript(t, outcome.transcript);
  }
  if (!args.reconciliation_path.empty()) {
    std::ofstream t(args.reconciliation_path, std::ios::binary | std::ios::trunc);
    if (!t) {
      throw UsageError(fmt::format("cannot open '{}' for writing", args.reconciliation_path));
    }
    write_reconciliation_transcript(t, outcome.reconciliation_log);
  }

  Sink sink(args.session.out_path, out);
  if (args.session.format == "csv") {
    write_report_csv(sink.stream(), report, !args.omit_elapsed);
  } else {
    sink.stream() << to_json(report, !args.omit_elapsed).dump(2) << '\n';
  }
  for (const auto& w : report.warnings) log.warn("{}", w);
  log.info("|S1| = {}, |S2| = {}, g = {}, e = {}", report.s1_size, report.s2_size,
           format_number(report.g), format_number(report.e));

  if (report.status == RunStatus::aborted) {
    fmt::print(err, "qkdsim: protocol aborted: {}\n", report.abort_reason);
    return kExitAbort;
  }
  return kExitSuccess;
}

// surface ----------------------------------------------------------------

struct SurfaceArgs {
  double g_min = kLocalBound;
  double g_max = kTsirelson;
  double e_min = 0.0;
  double e_max = 0.5;
  std::size_t steps = 100;
  std::string out_path;
  std::string format = "csv";
};

int cmd_surface(const SurfaceArgs& a, std::ostream& out) {
  if (a.steps < 1) throw UsageError("--steps must be at least 1");
  if (!(a.g_min <= a.g_max) || !(a.e_min <= a.e_max)) {
    throw UsageError("grid bounds must satisfy min <= max");
  }
  if (a.steps == 1 && (a.g_min != a.g_max || a.e_min != a.e_max)) {
    throw UsageError("--steps 1 needs equal min and max bounds");
  }
  std::vector<SurfaceRow> rows;
  try {
    const auto gs = linspace(a.g_min, a.g_max, a.steps);
    const auto es = linspace(a.e_min, a.e_max, a.steps);
    rows = surface(gs, es);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  Sink sink(a.out_path, out);
  if (a.format == "csv") {
    write_surface_csv(sink.stream(), rows);
  } else {
    ordered_json j = ordered_json::array();
    for (const auto& r : rows) j.push_back({{"g", r.g}, {"e", r.e}, {"R", r.R}});
    sink.stream() << j.dump() << '\n';
  }
  return kExitSuccess;
}

// sweep ------------------------------------------------------------------

struct SweepArgs {
  SessionFlags session;
  std::string params;
  std::string values;
};

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = text.find(sep, pos);
    std::string_view part = text.substr(pos, next == std::string_view::npos ? text.npos : next - pos);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    parts.emplace_back(part);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return parts;
}

std::vector<double> parse_values(std::string_view text) {
  std::vector<double> values;
  bool blank = true;
  for (char c : text) blank = blank && c == ' ';
  if (blank) return values;
  for (const auto& token : split(text, ',')) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) {
      throw UsageError(fmt::format("--values: '{}' is not a finite number", token));
    }
    values.push_back(v);
  }
  return values;
}

int cmd_sweep(const SweepArgs& args, std::ostream& out, spdlog::logger& log) {
  const std::vector<std::string> paths = split(args.params, ',');
  for (const auto& p : paths) {
    if (p.empty()) throw UsageError("--param: empty parameter path");
  }
  const std::vector<double> values = parse_values(args.values);
  const json base = args.session.document();

  // Every path must name a numeric field of the configuration.
  for (const auto& p : paths) {
    json probe = base;
    set_numeric_parameter(probe, p, 0.0);
  }
  const RunConfig base_config = parse_config_json(base);
  const std::uint64_t master = base_config.session.master_seed;

  struct Row {
    double value;
    RunReport report;
  };
  std::vector<Row> rows;
  for (const double v : values) {
    json doc = base;
    for (const auto& p : paths) set_numeric_parameter(doc, p, v);
    doc["seed"] = sweep_seed(master, v);
    const RunConfig config = parse_config_json(doc);
    log.info("sweep point {} = {} (seed {})", args.params, canonical_value_text(v),
             config.session.master_seed);
    rows.push_back({v, simulate(config, args.session.threads).report});
    if (rows.back().report.status == RunStatus::aborted) {
      log.info("sweep point {} aborted: {}", canonical_value_text(v),
               rows.back().report.abort_reason);
    }
  }

  Sink sink(args.session.out_path, out);
  if (args.session.format == "csv") {
    auto& os = sink.stream();
    os << "value,g,e,R\n";
    for (const auto& r : rows) {
      fmt::print(os, "{},{},{},{}\n", canonical_value_text(r.value), format_number(r.report.g),
                 format_number(r.report.e), format_number(r.report.r_paper));
    }
  } else {
    ordered_json j = ordered_json::array();
    auto opt = [](std::optional<double> x) { return x ? ordered_json(*x) : ordered_json(nullptr); };
    for (const auto& r : rows) {
      j.push_back({{"value", r.value},
                   {"g", opt(r.report.g)},
                   {"e", opt(r.report.e)},
                   {"R", opt(r.report.r_paper)},
                   {"status", r.report.status == RunStatus::ok ? "ok" : "aborted"}});
    }
    sink.stream() << j.dump(2) << '\n';
  }
  return kExitSuccess;
}

// keyrate / threshold ----------------------------------------------------

struct PointArgs {
  double g = 0.0;
  double e = 0.0;
  std::string format = "json";
};

int cmd_keyrate(const PointArgs& a, std::ostream& out) {
  double f = 0.0;
  double h = 0.0;
  try {
    f = min_entropy_bound(a.g);
    h = binary_entropy(a.e);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const double rate = std::max(0.0, f - h);
  if (a.format == "csv") {
    fmt::print(out, "g,e,f,h,R\n{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", a.g, a.e, f, h, rate);
  } else {
    const ordered_json j = {{"g", a.g}, {"e", a.e}, {"f", f}, {"h", h}, {"R", rate}};
    out << j.dump() << '\n';
  }
  return kExitSuccess;
}

int cmd_threshold(const PointArgs& a, std::ostream& out) {
  double e_star = 0.0;
  try {
    e_star = tolerable_qber(a.g);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (a.format == "csv") {
    fmt::print(out, "g,tolerable_qber\n{:.17g},{:.17g}\n", a.g, e_star);
  } else {
    const ordered_json j = {{"g", a.g}, {"tolerable_qber", e_star}};
    out << j.dump() << '\n';
  }
  return kExitSuccess;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string canonical_value_text(double value) {
  if (value == 0.0) value = 0.0;  // fold -0 into 0
  return fmt::format("{}", value);
}

std::uint64_t sweep_seed(std::uint64_t master, double value) {
  return master ^ fnv1a64(canonical_value_text(value));
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monte-Carlo simulator and key-rate toolkit for dimension-restricted MDI-QKD",
               "qkdsim"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run one protocol session end to end");
  sim.session.add_to(*simulate_cmd, "json");
  simulate_cmd->add_option("--transcript", sim.transcript_path, "Write round records (JSON lines)");
  simulate_cmd->add_option("--reconciliation-transcript", sim.reconciliation_path,
                           "Write the parity exchange log (JSON lines)");
  simulate_cmd->add_flag("--omit-elapsed", sim.omit_elapsed,
                         "Leave elapsed_seconds out of the report");

  SurfaceArgs surf;
  auto* surface_cmd = app.add_subcommand("surface", "Key-rate surface over (g, e) as CSV");
  surface_cmd->add_option("--g-min", surf.g_min, "Smallest CHSH value")->capture_default_str();
  surface_cmd->add_option("--g-max", surf.g_max, "Largest CHSH value")->capture_default_str();
  surface_cmd->add_option("--e-min", surf.e_min, "Smallest QBER")->capture_default_str();
  surface_cmd->add_option("--e-max", surf.e_max, "Largest QBER")->capture_default_str();
  surface_cmd->add_option("--steps", surf.steps, "Grid points per axis")->capture_default_str();
  surface_cmd->add_option("--out", surf.out_path, "Output file (default: stdout)");
  surface_cmd->add_option("--format", surf.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}));

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Simulate once per value of a config parameter");
  sweep.session.add_to(*sweep_cmd, "csv");
  sweep_cmd->add_option("--param", sweep.params,
                        "Numeric config path(s), comma separated, e.g. channel_a.p,channel_b.p")
      ->required();
  sweep_cmd->add_option("--values", sweep.values, "Comma-separated values")->required();

  PointArgs rate;
  auto* keyrate_cmd = app.add_subcommand("keyrate", "Evaluate f(g), h(e) and R");
  keyrate_cmd->add_option("--g", rate.g, "CHSH value")->required();
  keyrate_cmd->add_option("--e", rate.e, "QBER")->required();
  keyrate_cmd->add_option("--format", rate.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}));

  PointArgs thr;
  auto* threshold_cmd = app.add_subcommand("threshold", "Largest QBER with a positive key rate");
  threshold_cmd->add_option("--g", thr.g, "CHSH value")->required();
  threshold_cmd->add_option("--format", thr.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitSuccess : kExitUsage;
  }

  auto log = make_logger(err);
  try {
    if (simulate_cmd->parsed()) return cmd_simulate(sim, out, err, *log);
    if (surface_cmd->parsed()) return cmd_surface(surf, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep, out, *log);
    if (keyrate_cmd->parsed()) return cmd_keyrate(rate, out);
    if (threshold_cmd->parsed()) return cmd_threshold(thr, out);
  } catch (const ConfigError& e) {
    fmt::print(err, "qkdsim: configuration error in '{}': {}\n", e.field(), e.what());
    return kExitUsage;
  } catch (const UsageError& e) {
    fmt::print(err, "qkdsim: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(err, "qkdsim: error: {}\n", e.what());
    return kExitAbort;
  }
  return kExitUsage;
}

}  // namespace qkdsim
