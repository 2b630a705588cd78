// wfctl: validate and flatten workflow definitions, run the simulated
// scenarios and the failure-injection suite, and serve the command
// endpoints.
//
// Exit codes: 0 success, 1 validation or run failure, 2 usage error.
// Errors go to stderr as "wfctl: error[<kind>]: <message>".

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "wfctl/builtin_workflows.hpp"
#include "wfctl/comm/transport.hpp"
#include "wfctl/def/flatten.hpp"
#include "wfctl/def/validate.hpp"
#include "wfctl/dispatch/queue.hpp"
#include "wfctl/sim/scenario.hpp"

using namespace wfctl;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct Failure : std::runtime_error {
  Failure(std::string kind, const std::string& message) : std::runtime_error(message), kind(std::move(kind)) {}
  std::string kind;
};

int report_error(const std::string& kind, const std::string& message, int code) {
  std::cerr << "wfctl: error[" << kind << "]: " << message << '\n';
  return code;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure("io", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

def::WorkflowDefinition load_definition(const std::string& path) {
  try {
    return def::parse_definition(read_file(path));
  } catch (const def::ParseError& e) {
    throw Failure("parse", path + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) + ": " +
                               e.message());
  }
}

// Writes to --out when given, else stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw Failure("io", "cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

struct RunSettings {
  std::string config;
  std::string scenario = "TMS";
  std::uint64_t seed = 1;
  std::optional<double> sigma;
  std::optional<double> threshold;
  std::string out;
  std::string format = "text";
  bool no_flags = false;
};

sim::ReportFormat format_of(const std::string& text) {
  auto f = sim::parse_format(text);
  if (!f) throw Failure("usage", "unknown format '" + text + "'");
  return *f;
}

sim::Scenario scenario_of(const RunSettings& s, const CLI::App& app) {
  sim::Scenario sc = s.config.empty() ? sim::Scenario::by_name(s.scenario, s.seed)
                                      : sim::load_scenario_config(s.config);
  if (!s.config.empty() && app.count("--seed")) sc.seed = s.seed;
  if (s.sigma) sc.digitization_sigma = *s.sigma;
  if (s.threshold) sc.threshold = *s.threshold;
  sc.check();
  return sc;
}

void add_run_options(CLI::App* cmd, RunSettings& s) {
  cmd->add_option("--config", s.config, "Scenario config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--scenario", s.scenario, "TMS or Fem")->check(CLI::IsMember({"TMS", "Fem", "tms", "fem"}));
  cmd->add_option("--seed", s.seed, "Random seed");
  cmd->add_option("--sigma", s.sigma, "Digitization noise sigma (mm)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--threshold", s.threshold, "Registration residual threshold (mm)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", s.out, "Write the report here instead of stdout");
  cmd->add_option("--format", s.format, "csv, text or jsonl")->check(CLI::IsMember({"csv", "text", "jsonl"}));
  cmd->add_flag("--no-flags", s.no_flags, "Run with the flag registry disabled");
}

int emit_runs(const RunSettings& s, const std::vector<sim::RunReport>& reports, const std::vector<int>& numbers) {
  Output out(s.out);
  const auto format = format_of(s.format);
  sim::emit_report(out.stream(), reports, format, numbers);
  if (format == sim::ReportFormat::kText) {
    for (const auto& r : reports) {
      if (r.placement_errors.empty()) continue;
      double t = 0, a = 0;
      for (const auto& e : r.placement_errors) {
        t += e.translational_mm;
        a += e.rotational_deg;
      }
      const double n = static_cast<double>(r.placement_errors.size());
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s placements: %zu, mean error %.4f mm / %.4f deg\n", r.scenario.c_str(),
                    r.placement_errors.size(), t / n, a / n);
      out.stream() << buf;
    }
  }
  return kOk;
}

// ---------------------------------------------------------------- serve

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

int serve(const RunSettings& settings, const CLI::App& app, std::uint16_t port, std::uint16_t bridge_port,
          double duration_s, bool quiet) {
  sim::Session session(scenario_of(settings, app));
  dispatch::DispatcherOptions opts;
  opts.flags_enabled = !settings.no_flags;
  dispatch::Dispatcher dispatcher(opts);
  sim::configure(dispatcher, session);
  dispatcher.compile(def::parse_definition(session.scenario.workflow_text()));

  dispatch::CommandQueue queue;
  std::mutex print_mu;
  dispatch::DispatchLoop loop(dispatcher, queue, [&](const dispatch::DispatchResult& r) {
    if (quiet) return;
    std::lock_guard<std::mutex> lock(print_mu);
    std::cout << dispatch::to_string(r.origin) << ' ' << r.command << ' ' << r.verdict();
    if (!r.detail.empty()) std::cout << " (" << r.detail << ')';
    std::cout << std::endl;
  });
  auto sink = [&](dispatch::Command c) { queue.push(std::move(c)); };
  auto routes = comm::make_route_table(dispatcher);
  comm::DatagramReceiver receiver({"127.0.0.1", port}, routes, sink);
  comm::BridgeOptions bridge_opts;
  bridge_opts.endpoint = {"127.0.0.1", bridge_port};
  comm::BridgeServer bridge(bridge_opts, [&] { return dispatch::to_json(loop.snapshot()).dump(); }, routes, sink);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  loop.start();
  receiver.start();
  bridge.start();
  std::cerr << "wfctl: serving " << session.scenario.name << " on udp 127.0.0.1:" << receiver.bound_port()
            << ", bridge tcp 127.0.0.1:" << bridge.bound_port() << std::endl;

  const auto start = std::chrono::steady_clock::now();
  while (!g_stop) {
    if (duration_s > 0 && std::chrono::steady_clock::now() - start >= std::chrono::duration<double>(duration_s)) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  receiver.stop();
  bridge.stop();
  loop.stop();
  auto stats = receiver.stats();
  std::cerr << "wfctl: processed " << loop.processed() << " commands, " << stats.dropped
            << " malformed datagrams dropped" << std::endl;
  return loop.failures() == 0 ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Workflow control for robot-assisted procedures"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "wfctl 1.0");

  // validate
  std::string validate_path;
  bool validate_warnings = false;
  auto* validate = app.add_subcommand("validate", "Check a .hfsm definition against the design rules");
  validate->add_option("definition", validate_path, "Definition file")->required()->check(CLI::ExistingFile);
  validate->add_flag("--warnings", validate_warnings, "Also list warnings");

  // flatten
  std::string flatten_path, flatten_out;
  std::vector<std::string> flatten_roots;
  std::size_t flatten_cap = 4096;
  auto* flatten = app.add_subcommand("flatten", "Expand a hierarchy into the equivalent single-branch machine");
  flatten->add_option("definition", flatten_path, "Definition file")->required()->check(CLI::ExistingFile);
  flatten->add_option("--root", flatten_roots, "Level-1 branch to include (repeatable; default all)");
  flatten->add_option("--max-states", flatten_cap, "Refuse expansions larger than this");
  flatten->add_option("--out", flatten_out, "Write here instead of stdout");

  // run / inject / suite
  RunSettings run_settings;
  auto* run = app.add_subcommand("run", "Run one scenario without faults");
  add_run_options(run, run_settings);

  RunSettings inject_settings;
  std::string fault_kind;
  int fault_index = 1;
  std::string fault_axis = "x";
  double fault_offset = 25.0;
  auto* inject = app.add_subcommand("inject", "Run one scenario with an injected fault");
  add_run_options(inject, inject_settings);
  inject->add_option("--fault", fault_kind, "missing-plan, missing-landmark or large-error")
      ->required()
      ->check(CLI::IsMember({"missing-plan", "missing-landmark", "large-error"}));
  inject->add_option("--index", fault_index, "Landmark number (1-based)");
  inject->add_option("--axis", fault_axis, "x, y or z")->check(CLI::IsMember({"x", "y", "z"}));
  inject->add_option("--offset", fault_offset, "Offset in mm");

  RunSettings suite_settings;
  auto* suite = app.add_subcommand("suite", "Run the 20-row failure-injection table");
  add_run_options(suite, suite_settings);

  // serve
  RunSettings serve_settings;
  std::uint16_t port = 0, bridge_port = 0;
  double duration = 0;
  bool quiet = false;
  auto* serve_cmd = app.add_subcommand("serve", "Host the dispatcher with UDP and console endpoints");
  add_run_options(serve_cmd, serve_settings);
  serve_cmd->add_option("--port", port, "UDP command port (0 = ephemeral)");
  serve_cmd->add_option("--bridge-port", bridge_port, "Console bridge TCP port (0 = ephemeral)");
  serve_cmd->add_option("--duration", duration, "Stop after this many seconds (0 = until signalled)");
  serve_cmd->add_flag("--quiet", quiet, "Do not print verdicts");

  // report
  std::string report_in, report_out, report_format = "text";
  auto* report = app.add_subcommand("report", "Render JSONL run reports as a table");
  report->add_option("input", report_in, "JSONL produced with --format jsonl")->required()->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "Write here instead of stdout");
  report->add_option("--format", report_format, "csv, text or jsonl")->check(CLI::IsMember({"csv", "text", "jsonl"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what(), kUsage);
    std::cerr << "run 'wfctl --help' for usage\n";
    return kUsage;
  }

  try {
    if (*validate) {
      auto d = load_definition(validate_path);
      auto rep = def::validate(d);
      for (const auto& f : rep.violations) std::cout << def::format_finding(f) << '\n';
      if (validate_warnings) {
        for (const auto& f : rep.warnings) std::cout << "warning: " << def::format_finding(f) << '\n';
      }
      if (!rep.ok()) {
        std::string ids;
        for (const auto& id : rep.rule_ids()) ids += (ids.empty() ? "" : ",") + id;
        return report_error("validation", validate_path + ": violates " + ids, kFailure);
      }
      std::cout << "OK\n";
      return kOk;
    }

    if (*flatten) {
      auto d = load_definition(flatten_path);
      auto rep = def::validate(d);
      if (!rep.ok()) return report_error("validation", flatten_path + " is not valid; run validate", kFailure);
      def::ExpandOptions opts;
      opts.roots = flatten_roots;
      opts.max_states = flatten_cap;
      auto flat = def::expand_flat(d, opts);
      Output out(flatten_out);
      out.stream() << def::serialize(flat);
      std::cerr << "wfctl: " << flat.branches.front().states.size() << " reachable states\n";
      return kOk;
    }

    if (*run) {
      auto r = sim::run_scenario(scenario_of(run_settings, *run), std::nullopt,
                                 sim::RunOptions{!run_settings.no_flags});
      emit_runs(run_settings, {r}, {1});
      auto problem = sim::check_report(std::nullopt, r);
      return problem.empty() ? kOk : report_error("run", problem, kFailure);
    }

    if (*inject) {
      sim::InjectedFault f;
      if (fault_kind == "missing-plan") {
        f = sim::InjectedFault::missing_plan();
      } else if (fault_kind == "missing-landmark") {
        f = sim::InjectedFault::missing_landmark(fault_index);
      } else {
        f = sim::InjectedFault::large_error(fault_index, fault_axis.at(0), fault_offset);
      }
      auto r = sim::run_scenario(scenario_of(inject_settings, *inject), f, sim::RunOptions{!inject_settings.no_flags});
      emit_runs(inject_settings, {r}, {1});
      auto problem = sim::check_report(f, r);
      return problem.empty() ? kOk : report_error("run", problem, kFailure);
    }

    if (*suite) {
      if (!suite_settings.config.empty()) throw Failure("usage", "suite does not take --config");
      sim::SuiteOptions opts;
      opts.base_seed = suite_settings.seed;
      opts.sigma = suite_settings.sigma;
      opts.threshold = suite_settings.threshold;
      opts.flags_enabled = !suite_settings.no_flags;
      auto reports = sim::run_suite(opts);
      auto rows = sim::table_rows();
      std::vector<int> numbers;
      for (const auto& row : rows) numbers.push_back(row.test_number);
      emit_runs(suite_settings, reports, numbers);
      int code = kOk;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        auto problem = sim::check_report(rows[i].fault, reports[i]);
        if (!problem.empty()) code = report_error("run", "row " + std::to_string(rows[i].test_number) + ": " + problem, kFailure);
      }
      return code;
    }

    if (*serve_cmd) return serve(serve_settings, *serve_cmd, port, bridge_port, duration, quiet);

    if (*report) {
      std::ifstream in(report_in);
      std::vector<sim::RunReport> reports;
      std::vector<int> numbers;
      std::string line;
      int line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
          auto j = nlohmann::json::parse(line);
          reports.push_back(sim::report_from_json(j));
          numbers.push_back(j.value("test", static_cast<int>(reports.size())));
        } catch (const std::exception& e) {
          throw Failure("input", report_in + ":" + std::to_string(line_no) + ": " + e.what());
        }
      }
      if (reports.empty()) throw Failure("input", report_in + " holds no reports");
      Output out(report_out);
      sim::emit_report(out.stream(), reports, format_of(report_format), numbers);
      return kOk;
    }
  } catch (const Failure& e) {
    return report_error(e.kind, e.what(), e.kind == "usage" ? kUsage : kFailure);
  } catch (const def::ExpansionError& e) {
    return report_error("flatten", e.what(), kFailure);
  } catch (const std::invalid_argument& e) {
    return report_error("invalid", e.what(), kFailure);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), kFailure);
  }
  return kUsage;
}
