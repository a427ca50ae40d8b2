// ticketsim: drive scenarios against a full deployment, check exported
// chains offline, and query stored scores.
//
// Exit status: 0 ok, 1 runtime failure, 2 usage, 3 bad configuration,
// 4 verification failed, 5 I/O error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "tickets/persist.hpp"
#include "tickets/scenario.hpp"

namespace {

using namespace tickets;

enum Exit : int {
  kOk = 0,
  kRuntime = 1,
  kUsage = 2,
  kConfig = 3,
  kVerifyFailed = 4,
  kIo = 5,
};

int exit_for(const Error& e) {
  switch (e.code) {
    case ErrorCode::kConfigError:
      return kConfig;
    case ErrorCode::kMalformedBlob:
      return kVerifyFailed;
    default:
      return kRuntime;
  }
}

int fail(const Error& e) {
  std::cerr << "error: " << error_name(e.code);
  if (!e.detail.empty()) std::cerr << ": " << e.detail;
  std::cerr << '\n';
  return exit_for(e);
}

std::optional<std::string> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool emit(const std::string& path, std::string_view data) {
  if (path.empty() || path == "-") {
    std::cout.write(data.data(), static_cast<std::streamsize>(data.size()));
    std::cout.flush();
    return static_cast<bool>(std::cout);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  return static_cast<bool>(out);
}

struct RunFlags {
  std::optional<std::uint64_t> seed;
  std::string transport;
  std::string out;
  std::string format = "text";
  std::string export_chains;
  std::string state_dir;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--seed", f.seed, "Override the scenario seed");
  cmd->add_option("--transport", f.transport, "inproc or socket")
      ->check(CLI::IsMember({"inproc", "socket"}));
  cmd->add_option("--out", f.out, "Write the transcript here (default stdout)");
  cmd->add_option("--format", f.format,
                  "text, or canonical for the binary transcript encoding")
      ->check(CLI::IsMember({"text", "canonical"}));
  cmd->add_option("--export-chains", f.export_chains,
                  "Write accepted chains to this file for `verify`");
  cmd->add_option("--state-dir", f.state_dir,
                  "Persist service logs in this directory");
}

int run_text(std::string_view text, const RunFlags& f) {
  auto scenario = parse_scenario(text);
  if (!scenario) return fail(scenario.error());
  RunOptions opts;
  opts.seed = f.seed;
  if (!f.transport.empty()) opts.transport = parse_transport(f.transport);
  if (!f.state_dir.empty()) opts.state_dir = f.state_dir;

  auto result = run_scenario(*scenario, opts);
  if (!result) return fail(result.error());

  std::string body;
  if (f.format == "canonical") {
    Bytes b = encode(result->transcript);
    body.assign(b.begin(), b.end());
  } else {
    body = render_text(result->transcript);
  }
  if (!emit(f.out, body)) {
    std::cerr << "error: cannot write " << f.out << '\n';
    return kIo;
  }
  if (!f.export_chains.empty() &&
      !emit(f.export_chains, write_chain_file(result->accepted))) {
    std::cerr << "error: cannot write " << f.export_chains << '\n';
    return kIo;
  }
  return kOk;
}

int verify_file(const std::string& path) {
  auto text = slurp(path);
  if (!text) {
    std::cerr << "error: cannot read " << path << '\n';
    return kIo;
  }
  auto bundles = parse_chain_file(*text);
  if (!bundles) return fail(bundles.error());
  if (bundles->empty()) {
    std::cerr << "error: " << path << " holds no chains\n";
    return kVerifyFailed;
  }
  bool all = true;
  for (std::size_t i = 0; i < bundles->size(); ++i) {
    BundleCheck c = check_bundle((*bundles)[i]);
    std::cout << "chain " << i + 1 << ": ";
    if (c.valid()) {
      std::cout << "valid (group " << c.report.group.value_or(0) << ")\n";
    } else if (!c.report.valid()) {
      std::cout << "invalid: " << fault_name(c.report.reason) << '\n';
    } else {
      std::cout << "invalid: payload does not match signed rating\n";
    }
    all = all && c.valid();
  }
  return all ? kOk : kVerifyFailed;
}

int score_from_state(const std::string& subject, const std::string& dir) {
  auto records = read_log(std::filesystem::path(dir) / "rs-ratings.log");
  if (!records) return fail(records.error());
  std::vector<RatingRecord> parsed;
  for (const auto& raw : *records) {
    auto r = decode_rating_record(raw);
    if (!r) {
      std::cerr << "error: corrupt rating log in " << dir << '\n';
      return kIo;
    }
    parsed.push_back(std::move(*r));
  }
  auto score = aggregate_records(parsed, subject);
  if (!score) {
    std::cout << subject << ": no ratings\n";
    return kOk;
  }
  std::cout << subject << ": " << score->exact << " (" << score->value()
            << ") from " << score->count << " ratings\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudonymous rating tickets: scenario driver and verifier"};
  app.require_subcommand(1);

  RunFlags run_flags;
  std::string scenario_path;
  auto* run = app.add_subcommand("run", "Run a scenario file");
  run->add_option("scenario-file", scenario_path)->required();
  add_run_flags(run, run_flags);

  RunFlags demo_flags;
  auto* demo = app.add_subcommand("demo", "Run the built-in demo scenario");
  add_run_flags(demo, demo_flags);
  bool print_scenario = false;
  demo->add_flag("--print-scenario", print_scenario,
                 "Print the demo scenario text instead of running it");

  std::string chain_path;
  auto* verify = app.add_subcommand("verify", "Check an exported chain file");
  verify->add_option("chain-file", chain_path)->required();

  std::string subject;
  std::string state_dir;
  auto* score = app.add_subcommand(
      "score", "Weighted score of a subject from a persisted RS log");
  score->add_option("subject", subject)->required();
  score->add_option("--state-dir", state_dir, "Directory given to run")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  if (*run) {
    auto text = slurp(scenario_path);
    if (!text) {
      std::cerr << "error: cannot read " << scenario_path << '\n';
      return kIo;
    }
    return run_text(*text, run_flags);
  }
  if (*demo) {
    if (print_scenario) {
      std::cout << demo_scenario_text();
      return kOk;
    }
    return run_text(demo_scenario_text(), demo_flags);
  }
  if (*verify) return verify_file(chain_path);
  if (*score) return score_from_state(subject, state_dir);
  return kUsage;
}
