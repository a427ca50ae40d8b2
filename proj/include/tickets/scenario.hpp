#pragma once

// Scenario files, the scenario runner and its transcript.
//
// A scenario is a plain-text file, one directive per line, '#' starts a
// comment. The full grammar lives in docs/formats.md; in short:
//
//   seed 42
//   rs-id market
//   scale 1 5
//   token operator-token
//   group 1 price 100 impact 1 class basic      (groups numbered 1..G)
//   policy flat | free | increasing step 10 | reverse incentive 50
//          | frequency step 10 window 3600
//   shares 2/5 2/5 1/5                          (cp pca rs)
//   charging acquisition | ex_post | both | none
//   blacklist-policy honor | ignore
//   challenge-ttl 300
//   agent alice balance 1000 [limit 200]
//
// followed by actions, executed in order:
//
//   acquire alice 1 t1
//   redeem alice t1 bob 5 [comment ...]
//   tamper alice t1 bob 5 flip-signature|wrong-rs|foreign-group|alter-score
//   blacklist alice on|off
//   advance 60

#include <optional>
#include <string>
#include <vector>

#include "tickets/deployment.hpp"
#include "tickets/reputation.hpp"
#include "tickets/wire.hpp"

namespace tickets {

enum class TamperMode { kFlipSignature, kWrongRs, kForeignGroup, kAlterScore };

std::string_view tamper_name(TamperMode m);
std::optional<TamperMode> parse_tamper(std::string_view s);

struct AgentSpec {
  std::string name;
  Amount balance = 0;
  Amount credit_limit = 0;
};

struct Step {
  enum class Kind { kAcquire, kRedeem, kTamper, kBlacklist, kAdvance };

  Kind kind = Kind::kAdvance;
  int line = 0;
  std::string agent;
  GroupId group = 0;
  std::string ticket;
  std::string subject;
  std::int32_t score = 0;
  std::string comment;
  TamperMode tamper = TamperMode::kFlipSignature;
  bool flag = false;
  Timestamp seconds = 0;

  std::string describe() const;
};

struct Scenario {
  DeploymentConfig config;
  std::vector<AgentSpec> agents;
  std::vector<Step> steps;
};

// Parses and validates. Errors carry "line N: ..." details.
Result<Scenario> parse_scenario(std::string_view text);
Status validate(const Scenario& s);

// The built-in happy-path scenario used by `demo`.
std::string demo_scenario_text();

struct StepOutcome {
  std::size_t index = 0;
  std::string step;
  bool ok = false;
  std::string outcome;
};

struct SubjectScore {
  std::string subject;
  std::optional<ExactRational> score;
  std::size_t count = 0;
};

struct Transcript {
  std::uint64_t seed = 0;
  std::vector<TranscriptEntry> messages;
  std::vector<StepOutcome> steps;
  std::vector<std::pair<std::string, Amount>> balances;
  RevenueSplit revenue;
  std::size_t spent_tickets = 0;
  std::size_t stored_ratings = 0;
  std::size_t pending_ex_post = 0;
  std::vector<SubjectScore> scores;
  bool ledgers_consistent = false;
};

Bytes encode(const Transcript& t);
std::string render_text(const Transcript& t);

// A redeemed chain plus what is needed to check it offline.
struct ChainBundle {
  GroupRegistry registry;
  Bytes payload;
  Bytes chain;
};

std::string write_chain_file(const std::vector<ChainBundle>& bundles);
Result<std::vector<ChainBundle>> parse_chain_file(std::string_view text);

struct BundleCheck {
  VerifyReport report;
  bool payload_matches = false;
  bool valid() const { return report.valid() && payload_matches; }
};
BundleCheck check_bundle(const ChainBundle& b);

struct RunOptions {
  std::optional<TransportKind> transport;            // overrides config
  std::optional<std::uint64_t> seed;                 // overrides config
  std::optional<std::filesystem::path> state_dir;    // overrides config
};

struct RunResult {
  Transcript transcript;
  std::vector<ChainBundle> accepted;
};

Result<RunResult> run_scenario(const Scenario& s, const RunOptions& opts = {});

}  // namespace tickets
