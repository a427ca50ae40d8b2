#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "tickets/persist.hpp"
#include "tickets/scenario.hpp"

namespace tickets {
namespace {

const StepOutcome& step(const Transcript& t, std::size_t i) {
  return t.steps.at(i);
}

RunResult run(std::string_view text, RunOptions opts = {}) {
  auto s = parse_scenario(text);
  EXPECT_TRUE(s.ok()) << s.error().to_string();
  auto r = run_scenario(*s, opts);
  EXPECT_TRUE(r.ok()) << r.error().to_string();
  return std::move(*r);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Parse, ErrorsNameTheLine) {
  struct Case {
    std::string text;
    std::string expect;
  };
  const std::vector<Case> cases = {
      {"group 1 price 10 impact 1\nfrobnicate\n", "line 2"},
      {"group 1 price x impact 1\n", "line 1"},
      {"group 2 price 10 impact 1\n", "line 1"},
      {"group 1 price 10 impact 0\n", "line 1"},
      {"group 1 price 10 impact 1\nagent a balance 5\nacquire a 3 t\n",
       "line 3"},
      {"group 1 price 10 impact 1\nagent a balance 5\nredeem a t x 3\n",
       "line 3"},
      {"group 1 price 10 impact 1\nacquire ghost 1 t\n", "line 2"},
      {"group 1 price 10 impact 1\nagent a balance 5\nacquire a 1 t\n"
       "acquire a 1 t\n",
       "line 4"},
      {"group 1 price 10 impact 1\nagent a balance 5\nacquire a 1 t\n"
       "tamper a t x 3 melt\n",
       "line 4"},
      {"group 1 price 10 impact 1\npolicy increasing\n", "line 2"},
      {"group 1 price 10 impact 1\nshares 1/2 1/2\n", "line 2"},
  };
  for (const auto& c : cases) {
    auto s = parse_scenario(c.text);
    ASSERT_FALSE(s.ok()) << c.text;
    EXPECT_EQ(s.code(), ErrorCode::kConfigError);
    EXPECT_NE(s.error().detail.find(c.expect), std::string::npos)
        << c.text << " -> " << s.error().detail;
  }
}

TEST(Parse, WholeScenarioChecks) {
  EXPECT_FALSE(parse_scenario("# nothing\n").ok());
  EXPECT_FALSE(parse_scenario("group 1 price 1 impact 1\nshares 1 1 1\n").ok());
  EXPECT_FALSE(parse_scenario("group 1 price 1 impact 1\nagent a balance 1\n"
                              "agent a balance 2\n")
                   .ok());
  EXPECT_FALSE(parse_scenario("group 1 price 1 impact 1\nchallenge-ttl 0\n")
                   .ok());
  EXPECT_FALSE(parse_scenario("group 1 price 1 impact 1\n"
                              "policy frequency step 1 window 0\n")
                   .ok());
}

TEST(Parse, CommentsAndDefaults) {
  auto s = parse_scenario(
      "  # header\n"
      "group 1 price 10 impact 2/3   # trailing\n"
      "agent a balance 50 limit 20\n"
      "redeem_later_is_not_a_word\n");
  EXPECT_FALSE(s.ok());
  s = parse_scenario("group 1 price 10 impact 2/3\nagent a balance 50 limit 20\n");
  ASSERT_TRUE(s.ok()) << s.error().to_string();
  EXPECT_EQ(s->config.groups.size(), 1u);
  EXPECT_EQ(s->config.groups[0].impact, Rational(2, 3));
  EXPECT_EQ(s->config.groups[0].price_class, "group-1");
  EXPECT_TRUE(s->config.charging.acquisition);
  EXPECT_FALSE(s->config.charging.ex_post);
  ASSERT_EQ(s->agents.size(), 1u);
  EXPECT_EQ(s->agents[0].credit_limit, 20);
}

TEST(Parse, DemoScenarioParses) {
  auto s = parse_scenario(demo_scenario_text());
  ASSERT_TRUE(s.ok()) << s.error().to_string();
  EXPECT_EQ(s->config.seed, 42u);
  EXPECT_EQ(s->config.groups.size(), 2u);
  EXPECT_EQ(s->agents.size(), 3u);
}

TEST(Parse, ShippedScenariosParse) {
  std::size_t n = 0;
  for (const auto& e :
       std::filesystem::directory_iterator(TICKETS_SCENARIO_DIR)) {
    if (e.path().extension() != ".scn") continue;
    auto s = parse_scenario(read_file(e.path()));
    EXPECT_TRUE(s.ok()) << e.path() << ": " << s.error().to_string();
    ++n;
  }
  EXPECT_GE(n, 3u);
}

TEST(Run, SingleRatingHappyPath) {
  auto r = run(
      "seed 5\nrs-id shop\ngroup 1 price 100 impact 1\n"
      "shares 1/2 1/4 1/4\nagent u balance 500\n"
      "acquire u 1 t\nredeem u t lamp 4 nice lamp\n");
  const Transcript& t = r.transcript;
  ASSERT_EQ(t.steps.size(), 2u);
  EXPECT_TRUE(step(t, 0).ok);
  EXPECT_TRUE(step(t, 1).ok) << step(t, 1).outcome;
  EXPECT_EQ(t.stored_ratings, 1u);
  EXPECT_EQ(t.spent_tickets, 1u);
  EXPECT_TRUE(t.ledgers_consistent);
  EXPECT_EQ(t.balances, (std::vector<std::pair<std::string, Amount>>{
                            {"u", 400}}));
  EXPECT_EQ(t.revenue, (RevenueSplit{50, 25, 25}));
  ASSERT_EQ(t.scores.size(), 1u);
  EXPECT_EQ(t.scores[0].subject, "lamp");
  EXPECT_EQ(t.scores[0].score, ExactRational(4));
  ASSERT_EQ(r.accepted.size(), 1u);
  EXPECT_TRUE(check_bundle(r.accepted[0]).valid());
}

TEST(Run, DoubleSpendScript) {
  auto r = run(
      "group 1 price 10 impact 1\nagent u balance 100\n"
      "acquire u 1 t\nredeem u t lamp 4\nredeem u t lamp 1\n"
      "redeem u t bulb 2\n");
  const Transcript& t = r.transcript;
  EXPECT_TRUE(step(t, 1).ok);
  EXPECT_FALSE(step(t, 2).ok);
  EXPECT_EQ(step(t, 2).outcome.rfind("double-spend", 0), 0u)
      << step(t, 2).outcome;
  EXPECT_EQ(step(t, 3).outcome.rfind("double-spend", 0), 0u);
  EXPECT_EQ(t.stored_ratings, 1u);
  EXPECT_EQ(t.scores.size(), 2u);
}

TEST(Run, SybilCostUnderIncreasingPrices) {
  std::string text =
      "group 1 price 100 impact 1\npolicy increasing step 10\n"
      "agent sybil balance 100000\n";
  for (int i = 0; i < 10; ++i) {
    text += "acquire sybil 1 t" + std::to_string(i) + "\n";
  }
  auto r = run(text);
  EXPECT_EQ(r.transcript.balances.at(0).second, 100000 - 1450);
  EXPECT_EQ(r.transcript.revenue.total(), 1450);
  EXPECT_TRUE(r.transcript.ledgers_consistent);
}

TEST(Run, TamperModesAreRejectedWithTheirOwnErrors) {
  std::string text =
      "group 1 price 0 impact 1\ncharging none\nagent u balance 0\n"
      "acquire u 1 t1\nacquire u 1 t2\nacquire u 1 t3\nacquire u 1 t4\n"
      "tamper u t1 x 3 flip-signature\n"
      "tamper u t2 x 3 wrong-rs\n"
      "tamper u t3 x 3 foreign-group\n"
      "tamper u t4 x 3 alter-score\n"
      "redeem u t1 x 3\n";
  auto r = run(text);
  const Transcript& t = r.transcript;
  auto starts = [&](std::size_t i, std::string_view prefix) {
    EXPECT_FALSE(step(t, i).ok);
    EXPECT_EQ(step(t, i).outcome.rfind(prefix, 0), 0u) << step(t, i).outcome;
  };
  starts(4, "invalid-chain");
  starts(5, "wrong-rs");
  starts(6, "invalid-chain");
  starts(7, "bad-payload");
  EXPECT_TRUE(step(t, 8).ok);
  EXPECT_EQ(t.stored_ratings, 1u);
  EXPECT_EQ(t.spent_tickets, 1u);
}

TEST(Run, BlacklistBlocksFurtherAcquisition) {
  auto r = run(
      "group 1 price 1 impact 1\nagent u balance 10\n"
      "acquire u 1 t1\nblacklist u on\nacquire u 1 t2\nredeem u t2 x 3\n"
      "blacklist u off\nacquire u 1 t3\n");
  const Transcript& t = r.transcript;
  EXPECT_TRUE(step(t, 0).ok);
  EXPECT_EQ(step(t, 2).outcome.rfind("blacklisted", 0), 0u);
  EXPECT_FALSE(step(t, 3).ok);
  EXPECT_TRUE(step(t, 5).ok);
}

TEST(Run, DemoMatchesHandComputedLedger) {
  auto r = run(demo_scenario_text());
  const Transcript& t = r.transcript;
  // alice: 100 + 250 at acquisition, then 110 + 260 ex post.
  EXPECT_EQ(t.balances, (std::vector<std::pair<std::string, Amount>>{
                            {"alice", 1280}, {"bob", 1800}, {"carol", 50}}));
  EXPECT_EQ(t.revenue, (RevenueSplit{510, 306, 204}));
  EXPECT_EQ(t.stored_ratings, 4u);
  EXPECT_EQ(t.pending_ex_post, 1u);
  EXPECT_TRUE(t.ledgers_consistent);
  ASSERT_EQ(t.scores.size(), 2u);
  EXPECT_EQ(t.scores[0].subject, "gadget");
  EXPECT_EQ(t.scores[0].score, ExactRational(4));
  // widget: 5 and 3 at impact 1, 2 at impact 1 -> (5 + 3 + 2) / 3
  EXPECT_EQ(t.scores[1].score, ExactRational(10, 3));
}

TEST(Run, SeedChangesTranscript) {
  auto s = *parse_scenario(demo_scenario_text());
  RunOptions a;
  a.seed = 42;
  RunOptions b;
  b.seed = 43;
  auto ra = *run_scenario(s, a);
  auto rb = *run_scenario(s, b);
  EXPECT_EQ(encode(ra.transcript), encode(run_scenario(s, a)->transcript));
  EXPECT_NE(encode(ra.transcript), encode(rb.transcript));
  EXPECT_EQ(ra.transcript.balances, rb.transcript.balances);
}

TEST(Run, RenderTextSummarises) {
  auto r = run(demo_scenario_text());
  std::string text = render_text(r.transcript);
  EXPECT_NE(text.find("ledgers consistent"), std::string::npos) << text;
  EXPECT_NE(text.find("widget"), std::string::npos);
}

TEST(ChainFile, RoundTripsAndVerifies) {
  auto r = run(demo_scenario_text());
  ASSERT_EQ(r.accepted.size(), 4u);
  std::string file = write_chain_file(r.accepted);
  auto back = parse_chain_file(file);
  ASSERT_TRUE(back.ok()) << back.error().to_string();
  ASSERT_EQ(back->size(), 4u);
  for (const auto& b : *back) EXPECT_TRUE(check_bundle(b).valid());

  ChainBundle broken = (*back)[0];
  broken.chain[broken.chain.size() - 1] ^= 1;
  EXPECT_FALSE(check_bundle(broken).valid());
  ChainBundle swapped = (*back)[0];
  swapped.payload = (*back)[1].payload;
  EXPECT_FALSE(check_bundle(swapped).valid());

  EXPECT_FALSE(parse_chain_file("not a chain file\n").ok());
  EXPECT_FALSE(parse_chain_file("tickets-chain-file v1\nzz\n").ok());
}

TEST(StateDir, PersistedLogsReproduceScores) {
  auto dir = std::filesystem::temp_directory_path() /
             ("tickets-state-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  RunOptions o;
  o.state_dir = dir;
  auto r = run(demo_scenario_text(), o);
  for (const char* f : {"pca-issuance.log", "rs-ratings.log", "cp-ledger.log",
                        "rs-spent.snapshot"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  auto records = read_log(dir / "rs-ratings.log");
  ASSERT_TRUE(records.ok());
  std::vector<RatingRecord> recs;
  for (const auto& b : *records) recs.push_back(*decode_rating_record(b));
  EXPECT_EQ(recs.size(), 4u);
  EXPECT_EQ(aggregate_records(recs, "widget")->exact, ExactRational(10, 3));
  EXPECT_EQ(read_log(dir / "rs-spent.snapshot")->size(),
            r.transcript.spent_tickets);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace tickets
