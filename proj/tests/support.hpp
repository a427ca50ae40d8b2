#pragma once

// Shared test fixtures: an in-memory deployment without the wire layer, a
// TPM inspector for shielding checks, and small seeded generators.

#include <gtest/gtest.h>

#include <algorithm>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "inspector.hpp"
#include "tickets/agent.hpp"
#include "tickets/charging.hpp"
#include "tickets/clock.hpp"
#include "tickets/pca.hpp"
#include "tickets/persist.hpp"
#include "tickets/reputation.hpp"
#include "tickets/tpm.hpp"

namespace tickets::testing {

class LocalPcaLink final : public PcaLink {
 public:
  explicit LocalPcaLink(PrivacyCa& pca) : pca_(pca) {}
  Result<ChargeReceipt> charge_ex_post(const Digest& aik_id) override {
    return pca_.charge_for_ticket(aik_id);
  }
  Result<bool> ticket_revoked(const Digest& aik_id) override {
    return pca_.ticket_revoked(aik_id);
  }

 private:
  PrivacyCa& pca_;
};

struct WorldOptions {
  std::uint64_t seed = 1;
  std::vector<Amount> prices = {100};  // one entry per group
  std::vector<Rational> impacts;       // defaults to 1 each
  PricingPolicy::Kind policy = PricingPolicy::Kind::kFlat;
  Amount step = 0;
  Amount incentive = 0;
  RevenueShares shares{Rational(2, 5), Rational(2, 5), Rational(1, 5)};
  ChargingMode charging{true, false};
  bool honor_blacklist = false;
  std::string rs_id = "rs-test";
  std::string token = "secret-token";
};

struct LocalAgent {
  std::string name;
  std::unique_ptr<TpmInstance> tpm;
  std::unique_ptr<LocalPcaClient> pca;
  std::unique_ptr<LocalRsClient> rs;
  std::unique_ptr<TrustedAgent> agent;
  Digest platform_id{};
};

// PCA, RS and CP wired directly to each other.
class World {
 public:
  explicit World(WorldOptions o = {}) : opts_(std::move(o)), rng_(seeded()) {
    std::vector<GroupSpec> specs;
    std::map<GroupId, Amount> prices;
    for (std::size_t i = 0; i < opts_.prices.size(); ++i) {
      GroupId g = static_cast<GroupId>(i + 1);
      Drbg grng = rng_.fork("group/" + std::to_string(g));
      Rational impact = i < opts_.impacts.size() ? opts_.impacts[i]
                                                 : Rational(1);
      specs.push_back(
          GroupSpec{generate_keypair(grng), "class-" + std::to_string(g),
                    impact});
      prices[g] = opts_.prices[i];
    }
    PricingPolicy policy;
    switch (opts_.policy) {
      case PricingPolicy::Kind::kFree:
        policy = PricingPolicy::free();
        break;
      case PricingPolicy::Kind::kFlat:
        policy = PricingPolicy::flat(prices);
        break;
      case PricingPolicy::Kind::kIncreasing:
        policy = PricingPolicy::increasing(prices, opts_.step);
        break;
      case PricingPolicy::Kind::kReverse:
        policy = PricingPolicy::reverse(opts_.incentive);
        break;
      case PricingPolicy::Kind::kFrequency:
        policy = PricingPolicy::frequency(prices, opts_.step, 3600);
        break;
    }
    cp = std::make_unique<ChargingProvider>(clock, policy, opts_.shares,
                                            &cp_log);
    cp_link = std::make_unique<LocalChargingLink>(*cp);
    auto table = GroupTable::create(std::move(specs));
    EXPECT_TRUE(table.ok());
    PcaConfig pc;
    pc.authority_token = opts_.token;
    pc.charging = opts_.charging;
    pca = std::make_unique<PrivacyCa>(std::move(*table), pc, clock,
                                      rng_.fork("pca"), cp_link.get(),
                                      &pca_log);
    pca_link = std::make_unique<LocalPcaLink>(*pca);
    RsConfig rc;
    rc.rs_id = opts_.rs_id;
    rc.ex_post_charging = opts_.charging.ex_post;
    rc.honor_blacklist = opts_.honor_blacklist;
    rs = std::make_unique<ReputationSystem>(rc, clock, pca_link.get(),
                                            &rs_log);
    GroupPolicies gp;
    for (const auto& [g, key] : pca->group_registry()) {
      gp[g] = GroupPolicy{key, pca->groups().find(g)->impact};
    }
    EXPECT_TRUE(rs->configure_groups(gp).ok());
  }

  LocalAgent& add_agent(const std::string& name, Amount balance = 100000,
                        Amount limit = 0) {
    auto a = std::make_unique<LocalAgent>();
    a->name = name;
    a->tpm = std::make_unique<TpmInstance>(rng_.fork("tpm/" + name));
    a->pca = std::make_unique<LocalPcaClient>(*pca);
    a->rs = std::make_unique<LocalRsClient>(*rs);
    a->agent = std::make_unique<TrustedAgent>(*a->tpm, *a->pca, *a->rs,
                                              rng_.fork("agent/" + name));
    EXPECT_TRUE(cp->open_account(name, balance, limit).ok());
    auto id = a->agent->register_platform(name);
    EXPECT_TRUE(id.ok()) << (id.ok() ? "" : id.error().to_string());
    if (id) a->platform_id = *id;
    agents.push_back(std::move(a));
    return *agents.back();
  }

  RatingPayload payload(LocalAgent& a, std::string subject, int score) {
    return a.agent->make_payload(std::move(subject), score, opts_.rs_id);
  }

  const WorldOptions& options() const { return opts_; }

  SimClock clock;
  MemoryLog pca_log;
  MemoryLog rs_log;
  MemoryLog cp_log;
  std::unique_ptr<ChargingProvider> cp;
  std::unique_ptr<LocalChargingLink> cp_link;
  std::unique_ptr<PrivacyCa> pca;
  std::unique_ptr<LocalPcaLink> pca_link;
  std::unique_ptr<ReputationSystem> rs;
  std::vector<std::unique_ptr<LocalAgent>> agents;

 private:
  Drbg seeded() const { return Drbg::from_u64(opts_.seed); }

  WorldOptions opts_;
  Drbg rng_;
};

// Hand-rolled generators over a seeded engine.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
  }
  bool coin() { return range(0, 1) == 1; }
  Bytes bytes(std::size_t lo, std::size_t hi) {
    Bytes b(static_cast<std::size_t>(range(static_cast<std::int64_t>(lo),
                                           static_cast<std::int64_t>(hi))));
    for (auto& x : b) x = static_cast<std::uint8_t>(range(0, 255));
    return b;
  }
  std::string word(std::size_t lo, std::size_t hi) {
    std::string s(static_cast<std::size_t>(range(static_cast<std::int64_t>(lo),
                                                  static_cast<std::int64_t>(hi))),
                  'a');
    for (auto& c : s) c = static_cast<char>('a' + range(0, 25));
    return s;
  }
  // Three non-negative rationals summing to exactly 1.
  RevenueShares shares() {
    std::int64_t den = range(1, 1000);
    std::int64_t a = range(0, den);
    std::int64_t b = range(0, den - a);
    return RevenueShares{Rational(a, den), Rational(b, den),
                         Rational(den - a - b, den)};
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

inline std::string describe(const Error& e) { return e.to_string(); }

}  // namespace tickets::testing
