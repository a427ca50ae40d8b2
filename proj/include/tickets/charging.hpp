#pragma once

// Charging provider: account ledger, ticket pricing policies and the
// revenue split between CP, PCA and RS. Amounts are integers in minor
// currency units. Positive amounts are charges, negative ones credits.

#include <boost/rational.hpp>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tickets/clock.hpp"
#include "tickets/codec.hpp"
#include "tickets/crypto.hpp"
#include "tickets/persist.hpp"
#include "tickets/result.hpp"

namespace tickets {

using Amount = std::int64_t;
using Rational = boost::rational<std::int64_t>;

enum class ChargePhase : std::uint8_t { kAcquisition = 1, kExPost = 2 };

std::string_view phase_name(ChargePhase p);
std::optional<ChargePhase> parse_phase(std::string_view s);

struct PricingPolicy {
  enum class Kind : std::uint8_t {
    kFree = 0,
    kFlat = 1,
    kIncreasing = 2,
    kReverse = 3,
    // base + step * (tickets charged within the last `window` seconds)
    kFrequency = 4,
  };

  Kind kind = Kind::kFree;
  // Flat price, or base price for increasing/frequency, per group.
  std::map<GroupId, Amount> group_prices;
  Amount step = 0;
  Amount incentive = 0;
  Timestamp window = 0;

  static PricingPolicy free();
  static PricingPolicy flat(std::map<GroupId, Amount> prices);
  static PricingPolicy increasing(std::map<GroupId, Amount> base, Amount step);
  static PricingPolicy reverse(Amount incentive);
  static PricingPolicy frequency(std::map<GroupId, Amount> base, Amount step,
                                 Timestamp window);

  friend bool operator==(const PricingPolicy&, const PricingPolicy&) = default;
};

std::string_view policy_kind_name(PricingPolicy::Kind k);
std::optional<PricingPolicy::Kind> parse_policy_kind(std::string_view s);

Bytes encode(const PricingPolicy& p);
std::optional<PricingPolicy> decode_policy(ByteView in);

struct PriceContext {
  std::uint64_t prior_count = 0;
  std::uint64_t recent_count = 0;
};

Result<Amount> price(const PricingPolicy& policy, GroupId g,
                     std::uint64_t prior_count);
Result<Amount> price(const PricingPolicy& policy, GroupId g,
                     const PriceContext& ctx);

struct RevenueShares {
  Rational cp{1};
  Rational pca{0};
  Rational rs{0};

  Status validate() const;
};

struct RevenueSplit {
  Amount cp = 0;
  Amount pca = 0;
  Amount rs = 0;

  Amount total() const { return cp + pca + rs; }
  friend bool operator==(const RevenueSplit&, const RevenueSplit&) = default;
};

// Largest-remainder apportionment: floors of the exact quotas, with the
// leftover minor units going to the largest fractional parts (ties in
// cp, pca, rs order). Parts always sum to `amount`.
Result<RevenueSplit> split_revenue(Amount amount, const RevenueShares& shares);

struct LedgerEntry {
  Timestamp at = 0;
  Amount amount = 0;
  ChargePhase phase = ChargePhase::kAcquisition;
  GroupId group = 0;
};

struct Account {
  std::string id;
  Amount initial_balance = 0;
  Amount balance = 0;
  // Balance may not drop below -credit_limit.
  Amount credit_limit = 0;
  std::vector<LedgerEntry> history;
};

// Balance recomputed from the initial balance and history alone.
Amount replay_balance(const Account& a);

struct ChargeContext {
  GroupId group = 0;
  ChargePhase phase = ChargePhase::kAcquisition;
};

struct ChargeReceipt {
  std::uint64_t receipt_no = 0;
  std::string account;
  Amount amount = 0;
  ChargePhase phase = ChargePhase::kAcquisition;
  GroupId group = 0;
  Amount balance_after = 0;
  RevenueSplit split;
};

Bytes encode(const ChargeReceipt& r);
std::optional<ChargeReceipt> decode_receipt(ByteView in);

class ChargingProvider {
 public:
  ChargingProvider(SimClock& clock, PricingPolicy policy, RevenueShares shares,
                   AppendLog* ledger = nullptr);

  Status open_account(std::string id, Amount initial_balance,
                      Amount credit_limit = 0);

  Result<ChargeReceipt> charge(std::string_view account, Amount amount,
                               ChargeContext ctx);
  // Prices a ticket from the policy and the account's history, then charges.
  Result<ChargeReceipt> charge_ticket(std::string_view account, GroupId g,
                                      ChargePhase phase);
  // Would charge_ticket succeed right now? Changes nothing.
  Result<Amount> authorize_ticket(std::string_view account, GroupId g,
                                  ChargePhase phase) const;

  Result<Amount> balance(std::string_view account) const;
  std::optional<Account> account(std::string_view id) const;
  std::vector<Account> accounts() const;

  PricingPolicy policy() const;
  void set_policy(PricingPolicy p);
  RevenueShares shares() const;
  // Cumulative revenue per party.
  RevenueSplit revenue() const;

  Bytes serialize_state() const;

 private:
  Result<Amount> quote_locked(const Account& a, GroupId g,
                              ChargePhase phase) const;
  Result<ChargeReceipt> charge_locked(Account& a, Amount amount,
                                      ChargeContext ctx);

  SimClock& clock_;
  AppendLog* ledger_;
  mutable std::mutex mu_;
  PricingPolicy policy_;
  RevenueShares shares_;
  std::map<std::string, Account, std::less<>> accounts_;
  RevenueSplit revenue_;
  std::uint64_t next_receipt_ = 1;
};

}  // namespace tickets
