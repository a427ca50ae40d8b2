#include "tickets/charging.hpp"

#include <array>
#include <numeric>

namespace tickets {

namespace {

constexpr std::string_view kPolicyTag = "POL1";
constexpr std::string_view kReceiptTag = "RCP1";
constexpr std::uint8_t kLedgerOpen = 1;
constexpr std::uint8_t kLedgerCharge = 2;

}  // namespace

std::string_view phase_name(ChargePhase p) {
  return p == ChargePhase::kAcquisition ? "acquisition" : "ex_post";
}

std::optional<ChargePhase> parse_phase(std::string_view s) {
  if (s == "acquisition") return ChargePhase::kAcquisition;
  if (s == "ex_post") return ChargePhase::kExPost;
  return std::nullopt;
}

PricingPolicy PricingPolicy::free() { return PricingPolicy{}; }

PricingPolicy PricingPolicy::flat(std::map<GroupId, Amount> prices) {
  PricingPolicy p;
  p.kind = Kind::kFlat;
  p.group_prices = std::move(prices);
  return p;
}

PricingPolicy PricingPolicy::increasing(std::map<GroupId, Amount> base,
                                        Amount step) {
  PricingPolicy p;
  p.kind = Kind::kIncreasing;
  p.group_prices = std::move(base);
  p.step = step;
  return p;
}

PricingPolicy PricingPolicy::reverse(Amount incentive) {
  PricingPolicy p;
  p.kind = Kind::kReverse;
  p.incentive = incentive;
  return p;
}

PricingPolicy PricingPolicy::frequency(std::map<GroupId, Amount> base,
                                       Amount step, Timestamp window) {
  PricingPolicy p;
  p.kind = Kind::kFrequency;
  p.group_prices = std::move(base);
  p.step = step;
  p.window = window;
  return p;
}

std::string_view policy_kind_name(PricingPolicy::Kind k) {
  switch (k) {
    case PricingPolicy::Kind::kFree:
      return "free";
    case PricingPolicy::Kind::kFlat:
      return "flat";
    case PricingPolicy::Kind::kIncreasing:
      return "increasing";
    case PricingPolicy::Kind::kReverse:
      return "reverse";
    case PricingPolicy::Kind::kFrequency:
      return "frequency";
  }
  return "?";
}

std::optional<PricingPolicy::Kind> parse_policy_kind(std::string_view s) {
  for (auto k : {PricingPolicy::Kind::kFree, PricingPolicy::Kind::kFlat,
                 PricingPolicy::Kind::kIncreasing,
                 PricingPolicy::Kind::kReverse,
                 PricingPolicy::Kind::kFrequency}) {
    if (policy_kind_name(k) == s) return k;
  }
  return std::nullopt;
}

Bytes encode(const PricingPolicy& p) {
  Writer w;
  w.raw(as_view(kPolicyTag)).u8(static_cast<std::uint8_t>(p.kind));
  w.u32(static_cast<std::uint32_t>(p.group_prices.size()));
  for (const auto& [g, a] : p.group_prices) w.u32(g).i64(a);
  w.i64(p.step).i64(p.incentive).i64(p.window);
  return std::move(w).take();
}

std::optional<PricingPolicy> decode_policy(ByteView in) {
  return decode_with(in, [](Reader& r) {
    r.expect_raw(as_view(kPolicyTag));
    PricingPolicy p;
    std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(PricingPolicy::Kind::kFrequency)) {
      throw DecodeError("unknown policy kind");
    }
    p.kind = static_cast<PricingPolicy::Kind>(kind);
    std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
      GroupId g = r.u32();
      if (!p.group_prices.empty() && g <= p.group_prices.rbegin()->first) {
        throw DecodeError("group prices not ordered");
      }
      p.group_prices[g] = r.i64();
    }
    p.step = r.i64();
    p.incentive = r.i64();
    p.window = r.i64();
    return p;
  });
}

Result<Amount> price(const PricingPolicy& policy, GroupId g,
                     std::uint64_t prior_count) {
  return price(policy, g, PriceContext{prior_count, 0});
}

Result<Amount> price(const PricingPolicy& policy, GroupId g,
                     const PriceContext& ctx) {
  using Kind = PricingPolicy::Kind;
  if (policy.kind == Kind::kFree) return Amount{0};
  if (policy.kind == Kind::kReverse) {
    if (policy.incentive < 0) {
      return make_error(ErrorCode::kInvalidArgument, "negative incentive");
    }
    return -policy.incentive;
  }
  auto it = policy.group_prices.find(g);
  if (it == policy.group_prices.end()) {
    return make_error(ErrorCode::kUnknownGroup,
                      "no price for group " + std::to_string(g));
  }
  if (policy.kind == Kind::kFlat) return it->second;

  std::uint64_t count = policy.kind == Kind::kIncreasing ? ctx.prior_count
                                                         : ctx.recent_count;
  if (policy.step < 0) {
    return make_error(ErrorCode::kInvalidArgument, "negative step");
  }
  Amount increment = 0;
  Amount total = 0;
  if (count > static_cast<std::uint64_t>(INT64_MAX) ||
      __builtin_mul_overflow(policy.step, static_cast<Amount>(count),
                             &increment) ||
      __builtin_add_overflow(it->second, increment, &total)) {
    return make_error(ErrorCode::kInvalidArgument, "price overflow");
  }
  return total;
}

Status RevenueShares::validate() const {
  if (cp < 0 || pca < 0 || rs < 0) {
    return make_error(ErrorCode::kInvalidShares, "negative share");
  }
  if (cp + pca + rs != Rational(1)) {
    return make_error(ErrorCode::kInvalidShares, "shares do not sum to 1");
  }
  return {};
}

Result<RevenueSplit> split_revenue(Amount amount, const RevenueShares& shares) {
  if (amount < 0) {
    return make_error(ErrorCode::kInvalidArgument, "negative amount");
  }
  if (auto st = shares.validate(); !st) return st.error();

  const std::array<Rational, 3> parts{shares.cp, shares.pca, shares.rs};
  std::array<Amount, 3> floors{};
  std::array<__int128, 3> rem{};
  Amount assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    __int128 num = static_cast<__int128>(amount) * parts[i].numerator();
    floors[i] = static_cast<Amount>(num / parts[i].denominator());
    rem[i] = num % parts[i].denominator();
    assigned += floors[i];
  }
  // Order parts by fractional remainder rem/den, largest first; stable on ties.
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rem[a] * parts[b].denominator() > rem[b] * parts[a].denominator();
  });
  for (Amount left = amount - assigned, k = 0; left > 0; --left, ++k) {
    ++floors[order[static_cast<std::size_t>(k) % 3]];
  }
  return RevenueSplit{floors[0], floors[1], floors[2]};
}

Amount replay_balance(const Account& a) {
  Amount b = a.initial_balance;
  for (const auto& e : a.history) b -= e.amount;
  return b;
}

Bytes encode(const ChargeReceipt& r) {
  Writer w;
  w.raw(as_view(kReceiptTag))
      .u64(r.receipt_no)
      .str(r.account)
      .i64(r.amount)
      .u8(static_cast<std::uint8_t>(r.phase))
      .u32(r.group)
      .i64(r.balance_after)
      .i64(r.split.cp)
      .i64(r.split.pca)
      .i64(r.split.rs);
  return std::move(w).take();
}

std::optional<ChargeReceipt> decode_receipt(ByteView in) {
  return decode_with(in, [](Reader& r) {
    r.expect_raw(as_view(kReceiptTag));
    ChargeReceipt c;
    c.receipt_no = r.u64();
    c.account = r.str();
    c.amount = r.i64();
    std::uint8_t phase = r.u8();
    if (phase != 1 && phase != 2) throw DecodeError("bad phase");
    c.phase = static_cast<ChargePhase>(phase);
    c.group = r.u32();
    c.balance_after = r.i64();
    c.split.cp = r.i64();
    c.split.pca = r.i64();
    c.split.rs = r.i64();
    return c;
  });
}

ChargingProvider::ChargingProvider(SimClock& clock, PricingPolicy policy,
                                   RevenueShares shares, AppendLog* ledger)
    : clock_(clock),
      ledger_(ledger),
      policy_(std::move(policy)),
      shares_(shares) {}

Status ChargingProvider::open_account(std::string id, Amount initial_balance,
                                      Amount credit_limit) {
  if (id.empty() || credit_limit < 0) {
    return make_error(ErrorCode::kInvalidArgument, "bad account parameters");
  }
  std::lock_guard lock(mu_);
  if (accounts_.count(id) != 0) {
    return make_error(ErrorCode::kInvalidArgument, "account exists: " + id);
  }
  if (ledger_ != nullptr) {
    Writer w;
    w.u8(kLedgerOpen).i64(clock_.now()).str(id).i64(initial_balance).i64(
        credit_limit);
    ledger_->append(w.data());
  }
  Account a{id, initial_balance, initial_balance, credit_limit, {}};
  accounts_.emplace(std::move(id), std::move(a));
  return {};
}

Result<ChargeReceipt> ChargingProvider::charge_locked(Account& a, Amount amount,
                                                      ChargeContext ctx) {
  Amount after = 0;
  if (amount == INT64_MIN || __builtin_sub_overflow(a.balance, amount, &after)) {
    return make_error(ErrorCode::kInvalidArgument, "amount overflow");
  }
  if (amount > 0 && after < -a.credit_limit) {
    return make_error(ErrorCode::kLimitExceeded,
                      "charge of " + std::to_string(amount) +
                          " exceeds credit limit");
  }
  auto split = split_revenue(amount >= 0 ? amount : -amount, shares_);
  if (!split) return split.error();
  if (amount < 0) {
    split->cp = -split->cp;
    split->pca = -split->pca;
    split->rs = -split->rs;
  }
  a.balance = after;
  a.history.push_back(LedgerEntry{clock_.now(), amount, ctx.phase, ctx.group});
  revenue_.cp += split->cp;
  revenue_.pca += split->pca;
  revenue_.rs += split->rs;

  ChargeReceipt r{next_receipt_++, a.id,  amount, ctx.phase,
                  ctx.group,       after, *split};
  if (ledger_ != nullptr) {
    Writer w;
    w.u8(kLedgerCharge).i64(clock_.now()).bytes(encode(r));
    ledger_->append(w.data());
  }
  return r;
}

Result<ChargeReceipt> ChargingProvider::charge(std::string_view account,
                                               Amount amount,
                                               ChargeContext ctx) {
  std::lock_guard lock(mu_);
  auto it = accounts_.find(account);
  if (it == accounts_.end()) {
    return make_error(ErrorCode::kUnknownAccount, std::string(account));
  }
  return charge_locked(it->second, amount, ctx);
}

Result<Amount> ChargingProvider::quote_locked(const Account& a, GroupId g,
                                              ChargePhase phase) const {
  PriceContext ctx;
  const Timestamp now = clock_.now();
  for (const auto& e : a.history) {
    if (e.phase != phase) continue;
    ++ctx.prior_count;
    if (e.at > now - policy_.window) ++ctx.recent_count;
  }
  return price(policy_, g, ctx);
}

Result<ChargeReceipt> ChargingProvider::charge_ticket(std::string_view account,
                                                      GroupId g,
                                                      ChargePhase phase) {
  std::lock_guard lock(mu_);
  auto it = accounts_.find(account);
  if (it == accounts_.end()) {
    return make_error(ErrorCode::kUnknownAccount, std::string(account));
  }
  auto amount = quote_locked(it->second, g, phase);
  if (!amount) return amount.error();
  return charge_locked(it->second, *amount, ChargeContext{g, phase});
}

Result<Amount> ChargingProvider::authorize_ticket(std::string_view account,
                                                  GroupId g,
                                                  ChargePhase phase) const {
  std::lock_guard lock(mu_);
  auto it = accounts_.find(account);
  if (it == accounts_.end()) {
    return make_error(ErrorCode::kUnknownAccount, std::string(account));
  }
  auto amount = quote_locked(it->second, g, phase);
  if (!amount) return amount.error();
  const Account& a = it->second;
  if (*amount > 0 && a.balance - *amount < -a.credit_limit) {
    return make_error(ErrorCode::kLimitExceeded, "insufficient credit");
  }
  return *amount;
}

Result<Amount> ChargingProvider::balance(std::string_view account) const {
  std::lock_guard lock(mu_);
  auto it = accounts_.find(account);
  if (it == accounts_.end()) {
    return make_error(ErrorCode::kUnknownAccount, std::string(account));
  }
  return it->second.balance;
}

std::optional<Account> ChargingProvider::account(std::string_view id) const {
  std::lock_guard lock(mu_);
  auto it = accounts_.find(id);
  if (it == accounts_.end()) return std::nullopt;
  return it->second;
}

std::vector<Account> ChargingProvider::accounts() const {
  std::lock_guard lock(mu_);
  std::vector<Account> out;
  for (const auto& [id, a] : accounts_) out.push_back(a);
  return out;
}

PricingPolicy ChargingProvider::policy() const {
  std::lock_guard lock(mu_);
  return policy_;
}

void ChargingProvider::set_policy(PricingPolicy p) {
  std::lock_guard lock(mu_);
  policy_ = std::move(p);
}

RevenueShares ChargingProvider::shares() const {
  std::lock_guard lock(mu_);
  return shares_;
}

RevenueSplit ChargingProvider::revenue() const {
  std::lock_guard lock(mu_);
  return revenue_;
}

Bytes ChargingProvider::serialize_state() const {
  std::lock_guard lock(mu_);
  Writer w;
  w.bytes(encode(policy_));
  for (const Rational& r : {shares_.cp, shares_.pca, shares_.rs}) {
    w.i64(r.numerator()).i64(r.denominator());
  }
  w.i64(revenue_.cp).i64(revenue_.pca).i64(revenue_.rs);
  w.u32(static_cast<std::uint32_t>(accounts_.size()));
  for (const auto& [id, a] : accounts_) {
    w.str(id).i64(a.initial_balance).i64(a.balance).i64(a.credit_limit);
    w.u32(static_cast<std::uint32_t>(a.history.size()));
    for (const auto& e : a.history) {
      w.i64(e.at).i64(e.amount).u8(static_cast<std::uint8_t>(e.phase)).u32(
          e.group);
    }
  }
  return std::move(w).take();
}

}  // namespace tickets
