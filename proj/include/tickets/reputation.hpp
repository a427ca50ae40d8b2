#pragma once

// Reputation system: verifies rating submissions against the PCA group
// keys, enforces one rating per ticket, stores ratings and computes
// impact-weighted scores.

#include <boost/multiprecision/cpp_int.hpp>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tickets/charging.hpp"
#include "tickets/clock.hpp"
#include "tickets/crypto.hpp"
#include "tickets/persist.hpp"
#include "tickets/result.hpp"

namespace tickets {

using ExactRational = boost::multiprecision::cpp_rational;

struct RatingScale {
  std::int32_t min = 1;
  std::int32_t max = 5;
};

struct RatingPayload {
  std::string subject;
  std::int32_t score = 0;
  std::string comment;
  Bytes nonce;
  std::string rs_id;

  friend bool operator==(const RatingPayload&, const RatingPayload&) = default;
};

Bytes encode(const RatingPayload& p);
std::optional<RatingPayload> decode_payload(ByteView in);
// Meta a rating credential carries.
Labels rating_meta();

struct GroupPolicy {
  Bytes verification_key;
  Rational impact{1};
};
using GroupPolicies = std::map<GroupId, GroupPolicy>;

struct RatingRecord {
  RatingPayload payload;
  GroupId group = 0;
  Rational impact{1};
  Timestamp received = 0;
  Digest chain_digest{};
};

Bytes encode(const RatingRecord& r);
std::optional<RatingRecord> decode_rating_record(ByteView in);

struct Ack {
  std::uint64_t receipt_no = 0;
  GroupId group = 0;
  Digest chain_digest{};
};

Bytes encode(const Ack& a);
std::optional<Ack> decode_ack(ByteView in);

struct WeightedScore {
  ExactRational exact;
  std::size_t count = 0;

  double value() const { return static_cast<double>(exact); }
};

// sum(impact * score) / sum(impact) over the records for `subject`.
std::optional<WeightedScore> aggregate_records(
    const std::vector<RatingRecord>& records, std::string_view subject);

// How the RS reaches the PCA.
class PcaLink {
 public:
  virtual ~PcaLink() = default;
  virtual Result<ChargeReceipt> charge_ex_post(const Digest& aik_id) = 0;
  virtual Result<bool> ticket_revoked(const Digest& aik_id) = 0;
};

struct RsConfig {
  std::string rs_id = "rs";
  RatingScale scale;
  bool ex_post_charging = false;
  // Ask the PCA whether the ticket's platform was blacklisted after issuance.
  bool honor_blacklist = false;
};

class ReputationSystem {
 public:
  ReputationSystem(RsConfig config, SimClock& clock, PcaLink* pca = nullptr,
                   AppendLog* rating_log = nullptr);

  Status configure_groups(GroupPolicies groups);
  GroupPolicies groups() const;

  Result<Ack> submit_rating(const RatingPayload& payload,
                            const CredentialChain& chain);
  // Wire form: undecodable payload -> bad-payload, undecodable chain ->
  // invalid-chain.
  Result<Ack> submit_encoded(ByteView payload, ByteView chain);

  std::optional<WeightedScore> aggregate(std::string_view subject) const;

  // Re-attempts ex-post charges that failed earlier. Returns how many are
  // still outstanding.
  std::size_t retry_pending_charges();
  std::size_t pending_charges() const;

  std::vector<RatingRecord> records() const;
  std::size_t spent_count() const;
  bool is_spent(const Digest& aik_id) const;
  // One record per spent ticket: AIK digest and spend time.
  std::vector<Bytes> spent_snapshot() const;
  Bytes serialize_state() const;

  const RsConfig& config() const { return config_; }

 private:
  void charge_or_queue(const Digest& aik_id);

  RsConfig config_;
  SimClock& clock_;
  PcaLink* pca_;
  AppendLog* rating_log_;

  mutable std::mutex mu_;
  GroupPolicies groups_;
  std::map<Digest, Timestamp> spent_;
  std::vector<RatingRecord> records_;
  std::vector<Digest> pending_charges_;
  std::uint64_t next_receipt_ = 1;
};

}  // namespace tickets
