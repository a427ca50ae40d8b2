#pragma once

// Privacy CA: registers platforms, runs the challenge/response issuance
// handshake, issues group credentials Cert(AIK, g) wrapped in EK-encrypted
// activation blobs, and keeps the only AIK -> platform mapping.

#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "tickets/charging.hpp"
#include "tickets/clock.hpp"
#include "tickets/crypto.hpp"
#include "tickets/persist.hpp"
#include "tickets/random.hpp"
#include "tickets/result.hpp"
#include "tickets/tpm.hpp"

namespace tickets {

// How the PCA reaches the charging provider.
class ChargingLink {
 public:
  virtual ~ChargingLink() = default;
  virtual Result<ChargeReceipt> charge_ticket(std::string_view account,
                                              GroupId g, ChargePhase phase) = 0;
  virtual Result<Amount> authorize_ticket(std::string_view account, GroupId g,
                                          ChargePhase phase) = 0;
};

class LocalChargingLink final : public ChargingLink {
 public:
  explicit LocalChargingLink(ChargingProvider& cp) : cp_(cp) {}
  Result<ChargeReceipt> charge_ticket(std::string_view account, GroupId g,
                                      ChargePhase phase) override {
    return cp_.charge_ticket(account, g, phase);
  }
  Result<Amount> authorize_ticket(std::string_view account, GroupId g,
                                  ChargePhase phase) override {
    return cp_.authorize_ticket(account, g, phase);
  }

 private:
  ChargingProvider& cp_;
};

struct GroupSpec {
  KeyPair key;
  std::string price_class;
  Rational impact{1};
};

// Groups 1..G, each with its own shared key pair.
class GroupTable {
 public:
  static Result<GroupTable> create(std::vector<GroupSpec> groups);

  std::size_t size() const { return groups_.size(); }
  const GroupSpec* find(GroupId g) const;
  GroupRegistry registry() const;

 private:
  std::vector<GroupSpec> groups_;
};

struct IssuanceRecord {
  Digest aik_id{};
  GroupId group = 0;
  Timestamp at = 0;
  std::string identity_label;

  friend bool operator==(const IssuanceRecord&,
                         const IssuanceRecord&) = default;
};

struct IdentityRecord {
  Digest platform_id{};
  Bytes ek_public;
  std::string account;
  std::vector<IssuanceRecord> issued;
  bool blacklisted = false;

  friend bool operator==(const IdentityRecord&,
                         const IdentityRecord&) = default;
};

Bytes encode(const IdentityRecord& r);
std::optional<IdentityRecord> decode_identity_record(ByteView in);

struct PlatformEvidence {
  Bytes ek_public;
  // Opaque supplementary data; carried, never interpreted.
  Labels supplementary;
};

struct Challenge {
  Bytes encrypted_nonce;  // readable only by the platform's EK
  Timestamp expires = 0;
};

struct ChargingMode {
  bool acquisition = false;
  bool ex_post = false;
};

struct PcaConfig {
  std::string authority_token;
  ChargingMode charging;
  Timestamp challenge_ttl = 300;
  std::string tpm_class = "software-emulated";
};

class PrivacyCa {
 public:
  PrivacyCa(GroupTable groups, PcaConfig config, SimClock& clock, Drbg rng,
            ChargingLink* cp = nullptr, AppendLog* log = nullptr);

  Result<Digest> register_platform(ByteView ek_public, std::string account);

  Result<Challenge> request_credential(ByteView aik_public, GroupId g,
                                       const PlatformEvidence& evidence);
  // Returns the EK-encrypted activation blob.
  Result<Bytes> complete_handshake(const ChallengeResponse& response);

  Result<IdentityRecord> resolve_identity(const Digest& aik_id,
                                          std::string_view token) const;
  bool check_authority(std::string_view token) const;

  Result<ChargeReceipt> initiate_charging(const Digest& platform_id, GroupId g,
                                          ChargePhase phase);
  // Ex-post charge requested by the RS, which only knows the AIK.
  Result<ChargeReceipt> charge_for_ticket(const Digest& aik_id);

  Status blacklist(const Digest& platform_id, bool flag);
  // True if the platform behind this AIK is currently blacklisted. Reveals
  // nothing else about the platform.
  Result<bool> ticket_revoked(const Digest& aik_id) const;

  // Replays an issuance log written by an earlier instance.
  Status restore(const std::vector<Bytes>& log_records);

  const GroupTable& groups() const { return groups_; }
  GroupRegistry group_registry() const { return groups_.registry(); }
  std::uint64_t challenges_issued() const;
  std::size_t pending_count() const;
  std::vector<ChargeReceipt> receipts() const;

 private:
  struct Pending {
    Bytes aik_public;
    GroupId group;
    Digest platform_id;
    Timestamp expires;
  };

  void purge_expired_locked();
  void log(ByteView record);

  GroupTable groups_;
  PcaConfig config_;
  SimClock& clock_;
  Drbg rng_;
  ChargingLink* cp_;
  AppendLog* log_;

  mutable std::mutex mu_;
  std::map<Digest, IdentityRecord> platforms_;
  std::map<Digest, Digest> aik_to_platform_;
  std::map<Bytes, Pending> pending_;
  std::set<Digest> in_flight_;  // AIKs between challenge check and issue
  std::uint64_t challenges_issued_ = 0;
  std::vector<ChargeReceipt> receipts_;
};

}  // namespace tickets
