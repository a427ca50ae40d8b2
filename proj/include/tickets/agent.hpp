#pragma once

// Trusted agent: the user's client. Acquires rating tickets (AIK + group
// credential) from the PCA and redeems them at the RS, using only its local
// TPM and the protocol messages.

#include <functional>
#include <string>
#include <vector>

#include "tickets/crypto.hpp"
#include "tickets/pca.hpp"
#include "tickets/random.hpp"
#include "tickets/reputation.hpp"
#include "tickets/result.hpp"
#include "tickets/tpm.hpp"

namespace tickets {

class PcaClient {
 public:
  virtual ~PcaClient() = default;
  virtual Result<Digest> register_platform(ByteView ek_public,
                                           std::string_view account) = 0;
  virtual Result<Challenge> request_credential(
      ByteView aik_public, GroupId g, const PlatformEvidence& evidence) = 0;
  virtual Result<Bytes> complete_handshake(const ChallengeResponse& r) = 0;
};

class RsClient {
 public:
  virtual ~RsClient() = default;
  virtual Result<Ack> submit(const RatingPayload& payload,
                             const CredentialChain& chain) = 0;
};

// Direct in-memory bindings, mostly for unit tests.
class LocalPcaClient final : public PcaClient {
 public:
  explicit LocalPcaClient(PrivacyCa& pca) : pca_(pca) {}
  Result<Digest> register_platform(ByteView ek_public,
                                   std::string_view account) override {
    return pca_.register_platform(ek_public, std::string(account));
  }
  Result<Challenge> request_credential(
      ByteView aik_public, GroupId g,
      const PlatformEvidence& evidence) override {
    return pca_.request_credential(aik_public, g, evidence);
  }
  Result<Bytes> complete_handshake(const ChallengeResponse& r) override {
    return pca_.complete_handshake(r);
  }

 private:
  PrivacyCa& pca_;
};

class LocalRsClient final : public RsClient {
 public:
  explicit LocalRsClient(ReputationSystem& rs) : rs_(rs) {}
  Result<Ack> submit(const RatingPayload& payload,
                     const CredentialChain& chain) override {
    return rs_.submit_rating(payload, chain);
  }

 private:
  ReputationSystem& rs_;
};

enum class TicketState { kFresh, kSpent };

struct Ticket {
  std::uint64_t id = 0;
  KeyHandle aik;
  GroupId group = 0;
  Credential credential;  // Cert(AIK, g)
  TicketState state = TicketState::kFresh;
};

// Adversarial hook: runs on the finished payload and chain just before
// submission.
using ChainTamper = std::function<void(RatingPayload&, CredentialChain&)>;

class TrustedAgent {
 public:
  TrustedAgent(TpmInstance& tpm, PcaClient& pca, RsClient& rs, Drbg rng);

  Result<Digest> register_platform(std::string_view account);

  // make_identity -> request -> challenge response -> complete -> activate.
  // On failure the new AIK is evicted and the wallet is unchanged.
  Result<std::uint64_t> acquire_ticket(GroupId g);

  RatingPayload make_payload(std::string subject, std::int32_t score,
                             std::string rs_id, std::string comment = {});

  // Fresh CSK, certified by the ticket's AIK, signs the payload. No network.
  Result<CredentialChain> build_chain(std::uint64_t ticket_id,
                                      const RatingPayload& payload);

  Result<Ack> redeem_ticket(std::uint64_t ticket_id, RatingPayload payload,
                            const ChainTamper& tamper = {});

  const std::vector<Ticket>& tickets() const { return wallet_; }
  const Ticket* ticket(std::uint64_t id) const;
  TpmInstance& tpm() { return tpm_; }

 private:
  TpmInstance& tpm_;
  PcaClient& pca_;
  RsClient& rs_;
  Drbg rng_;
  std::vector<Ticket> wallet_;
  std::uint64_t next_ticket_ = 1;
};

}  // namespace tickets
