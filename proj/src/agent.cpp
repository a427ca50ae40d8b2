#include "tickets/agent.hpp"

namespace tickets {

namespace {

constexpr std::size_t kPayloadNonceSize = 16;

}  // namespace

TrustedAgent::TrustedAgent(TpmInstance& tpm, PcaClient& pca, RsClient& rs,
                           Drbg rng)
    : tpm_(tpm), pca_(pca), rs_(rs), rng_(std::move(rng)) {}

Result<Digest> TrustedAgent::register_platform(std::string_view account) {
  return pca_.register_platform(tpm_.ek_public(), account);
}

Result<std::uint64_t> TrustedAgent::acquire_ticket(GroupId g) {
  auto aik = tpm_.make_identity();
  if (!aik) return aik.error();

  auto fail = [&](Error e) -> Result<std::uint64_t> {
    (void)tpm_.evict(aik->handle);
    return e;
  };

  PlatformEvidence evidence{tpm_.ek_public(), {}};
  auto challenge = pca_.request_credential(aik->public_key, g, evidence);
  if (!challenge) return fail(challenge.error());

  auto response =
      tpm_.answer_issuance_challenge(aik->handle, challenge->encrypted_nonce);
  if (!response) return fail(response.error());

  auto blob = pca_.complete_handshake(*response);
  if (!blob) return fail(blob.error());

  auto credential = tpm_.activate_identity(aik->handle, *blob);
  if (!credential) return fail(credential.error());

  Ticket t;
  t.id = next_ticket_++;
  t.aik = aik->handle;
  t.group = g;
  t.credential = std::move(*credential);
  wallet_.push_back(std::move(t));
  return wallet_.back().id;
}

const Ticket* TrustedAgent::ticket(std::uint64_t id) const {
  for (const auto& t : wallet_) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

RatingPayload TrustedAgent::make_payload(std::string subject,
                                         std::int32_t score, std::string rs_id,
                                         std::string comment) {
  RatingPayload p;
  p.subject = std::move(subject);
  p.score = score;
  p.comment = std::move(comment);
  p.nonce = rng_.bytes(kPayloadNonceSize);
  p.rs_id = std::move(rs_id);
  return p;
}

Result<CredentialChain> TrustedAgent::build_chain(std::uint64_t ticket_id,
                                                  const RatingPayload& payload) {
  const Ticket* t = ticket(ticket_id);
  if (t == nullptr) {
    return make_error(ErrorCode::kInvalidArgument, "no such ticket");
  }
  auto wrapped = tpm_.cmk_create_key();
  if (!wrapped) return wrapped.error();
  auto csk = tpm_.load_key(*wrapped);
  if (!csk) return csk.error();

  auto result = [&]() -> Result<CredentialChain> {
    auto csk_cred = tpm_.certify_key(t->aik, *csk);
    if (!csk_cred) return csk_cred.error();

    CredentialChain chain;
    chain.rating.entity = encode(payload);
    chain.rating.meta = rating_meta();
    auto sig = tpm_.sign_with_key(
        *csk, credential_signing_bytes(chain.rating.entity, chain.rating.meta));
    if (!sig) return sig.error();
    chain.rating.signature = std::move(*sig);
    chain.rating.issuer_public = wrapped->public_key;
    chain.csk = std::move(*csk_cred);
    chain.aik = t->credential;
    return chain;
  }();
  (void)tpm_.evict(*csk);
  return result;
}

Result<Ack> TrustedAgent::redeem_ticket(std::uint64_t ticket_id,
                                        RatingPayload payload,
                                        const ChainTamper& tamper) {
  auto chain = build_chain(ticket_id, payload);
  if (!chain) return chain.error();
  if (tamper) tamper(payload, *chain);
  auto ack = rs_.submit(payload, *chain);
  if (ack) {
    for (auto& t : wallet_) {
      if (t.id == ticket_id) t.state = TicketState::kSpent;
    }
  }
  return ack;
}

}  // namespace tickets
