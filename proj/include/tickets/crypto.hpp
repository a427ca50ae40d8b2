#pragma once

// Signature and credential primitives shared by every party.
//
// A Credential is Cert(entity, issuer): the entity bytes, the issuer's
// verification key and a signature over the canonical encoding of
// (entity, meta). Keys are Ed25519; key ids are SHA-256 of the public half.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "tickets/bytes.hpp"
#include "tickets/codec.hpp"
#include "tickets/random.hpp"
#include "tickets/result.hpp"

namespace tickets {

inline constexpr std::size_t kPublicKeySize = 32;
inline constexpr std::size_t kPrivateKeySize = 64;
inline constexpr std::size_t kSignatureSize = 64;

using GroupId = std::uint32_t;

// Byte buffer wiped on destruction. Holds private key material.
class SecretBytes {
 public:
  SecretBytes() = default;
  explicit SecretBytes(Bytes b) : data_(std::move(b)) {}
  SecretBytes(const SecretBytes&) = default;
  SecretBytes& operator=(const SecretBytes&) = default;
  SecretBytes(SecretBytes&&) noexcept = default;
  SecretBytes& operator=(SecretBytes&&) noexcept = default;
  ~SecretBytes();

  ByteView view() const { return data_; }
  std::size_t size() const { return data_.size(); }

 private:
  Bytes data_;
};

struct KeyPair {
  Bytes public_key;
  SecretBytes private_key;
  Digest key_id{};
};

Digest sha256(ByteView data);
Digest key_id_of(ByteView public_key);

// Fresh pair from the OS CSPRNG, or a reproducible one from `seed`.
KeyPair generate_keypair(std::optional<Seed> seed = std::nullopt);
KeyPair generate_keypair(Drbg& rng);

Bytes sign(const KeyPair& key, ByteView message);
bool verify_signature(ByteView public_key, ByteView message,
                      ByteView signature);

// Well-known meta keys and values.
namespace meta {
inline constexpr std::string_view kKind = "kind";
inline constexpr std::string_view kGroup = "group";
inline constexpr std::string_view kStatement = "statement";
inline constexpr std::string_view kIdentityLabel = "identity-label";
inline constexpr std::string_view kTpmClass = "tpm-class";
inline constexpr std::string_view kPriceClass = "price-class";

inline constexpr std::string_view kKindRating = "rating";
inline constexpr std::string_view kKindCertifiedKey = "certified-key";
inline constexpr std::string_view kKindGroupCredential = "group-credential";
inline constexpr std::string_view kShieldedKeyStatement =
    "held-in-tpm-shielded-location-never-revealed";
}  // namespace meta

struct Credential {
  Bytes entity;
  Bytes issuer_public;
  Bytes signature;
  Labels meta;

  friend bool operator==(const Credential&, const Credential&) = default;
};

// The exact bytes an issuer signs. Meta is inside, so relabelling a
// credential invalidates it.
Bytes credential_signing_bytes(ByteView entity, const Labels& meta);

Result<Credential> certify(const KeyPair& issuer, ByteView entity,
                           Labels meta = {});
bool verify_credential(const Credential& c);

Bytes encode(const Credential& c);
void encode_into(Writer& w, const Credential& c);
Credential decode_credential_from(Reader& r);
std::optional<Credential> decode_credential(ByteView in);
// Malformed input is simply invalid.
bool verify_encoded_credential(ByteView in);

// Cert(r, CSK), Cert(CSK, AIK), Cert(AIK, g).
struct CredentialChain {
  Credential rating;
  Credential csk;
  Credential aik;

  friend bool operator==(const CredentialChain&,
                         const CredentialChain&) = default;
};

Bytes encode(const CredentialChain& chain);
std::optional<CredentialChain> decode_chain(ByteView in);
Digest chain_digest(const CredentialChain& chain);

// Group id -> group verification key.
using GroupRegistry = std::map<GroupId, Bytes>;

enum class ChainFault {
  kNone,
  kUnknownGroup,
  kGroupLabelMismatch,
  kAikSignature,
  kLinkMismatch,
  kCskSignature,
  kBadStatement,
  kRatingSignature,
};

std::string_view fault_name(ChainFault f);

struct VerifyReport {
  bool rating_signature_ok = false;
  bool csk_signature_ok = false;
  bool aik_signature_ok = false;
  bool rating_link_ok = false;  // rating issuer == CSK certified by csk
  bool csk_link_ok = false;     // csk issuer == AIK certified by aik
  bool statement_ok = false;    // kinds and shielded-key statement present
  bool group_known = false;
  bool group_label_ok = false;
  std::optional<GroupId> group;
  ChainFault reason = ChainFault::kUnknownGroup;

  bool valid() const { return reason == ChainFault::kNone; }
};

VerifyReport verify_chain(const CredentialChain& chain,
                          const GroupRegistry& registry);

// Public-key encryption to the holder of an Ed25519 key (through its X25519
// form). The ephemeral key comes from `rng`, so seeded runs are reproducible.
std::optional<Bytes> seal_to(ByteView recipient_public, ByteView plaintext,
                             Drbg& rng);
std::optional<Bytes> open_sealed(const KeyPair& recipient, ByteView sealed);

}  // namespace tickets
