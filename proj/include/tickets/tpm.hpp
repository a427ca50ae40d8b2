#pragma once

// Software stand-in for the TPM commands the ticket protocol relies on:
// identity-key creation and activation, wrapped key creation and loading,
// key certification, and signing restricted by key role.
//
// Private key material never leaves a TpmInstance. Every public operation
// returns public keys, signatures, credentials or encrypted blobs only.

#include <cstdint>
#include <map>
#include <mutex>
#include <set>
#include <string>

#include "tickets/bytes.hpp"
#include "tickets/codec.hpp"
#include "tickets/crypto.hpp"
#include "tickets/random.hpp"
#include "tickets/result.hpp"

namespace tickets {

namespace testing {
class TpmInspector;
}

enum class KeyKind : std::uint8_t {
  kEndorsement,  // EK: decrypts activation blobs and issuance challenges
  kIdentity,     // AIK: certifies keys, answers issuance challenges
  kSigning,      // CSK: signs payloads
};

std::string_view kind_name(KeyKind k);

// Handles carry the issuing instance's tag so a handle presented to the
// wrong TPM is rejected rather than aliasing a local key.
struct KeyHandle {
  std::uint32_t instance = 0;
  std::uint32_t value = 0;
  friend auto operator<=>(const KeyHandle&, const KeyHandle&) = default;
};

struct IdentityKey {
  KeyHandle handle;
  Bytes public_key;
};

struct WrappedKey {
  Bytes public_key;
  Bytes private_blob;
};

Bytes encode(const WrappedKey& w);
std::optional<WrappedKey> decode_wrapped_key(ByteView in);

// What the TPM returns when it answers an issuance challenge: the decrypted
// nonce and the AIK signature over issuance_challenge_bytes().
struct ChallengeResponse {
  Bytes nonce;
  Bytes signature;
};

// Bytes an AIK signs to prove possession during issuance. The domain tag
// keeps these disjoint from credential signing bytes.
Bytes issuance_challenge_bytes(ByteView nonce, ByteView aik_public);

// Plaintext of the EK-encrypted challenge the PCA sends.
Bytes encode_challenge_plaintext(ByteView nonce, const Digest& aik_id);

// Plaintext of an activation blob: single-use id, target AIK, credential.
struct ActivationContents {
  Bytes blob_id;
  Digest aik_id{};
  Credential credential;
};
Bytes encode(const ActivationContents& a);
std::optional<ActivationContents> decode_activation_contents(ByteView in);

class TpmInstance {
 public:
  static constexpr std::size_t kDefaultCapacity = 4096;

  explicit TpmInstance(Drbg rng, Labels platform_info = default_platform_info(),
                       std::size_t capacity = kDefaultCapacity);

  TpmInstance(const TpmInstance&) = delete;
  TpmInstance& operator=(const TpmInstance&) = delete;

  static Labels default_platform_info();

  const Bytes& ek_public() const { return ek_public_; }
  KeyHandle ek_handle() const { return ek_handle_; }
  const Labels& platform_info() const { return platform_info_; }

  Result<IdentityKey> make_identity();
  // Returns the PCA credential carried in the blob.
  Result<Credential> activate_identity(KeyHandle aik, ByteView activation_blob);
  Result<ChallengeResponse> answer_issuance_challenge(
      KeyHandle aik, ByteView encrypted_challenge);

  Result<WrappedKey> cmk_create_key();
  Result<KeyHandle> load_key(const WrappedKey& wrapped);
  Result<Credential> certify_key(KeyHandle aik, KeyHandle csk);
  Result<Bytes> sign_with_key(KeyHandle key, ByteView payload);

  Status evict(KeyHandle key);

  std::optional<KeyKind> kind_of(KeyHandle key) const;
  bool is_activated(KeyHandle key) const;
  Result<Bytes> public_key(KeyHandle key) const;
  std::size_t loaded_keys() const;

 private:
  friend class testing::TpmInspector;

  struct ShieldedKey {
    KeyPair pair;
    KeyKind kind;
    bool activated = false;
  };

  Result<KeyHandle> insert_locked(KeyPair pair, KeyKind kind);
  const ShieldedKey* find_locked(KeyHandle h) const;
  ShieldedKey* find_locked(KeyHandle h);

  mutable std::mutex mu_;
  Drbg rng_;
  Labels platform_info_;
  std::size_t capacity_;
  Bytes instance_id_;
  std::uint32_t handle_tag_;
  SecretBytes storage_key_;  // AEAD key protecting wrapped private halves
  KeyHandle ek_handle_;
  Bytes ek_public_;
  std::uint32_t next_handle_ = 0x80000000u;
  std::map<KeyHandle, ShieldedKey> keys_;
  std::set<Bytes> consumed_blobs_;
};

}  // namespace tickets
