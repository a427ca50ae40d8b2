#include "tickets/tpm.hpp"

#include <sodium.h>

#include <algorithm>

namespace tickets {

namespace {

constexpr std::string_view kChallengeTag = "tickets/issuance-challenge/v1";
constexpr std::string_view kChallengePlainTag = "CHL1";
constexpr std::string_view kActivationTag = "ACT1";
constexpr std::string_view kWrappedTag = "WRP1";
constexpr std::size_t kInstanceIdSize = 16;
constexpr std::size_t kAeadNonceSize =
    crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;

Bytes wrap_associated_data(ByteView instance_id, ByteView public_key) {
  Writer w;
  w.raw(as_view(kWrappedTag)).bytes(instance_id).bytes(public_key);
  return std::move(w).take();
}

bool same(ByteView a, ByteView b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

}  // namespace

std::string_view kind_name(KeyKind k) {
  switch (k) {
    case KeyKind::kEndorsement:
      return "EK";
    case KeyKind::kIdentity:
      return "AIK";
    case KeyKind::kSigning:
      return "CSK";
  }
  return "?";
}

Bytes encode(const WrappedKey& w) {
  Writer out;
  out.bytes(w.public_key).bytes(w.private_blob);
  return std::move(out).take();
}

std::optional<WrappedKey> decode_wrapped_key(ByteView in) {
  return decode_with(in, [](Reader& r) {
    WrappedKey w;
    w.public_key = r.bytes();
    w.private_blob = r.bytes();
    return w;
  });
}

Bytes issuance_challenge_bytes(ByteView nonce, ByteView aik_public) {
  Writer w;
  w.str(kChallengeTag).bytes(nonce).bytes(aik_public);
  return std::move(w).take();
}

Bytes encode_challenge_plaintext(ByteView nonce, const Digest& aik_id) {
  Writer w;
  w.raw(as_view(kChallengePlainTag)).bytes(nonce).digest(aik_id);
  return std::move(w).take();
}

Bytes encode(const ActivationContents& a) {
  Writer w;
  w.raw(as_view(kActivationTag)).bytes(a.blob_id).digest(a.aik_id);
  encode_into(w, a.credential);
  return std::move(w).take();
}

std::optional<ActivationContents> decode_activation_contents(ByteView in) {
  return decode_with(in, [](Reader& r) {
    r.expect_raw(as_view(kActivationTag));
    ActivationContents a;
    a.blob_id = r.bytes();
    a.aik_id = r.digest();
    a.credential = decode_credential_from(r);
    return a;
  });
}

Labels TpmInstance::default_platform_info() {
  return Labels{{"tpm-class", "software-emulated"}, {"tpm-version", "1.2"}};
}

TpmInstance::TpmInstance(Drbg rng, Labels platform_info, std::size_t capacity)
    : rng_(std::move(rng)),
      platform_info_(std::move(platform_info)),
      capacity_(capacity) {
  instance_id_ = rng_.bytes(kInstanceIdSize);
  handle_tag_ = static_cast<std::uint32_t>(rng_.next_u64());
  storage_key_ =
      SecretBytes(rng_.bytes(crypto_aead_xchacha20poly1305_ietf_KEYBYTES));
  KeyPair ek = generate_keypair(rng_);
  ek_public_ = ek.public_key;
  std::lock_guard lock(mu_);
  auto h = insert_locked(std::move(ek), KeyKind::kEndorsement);
  ek_handle_ = h.value();
}

Result<KeyHandle> TpmInstance::insert_locked(KeyPair pair, KeyKind kind) {
  if (keys_.size() >= capacity_) {
    return make_error(ErrorCode::kResourceExhausted, "key store full");
  }
  KeyHandle h{handle_tag_, next_handle_++};
  keys_.emplace(h, ShieldedKey{std::move(pair), kind, false});
  return h;
}

const TpmInstance::ShieldedKey* TpmInstance::find_locked(KeyHandle h) const {
  if (h.instance != handle_tag_) return nullptr;
  auto it = keys_.find(h);
  return it == keys_.end() ? nullptr : &it->second;
}

TpmInstance::ShieldedKey* TpmInstance::find_locked(KeyHandle h) {
  return const_cast<ShieldedKey*>(std::as_const(*this).find_locked(h));
}

Result<IdentityKey> TpmInstance::make_identity() {
  std::lock_guard lock(mu_);
  if (keys_.size() >= capacity_) {
    return make_error(ErrorCode::kResourceExhausted, "key store full");
  }
  KeyPair aik = generate_keypair(rng_);
  Bytes pub = aik.public_key;
  auto h = insert_locked(std::move(aik), KeyKind::kIdentity);
  if (!h) return h.error();
  return IdentityKey{*h, std::move(pub)};
}

Result<ChallengeResponse> TpmInstance::answer_issuance_challenge(
    KeyHandle aik, ByteView encrypted_challenge) {
  std::lock_guard lock(mu_);
  ShieldedKey* key = find_locked(aik);
  if (key == nullptr || key->kind != KeyKind::kIdentity) {
    return make_error(ErrorCode::kInvalidHandle, "not an identity key");
  }
  if (key->activated) {
    return make_error(ErrorCode::kAlreadyActivated,
                      "identity key already activated");
  }
  const ShieldedKey* ek = find_locked(ek_handle_);
  auto plain = open_sealed(ek->pair, encrypted_challenge);
  if (!plain) {
    return make_error(ErrorCode::kWrongPlatform,
                      "challenge not encrypted to this endorsement key");
  }
  auto parsed = decode_with(*plain, [](Reader& r) {
    r.expect_raw(as_view(kChallengePlainTag));
    Bytes nonce = r.bytes();
    Digest id = r.digest();
    return std::pair{std::move(nonce), id};
  });
  if (!parsed || parsed->first.empty()) {
    return make_error(ErrorCode::kMalformedBlob, "bad challenge");
  }
  if (parsed->second != key->pair.key_id) {
    return make_error(ErrorCode::kInvalidHandle,
                      "challenge addressed to another identity key");
  }
  ChallengeResponse resp;
  resp.signature = sign(
      key->pair, issuance_challenge_bytes(parsed->first, key->pair.public_key));
  resp.nonce = std::move(parsed->first);
  return resp;
}

Result<Credential> TpmInstance::activate_identity(KeyHandle aik,
                                                  ByteView activation_blob) {
  std::lock_guard lock(mu_);
  ShieldedKey* key = find_locked(aik);
  if (key == nullptr || key->kind != KeyKind::kIdentity) {
    return make_error(ErrorCode::kInvalidHandle, "not an identity key");
  }
  const ShieldedKey* ek = find_locked(ek_handle_);
  auto plain = open_sealed(ek->pair, activation_blob);
  if (!plain) {
    return make_error(ErrorCode::kWrongPlatform,
                      "blob not encrypted to this endorsement key");
  }
  auto contents = decode_activation_contents(*plain);
  if (!contents || contents->blob_id.empty()) {
    return make_error(ErrorCode::kMalformedBlob, "bad activation blob");
  }
  if (consumed_blobs_.count(contents->blob_id) != 0 || key->activated) {
    return make_error(ErrorCode::kAlreadyActivated);
  }
  if (contents->aik_id != key->pair.key_id ||
      !same(contents->credential.entity, key->pair.public_key)) {
    return make_error(ErrorCode::kInvalidHandle,
                      "blob issued for another identity key");
  }
  consumed_blobs_.insert(contents->blob_id);
  key->activated = true;
  return std::move(contents->credential);
}

Result<WrappedKey> TpmInstance::cmk_create_key() {
  std::lock_guard lock(mu_);
  Seed seed = rng_.seed32();
  KeyPair kp = generate_keypair(seed);
  Bytes nonce = rng_.bytes(kAeadNonceSize);
  Bytes ad = wrap_associated_data(instance_id_, kp.public_key);

  Bytes sealed(seed.size() + crypto_aead_xchacha20poly1305_ietf_ABYTES);
  unsigned long long sealed_len = 0;
  crypto_aead_xchacha20poly1305_ietf_encrypt(
      sealed.data(), &sealed_len, seed.data(), seed.size(), ad.data(),
      ad.size(), nullptr, nonce.data(), storage_key_.view().data());
  sodium_memzero(seed.data(), seed.size());
  sealed.resize(sealed_len);

  Writer blob;
  blob.raw(as_view(kWrappedTag)).bytes(instance_id_).bytes(nonce).bytes(sealed);
  return WrappedKey{kp.public_key, std::move(blob).take()};
}

Result<KeyHandle> TpmInstance::load_key(const WrappedKey& wrapped) {
  std::lock_guard lock(mu_);
  struct Parsed {
    Bytes instance;
    Bytes nonce;
    Bytes sealed;
  };
  auto parsed = decode_with(wrapped.private_blob, [](Reader& r) {
    r.expect_raw(as_view(kWrappedTag));
    Parsed p;
    p.instance = r.bytes();
    p.nonce = r.bytes();
    p.sealed = r.bytes();
    return p;
  });
  if (!parsed || parsed->nonce.size() != kAeadNonceSize) {
    return make_error(ErrorCode::kMalformedBlob, "unparseable key blob");
  }
  if (parsed->instance != instance_id_) {
    return make_error(ErrorCode::kForeignBlob,
                      "key blob belongs to another TPM");
  }
  Bytes ad = wrap_associated_data(instance_id_, wrapped.public_key);
  Seed seed;
  unsigned long long seed_len = 0;
  if (parsed->sealed.size() !=
          seed.size() + crypto_aead_xchacha20poly1305_ietf_ABYTES ||
      crypto_aead_xchacha20poly1305_ietf_decrypt(
          seed.data(), &seed_len, nullptr, parsed->sealed.data(),
          parsed->sealed.size(), ad.data(), ad.size(), parsed->nonce.data(),
          storage_key_.view().data()) != 0) {
    return make_error(ErrorCode::kMalformedBlob, "key blob failed to unwrap");
  }
  KeyPair kp = generate_keypair(seed);
  sodium_memzero(seed.data(), seed.size());
  return insert_locked(std::move(kp), KeyKind::kSigning);
}

Result<Credential> TpmInstance::certify_key(KeyHandle aik, KeyHandle csk) {
  std::lock_guard lock(mu_);
  const ShieldedKey* issuer = find_locked(aik);
  if (issuer == nullptr || issuer->kind != KeyKind::kIdentity) {
    return make_error(ErrorCode::kInvalidHandle, "issuer is not an identity key");
  }
  if (!issuer->activated) {
    return make_error(ErrorCode::kNotActivated);
  }
  const ShieldedKey* subject = find_locked(csk);
  if (subject == nullptr || subject->kind != KeyKind::kSigning) {
    return make_error(ErrorCode::kInvalidHandle,
                      "subject is not a loaded signing key");
  }
  Labels m{{std::string(meta::kKind), std::string(meta::kKindCertifiedKey)},
           {std::string(meta::kStatement),
            std::string(meta::kShieldedKeyStatement)}};
  return certify(issuer->pair, subject->pair.public_key, std::move(m));
}

Result<Bytes> TpmInstance::sign_with_key(KeyHandle key, ByteView payload) {
  std::lock_guard lock(mu_);
  const ShieldedKey* k = find_locked(key);
  if (k == nullptr) return make_error(ErrorCode::kInvalidHandle);
  switch (k->kind) {
    case KeyKind::kIdentity:
      return make_error(ErrorCode::kForbiddenAikSigning,
                        "identity keys only certify TPM keys");
    case KeyKind::kEndorsement:
      return make_error(ErrorCode::kForbiddenKeyRole,
                        "endorsement key cannot sign");
    case KeyKind::kSigning:
      break;
  }
  return sign(k->pair, payload);
}

Status TpmInstance::evict(KeyHandle key) {
  std::lock_guard lock(mu_);
  if (key == ek_handle_ || find_locked(key) == nullptr) {
    return make_error(ErrorCode::kInvalidHandle);
  }
  keys_.erase(key);
  return {};
}

std::optional<KeyKind> TpmInstance::kind_of(KeyHandle key) const {
  std::lock_guard lock(mu_);
  const ShieldedKey* k = find_locked(key);
  if (k == nullptr) return std::nullopt;
  return k->kind;
}

bool TpmInstance::is_activated(KeyHandle key) const {
  std::lock_guard lock(mu_);
  const ShieldedKey* k = find_locked(key);
  return k != nullptr && k->activated;
}

Result<Bytes> TpmInstance::public_key(KeyHandle key) const {
  std::lock_guard lock(mu_);
  const ShieldedKey* k = find_locked(key);
  if (k == nullptr) return make_error(ErrorCode::kInvalidHandle);
  return k->pair.public_key;
}

std::size_t TpmInstance::loaded_keys() const {
  std::lock_guard lock(mu_);
  return keys_.size();
}

}  // namespace tickets
