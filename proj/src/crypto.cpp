#include "tickets/crypto.hpp"

#include <sodium.h>

#include <algorithm>
#include <stdexcept>

namespace tickets {

namespace {

constexpr std::string_view kCredentialTag = "tickets/credential/v1";
constexpr std::string_view kCredentialMagic = "CRD1";
constexpr std::string_view kChainMagic = "CHN1";

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialisation failed");
}

bool equal_bytes(ByteView a, ByteView b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

std::optional<std::string_view> find_label(const Labels& l,
                                           std::string_view key) {
  auto it = l.find(key);
  if (it == l.end()) return std::nullopt;
  return it->second;
}

}  // namespace

SecretBytes::~SecretBytes() {
  if (!data_.empty()) sodium_memzero(data_.data(), data_.size());
}

Digest sha256(ByteView data) {
  ensure_sodium();
  Digest d;
  crypto_hash_sha256(d.data(), data.data(), data.size());
  return d;
}

Digest key_id_of(ByteView public_key) { return sha256(public_key); }

KeyPair generate_keypair(std::optional<Seed> seed) {
  ensure_sodium();
  Bytes pk(crypto_sign_PUBLICKEYBYTES);
  Bytes sk(crypto_sign_SECRETKEYBYTES);
  int rc = seed ? crypto_sign_seed_keypair(pk.data(), sk.data(), seed->data())
                : crypto_sign_keypair(pk.data(), sk.data());
  if (rc != 0) throw std::runtime_error("key generation failed");
  KeyPair kp;
  kp.key_id = key_id_of(pk);
  kp.public_key = std::move(pk);
  kp.private_key = SecretBytes(std::move(sk));
  return kp;
}

KeyPair generate_keypair(Drbg& rng) {
  Seed s = rng.seed32();
  KeyPair kp = generate_keypair(s);
  sodium_memzero(s.data(), s.size());
  return kp;
}

Bytes sign(const KeyPair& key, ByteView message) {
  if (key.private_key.size() != crypto_sign_SECRETKEYBYTES) {
    throw std::invalid_argument("not a signing key");
  }
  Bytes sig(crypto_sign_BYTES);
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(),
                       key.private_key.view().data());
  return sig;
}

bool verify_signature(ByteView public_key, ByteView message,
                      ByteView signature) {
  ensure_sodium();
  if (public_key.size() != crypto_sign_PUBLICKEYBYTES ||
      signature.size() != crypto_sign_BYTES) {
    return false;
  }
  return crypto_sign_verify_detached(signature.data(), message.data(),
                                     message.size(), public_key.data()) == 0;
}

Bytes credential_signing_bytes(ByteView entity, const Labels& meta) {
  Writer w;
  w.str(kCredentialTag).bytes(entity).labels(meta);
  return std::move(w).take();
}

Result<Credential> certify(const KeyPair& issuer, ByteView entity,
                           Labels meta) {
  if (entity.empty()) {
    return make_error(ErrorCode::kInvalidArgument, "empty entity");
  }
  Credential c;
  c.entity.assign(entity.begin(), entity.end());
  c.signature = sign(issuer, credential_signing_bytes(entity, meta));
  c.issuer_public = issuer.public_key;
  c.meta = std::move(meta);
  return c;
}

bool verify_credential(const Credential& c) {
  if (c.entity.empty()) return false;
  return verify_signature(c.issuer_public,
                          credential_signing_bytes(c.entity, c.meta),
                          c.signature);
}

void encode_into(Writer& w, const Credential& c) {
  w.raw(as_view(kCredentialMagic))
      .bytes(c.entity)
      .labels(c.meta)
      .bytes(c.issuer_public)
      .bytes(c.signature);
}

Bytes encode(const Credential& c) {
  Writer w;
  encode_into(w, c);
  return std::move(w).take();
}

Credential decode_credential_from(Reader& r) {
  r.expect_raw(as_view(kCredentialMagic));
  Credential c;
  c.entity = r.bytes();
  c.meta = r.labels();
  c.issuer_public = r.bytes();
  c.signature = r.bytes();
  return c;
}

std::optional<Credential> decode_credential(ByteView in) {
  return decode_with(in, [](Reader& r) { return decode_credential_from(r); });
}

bool verify_encoded_credential(ByteView in) {
  auto c = decode_credential(in);
  return c && verify_credential(*c);
}

Bytes encode(const CredentialChain& chain) {
  Writer w;
  w.raw(as_view(kChainMagic));
  encode_into(w, chain.rating);
  encode_into(w, chain.csk);
  encode_into(w, chain.aik);
  return std::move(w).take();
}

std::optional<CredentialChain> decode_chain(ByteView in) {
  return decode_with(in, [](Reader& r) {
    r.expect_raw(as_view(kChainMagic));
    CredentialChain c;
    c.rating = decode_credential_from(r);
    c.csk = decode_credential_from(r);
    c.aik = decode_credential_from(r);
    return c;
  });
}

Digest chain_digest(const CredentialChain& chain) {
  return sha256(encode(chain));
}

std::string_view fault_name(ChainFault f) {
  switch (f) {
    case ChainFault::kNone:
      return "none";
    case ChainFault::kUnknownGroup:
      return "unknown-group";
    case ChainFault::kGroupLabelMismatch:
      return "group-label-mismatch";
    case ChainFault::kAikSignature:
      return "bad-group-credential";
    case ChainFault::kLinkMismatch:
      return "link-mismatch";
    case ChainFault::kCskSignature:
      return "bad-key-certificate";
    case ChainFault::kBadStatement:
      return "bad-statement";
    case ChainFault::kRatingSignature:
      return "bad-rating-signature";
  }
  return "unknown";
}

VerifyReport verify_chain(const CredentialChain& chain,
                          const GroupRegistry& registry) {
  VerifyReport rep;
  for (const auto& [g, key] : registry) {
    if (equal_bytes(key, chain.aik.issuer_public)) {
      rep.group = g;
      rep.group_known = true;
      break;
    }
  }
  if (rep.group) {
    rep.group_label_ok =
        find_label(chain.aik.meta, meta::kGroup) == std::to_string(*rep.group);
  }
  rep.aik_signature_ok = verify_credential(chain.aik);
  rep.csk_signature_ok = verify_credential(chain.csk);
  rep.rating_signature_ok = verify_credential(chain.rating);
  rep.csk_link_ok = equal_bytes(chain.csk.issuer_public, chain.aik.entity);
  rep.rating_link_ok = equal_bytes(chain.rating.issuer_public, chain.csk.entity);
  rep.statement_ok =
      find_label(chain.aik.meta, meta::kKind) == meta::kKindGroupCredential &&
      find_label(chain.csk.meta, meta::kKind) == meta::kKindCertifiedKey &&
      find_label(chain.csk.meta, meta::kStatement) ==
          meta::kShieldedKeyStatement &&
      find_label(chain.rating.meta, meta::kKind) == meta::kKindRating;

  if (!rep.group_known) {
    rep.reason = ChainFault::kUnknownGroup;
  } else if (!rep.group_label_ok) {
    rep.reason = ChainFault::kGroupLabelMismatch;
  } else if (!rep.aik_signature_ok) {
    rep.reason = ChainFault::kAikSignature;
  } else if (!rep.csk_link_ok || !rep.rating_link_ok) {
    rep.reason = ChainFault::kLinkMismatch;
  } else if (!rep.csk_signature_ok) {
    rep.reason = ChainFault::kCskSignature;
  } else if (!rep.statement_ok) {
    rep.reason = ChainFault::kBadStatement;
  } else if (!rep.rating_signature_ok) {
    rep.reason = ChainFault::kRatingSignature;
  } else {
    rep.reason = ChainFault::kNone;
  }
  return rep;
}

namespace {

constexpr std::size_t kSealNonceSize = crypto_box_NONCEBYTES;

std::array<std::uint8_t, kSealNonceSize> seal_nonce(ByteView eph_pk,
                                                    ByteView recipient_pk) {
  std::array<std::uint8_t, kSealNonceSize> n;
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, n.size());
  crypto_generichash_update(&st, eph_pk.data(), eph_pk.size());
  crypto_generichash_update(&st, recipient_pk.data(), recipient_pk.size());
  crypto_generichash_final(&st, n.data(), n.size());
  return n;
}

}  // namespace

std::optional<Bytes> seal_to(ByteView recipient_public, ByteView plaintext,
                             Drbg& rng) {
  ensure_sodium();
  if (recipient_public.size() != crypto_sign_PUBLICKEYBYTES) {
    return std::nullopt;
  }
  std::array<std::uint8_t, crypto_box_PUBLICKEYBYTES> curve_pk;
  if (crypto_sign_ed25519_pk_to_curve25519(curve_pk.data(),
                                           recipient_public.data()) != 0) {
    return std::nullopt;
  }
  std::array<std::uint8_t, crypto_box_PUBLICKEYBYTES> eph_pk;
  std::array<std::uint8_t, crypto_box_SECRETKEYBYTES> eph_sk;
  Seed s = rng.seed32();
  crypto_box_seed_keypair(eph_pk.data(), eph_sk.data(), s.data());
  sodium_memzero(s.data(), s.size());

  auto nonce = seal_nonce(eph_pk, curve_pk);
  Bytes out(eph_pk.size() + crypto_box_MACBYTES + plaintext.size());
  std::copy(eph_pk.begin(), eph_pk.end(), out.begin());
  int rc = crypto_box_easy(out.data() + eph_pk.size(), plaintext.data(),
                           plaintext.size(), nonce.data(), curve_pk.data(),
                           eph_sk.data());
  sodium_memzero(eph_sk.data(), eph_sk.size());
  if (rc != 0) return std::nullopt;
  return out;
}

std::optional<Bytes> open_sealed(const KeyPair& recipient, ByteView sealed) {
  ensure_sodium();
  constexpr std::size_t kOverhead =
      crypto_box_PUBLICKEYBYTES + crypto_box_MACBYTES;
  if (sealed.size() < kOverhead ||
      recipient.private_key.size() != crypto_sign_SECRETKEYBYTES) {
    return std::nullopt;
  }
  std::array<std::uint8_t, crypto_box_PUBLICKEYBYTES> curve_pk;
  std::array<std::uint8_t, crypto_box_SECRETKEYBYTES> curve_sk;
  if (crypto_sign_ed25519_pk_to_curve25519(curve_pk.data(),
                                           recipient.public_key.data()) != 0) {
    return std::nullopt;
  }
  crypto_sign_ed25519_sk_to_curve25519(curve_sk.data(),
                                       recipient.private_key.view().data());
  ByteView eph_pk = sealed.first(crypto_box_PUBLICKEYBYTES);
  ByteView ct = sealed.subspan(crypto_box_PUBLICKEYBYTES);
  auto nonce = seal_nonce(eph_pk, curve_pk);
  Bytes out(ct.size() - crypto_box_MACBYTES);
  int rc = crypto_box_open_easy(out.data(), ct.data(), ct.size(), nonce.data(),
                                eph_pk.data(), curve_sk.data());
  sodium_memzero(curve_sk.data(), curve_sk.size());
  if (rc != 0) return std::nullopt;
  return out;
}

}  // namespace tickets
