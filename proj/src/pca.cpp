#include "tickets/pca.hpp"

#include <sodium.h>

namespace tickets {

namespace {

constexpr std::size_t kNonceSize = 32;
constexpr std::size_t kLabelSize = 16;
constexpr std::size_t kBlobIdSize = 16;

enum class LogKind : std::uint8_t { kRegister = 1, kIssue = 2, kBlacklist = 3 };

constexpr std::string_view kIdentityTag = "IDR1";

void encode_issuance(Writer& w, const IssuanceRecord& r) {
  w.digest(r.aik_id).u32(r.group).i64(r.at).str(r.identity_label);
}

IssuanceRecord decode_issuance(Reader& r) {
  IssuanceRecord out;
  out.aik_id = r.digest();
  out.group = r.u32();
  out.at = r.i64();
  out.identity_label = r.str();
  return out;
}

}  // namespace

Result<GroupTable> GroupTable::create(std::vector<GroupSpec> groups) {
  if (groups.empty()) {
    return make_error(ErrorCode::kConfigError, "at least one group required");
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].impact <= 0) {
      return make_error(ErrorCode::kConfigError,
                        "impact of group " + std::to_string(i + 1) +
                            " must be positive");
    }
  }
  GroupTable t;
  t.groups_ = std::move(groups);
  return t;
}

const GroupSpec* GroupTable::find(GroupId g) const {
  if (g < 1 || g > groups_.size()) return nullptr;
  return &groups_[g - 1];
}

GroupRegistry GroupTable::registry() const {
  GroupRegistry r;
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    r.emplace(static_cast<GroupId>(i + 1), groups_[i].key.public_key);
  }
  return r;
}

Bytes encode(const IdentityRecord& r) {
  Writer w;
  w.raw(as_view(kIdentityTag))
      .digest(r.platform_id)
      .bytes(r.ek_public)
      .str(r.account)
      .u8(r.blacklisted ? 1 : 0)
      .u32(static_cast<std::uint32_t>(r.issued.size()));
  for (const auto& i : r.issued) encode_issuance(w, i);
  return std::move(w).take();
}

std::optional<IdentityRecord> decode_identity_record(ByteView in) {
  return decode_with(in, [](Reader& r) {
    r.expect_raw(as_view(kIdentityTag));
    IdentityRecord out;
    out.platform_id = r.digest();
    out.ek_public = r.bytes();
    out.account = r.str();
    std::uint8_t flag = r.u8();
    if (flag > 1) throw DecodeError("bad flag");
    out.blacklisted = flag == 1;
    std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) out.issued.push_back(decode_issuance(r));
    return out;
  });
}

PrivacyCa::PrivacyCa(GroupTable groups, PcaConfig config, SimClock& clock,
                     Drbg rng, ChargingLink* cp, AppendLog* log)
    : groups_(std::move(groups)),
      config_(std::move(config)),
      clock_(clock),
      rng_(std::move(rng)),
      cp_(cp),
      log_(log) {}

void PrivacyCa::log(ByteView record) {
  if (log_ != nullptr) log_->append(record);
}

Result<Digest> PrivacyCa::register_platform(ByteView ek_public,
                                            std::string account) {
  if (ek_public.size() != kPublicKeySize || account.empty()) {
    return make_error(ErrorCode::kInvalidArgument, "bad registration");
  }
  Digest id = sha256(ek_public);
  std::lock_guard lock(mu_);
  if (platforms_.count(id) != 0) return make_error(ErrorCode::kDuplicateEk);
  IdentityRecord rec;
  rec.platform_id = id;
  rec.ek_public.assign(ek_public.begin(), ek_public.end());
  rec.account = std::move(account);
  Writer w;
  w.u8(static_cast<std::uint8_t>(LogKind::kRegister))
      .i64(clock_.now())
      .digest(id)
      .bytes(rec.ek_public)
      .str(rec.account);
  log(w.data());
  platforms_.emplace(id, std::move(rec));
  return id;
}

void PrivacyCa::purge_expired_locked() {
  const Timestamp now = clock_.now();
  std::erase_if(pending_, [now](const auto& kv) { return kv.second.expires <= now; });
}

Result<Challenge> PrivacyCa::request_credential(
    ByteView aik_public, GroupId g, const PlatformEvidence& evidence) {
  if (groups_.find(g) == nullptr) {
    return make_error(ErrorCode::kUnknownGroup,
                      "group " + std::to_string(g) + " not in 1.." +
                          std::to_string(groups_.size()));
  }
  if (aik_public.size() != kPublicKeySize) {
    return make_error(ErrorCode::kInvalidArgument, "bad identity key");
  }
  const Digest platform_id = sha256(evidence.ek_public);
  const Digest aik_id = key_id_of(aik_public);
  std::string account;
  Bytes ek_public;
  {
    std::lock_guard lock(mu_);
    auto it = platforms_.find(platform_id);
    if (it == platforms_.end()) {
      return make_error(ErrorCode::kUnregisteredPlatform);
    }
    if (it->second.blacklisted) {
      return make_error(ErrorCode::kBlacklisted, "platform is blacklisted");
    }
    if (aik_to_platform_.count(aik_id) != 0) {
      return make_error(ErrorCode::kAlreadyIssued,
                        "identity key already certified");
    }
    account = it->second.account;
    ek_public = it->second.ek_public;
  }
  if (config_.charging.acquisition && cp_ != nullptr) {
    auto ok = cp_->authorize_ticket(account, g, ChargePhase::kAcquisition);
    if (!ok) return make_error(ErrorCode::kCpDeclined, ok.error().to_string());
  }

  // Authorisation passed; only now does the handshake start.
  std::lock_guard lock(mu_);
  purge_expired_locked();
  Bytes nonce = rng_.bytes(kNonceSize);
  auto sealed = seal_to(ek_public, encode_challenge_plaintext(nonce, aik_id), rng_);
  if (!sealed) return make_error(ErrorCode::kInternal, "cannot encrypt to EK");
  Pending p{Bytes(aik_public.begin(), aik_public.end()), g, platform_id,
            clock_.now() + config_.challenge_ttl};
  pending_.emplace(std::move(nonce), p);
  ++challenges_issued_;
  return Challenge{std::move(*sealed), p.expires};
}

Result<Bytes> PrivacyCa::complete_handshake(const ChallengeResponse& response) {
  Pending p;
  std::string account;
  Bytes ek_public;
  {
    std::lock_guard lock(mu_);
    auto it = pending_.find(response.nonce);
    if (it == pending_.end()) {
      return make_error(ErrorCode::kHandshakeFailed, "unknown or used nonce");
    }
    if (it->second.expires <= clock_.now()) {
      pending_.erase(it);
      return make_error(ErrorCode::kHandshakeFailed, "challenge expired");
    }
    if (!verify_signature(
            it->second.aik_public,
            issuance_challenge_bytes(response.nonce, it->second.aik_public),
            response.signature)) {
      return make_error(ErrorCode::kHandshakeFailed,
                        "response not signed by the requesting identity key");
    }
    p = it->second;
    pending_.erase(it);
    const Digest aik_id = key_id_of(p.aik_public);
    if (aik_to_platform_.count(aik_id) != 0 || in_flight_.count(aik_id) != 0) {
      return make_error(ErrorCode::kAlreadyIssued);
    }
    const IdentityRecord& rec = platforms_.at(p.platform_id);
    if (rec.blacklisted) {
      return make_error(ErrorCode::kBlacklisted, "platform is blacklisted");
    }
    account = rec.account;
    ek_public = rec.ek_public;
    in_flight_.insert(aik_id);
  }

  if (config_.charging.acquisition && cp_ != nullptr) {
    auto receipt = cp_->charge_ticket(account, p.group, ChargePhase::kAcquisition);
    std::lock_guard lock(mu_);
    if (!receipt) {
      in_flight_.erase(key_id_of(p.aik_public));
      return make_error(ErrorCode::kCpDeclined, receipt.error().to_string());
    }
    receipts_.push_back(*receipt);
  }

  std::lock_guard lock(mu_);
  in_flight_.erase(key_id_of(p.aik_public));
  const GroupSpec* group = groups_.find(p.group);
  IssuanceRecord issued{key_id_of(p.aik_public), p.group, clock_.now(),
                        to_hex(rng_.bytes(kLabelSize))};
  Labels m{
      {std::string(meta::kKind), std::string(meta::kKindGroupCredential)},
      {std::string(meta::kGroup), std::to_string(p.group)},
      {std::string(meta::kIdentityLabel), issued.identity_label},
      {std::string(meta::kPriceClass), group->price_class},
      {std::string(meta::kTpmClass), config_.tpm_class},
  };
  auto cred = certify(group->key, p.aik_public, std::move(m));
  if (!cred) return cred.error();

  ActivationContents contents{rng_.bytes(kBlobIdSize), issued.aik_id,
                              std::move(*cred)};
  auto blob = seal_to(ek_public, encode(contents), rng_);
  if (!blob) return make_error(ErrorCode::kInternal, "cannot encrypt to EK");

  Writer w;
  w.u8(static_cast<std::uint8_t>(LogKind::kIssue)).digest(p.platform_id);
  encode_issuance(w, issued);
  log(w.data());
  aik_to_platform_.emplace(issued.aik_id, p.platform_id);
  platforms_.at(p.platform_id).issued.push_back(std::move(issued));
  return std::move(*blob);
}

bool PrivacyCa::check_authority(std::string_view token) const {
  if (config_.authority_token.empty() ||
      token.size() != config_.authority_token.size()) {
    return false;
  }
  return sodium_memcmp(token.data(), config_.authority_token.data(),
                       token.size()) == 0;
}

Result<IdentityRecord> PrivacyCa::resolve_identity(const Digest& aik_id,
                                                   std::string_view token) const {
  if (!check_authority(token)) return make_error(ErrorCode::kForbidden);
  std::lock_guard lock(mu_);
  auto it = aik_to_platform_.find(aik_id);
  if (it == aik_to_platform_.end()) return make_error(ErrorCode::kNotFound);
  return platforms_.at(it->second);
}

Result<ChargeReceipt> PrivacyCa::initiate_charging(const Digest& platform_id,
                                                   GroupId g,
                                                   ChargePhase phase) {
  std::string account;
  {
    std::lock_guard lock(mu_);
    auto it = platforms_.find(platform_id);
    if (it == platforms_.end()) {
      return make_error(ErrorCode::kUnregisteredPlatform);
    }
    account = it->second.account;
  }
  if (cp_ == nullptr) {
    return make_error(ErrorCode::kCpDeclined, "no charging provider");
  }
  auto receipt = cp_->charge_ticket(account, g, phase);
  if (!receipt) {
    return make_error(ErrorCode::kCpDeclined, receipt.error().to_string());
  }
  std::lock_guard lock(mu_);
  receipts_.push_back(*receipt);
  return receipt;
}

Result<ChargeReceipt> PrivacyCa::charge_for_ticket(const Digest& aik_id) {
  if (!config_.charging.ex_post) {
    return make_error(ErrorCode::kForbidden, "ex-post charging disabled");
  }
  Digest platform_id;
  GroupId g = 0;
  {
    std::lock_guard lock(mu_);
    auto it = aik_to_platform_.find(aik_id);
    if (it == aik_to_platform_.end()) return make_error(ErrorCode::kNotFound);
    platform_id = it->second;
    for (const auto& i : platforms_.at(platform_id).issued) {
      if (i.aik_id == aik_id) g = i.group;
    }
  }
  return initiate_charging(platform_id, g, ChargePhase::kExPost);
}

Status PrivacyCa::blacklist(const Digest& platform_id, bool flag) {
  std::lock_guard lock(mu_);
  auto it = platforms_.find(platform_id);
  if (it == platforms_.end()) {
    return make_error(ErrorCode::kUnregisteredPlatform);
  }
  it->second.blacklisted = flag;
  Writer w;
  w.u8(static_cast<std::uint8_t>(LogKind::kBlacklist))
      .digest(platform_id)
      .u8(flag ? 1 : 0);
  log(w.data());
  return {};
}

Result<bool> PrivacyCa::ticket_revoked(const Digest& aik_id) const {
  std::lock_guard lock(mu_);
  auto it = aik_to_platform_.find(aik_id);
  if (it == aik_to_platform_.end()) return make_error(ErrorCode::kNotFound);
  return platforms_.at(it->second).blacklisted;
}

Status PrivacyCa::restore(const std::vector<Bytes>& log_records) {
  std::lock_guard lock(mu_);
  for (std::size_t i = 0; i < log_records.size(); ++i) {
    bool ok = decode_with(log_records[i], [this](Reader& r) {
                auto kind = static_cast<LogKind>(r.u8());
                switch (kind) {
                  case LogKind::kRegister: {
                    r.i64();
                    IdentityRecord rec;
                    rec.platform_id = r.digest();
                    rec.ek_public = r.bytes();
                    rec.account = r.str();
                    platforms_.insert_or_assign(rec.platform_id, rec);
                    break;
                  }
                  case LogKind::kIssue: {
                    Digest pid = r.digest();
                    IssuanceRecord iss = decode_issuance(r);
                    auto it = platforms_.find(pid);
                    if (it == platforms_.end()) {
                      throw DecodeError("issue before register");
                    }
                    aik_to_platform_[iss.aik_id] = pid;
                    it->second.issued.push_back(std::move(iss));
                    break;
                  }
                  case LogKind::kBlacklist: {
                    Digest pid = r.digest();
                    bool flag = r.u8() != 0;
                    auto it = platforms_.find(pid);
                    if (it == platforms_.end()) {
                      throw DecodeError("blacklist before register");
                    }
                    it->second.blacklisted = flag;
                    break;
                  }
                  default:
                    throw DecodeError("unknown record kind");
                }
                return true;
              }).has_value();
    if (!ok) {
      return make_error(ErrorCode::kProtocolError,
                        "bad issuance log record " + std::to_string(i + 1));
    }
  }
  return {};
}

std::uint64_t PrivacyCa::challenges_issued() const {
  std::lock_guard lock(mu_);
  return challenges_issued_;
}

std::size_t PrivacyCa::pending_count() const {
  std::lock_guard lock(mu_);
  return pending_.size();
}

std::vector<ChargeReceipt> PrivacyCa::receipts() const {
  std::lock_guard lock(mu_);
  return receipts_;
}

}  // namespace tickets
