#include "tickets/reputation.hpp"

namespace tickets {

namespace {

constexpr std::string_view kPayloadTag = "RTP1";
constexpr std::string_view kRecordTag = "RTR1";
constexpr std::string_view kAckTag = "ACK1";

void encode_payload_into(Writer& w, const RatingPayload& p) {
  w.raw(as_view(kPayloadTag))
      .str(p.subject)
      .i64(p.score)
      .str(p.comment)
      .bytes(p.nonce)
      .str(p.rs_id);
}

RatingPayload decode_payload_from(Reader& r) {
  r.expect_raw(as_view(kPayloadTag));
  RatingPayload p;
  p.subject = r.str();
  std::int64_t score = r.i64();
  if (score < INT32_MIN || score > INT32_MAX) {
    throw DecodeError("score out of range");
  }
  p.score = static_cast<std::int32_t>(score);
  p.comment = r.str();
  p.nonce = r.bytes();
  p.rs_id = r.str();
  return p;
}

void encode_rational(Writer& w, const Rational& q) {
  w.i64(q.numerator()).i64(q.denominator());
}

Rational decode_rational(Reader& r) {
  std::int64_t n = r.i64();
  std::int64_t d = r.i64();
  if (d <= 0) throw DecodeError("bad denominator");
  Rational q(n, d);
  if (q.numerator() != n || q.denominator() != d) {
    throw DecodeError("rational not in lowest terms");
  }
  return q;
}

}  // namespace

Bytes encode(const RatingPayload& p) {
  Writer w;
  encode_payload_into(w, p);
  return std::move(w).take();
}

std::optional<RatingPayload> decode_payload(ByteView in) {
  return decode_with(in, [](Reader& r) { return decode_payload_from(r); });
}

Labels rating_meta() {
  return Labels{{std::string(meta::kKind), std::string(meta::kKindRating)}};
}

Bytes encode(const RatingRecord& r) {
  Writer w;
  w.raw(as_view(kRecordTag));
  encode_payload_into(w, r.payload);
  w.u32(r.group);
  encode_rational(w, r.impact);
  w.i64(r.received).digest(r.chain_digest);
  return std::move(w).take();
}

std::optional<RatingRecord> decode_rating_record(ByteView in) {
  return decode_with(in, [](Reader& r) {
    r.expect_raw(as_view(kRecordTag));
    RatingRecord rec;
    rec.payload = decode_payload_from(r);
    rec.group = r.u32();
    rec.impact = decode_rational(r);
    rec.received = r.i64();
    rec.chain_digest = r.digest();
    return rec;
  });
}

Bytes encode(const Ack& a) {
  Writer w;
  w.raw(as_view(kAckTag)).u64(a.receipt_no).u32(a.group).digest(a.chain_digest);
  return std::move(w).take();
}

std::optional<Ack> decode_ack(ByteView in) {
  return decode_with(in, [](Reader& r) {
    r.expect_raw(as_view(kAckTag));
    Ack a;
    a.receipt_no = r.u64();
    a.group = r.u32();
    a.chain_digest = r.digest();
    return a;
  });
}

std::optional<WeightedScore> aggregate_records(
    const std::vector<RatingRecord>& records, std::string_view subject) {
  ExactRational weighted = 0;
  ExactRational total_impact = 0;
  std::size_t count = 0;
  for (const auto& r : records) {
    if (r.payload.subject != subject) continue;
    ExactRational impact(r.impact.numerator(), r.impact.denominator());
    weighted += impact * r.payload.score;
    total_impact += impact;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return WeightedScore{weighted / total_impact, count};
}

ReputationSystem::ReputationSystem(RsConfig config, SimClock& clock,
                                   PcaLink* pca, AppendLog* rating_log)
    : config_(std::move(config)),
      clock_(clock),
      pca_(pca),
      rating_log_(rating_log) {}

Status ReputationSystem::configure_groups(GroupPolicies groups) {
  for (const auto& [g, p] : groups) {
    if (p.impact <= 0) {
      return make_error(ErrorCode::kInvalidArgument,
                        "impact of group " + std::to_string(g) +
                            " must be positive");
    }
    if (p.verification_key.size() != kPublicKeySize) {
      return make_error(ErrorCode::kInvalidArgument, "bad group key");
    }
  }
  std::lock_guard lock(mu_);
  groups_ = std::move(groups);
  return {};
}

GroupPolicies ReputationSystem::groups() const {
  std::lock_guard lock(mu_);
  return groups_;
}

Result<Ack> ReputationSystem::submit_encoded(ByteView payload, ByteView chain) {
  auto c = decode_chain(chain);
  if (!c) return make_error(ErrorCode::kInvalidChain, "undecodable chain");
  auto p = decode_payload(payload);
  if (!p) return make_error(ErrorCode::kBadPayload, "undecodable payload");
  return submit_rating(*p, *c);
}

Result<Ack> ReputationSystem::submit_rating(const RatingPayload& payload,
                                            const CredentialChain& chain) {
  GroupPolicies groups = this->groups();
  GroupRegistry registry;
  for (const auto& [g, p] : groups) registry.emplace(g, p.verification_key);

  VerifyReport report = verify_chain(chain, registry);
  if (!report.valid()) {
    return make_error(ErrorCode::kInvalidChain,
                      std::string(fault_name(report.reason)));
  }
  if (chain.rating.entity != encode(payload)) {
    return make_error(ErrorCode::kBadPayload,
                      "payload differs from the signed rating");
  }
  if (payload.score < config_.scale.min || payload.score > config_.scale.max) {
    return make_error(ErrorCode::kBadPayload, "score outside scale");
  }
  if (payload.nonce.empty() || payload.subject.empty()) {
    return make_error(ErrorCode::kBadPayload, "missing subject or nonce");
  }
  if (payload.rs_id != config_.rs_id) {
    return make_error(ErrorCode::kWrongRs,
                      "rating addressed to '" + payload.rs_id + "'");
  }
  const Digest aik_id = key_id_of(chain.aik.entity);
  if (config_.honor_blacklist && pca_ != nullptr) {
    auto revoked = pca_->ticket_revoked(aik_id);
    if (revoked && *revoked) {
      return make_error(ErrorCode::kTicketRevoked,
                        "ticket holder blacklisted");
    }
  }

  const GroupId g = *report.group;
  Ack ack;
  {
    std::lock_guard lock(mu_);
    if (!spent_.emplace(aik_id, clock_.now()).second) {
      return make_error(ErrorCode::kDoubleSpend, "ticket already redeemed");
    }
    RatingRecord rec{payload, g, groups.at(g).impact, clock_.now(),
                     chain_digest(chain)};
    if (rating_log_ != nullptr) rating_log_->append(encode(rec));
    ack = Ack{next_receipt_++, g, rec.chain_digest};
    records_.push_back(std::move(rec));
  }
  if (config_.ex_post_charging && pca_ != nullptr) charge_or_queue(aik_id);
  return ack;
}

void ReputationSystem::charge_or_queue(const Digest& aik_id) {
  auto receipt = pca_->charge_ex_post(aik_id);
  if (!receipt) {
    std::lock_guard lock(mu_);
    pending_charges_.push_back(aik_id);
  }
}

std::size_t ReputationSystem::retry_pending_charges() {
  std::vector<Digest> todo;
  {
    std::lock_guard lock(mu_);
    todo.swap(pending_charges_);
  }
  for (const auto& id : todo) charge_or_queue(id);
  return pending_charges();
}

std::size_t ReputationSystem::pending_charges() const {
  std::lock_guard lock(mu_);
  return pending_charges_.size();
}

std::optional<WeightedScore> ReputationSystem::aggregate(
    std::string_view subject) const {
  std::lock_guard lock(mu_);
  return aggregate_records(records_, subject);
}

std::vector<RatingRecord> ReputationSystem::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t ReputationSystem::spent_count() const {
  std::lock_guard lock(mu_);
  return spent_.size();
}

bool ReputationSystem::is_spent(const Digest& aik_id) const {
  std::lock_guard lock(mu_);
  return spent_.count(aik_id) != 0;
}

std::vector<Bytes> ReputationSystem::spent_snapshot() const {
  std::lock_guard lock(mu_);
  std::vector<Bytes> out;
  for (const auto& [id, at] : spent_) {
    Writer w;
    w.digest(id).i64(at);
    out.push_back(std::move(w).take());
  }
  return out;
}

Bytes ReputationSystem::serialize_state() const {
  std::lock_guard lock(mu_);
  Writer w;
  w.str(config_.rs_id).i64(config_.scale.min).i64(config_.scale.max);
  w.u32(static_cast<std::uint32_t>(groups_.size()));
  for (const auto& [g, p] : groups_) {
    w.u32(g).bytes(p.verification_key);
    encode_rational(w, p.impact);
  }
  w.u32(static_cast<std::uint32_t>(records_.size()));
  for (const auto& r : records_) w.bytes(encode(r));
  w.u32(static_cast<std::uint32_t>(spent_.size()));
  for (const auto& [id, at] : spent_) w.digest(id).i64(at);
  w.u32(static_cast<std::uint32_t>(pending_charges_.size()));
  for (const auto& id : pending_charges_) w.digest(id);
  return std::move(w).take();
}

}  // namespace tickets
