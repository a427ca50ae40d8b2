#include "tickets/codec.hpp"

#include <sodium.h>

#include <array>

#include "tickets/result.hpp"

namespace tickets {

std::string to_hex(ByteView data) {
  std::string out(data.size() * 2 + 1, '\0');
  sodium_bin2hex(out.data(), out.size(), data.data(), data.size());
  out.pop_back();
  return out;
}

std::optional<Bytes> from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) return std::nullopt;
  Bytes out(hex.size() / 2);
  std::size_t written = 0;
  const char* end = nullptr;
  if (sodium_hex2bin(out.data(), out.size(), hex.data(), hex.size(), nullptr,
                     &written, &end) != 0 ||
      written != out.size() || end != hex.data() + hex.size()) {
    return std::nullopt;
  }
  return out;
}

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 32> kErrorNames{{
    {ErrorCode::kInvalidArgument, "invalid-argument"},
    {ErrorCode::kInternal, "internal"},
    {ErrorCode::kResourceExhausted, "resource-exhausted"},
    {ErrorCode::kInvalidHandle, "invalid-handle"},
    {ErrorCode::kNotActivated, "not-activated"},
    {ErrorCode::kWrongPlatform, "wrong-platform"},
    {ErrorCode::kAlreadyActivated, "already-activated"},
    {ErrorCode::kForeignBlob, "foreign-blob"},
    {ErrorCode::kMalformedBlob, "malformed-blob"},
    {ErrorCode::kForbiddenAikSigning, "forbidden-aik-signing"},
    {ErrorCode::kForbiddenKeyRole, "forbidden-key-role"},
    {ErrorCode::kDuplicateEk, "duplicate-ek"},
    {ErrorCode::kUnregisteredPlatform, "unregistered-platform"},
    {ErrorCode::kUnknownGroup, "unknown-group"},
    {ErrorCode::kBlacklisted, "blacklisted"},
    {ErrorCode::kAlreadyIssued, "already-issued"},
    {ErrorCode::kHandshakeFailed, "handshake-failed"},
    {ErrorCode::kForbidden, "forbidden"},
    {ErrorCode::kNotFound, "not-found"},
    {ErrorCode::kCpDeclined, "cp-declined"},
    {ErrorCode::kUnknownAccount, "unknown-account"},
    {ErrorCode::kLimitExceeded, "limit-exceeded"},
    {ErrorCode::kInvalidShares, "invalid-shares"},
    {ErrorCode::kInvalidChain, "invalid-chain"},
    {ErrorCode::kWrongRs, "wrong-rs"},
    {ErrorCode::kDoubleSpend, "double-spend"},
    {ErrorCode::kBadPayload, "bad-payload"},
    {ErrorCode::kTicketRevoked, "ticket-revoked"},
    {ErrorCode::kProtocolError, "protocol-error"},
    {ErrorCode::kUnknownEndpoint, "unknown-endpoint"},
    {ErrorCode::kTransportError, "transport-error"},
    {ErrorCode::kConfigError, "config-error"},
}};

}  // namespace

std::string_view error_name(ErrorCode code) {
  for (const auto& [c, name] : kErrorNames) {
    if (c == code) return name;
  }
  return "internal";
}

std::optional<ErrorCode> error_from_name(std::string_view name) {
  for (const auto& [c, n] : kErrorNames) {
    if (n == name) return c;
  }
  return std::nullopt;
}

std::string Error::to_string() const {
  std::string out(error_name(code));
  if (!detail.empty()) {
    out += ": ";
    out += detail;
  }
  return out;
}

Writer& Writer::u8(std::uint8_t v) {
  out_.push_back(v);
  return *this;
}

Writer& Writer::u32(std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  return *this;
}

Writer& Writer::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  return *this;
}

Writer& Writer::i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }

Writer& Writer::bytes(ByteView v) {
  if (v.size() > UINT32_MAX) throw std::length_error("field too large");
  u32(static_cast<std::uint32_t>(v.size()));
  return raw(v);
}

Writer& Writer::str(std::string_view v) { return bytes(as_view(v)); }

Writer& Writer::digest(const Digest& d) { return raw(d); }

Writer& Writer::labels(const Labels& l) {
  u32(static_cast<std::uint32_t>(l.size()));
  for (const auto& [k, v] : l) {
    str(k);
    str(v);
  }
  return *this;
}

Writer& Writer::raw(ByteView v) {
  out_.insert(out_.end(), v.begin(), v.end());
  return *this;
}

ByteView Reader::take(std::size_t n) {
  if (n > in_.size() - pos_) throw DecodeError("truncated input");
  ByteView v = in_.subspan(pos_, n);
  pos_ += n;
  return v;
}

std::uint8_t Reader::u8() { return take(1)[0]; }

std::uint32_t Reader::u32() {
  std::uint32_t v = 0;
  for (std::uint8_t b : take(4)) v = (v << 8) | b;
  return v;
}

std::uint64_t Reader::u64() {
  std::uint64_t v = 0;
  for (std::uint8_t b : take(8)) v = (v << 8) | b;
  return v;
}

std::int64_t Reader::i64() { return static_cast<std::int64_t>(u64()); }

Bytes Reader::bytes() {
  std::uint32_t n = u32();
  ByteView v = take(n);
  return Bytes(v.begin(), v.end());
}

std::string Reader::str() {
  std::uint32_t n = u32();
  ByteView v = take(n);
  return std::string(v.begin(), v.end());
}

Digest Reader::digest() {
  Digest d;
  ByteView v = take(d.size());
  std::copy(v.begin(), v.end(), d.begin());
  return d;
}

Labels Reader::labels() {
  std::uint32_t n = u32();
  Labels out;
  std::string prev;
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string k = str();
    if (i > 0 && k <= prev) throw DecodeError("label keys not strictly ordered");
    std::string v = str();
    prev = k;
    out.emplace(std::move(k), std::move(v));
  }
  return out;
}

void Reader::expect_raw(ByteView tag) {
  ByteView got = take(tag.size());
  if (!std::equal(got.begin(), got.end(), tag.begin())) {
    throw DecodeError("unexpected tag");
  }
}

void Reader::finish() const {
  if (!done()) throw DecodeError("trailing bytes");
}

}  // namespace tickets
