#pragma once

// Canonical binary encoding shared by every signed or transmitted structure.
//
//   u8            one byte
//   u32, u64      big-endian, fixed width
//   i64           two's complement, big-endian
//   bytes, str    u32 length prefix followed by the raw bytes
//   labels        u32 count, then (str key, str value) pairs in strictly
//                 increasing key order
//
// Decoders reject trailing bytes, out-of-order or duplicate label keys and
// length prefixes that run past the buffer, so any accepted input re-encodes
// to exactly the same bytes.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tickets/bytes.hpp"

namespace tickets {

using Labels = std::map<std::string, std::string, std::less<>>;

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Writer {
 public:
  Writer& u8(std::uint8_t v);
  Writer& u32(std::uint32_t v);
  Writer& u64(std::uint64_t v);
  Writer& i64(std::int64_t v);
  Writer& bytes(ByteView v);
  Writer& str(std::string_view v);
  Writer& digest(const Digest& d);
  Writer& labels(const Labels& l);
  // Appends without a length prefix; for fixed-size fields and tags.
  Writer& raw(ByteView v);

  const Bytes& data() const& { return out_; }
  Bytes take() && { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(ByteView in) : in_(in) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  Bytes bytes();
  std::string str();
  Digest digest();
  Labels labels();
  void expect_raw(ByteView tag);

  bool done() const { return pos_ == in_.size(); }
  // Throws unless all input was consumed.
  void finish() const;

 private:
  ByteView take(std::size_t n);

  ByteView in_;
  std::size_t pos_ = 0;
};

// Runs `fn(reader)` and converts any DecodeError (or trailing input) into
// std::nullopt.
template <typename Fn>
auto decode_with(ByteView in, Fn&& fn) -> std::optional<decltype(fn(std::declval<Reader&>()))> {
  try {
    Reader r(in);
    auto value = fn(r);
    r.finish();
    return value;
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

}  // namespace tickets
