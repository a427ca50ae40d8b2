#pragma once

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string_view>

#include "tickets/bytes.hpp"

namespace tickets {

using Seed = std::array<std::uint8_t, 32>;

// Byte source for every random value in the system. Unseeded instances draw
// from the OS CSPRNG; seeded instances produce a reproducible ChaCha20
// stream so whole protocol runs replay bit-for-bit.
class Drbg {
 public:
  Drbg();
  explicit Drbg(const Seed& seed);
  static Drbg from_u64(std::uint64_t seed);

  Drbg(const Drbg&) = delete;
  Drbg& operator=(const Drbg&) = delete;
  Drbg(Drbg&& other) noexcept;
  Drbg& operator=(Drbg&& other) noexcept;

  void fill(std::span<std::uint8_t> out);
  Bytes bytes(std::size_t n);
  Seed seed32();
  std::uint64_t next_u64();

  // Independent child stream. Seeded parents derive the child seed from
  // their own seed and `label` without advancing.
  Drbg fork(std::string_view label) const;

  bool deterministic() const { return seed_.has_value(); }

 private:
  std::optional<Seed> seed_;
  std::uint64_t counter_ = 0;
  mutable std::mutex mu_;
};

}  // namespace tickets
