#include "tickets/random.hpp"

#include <sodium.h>

#include <stdexcept>

#include "tickets/codec.hpp"

namespace tickets {

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialisation failed");
}

Seed derive(const Seed& seed, ByteView context) {
  Seed out;
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, out.size());
  crypto_generichash_update(&st, seed.data(), seed.size());
  crypto_generichash_update(&st, context.data(), context.size());
  crypto_generichash_final(&st, out.data(), out.size());
  return out;
}

}  // namespace

Drbg::Drbg() { ensure_sodium(); }

Drbg::Drbg(const Seed& seed) : seed_(seed) { ensure_sodium(); }

Drbg Drbg::from_u64(std::uint64_t seed) {
  ensure_sodium();
  Writer w;
  w.raw(as_view("tickets/drbg-seed/v1")).u64(seed);
  Seed s;
  crypto_generichash(s.data(), s.size(), w.data().data(), w.data().size(),
                     nullptr, 0);
  return Drbg(s);
}

Drbg::Drbg(Drbg&& other) noexcept {
  std::lock_guard lock(other.mu_);
  seed_ = other.seed_;
  counter_ = other.counter_;
}

Drbg& Drbg::operator=(Drbg&& other) noexcept {
  if (this != &other) {
    std::scoped_lock lock(mu_, other.mu_);
    seed_ = other.seed_;
    counter_ = other.counter_;
  }
  return *this;
}

void Drbg::fill(std::span<std::uint8_t> out) {
  if (!seed_) {
    randombytes_buf(out.data(), out.size());
    return;
  }
  std::uint64_t block;
  {
    std::lock_guard lock(mu_);
    block = counter_++;
  }
  Writer ctx;
  ctx.raw(as_view("block")).u64(block);
  Seed key = derive(*seed_, ctx.data());
  randombytes_buf_deterministic(out.data(), out.size(), key.data());
  sodium_memzero(key.data(), key.size());
}

Bytes Drbg::bytes(std::size_t n) {
  Bytes out(n);
  fill(out);
  return out;
}

Seed Drbg::seed32() {
  Seed s;
  fill(s);
  return s;
}

std::uint64_t Drbg::next_u64() {
  std::array<std::uint8_t, 8> b;
  fill(b);
  std::uint64_t v = 0;
  for (auto x : b) v = (v << 8) | x;
  return v;
}

Drbg Drbg::fork(std::string_view label) const {
  if (!seed_) return Drbg();
  Writer ctx;
  ctx.raw(as_view("fork")).str(label);
  return Drbg(derive(*seed_, ctx.data()));
}

}  // namespace tickets
