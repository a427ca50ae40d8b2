#pragma once

#include <atomic>
#include <cstdint>

namespace tickets {

// Seconds since scenario start. All services read time from a shared
// simulated clock so expiry and timestamps replay deterministically.
using Timestamp = std::int64_t;

class SimClock {
 public:
  explicit SimClock(Timestamp start = 0) : now_(start) {}

  Timestamp now() const { return now_.load(std::memory_order_acquire); }
  void advance(Timestamp seconds) {
    now_.fetch_add(seconds, std::memory_order_acq_rel);
  }

 private:
  std::atomic<Timestamp> now_;
};

}  // namespace tickets
