#pragma once

#include <cstdint>
#include <string_view>

namespace ota {

// Counter-based random stream: every draw is a pure function of
// (master_seed, stream_label, counter), so identical state always yields
// identical values regardless of what other streams did in between.
class RngStream {
 public:
  RngStream(uint64_t master_seed, std::string_view label)
      : key_(mix_key(master_seed, hash_label(label))) {}

  uint64_t next_u64() {
    ++counter_;
    return finalize(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n), unbiased via rejection
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  uint64_t counter() const { return counter_; }

  // Derive an independent child stream.
  RngStream fork(std::string_view label) const { return RngStream(key_, label); }
  RngStream fork(std::string_view label, uint64_t salt) const {
    return RngStream(key_ ^ finalize(salt), label);
  }

 private:
  static uint64_t finalize(uint64_t z) {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  static uint64_t hash_label(std::string_view label) {
    uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ULL;
    }
    return h;
  }
  static uint64_t mix_key(uint64_t master, uint64_t label_hash) {
    return finalize(finalize(master) ^ label_hash);
  }

  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace ota
