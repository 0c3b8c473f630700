#pragma once

#include <array>
#include <cstdint>

namespace peakcr {

/// Philox4x32-10 block function (Salmon et al. counter-based generator).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;
PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key);

/// SplitMix64 finalizer; used to fold tuples of ids into one stream id.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t stream_id(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                        std::uint64_t d = 0);

/// Sequential view of one Philox substream. The key is the master seed and
/// the high half of the counter is the substream id, so every (seed, id)
/// pair is an independent, position-addressable sequence.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t substream);

  std::uint32_t next_u32();
  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller; the paired variate is cached.
  double normal();
  /// Student t with `df` degrees of freedom (df integer >= 1).
  double student_t(int df);

 private:
  PhiloxKey key_;
  std::uint64_t substream_;
  std::uint64_t block_ = 0;
  PhiloxCounter buf_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace peakcr
