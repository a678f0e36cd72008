#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace gmclab {

// Philox4x64-10 block cipher.
inline std::array<std::uint64_t, 4> philox4x64(std::array<std::uint64_t, 4> ctr,
                                               std::array<std::uint64_t, 2> key) {
  constexpr std::uint64_t m0 = 0xD2E7470EE14C6C93ULL;
  constexpr std::uint64_t m1 = 0xCA5A826395121157ULL;
  constexpr std::uint64_t w0 = 0x9E3779B97F4A7C15ULL;
  constexpr std::uint64_t w1 = 0xBB67AE8584CAA73BULL;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += w0;
      key[1] += w1;
    }
    const unsigned __int128 p0 = static_cast<unsigned __int128>(m0) * ctr[0];
    const unsigned __int128 p1 = static_cast<unsigned __int128>(m1) * ctr[2];
    const auto hi0 = static_cast<std::uint64_t>(p0 >> 64);
    const auto lo0 = static_cast<std::uint64_t>(p0);
    const auto hi1 = static_cast<std::uint64_t>(p1 >> 64);
    const auto lo1 = static_cast<std::uint64_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

struct StreamId {
  std::uint64_t master = 0;
  std::uint64_t stream = 0;
};

// Counter-based engine keyed by (master seed, stream). Satisfies UniformRandomBitGenerator.
class Philox {
 public:
  using result_type = std::uint64_t;

  Philox() = default;
  explicit Philox(StreamId id) : key_{id.master, id.stream} {}
  Philox(std::uint64_t master, std::uint64_t stream) : key_{master, stream} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  std::array<std::uint64_t, 2> key() const { return key_; }

 private:
  void refill() {
    // counter is bumped before encryption (same stream layout as numpy's Philox)
    if (++ctr_[0] == 0 && ++ctr_[1] == 0 && ++ctr_[2] == 0) ++ctr_[3];
    buf_ = philox4x64(ctr_, key_);
    pos_ = 0;
  }

  std::array<std::uint64_t, 2> key_{0, 0};
  std::array<std::uint64_t, 4> ctr_{0, 0, 0, 0};
  std::array<std::uint64_t, 4> buf_{};
  int pos_ = 4;
};

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Philox& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

// Derive a sub-stream id deterministically from a parent stream and a tag.
inline StreamId substream(StreamId parent, std::uint64_t tag) {
  const auto out = philox4x64({parent.stream, tag, 0x5eed, 0}, {parent.master, 0x243f6a8885a308d3ULL});
  return {parent.master, out[0]};
}

}  // namespace gmclab
