#pragma once

#include <cstdint>

namespace dynauction {

// SplitMix64 stream. Output is identical on every platform, and split()
// derives independent child streams from a (seed, stream id) pair so runs
// can be parallelized without sharing generator state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool coin(double p_true) { return uniform() < p_true; }

  Rng split(std::uint64_t stream) const {
    Rng mixer(state_ ^ (0xd1b54a32d192ed03ULL * (stream + 1)));
    return Rng(mixer.next());
  }

 private:
  std::uint64_t state_;
};

}  // namespace dynauction
