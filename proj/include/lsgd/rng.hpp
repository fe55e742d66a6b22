// Copyright 2026 The lsgd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <limits>

namespace lsgd {

/// Purposes of independent random streams. Every draw in the library is taken
/// from a stream keyed by (master seed, purpose, client, iteration, extra), so
/// results never depend on evaluation order or thread count.
enum class Stream : std::uint64_t {
  Direction = 1,     // per client, per iteration: component index and noise
  Anchor = 2,        // per client, per iteration: loopless anchor coin
  Shift = 3,         // per client, per iteration: learned-shift coin and target
  Batch = 4,         // per client, per refresh: shift minibatch at the anchor
  Loop = 5,          // shared, per iteration: communication coin
  GlobalAnchor = 6,  // shared, per iteration: global anchor coin
  Generator = 7,     // problem generation
  Partition = 8,     // dataset partitioning
  Verify = 9,        // Monte-Carlo draws of the verification suite
  Probe = 10,        // probe points for audits
  Start = 11,        // random starting points
};

/// Stafford's "mix13" 64-bit finalizer (the SplitMix64 output function).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: output t is mix64(key + t * golden). Satisfies
/// UniformRandomBitGenerator, so standard distributions can consume it.
class CounterEngine {
 public:
  using result_type = std::uint64_t;

  CounterEngine(std::uint64_t seed, Stream stream, std::uint64_t a = 0, std::uint64_t b = 0,
                std::uint64_t c = 0) noexcept
      : key_(derive_key(seed, stream, a, b, c)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    counter_ += kGolden;
    return mix64(key_ + counter_);
  }

  std::uint64_t key() const noexcept { return key_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static constexpr std::uint64_t derive_key(std::uint64_t seed, Stream stream, std::uint64_t a,
                                            std::uint64_t b, std::uint64_t c) noexcept {
    std::uint64_t h = mix64(seed + kGolden);
    h = mix64(h ^ (static_cast<std::uint64_t>(stream) * kGolden + 0x632be59bd9b4e019ULL));
    h = mix64(h ^ (a + 0x8cb92ba72f3d8dd7ULL));
    h = mix64(h ^ (b + 0xd6e8feb86659fd93ULL));
    h = mix64(h ^ (c + 0xa0761d6478bd642fULL));
    return h;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Iteration index used for draws that happen before the first iteration.
inline constexpr std::uint64_t kInitialIteration = std::numeric_limits<std::uint64_t>::max();

}  // namespace lsgd
