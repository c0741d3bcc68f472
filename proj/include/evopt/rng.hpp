// evopt/rng.hpp - Deterministic random source with serializable state.
//
// xoshiro256++ seeded through splitmix64. The engine requires bit-stable
// streams across platforms and across checkpoint/restore, which rules out
// the standard-library distributions.
#pragma once

#include <array>
#include <cstdint>
#include <json.hpp>

namespace evopt {

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed);

  /// Next raw 64-bit value.
  std::uint64_t next();

  /// Uniform double in [0, 1).
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be > 0. Rejection sampling keeps the
  /// draw unbiased and the stream deterministic.
  std::uint64_t next_below(std::uint64_t n);

  [[nodiscard]] nlohmann::json state_json() const;
  void restore_state(const nlohmann::json& state);

  bool operator==(const Rng& other) const { return state_ == other.state_; }

 private:
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace evopt
