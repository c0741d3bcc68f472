#include "evopt/rng.hpp"

#include "evopt/errors.hpp"

namespace evopt {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

}  // namespace

void Rng::reseed(std::uint64_t seed) {
  std::uint64_t s = seed;
  for (auto& word : state_) {
    word = splitmix64(s);
  }
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

std::uint64_t Rng::next_below(std::uint64_t n) {
  if (n == 0) {
    throw EngineError(ErrorKind::kPrecondition, "next_below requires n > 0");
  }
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r = next();
  while (r >= limit) {
    r = next();
  }
  return r % n;
}

nlohmann::json Rng::state_json() const {
  return nlohmann::json{state_[0], state_[1], state_[2], state_[3]};
}

void Rng::restore_state(const nlohmann::json& state) {
  if (!state.is_array() || state.size() != 4) {
    throw EngineError(ErrorKind::kCheckpoint, "rng state must be an array of 4 words");
  }
  for (std::size_t i = 0; i < 4; ++i) {
    state_[i] = state[i].get<std::uint64_t>();
  }
}

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kInput: return "input";
    case ErrorKind::kGraph: return "graph";
    case ErrorKind::kPrecondition: return "precondition";
    case ErrorKind::kCheckpoint: return "checkpoint";
    case ErrorKind::kProvider: return "provider";
    case ErrorKind::kMutation: return "mutation";
    case ErrorKind::kState: return "state";
  }
  return "unknown";
}

}  // namespace evopt
