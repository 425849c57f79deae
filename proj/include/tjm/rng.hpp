#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tjm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Named streams so that sampling copies never consume draws from the main
/// evolution.
enum class Stream : std::uint64_t { main = 1, sample = 2, test = 3 };

/// Seed for (master seed, trajectory, stream, sub-index).
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t trajectory, Stream stream,
                                 std::uint64_t sub = 0) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ trajectory);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  return splitmix64(h ^ sub);
}

/// Per-trajectory generator with uniform doubles on [0, 1) from the top 53 bits.
class TrajectoryRng {
 public:
  explicit TrajectoryRng(std::uint64_t seed) : engine_(seed) {}
  TrajectoryRng(std::uint64_t master, std::uint64_t trajectory, Stream stream, std::uint64_t sub = 0)
      : engine_(stream_seed(master, trajectory, stream, sub)) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tjm
