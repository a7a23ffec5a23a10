#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace fsosim {

using Tick = std::int64_t;
using AgentId = std::int64_t;

/// Bounded rectangular arena and run limits shared by every scenario.
struct WorldConfig {
  int width = 41;    // cells
  int height = 41;   // cells
  Tick max_ticks = 1000;
  std::uint64_t master_seed = 1;

  void validate() const;  // throws ValidationError
};

/// Continuous coordinate inside the arena: x in [0, width), y in [0, height).
struct Position {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Position&) const = default;
};

/// Euclidean distance in cells.
double distance(const Position& a, const Position& b);

Position clamp_to_arena(Position p, const WorldConfig& arena);

struct MoveResult {
  Position pos;
  bool arrived = false;
};

/// Advance exactly `speed` cells along the straight segment toward `target`;
/// arrival snaps onto the target. The result is clamped to the arena.
MoveResult move_toward(const Position& current, const Position& target, double speed,
                       const WorldConfig& arena);

/// Deterministic named random stream derived from (master_seed, name).
///
/// Draw helpers are implemented by hand instead of <random> distributions so
/// that sequences are identical across standard library implementations.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string_view name);

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53-bit resolution.
  double next_double();

  /// Uniform integer in [lo, hi], inclusive. Requires lo <= hi.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Uniform in [lo, hi).
  double uniform_double(double lo, double hi);

  bool bernoulli(double p);

  const std::string& name() const { return name_; }

 private:
  std::uint64_t bounded(std::uint64_t s);  // [0, s)

  std::string name_;
  std::uint64_t state_[4];  // xoshiro256** state
};

/// Lazily created registry of named streams, all keyed off one master seed.
/// Draws on one stream never perturb another stream's sequence.
class RngSet {
 public:
  explicit RngSet(std::uint64_t master_seed) : master_seed_(master_seed) {}

  RngStream& stream(std::string_view name);
  std::uint64_t master_seed() const { return master_seed_; }

 private:
  std::uint64_t master_seed_;
  std::map<std::string, RngStream, std::less<>> streams_;
};

}  // namespace fsosim
