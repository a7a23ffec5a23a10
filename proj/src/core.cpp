#include "fsosim/core.hpp"

#include <algorithm>
#include <cmath>

#include "fsosim/errors.hpp"

namespace fsosim {

void WorldConfig::validate() const {
  if (width < 3) throw ValidationError("world.width", "must be >= 3");
  if (height < 3) throw ValidationError("world.height", "must be >= 3");
  if (max_ticks < 1) throw ValidationError("world.max_ticks", "must be >= 1");
}

double distance(const Position& a, const Position& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

Position clamp_to_arena(Position p, const WorldConfig& arena) {
  const double max_x = std::nextafter(static_cast<double>(arena.width), 0.0);
  const double max_y = std::nextafter(static_cast<double>(arena.height), 0.0);
  p.x = std::clamp(p.x, 0.0, max_x);
  p.y = std::clamp(p.y, 0.0, max_y);
  return p;
}

MoveResult move_toward(const Position& current, const Position& target, double speed,
                       const WorldConfig& arena) {
  const double d = distance(current, target);
  if (d <= speed) {
    return {clamp_to_arena(target, arena), true};
  }
  const double f = speed / d;
  Position next{current.x + (target.x - current.x) * f, current.y + (target.y - current.y) * f};
  return {clamp_to_arena(next, arena), false};
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::string_view name) : name_(name) {
  std::uint64_t sm = master_seed ^ fnv1a64(name);
  for (auto& word : state_) word = splitmix64(sm);
}

std::uint64_t RngStream::next_u64() {
  // xoshiro256**
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::bounded(std::uint64_t s) {
  // Lemire's nearly-divisionless method.
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * s;
  auto lo = static_cast<std::uint64_t>(m);
  if (lo < s) {
    const std::uint64_t threshold = (0 - s) % s;
    while (lo < threshold) {
      m = static_cast<unsigned __int128>(next_u64()) * s;
      lo = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(bounded(span));
}

double RngStream::uniform_double(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

bool RngStream::bernoulli(double p) { return next_double() < p; }

RngStream& RngSet::stream(std::string_view name) {
  auto it = streams_.find(name);
  if (it == streams_.end()) {
    it = streams_.emplace(std::string(name), RngStream(master_seed_, name)).first;
  }
  return it->second;
}

}  // namespace fsosim
