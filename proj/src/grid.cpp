#include "heavyflow/grid.hpp"

#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace heavyflow {

std::string to_string(WallMode mode) {
  switch (mode) {
  case WallMode::AllSlipWalls:
    return "all-slip-walls";
  case WallMode::PeriodicXSlipWallsY:
    return "periodic-x-slip-walls-y";
  }
  return "unknown";
}

WallMode wall_mode_from_string(const std::string& name) {
  if (name == "all-slip-walls" || name == "box")
    return WallMode::AllSlipWalls;
  if (name == "periodic-x-slip-walls-y" || name == "channel")
    return WallMode::PeriodicXSlipWallsY;
  throw std::invalid_argument("unknown wall mode '" + name + "'");
}

GridSpec::GridSpec(int nx, int ny, double lx, double ly, WallMode mode)
    : nx_(nx), ny_(ny), lx_(lx), ly_(ly), mode_(mode) {
  if (nx < 8 || ny < 8)
    throw std::invalid_argument("GridSpec: nx and ny must be at least 8");
  if (!(lx > 0.0) || !(ly > 0.0))
    throw std::invalid_argument("GridSpec: domain lengths must be positive");
}

std::uint64_t GridSpec::hash() const {
  Fingerprint fp;
  fp.add(std::int64_t{nx_}).add(std::int64_t{ny_}).add(lx_).add(ly_);
  fp.add(static_cast<std::int64_t>(mode_));
  return fp.value();
}

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* where) {
  if (a != b)
    throw std::invalid_argument(std::string(where) + ": grid mismatch");
}

Fingerprint& Fingerprint::add_bytes(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t k = 0; k < n; ++k) {
    state_ ^= p[k];
    state_ *= 1099511628211ULL;
  }
  return *this;
}

Fingerprint& Fingerprint::add(double v) {
  unsigned char buf[sizeof(double)];
  std::memcpy(buf, &v, sizeof v);
  return add_bytes(buf, sizeof buf);
}

Fingerprint& Fingerprint::add(std::int64_t v) {
  unsigned char buf[sizeof(std::int64_t)];
  std::memcpy(buf, &v, sizeof v);
  return add_bytes(buf, sizeof buf);
}

Fingerprint& Fingerprint::add(const std::string& s) {
  add(static_cast<std::int64_t>(s.size()));
  return add_bytes(s.data(), s.size());
}

std::string Fingerprint::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
  return buf;
}

} // namespace heavyflow
