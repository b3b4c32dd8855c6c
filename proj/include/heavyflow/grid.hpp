#pragma once

#include <cstdint>
#include <string>

namespace heavyflow {

enum class WallMode : std::uint32_t {
  AllSlipWalls = 0,       // closed box, slip walls on all four sides
  PeriodicXSlipWallsY = 1 // channel, periodic in x, slip walls at y = 0, Ly
};

std::string to_string(WallMode mode);
WallMode wall_mode_from_string(const std::string& name);

/// Uniform rectangle [0, Lx] x [0, Ly] split into nx x ny cells.
///
/// Cell (i, j) has center ((i + 1/2) hx, (j + 1/2) hy). Staggered unknowns live
/// on x-faces (i hx, (j + 1/2) hy), y-faces ((i + 1/2) hx, j hy) and nodes
/// (i hx, j hy).
class GridSpec {
public:
  GridSpec() = default;
  GridSpec(int nx, int ny, double lx = 1.0, double ly = 1.0,
           WallMode mode = WallMode::AllSlipWalls);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  WallMode wall_mode() const { return mode_; }
  bool periodic_x() const { return mode_ == WallMode::PeriodicXSlipWallsY; }

  double hx() const { return lx_ / nx_; }
  double hy() const { return ly_ / ny_; }
  double cell_area() const { return hx() * hy(); }
  double area() const { return lx_ * ly_; }
  int cell_count() const { return nx_ * ny_; }

  double xc(int i) const { return (i + 0.5) * hx(); }
  double yc(int j) const { return (j + 0.5) * hy(); }
  double xn(int i) const { return i * hx(); }
  double yn(int j) const { return j * hy(); }

  /// Stable 64-bit digest of the grid description.
  std::uint64_t hash() const;

  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.nx_ == b.nx_ && a.ny_ == b.ny_ && a.lx_ == b.lx_ && a.ly_ == b.ly_ &&
           a.mode_ == b.mode_;
  }
  friend bool operator!=(const GridSpec& a, const GridSpec& b) { return !(a == b); }

private:
  int nx_ = 8;
  int ny_ = 8;
  double lx_ = 1.0;
  double ly_ = 1.0;
  WallMode mode_ = WallMode::AllSlipWalls;
};

/// Throws std::invalid_argument when two grids differ.
void require_same_grid(const GridSpec& a, const GridSpec& b, const char* where);

/// FNV-1a accumulation used for grid and configuration fingerprints.
class Fingerprint {
public:
  Fingerprint& add_bytes(const void* data, std::size_t n);
  Fingerprint& add(double v);
  Fingerprint& add(std::int64_t v);
  Fingerprint& add(const std::string& s);
  std::uint64_t value() const { return state_; }
  std::string hex() const;

private:
  std::uint64_t state_ = 1469598103934665603ULL;
};

} // namespace heavyflow
