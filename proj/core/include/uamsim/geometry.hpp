#pragma once

#include <cmath>

namespace uamsim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
  friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

/// 2-D cell index on the radio-map grid.
struct CellIndex {
  int i = 0;  // x direction
  int j = 0;  // y direction
  friend bool operator==(CellIndex a, CellIndex b) { return a.i == b.i && a.j == b.j; }
};

}  // namespace uamsim
