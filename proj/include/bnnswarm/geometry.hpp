#pragma once

#include <cmath>

namespace bnnswarm {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

// Axis-aligned rectangle [min.x, max.x] x [min.y, max.y].
struct Rect {
  Vec2 min;
  Vec2 max;

  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
  double area() const { return width() * height(); }
  bool contains(Vec2 p) const { return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y; }
  bool contains_strictly(Vec2 p) const { return p.x > min.x && p.x < max.x && p.y > min.y && p.y < max.y; }
  bool contains(const Rect& r) const { return contains(r.min) && contains(r.max); }
  bool overlaps(const Rect& r, double gap = 0.0) const {
    return min.x < r.max.x + gap && r.min.x < max.x + gap && min.y < r.max.y + gap && r.min.y < max.y + gap;
  }
  bool operator==(const Rect&) const = default;
};

}  // namespace bnnswarm
