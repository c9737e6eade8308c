#ifndef BEACONSIM_GEOMETRY_HPP
#define BEACONSIM_GEOMETRY_HPP

#include <cmath>
#include <stdexcept>

namespace beaconsim {

/// Horizontal position in meters.
struct Position {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Position&, const Position&) = default;
};

/// Rectangular world with wrap-around on both axes.
class Torus {
 public:
  Torus() = default;
  Torus(double width, double height) : width_(width), height_(height) {
    if (!(width > 0.0) || !(height > 0.0))
      throw std::invalid_argument("torus dimensions must be positive");
  }

  double width() const { return width_; }
  double height() const { return height_; }

  Position wrap(Position p) const {
    return {wrap_axis(p.x, width_), wrap_axis(p.y, height_)};
  }

  /// Shortest displacement from a to b across the wrap boundaries.
  Position delta(Position a, Position b) const {
    return {min_image(b.x - a.x, width_), min_image(b.y - a.y, height_)};
  }

  double distance(Position a, Position b) const {
    const Position d = delta(a, b);
    return std::hypot(d.x, d.y);
  }

 private:
  static double wrap_axis(double v, double len) {
    double r = std::fmod(v, len);
    if (r < 0.0) r += len;
    // fmod of a tiny negative value can round up to len itself
    if (r >= len) r = 0.0;
    return r;
  }

  static double min_image(double d, double len) {
    d = std::fmod(d, len);
    if (d > 0.5 * len) d -= len;
    else if (d < -0.5 * len) d += len;
    return d;
  }

  double width_ = 1.0;
  double height_ = 1.0;
};

inline double euclidean(Position a, Position b) { return std::hypot(b.x - a.x, b.y - a.y); }

}  // namespace beaconsim

#endif
