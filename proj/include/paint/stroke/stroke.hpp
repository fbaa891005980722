#pragma once

#include <array>
#include <string>

#include "paint/core/rng.hpp"
#include "paint/core/tensor.hpp"

namespace paint {

// 13 normalized stroke parameters, fixed order:
// x0,y0,x1,y1,x2,y2 control points; r0,t0,r1,t1 endpoint thickness and
// transparency; R,G,B color. All in [0,1].
struct StrokeParams {
  static constexpr int kDim = 13;
  std::array<float, kDim> v{};

  float x0() const { return v[0]; }
  float y0() const { return v[1]; }
  float x1() const { return v[2]; }
  float y1() const { return v[3]; }
  float x2() const { return v[4]; }
  float y2() const { return v[5]; }
  float r0() const { return v[6]; }
  float t0() const { return v[7]; }
  float r1() const { return v[8]; }
  float t1() const { return v[9]; }
  float red() const { return v[10]; }
  float green() const { return v[11]; }
  float blue() const { return v[12]; }

  bool valid() const {
    for (float x : v)
      if (!(x >= 0.0f && x <= 1.0f)) return false;
    return true;
  }
};

enum class StrokeKind { qbc, straight, triangle, circle };

struct StrokeDesign {
  StrokeKind kind = StrokeKind::qbc;
  bool opaque = false;
};

std::string to_string(StrokeKind kind);
StrokeKind stroke_kind_from_string(const std::string& s);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// B(t) = (1-t)^2 P0 + 2(1-t)t P1 + t^2 P2; t outside [0,1] is rejected.
Point qbc_point(Point p0, Point p1, Point p2, double t);

// Pixel-space radius of a normalized thickness r at a given resolution:
// rho = 1 + r * (resolution / 4).
double stroke_radius_px(double r, int resolution);

// Ground-truth rasterizer. Returns an [res,res] alpha map in [0,1]:
// per-pixel stroke coverage times local transparency. Parameter value v maps
// to pixel coordinate v*(res-1); pixel centers sit at integer coordinates.
Tensor rasterize(const StrokeParams& params, const StrokeDesign& design,
                 int resolution);

// 13 i.i.d. uniforms on [0,1].
StrokeParams sample_random_stroke(Rng& rng);

}  // namespace paint
