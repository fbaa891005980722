#include "paint/stroke/stroke.hpp"

#include <algorithm>
#include <cmath>

#include "paint/core/error.hpp"

namespace paint {

std::string to_string(StrokeKind kind) {
  switch (kind) {
    case StrokeKind::qbc: return "qbc";
    case StrokeKind::straight: return "straight";
    case StrokeKind::triangle: return "triangle";
    case StrokeKind::circle: return "circle";
  }
  return "qbc";
}

StrokeKind stroke_kind_from_string(const std::string& s) {
  if (s == "qbc") return StrokeKind::qbc;
  if (s == "straight") return StrokeKind::straight;
  if (s == "triangle") return StrokeKind::triangle;
  if (s == "circle") return StrokeKind::circle;
  throw DataError("unknown stroke design: " + s);
}

Point qbc_point(Point p0, Point p1, Point p2, double t) {
  PAINT_CHECK(t >= 0.0 && t <= 1.0, "qbc_point: t outside [0,1]");
  double w0 = (1 - t) * (1 - t), w1 = 2 * (1 - t) * t, w2 = t * t;
  return {w0 * p0.x + w1 * p1.x + w2 * p2.x,
          w0 * p0.y + w1 * p1.y + w2 * p2.y};
}

double stroke_radius_px(double r, int resolution) {
  return 1.0 + r * (resolution / 4.0);
}

StrokeParams sample_random_stroke(Rng& rng) {
  StrokeParams s;
  for (int i = 0; i < StrokeParams::kDim; ++i)
    s.v[(size_t)i] = (float)rng.uniform();
  return s;
}

namespace {

// One antialiased disc stamp: alpha = max(alpha, clamp(rho+0.5-d,0,1)*tau)
// over the pixels within reach. All geometry in double so mirror symmetry
// survives to well below the 1e-6 tolerance.
void stamp_disc(Tensor& alpha, int res, double cx, double cy, double rho,
                double tau) {
  if (tau <= 0.0) return;
  int ilo = std::max(0, (int)std::ceil(cy - rho - 0.5));
  int ihi = std::min(res - 1, (int)std::floor(cy + rho + 0.5));
  int jlo = std::max(0, (int)std::ceil(cx - rho - 0.5));
  int jhi = std::min(res - 1, (int)std::floor(cx + rho + 0.5));
  for (int i = ilo; i <= ihi; ++i)
    for (int j = jlo; j <= jhi; ++j) {
      double d = std::hypot(i - cy, j - cx);
      double a = std::clamp(rho + 0.5 - d, 0.0, 1.0) * tau;
      float& cell = alpha.at(i, j);
      if ((float)a > cell) cell = (float)a;
    }
}

// Curve sweep. The spec's baseline is T=100 uniform stamps; that cannot meet
// the 1/255 oracle band for long thin strokes (stamp gaps leave scalloped
// coverage), so the step is chosen adaptively from a per-term error budget,
// each term kept below 0.2/255 against the continuum sweep:
//   geometric: gap sagitta  delta^2 / (8*max(rho-0.5, 0.5))
//   transparency drift:     |t1-t0| * dt  (worst case |t1-t0|=1, so the
//                           schedule never depends on transparency — this
//                           keeps transparency scaling exactly monotone)
//   radius drift:           |rho1-rho0| * dt
// A stamp is always placed at t=0 and t=1. Control points arrive in
// normalized [0,1] coordinates: the step controller works off normalized
// control-point differences (exact in double even under x -> 1-x), which
// makes the t schedule bitwise mirror-invariant; only the stamped positions
// carry (tiny) rounding asymmetry.
void sweep_curve(Tensor& alpha, int res, Point P0, Point P1, Point P2,
                 double rho0, double rho1, double tau0, double tau1) {
  constexpr double kErr = 0.2 / 255.0;
  const double ext = res - 1;
  const double dt_tau = kErr;  // |t1-t0| <= 1
  const double drho = std::fabs(rho1 - rho0);
  const double dt_rho = drho > 0.0 ? kErr / drho : 1.0;
  const double dx01 = P1.x - P0.x, dy01 = P1.y - P0.y;
  const double dx12 = P2.x - P1.x, dy12 = P2.y - P1.y;

  double t = 0.0;
  while (true) {
    Point q = qbc_point(P0, P1, P2, t);
    double rho = rho0 + (rho1 - rho0) * t;
    double tau = tau0 + (tau1 - tau0) * t;
    stamp_disc(alpha, res, q.x * ext, q.y * ext, rho, tau);
    if (t >= 1.0) break;
    double dxdt = 2 * (1 - t) * dx01 + 2 * t * dx12;
    double dydt = 2 * (1 - t) * dy01 + 2 * t * dy12;
    double speed = std::hypot(dxdt, dydt) * ext;
    double rho_eff = std::max(rho - 0.5, 0.5);
    double delta = std::sqrt(8.0 * rho_eff * kErr);
    double dt_geo = speed > 1e-9 ? delta / speed : 1.0;
    double dt = std::max(std::min({dt_geo, dt_tau, dt_rho}), 1e-6);
    t = std::min(1.0, t + dt);
  }
}

double dist_to_segment(double px, double py, double ax, double ay, double bx,
                       double by) {
  double vx = bx - ax, vy = by - ay;
  double wx = px - ax, wy = py - ay;
  double vv = vx * vx + vy * vy;
  double u = vv > 0.0 ? std::clamp((wx * vx + wy * vy) / vv, 0.0, 1.0) : 0.0;
  return std::hypot(wx - u * vx, wy - u * vy);
}

void fill_triangle(Tensor& alpha, int res, Point A, Point B, Point C,
                   double tau) {
  if (tau <= 0.0) return;
  int ilo = std::max(0, (int)std::floor(std::min({A.y, B.y, C.y}) - 1.0));
  int ihi = std::min(res - 1, (int)std::ceil(std::max({A.y, B.y, C.y}) + 1.0));
  int jlo = std::max(0, (int)std::floor(std::min({A.x, B.x, C.x}) - 1.0));
  int jhi = std::min(res - 1, (int)std::ceil(std::max({A.x, B.x, C.x}) + 1.0));
  double area2 =
      (B.x - A.x) * (C.y - A.y) - (B.y - A.y) * (C.x - A.x);
  for (int i = ilo; i <= ihi; ++i)
    for (int j = jlo; j <= jhi; ++j) {
      double px = j, py = i;
      double d = std::min({dist_to_segment(px, py, A.x, A.y, B.x, B.y),
                           dist_to_segment(px, py, B.x, B.y, C.x, C.y),
                           dist_to_segment(px, py, C.x, C.y, A.x, A.y)});
      bool inside = false;
      if (area2 != 0.0) {
        double s0 = (B.x - A.x) * (py - A.y) - (B.y - A.y) * (px - A.x);
        double s1 = (C.x - B.x) * (py - B.y) - (C.y - B.y) * (px - B.x);
        double s2 = (A.x - C.x) * (py - C.y) - (A.y - C.y) * (px - C.x);
        inside = area2 > 0.0 ? (s0 >= 0 && s1 >= 0 && s2 >= 0)
                             : (s0 <= 0 && s1 <= 0 && s2 <= 0);
      }
      double sd = inside ? -d : d;  // degenerate triangle renders as a line
      double a = std::clamp(0.5 - sd, 0.0, 1.0) * tau;
      float& cell = alpha.at(i, j);
      if ((float)a > cell) cell = (float)a;
    }
}

}  // namespace

Tensor rasterize(const StrokeParams& params, const StrokeDesign& design,
                 int resolution) {
  PAINT_CHECK(resolution >= 8, "rasterize: resolution must be >= 8");
  PAINT_CHECK(params.valid(), "rasterize: stroke parameters outside [0,1]");
  Tensor alpha = Tensor::zeros({resolution, resolution});
  const double ext = resolution - 1;
  const double tau0 = design.opaque ? 1.0 : params.t0();
  const double tau1 = design.opaque ? 1.0 : params.t1();
  const double rho0 = stroke_radius_px(params.r0(), resolution);
  const double rho1 = stroke_radius_px(params.r1(), resolution);
  // Sub-half-pixel brushes draw nothing. Unreachable under the default radius
  // mapping (minimum 1px) but documented for alternative mappings.
  if (design.kind != StrokeKind::triangle && std::max(rho0, rho1) < 0.5)
    return alpha;

  Point P0{params.x0(), params.y0()};
  Point P1{params.x1(), params.y1()};
  Point P2{params.x2(), params.y2()};

  switch (design.kind) {
    case StrokeKind::qbc:
      sweep_curve(alpha, resolution, P0, P1, P2, rho0, rho1, tau0, tau1);
      break;
    case StrokeKind::straight: {
      Point mid{0.5 * (P0.x + P2.x), 0.5 * (P0.y + P2.y)};
      sweep_curve(alpha, resolution, P0, mid, P2, rho0, rho1, tau0, tau1);
      break;
    }
    case StrokeKind::triangle:
      fill_triangle(alpha, resolution, {P0.x * ext, P0.y * ext},
                    {P1.x * ext, P1.y * ext}, {P2.x * ext, P2.y * ext}, tau0);
      break;
    case StrokeKind::circle:
      stamp_disc(alpha, resolution, P0.x * ext, P0.y * ext, rho0, tau0);
      break;
  }
  return alpha;
}

}  // namespace paint
