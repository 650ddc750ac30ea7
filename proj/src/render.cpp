#include <algorithm>
#include <cmath>

#include "geeco/world.hpp"

namespace geeco::sim {

namespace {

struct Raster {
  Frame& img;
  int w, h;

  Raster(Frame& f) : img(f), w(f.dim(2)), h(f.dim(1)) {}

  void put(int x, int y, const Color& c) {
    if (x < 0 || x >= w || y < 0 || y >= h) return;
    img.at3(0, y, x) = c.r;
    img.at3(1, y, x) = c.g;
    img.at3(2, y, x) = c.b;
  }

  void fill_rect(double x0, double y0, double x1, double y1, const Color& c) {
    const int ix0 = static_cast<int>(std::floor(x0)), ix1 = static_cast<int>(std::ceil(x1));
    const int iy0 = static_cast<int>(std::floor(y0)), iy1 = static_cast<int>(std::ceil(y1));
    for (int y = std::max(0, iy0); y < std::min(h, iy1); ++y)
      for (int x = std::max(0, ix0); x < std::min(w, ix1); ++x) put(x, y, c);
  }

  void fill_ellipse(double cx, double cy, double rx, double ry, const Color& c) {
    const int iy0 = static_cast<int>(std::floor(cy - ry)), iy1 = static_cast<int>(std::ceil(cy + ry));
    for (int y = std::max(0, iy0); y <= std::min(h - 1, iy1); ++y) {
      const double t = (y + 0.5 - cy) / ry;
      if (std::abs(t) > 1.0) continue;
      const double half = rx * std::sqrt(1.0 - t * t);
      for (int x = std::max(0, static_cast<int>(std::floor(cx - half)));
           x <= std::min(w - 1, static_cast<int>(std::ceil(cx + half))); ++x)
        if (std::abs(x + 0.5 - cx) <= half) put(x, y, c);
    }
  }

  void fill_annulus(double cx, double cy, double rx, double ry, double inner_frac,
                    const Color& c) {
    const int iy0 = static_cast<int>(std::floor(cy - ry)), iy1 = static_cast<int>(std::ceil(cy + ry));
    for (int y = std::max(0, iy0); y <= std::min(h - 1, iy1); ++y) {
      for (int x = std::max(0, static_cast<int>(std::floor(cx - rx)));
           x <= std::min(w - 1, static_cast<int>(std::ceil(cx + rx))); ++x) {
        const double u = (x + 0.5 - cx) / rx, v = (y + 0.5 - cy) / ry;
        const double d2 = u * u + v * v;
        if (d2 <= 1.0 && d2 >= inner_frac * inner_frac) put(x, y, c);
      }
    }
  }

  // Upright triangle: apex on top, linear taper to the base.
  void fill_triangle(double cx, double base_y, double apex_y, double base_half,
                     const Color& c) {
    const int iy0 = static_cast<int>(std::floor(apex_y)), iy1 = static_cast<int>(std::ceil(base_y));
    const double span = std::max(base_y - apex_y, 1e-9);
    for (int y = std::max(0, iy0); y <= std::min(h - 1, iy1); ++y) {
      const double t = std::min(std::max((y + 0.5 - apex_y) / span, 0.0), 1.0);
      const double half = base_half * t + 0.6;
      for (int x = std::max(0, static_cast<int>(std::floor(cx - half)));
           x <= std::min(w - 1, static_cast<int>(std::ceil(cx + half))); ++x)
        put(x, y, c);
    }
  }
};

struct Camera {
  double uscale, vscale, zscale, v_far;
  const WorldConfig& cfg;
  int w, h;

  Camera(const WorldConfig& cfg_, int res) : cfg(cfg_), w(res), h(res) {
    uscale = w / (cfg.xmax - cfg.xmin);
    v_far = 0.22 * h;  // far table edge; rows above are background
    vscale = (h - v_far) / (cfg.ymax - cfg.ymin);
    zscale = 0.9 * h / (cfg.zmax - cfg.zmin) * (cfg.zmax - cfg.zmin) / 0.45;
  }

  double u(double x) const { return (x - cfg.xmin) * uscale; }
  double v(double y, double z) const { return v_far + (cfg.ymax - y) * vscale - z * zscale; }
};

Color prisma_color(int px, int py, int phase, int res) {
  // slow looping rainbow: hue drifts spatially and advances one step per tick
  const double t = (static_cast<double>(px) + 2.0 * py) / res * 0.9 +
                   static_cast<double>(phase % 160) / 160.0;
  auto comp = [&](double shift) {
    const double u = std::fmod(t + shift + 10.0, 1.0) * 6.0;
    return static_cast<float>(std::clamp(2.0 - std::abs(u - 3.0), 0.0, 1.0));
  };
  return {comp(0.0), comp(1.0 / 3.0), comp(2.0 / 3.0)};
}

const Color kTable{0.80f, 0.78f, 0.74f};
const Color kBackgroundPlain{0.55f, 0.57f, 0.60f};
const Color kShadow{0.52f, 0.50f, 0.47f};
const Color kGripperShadow{0.38f, 0.36f, 0.34f};
const Color kGripperColor{0.20f, 0.20f, 0.22f};

void draw_object(Raster& r, const Camera& cam, const Object& o) {
  const double cu = cam.u(o.x);
  const double cv = cam.v(o.y, o.z);
  const double rx = o.size * cam.uscale;
  const double ry_flat = o.size * cam.vscale;
  const double hz = 0.5 * o.height * cam.zscale;
  switch (o.shape) {
    case Shape::Cube:
      r.fill_rect(cu - rx, cv - ry_flat - hz, cu + rx, cv + ry_flat + hz, o.color);
      break;
    case Shape::Pad:
      r.fill_rect(cu - rx, cam.v(o.y + o.size, o.support_height),
                  cu + rx, cam.v(o.y - o.size, o.support_height), o.color);
      break;
    case Shape::Disc:
      r.fill_ellipse(cu, cv, rx, ry_flat + hz, o.color);
      break;
    case Shape::Ring:
      r.fill_annulus(cu, cv, rx, ry_flat + hz, 0.45, o.color);
      break;
    case Shape::Cone:
      r.fill_triangle(cu, cam.v(o.y, o.support_height),
                      cam.v(o.y, o.support_height + o.height), rx, o.color);
      break;
    case Shape::Cup: {
      const double top = cam.v(o.y, o.support_height + o.height);
      const double bot = cam.v(o.y, o.support_height);
      r.fill_rect(cu - rx, top, cu + rx, bot, o.color);
      Color cavity{o.color.r * 0.45f, o.color.g * 0.45f, o.color.b * 0.45f};
      r.fill_rect(cu - rx * 0.6, top, cu + rx * 0.6, top + 0.3 * (bot - top), cavity);
      break;
    }
    case Shape::ClutterPoly:
      if (o.sides <= 3)
        r.fill_triangle(cu, cv + ry_flat + hz, cv - ry_flat - hz, rx, o.color);
      else if (o.sides == 4)
        r.fill_rect(cu - rx, cv - ry_flat - hz, cu + rx, cv + ry_flat + hz, o.color);
      else
        r.fill_ellipse(cu, cv, rx, ry_flat + hz, o.color);
      break;
  }
}

}  // namespace

Frame render(const WorldState& state, const WorldConfig& cfg) {
  const int res = cfg.resolution;
  if (res != 32 && res != 64 && res != 128)
    throw std::invalid_argument("render: resolution must be 32, 64 or 128");
  Frame img({3, res, res});
  Raster r(img);
  Camera cam(cfg, res);

  // background
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      Color c = kBackgroundPlain;
      if (state.background == Background::Prisma)
        c = prisma_color(x, y, state.background_phase, res);
      else if (state.background == Background::Textured)
        c = ((x / 8 + y / 8) % 2) ? Color{0.45f, 0.48f, 0.52f} : Color{0.62f, 0.60f, 0.55f};
      r.put(x, y, c);
    }
  }
  // table surface
  r.fill_rect(0, cam.v_far, res, res, kTable);

  // draw order: pads, shadows, objects far-to-near by height layer; an object
  // resting on a cone or cup is drawn before its supporter so the supporter
  // occludes it; the gripper is always drawn last.
  std::vector<const Object*> targets, movables;
  for (const auto& o : state.objects) {
    if (o.shape == Shape::Pad) targets.push_back(&o);
  }
  for (const auto* p : targets) draw_object(r, cam, *p);

  // shadows anchor every lifted body to its table position
  for (const auto& o : state.objects) {
    if (o.shape == Shape::Pad) continue;
    if (o.z > 0.5 * o.height + 1e-6) {
      r.fill_ellipse(cam.u(o.x), cam.v(o.y, 0.0), o.size * cam.uscale,
                     std::max(o.size * cam.vscale, 1.0), kShadow);
    }
  }
  // the gripper shadow is deliberately prominent: it pins the gripper's table
  // position so image distance disambiguates y from z under the oblique camera
  r.fill_ellipse(cam.u(state.gripper.x), cam.v(state.gripper.y, 0.0),
                 cfg.finger_radius * cam.uscale * 2.2,
                 std::max(cfg.finger_radius * cam.vscale * 2.2, 1.5), kGripperShadow);

  std::vector<const Object*> order;
  for (const auto& o : state.objects)
    if (o.shape != Shape::Pad) order.push_back(&o);
  std::stable_sort(order.begin(), order.end(), [](const Object* a, const Object* b) {
    if (a->support_height != b->support_height) return a->support_height < b->support_height;
    return a->y > b->y;  // farther objects first
  });
  // supporter-after-supported for occluding target shapes
  std::vector<const Object*> final_order;
  std::vector<const Object*> deferred;
  for (const Object* o : order) {
    bool supports_someone = false;
    for (const Object* q : order)
      if (q->support_id == o->id && (o->shape == Shape::Cone || o->shape == Shape::Cup))
        supports_someone = true;
    if (supports_someone)
      deferred.push_back(o);
    else
      final_order.push_back(o);
  }
  for (const Object* o : deferred) final_order.push_back(o);
  for (const Object* o : final_order) draw_object(r, cam, *o);

  // gripper: crossbar plus two fingers separated by the aperture
  {
    const auto& g = state.gripper;
    const double cu = cam.u(g.x);
    const double cv = cam.v(g.y, g.z);
    const double sep = (0.006 + 0.020 * g.aperture) * cam.uscale;
    const double fw = std::max(cfg.finger_radius * cam.uscale, 1.0);
    const double flen = 0.035 * cam.zscale;
    r.fill_rect(cu - sep - fw, cv - flen, cu + sep + fw, cv - flen + std::max(flen * 0.25, 1.5),
                kGripperColor);
    r.fill_rect(cu - sep - fw, cv - flen, cu - sep, cv, kGripperColor);
    r.fill_rect(cu + sep, cv - flen, cu + sep + fw, cv, kGripperColor);
  }
  return img;
}

}  // namespace geeco::sim
