#include "geeco/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "geeco/rng.hpp"

namespace geeco::sim {

namespace {

double clamp(double v, double lo, double hi) { return std::max(lo, std::min(hi, v)); }

double contact_distance(const Object& obj, const WorldConfig& cfg) {
  return obj.size + cfg.finger_radius;
}

double grasp_radius(const Object& obj, const WorldConfig& cfg) {
  return cfg.grasp_radius_factor * obj.size;
}

bool graspable(const Object& obj) {
  return obj.shape == Shape::Cube || obj.shape == Shape::Disc || obj.shape == Shape::Ring;
}

bool is_target_shape(const Object& obj) {
  return obj.shape == Shape::Pad || obj.shape == Shape::Cone || obj.shape == Shape::Cup;
}

// Height of the surface an object comes to rest at on a given supporter.
double support_surface_z(const Object& supporter) {
  switch (supporter.shape) {
    case Shape::Cone:
      return supporter.support_height;  // a ring slides down to the cone base
    case Shape::Cup:
      return supporter.support_height + 0.004;  // interior bottom
    default:
      return supporter.support_height + supporter.height;
  }
}

bool footprint_contains(const Object& target, double x, double y) {
  const double dx = x - target.x, dy = y - target.y;
  if (target.shape == Shape::Pad)
    return std::abs(dx) <= target.size && std::abs(dy) <= target.size;
  return dx * dx + dy * dy <= target.size * target.size;
}

// Settles an unheld object at (x, y): the supporter with the tallest top
// surface claims it; the rest height comes from support_surface_z (cones and
// cups let the object sink to their base).
void settle(Object& obj, const std::vector<Object>& others) {
  double best_claim = -1.0;
  int best_id = -1;
  double rest_z = 0.0;
  for (const auto& o : others) {
    if (o.id == obj.id) continue;
    if (!footprint_contains(o, obj.x, obj.y)) continue;
    const double claim = o.support_height + o.height;
    if (claim > best_claim) {
      best_claim = claim;
      best_id = o.id;
      rest_z = support_surface_z(o);
    }
  }
  obj.support_height = rest_z;
  obj.support_id = best_id;
  obj.z = rest_z + 0.5 * obj.height;
}

}  // namespace

std::string to_string(Skill s) { return s == Skill::Push ? "push" : "pick"; }

std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Goal2Cube2: return "goal2cube2";
    case ScenarioKind::FgClutter: return "fg_clutter";
    case ScenarioKind::BgPrisma: return "bg_prisma";
    case ScenarioKind::NutOnCone: return "nut_on_cone";
    case ScenarioKind::BallInCup: return "ball_in_cup";
  }
  return "?";
}

Skill skill_from_string(const std::string& s) {
  if (s == "push") return Skill::Push;
  if (s == "pick" || s == "pick-and-place") return Skill::PickPlace;
  throw std::invalid_argument("unknown skill: " + s);
}

ScenarioKind kind_from_string(const std::string& s) {
  if (s == "goal2cube2") return ScenarioKind::Goal2Cube2;
  if (s == "fg_clutter") return ScenarioKind::FgClutter;
  if (s == "bg_prisma") return ScenarioKind::BgPrisma;
  if (s == "nut_on_cone") return ScenarioKind::NutOnCone;
  if (s == "ball_in_cup") return ScenarioKind::BallInCup;
  throw std::invalid_argument("unknown scenario kind: " + s);
}

const Object& find_object(const WorldState& state, int id) {
  for (const auto& o : state.objects)
    if (o.id == id) return o;
  throw std::invalid_argument("world: no object with id " + std::to_string(id));
}

int proprio_dim() { return 4; }

std::vector<double> proprio(const WorldState& state, const WorldConfig& cfg) {
  auto norm = [](double v, double lo, double hi) { return 2.0 * (v - lo) / (hi - lo) - 1.0; };
  return {norm(state.gripper.x, cfg.xmin, cfg.xmax), norm(state.gripper.y, cfg.ymin, cfg.ymax),
          norm(state.gripper.z, cfg.zmin, cfg.zmax), norm(state.gripper.aperture, 0.0, 1.0)};
}

WorldState step(const WorldState& state, const Command& cmd, const WorldConfig& cfg,
                std::vector<ContactEvent>* events) {
  WorldState next = state;
  next.time_step = state.time_step + 1;
  next.background_phase = state.background_phase + 1;

  auto& g = next.gripper;
  const double ms = cfg.max_step();
  const double ox = g.x, oy = g.y, oz = g.z;
  g.x = clamp(g.x + clamp(cmd.dx, -ms, ms), cfg.xmin, cfg.xmax);
  g.y = clamp(g.y + clamp(cmd.dy, -ms, ms), cfg.ymin, cfg.ymax);
  g.z = clamp(g.z + clamp(cmd.dz, -ms, ms), cfg.zmin, cfg.zmax);
  const double moved = std::hypot(g.x - ox, g.y - oy);

  const int grip = cmd.grip < 0 ? -1 : (cmd.grip > 0 ? 1 : 0);
  g.aperture = clamp(g.aperture - grip * cfg.aperture_rate, 0.0, 1.0);

  auto log_event = [&](int id, bool palm) {
    if (events) events->push_back({next.time_step, id, palm});
  };

  // Held object follows the gripper rigidly.
  if (g.held_object >= 0) {
    for (auto& o : next.objects) {
      if (o.id != g.held_object) continue;
      o.x = g.x;
      o.y = g.y;
      o.z = g.z;
      o.support_id = -1;
      log_event(o.id, true);
    }
  }

  // Release: opening past the grasp threshold drops the object onto the
  // nearest support below it.
  if (g.held_object >= 0 && g.aperture > cfg.grasp_aperture) {
    for (auto& o : next.objects) {
      if (o.id != g.held_object) continue;
      settle(o, next.objects);
    }
    g.held_object = -1;
  }

  // Attach: closing with an object inside the grasp radius.
  if (g.held_object < 0 && grip > 0 && g.aperture < cfg.grasp_aperture) {
    int best = -1;
    double best_d = 1e9;
    for (const auto& o : next.objects) {
      if (!graspable(o)) continue;
      const double d = std::sqrt((o.x - g.x) * (o.x - g.x) + (o.y - g.y) * (o.y - g.y) +
                                 (o.z - g.z) * (o.z - g.z));
      if (d <= grasp_radius(o, cfg) && d < best_d) {
        best = o.id;
        best_d = d;
      }
    }
    if (best >= 0) {
      g.held_object = best;
      for (auto& o : next.objects) {
        if (o.id != best) continue;
        o.x = g.x;
        o.y = g.y;
        o.z = g.z;
        o.support_id = -1;
      }
      log_event(best, true);
    }
  }

  // Quasi-static pushing: lateral contact displaces an unheld object along
  // the contact normal, never faster than the gripper itself.
  for (auto& o : next.objects) {
    if (o.id == g.held_object || is_target_shape(o)) continue;
    const double top = o.support_height + o.height;
    const bool vertical_overlap = g.z >= o.support_height - 1e-9 && g.z <= top + 1e-9;
    const double dx = o.x - g.x, dy = o.y - g.y;
    const double dist = std::hypot(dx, dy);
    const double cd = contact_distance(o, cfg);
    if (vertical_overlap && dist < cd) {
      log_event(o.id, false);
      if (dist > 0.25 * cd) {  // lateral contact only; skip when straddling
        const double push = std::min(cd - dist, moved);
        o.x = clamp(o.x + dx / dist * push, cfg.xmin, cfg.xmax);
        o.y = clamp(o.y + dy / dist * push, cfg.ymin, cfg.ymax);
        settle(o, next.objects);
      }
    }
  }

  // Proximity touch (for reach bookkeeping during grasp approaches).
  for (const auto& o : next.objects) {
    if (is_target_shape(o)) continue;
    if (o.id == g.held_object) continue;
    const double d = std::sqrt((o.x - g.x) * (o.x - g.x) + (o.y - g.y) * (o.y - g.y) +
                               (o.z - g.z) * (o.z - g.z));
    if (d <= grasp_radius(o, cfg)) log_event(o.id, false);
  }

  return next;
}

SuccessRecord evaluate_success(const Trace& trace, const TaskSpec& task) {
  if (trace.steps.empty()) throw std::invalid_argument("evaluate_success: empty trace");
  const Object& obj = find_object(trace.final_state, task.manipuland_id);
  const Object& target = find_object(trace.final_state, task.pad_id);
  SuccessRecord rec;
  for (const auto& e : trace.events) {
    if (e.object_id != task.manipuland_id) continue;
    rec.reach = true;
    if (e.palm_closed) rec.pick = true;
  }
  rec.push_or_place = on_target(obj, target) && obj.support_id == target.id;
  return rec;
}

bool on_target(const Object& obj, const Object& target) {
  return footprint_contains(target, obj.x, obj.y);
}

Frame target_image(const WorldState& initial, const TaskSpec& task, const ExpertFn& expert,
                   const WorldConfig& cfg) {
  const auto plan = expert(initial, task);  // throws PlanningFailure
  WorldState s = initial;
  for (const auto& c : plan) s = step(s, c, cfg);
  return render(s, cfg);
}

namespace {

struct Placer {
  std::mt19937_64 rng;
  const WorldConfig& cfg;
  std::vector<std::pair<Vec3, double>> taken;  // (position, keep-out radius)

  Placer(std::uint64_t seed, const WorldConfig& c) : rng(make_rng(seed)), cfg(c) {}

  Vec3 place(double keep_out, int max_tries = 200) {
    std::uniform_real_distribution<double> ux(-cfg.place_x, cfg.place_x);
    std::uniform_real_distribution<double> uy(-cfg.place_y, cfg.place_y);
    for (int i = 0; i < max_tries; ++i) {
      Vec3 p{ux(rng), uy(rng), 0.0};
      bool ok = true;
      for (const auto& [q, r] : taken) {
        if (std::hypot(p.x - q.x, p.y - q.y) < keep_out + r) {
          ok = false;
          break;
        }
      }
      if (ok) {
        taken.push_back({p, keep_out});
        return p;
      }
    }
    throw PlanningFailure("sample_scenario: could not place object collision-free");
  }
};

Object make_object(int id, Shape shape, double size, double height, Color color, Vec3 p) {
  Object o;
  o.id = id;
  o.shape = shape;
  o.size = size;
  o.height = height;
  o.color = color;
  o.x = p.x;
  o.y = p.y;
  o.support_height = 0.0;
  o.support_id = -1;
  o.z = 0.5 * height;
  return o;
}

constexpr Color kRed{0.85f, 0.10f, 0.10f};
constexpr Color kYellow{0.92f, 0.86f, 0.10f};
constexpr Color kBlue{0.12f, 0.22f, 0.85f};
constexpr Color kGreen{0.10f, 0.70f, 0.18f};

}  // namespace

std::pair<WorldState, TaskSpec> sample_scenario(ScenarioKind kind, Skill skill,
                                                std::uint64_t seed, const WorldConfig& cfg) {
  const bool substituted_geometry =
      kind == ScenarioKind::NutOnCone || kind == ScenarioKind::BallInCup;
  if (substituted_geometry && skill != Skill::PickPlace)
    throw std::invalid_argument("sample_scenario: " + to_string(kind) + " is pick-and-place only");

  Placer placer(seed, cfg);
  WorldState state;
  state.rng_stream = seed;
  state.background = kind == ScenarioKind::BgPrisma ? Background::Prisma : Background::Plain;

  Shape target_shape = Shape::Pad;
  Shape manip_shape = Shape::Cube;
  double target_size = cfg.pad_half, target_height = cfg.pad_height;
  double manip_size = cfg.cube_half, manip_height = cfg.cube_height;
  if (kind == ScenarioKind::NutOnCone) {
    target_shape = Shape::Cone;
    manip_shape = Shape::Ring;
    target_size = 0.035;
    target_height = 0.05;
    manip_size = 0.025;
    manip_height = 0.02;
  } else if (kind == ScenarioKind::BallInCup) {
    target_shape = Shape::Cup;
    manip_shape = Shape::Disc;
    target_size = 0.032;
    target_height = 0.04;
    manip_size = 0.02;
    manip_height = 0.04;
  }

  const double pad_keep = target_size + 0.015;
  const double obj_keep = manip_size + 0.02;
  state.objects.push_back(make_object(0, manip_shape, manip_size, manip_height, kRed,
                                      placer.place(obj_keep)));
  state.objects.push_back(make_object(1, manip_shape, manip_size, manip_height, kYellow,
                                      placer.place(obj_keep)));
  state.objects.push_back(make_object(2, target_shape, target_size, target_height, kBlue,
                                      placer.place(pad_keep)));
  state.objects.push_back(make_object(3, target_shape, target_size, target_height, kGreen,
                                      placer.place(pad_keep)));

  if (kind == ScenarioKind::FgClutter) {
    std::uniform_real_distribution<double> usize(0.012, 0.028);
    std::uniform_real_distribution<double> uhue(0.0, 1.0);
    std::uniform_int_distribution<int> usides(3, 6);
    for (int i = 0; i < 5; ++i) {
      const double s = usize(placer.rng);
      const double hue = uhue(placer.rng);
      // crude hue wheel, full saturation
      auto comp = [&](double shift) {
        const double t = std::fmod(hue + shift, 1.0) * 6.0;
        return static_cast<float>(clamp(2.0 - std::abs(t - 3.0), 0.0, 1.0));
      };
      Color c{comp(0.0), comp(1.0 / 3.0), comp(2.0 / 3.0)};
      Object o = make_object(4 + i, Shape::ClutterPoly, s, 2.0 * s, c, placer.place(s + 0.015));
      o.sides = usides(placer.rng);
      state.objects.push_back(o);
    }
  }

  std::uniform_int_distribution<int> utask(0, 3);
  const int t = utask(placer.rng);
  TaskSpec task;
  task.skill = skill;
  task.kind = kind;
  task.manipuland_id = t / 2;      // 0 or 1
  task.pad_id = 2 + (t % 2);       // 2 or 3

  state.gripper.x = 0.0;
  state.gripper.y = -cfg.place_y - 0.05;
  state.gripper.z = 0.14;
  state.gripper.aperture = 1.0;
  return {state, task};
}

}  // namespace geeco::sim
