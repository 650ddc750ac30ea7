#pragma once

// Deterministic desk-scale tabletop world: a position-controlled point
// gripper, rigid objects with rule-based grasping and quasi-static pushing,
// target pads, configurable backgrounds and a flat-shaded software renderer.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "geeco/dynimg.hpp"

namespace geeco::sim {

using dynimg::Frame;

enum class Shape : std::uint8_t { Cube, Pad, Disc, Ring, Cone, Cup, ClutterPoly };
enum class Background : std::uint8_t { Plain, Textured, Prisma };
enum class Skill : std::uint8_t { Push, PickPlace };
enum class ScenarioKind : std::uint8_t { Goal2Cube2, FgClutter, BgPrisma, NutOnCone, BallInCup };

std::string to_string(Skill s);
std::string to_string(ScenarioKind k);
Skill skill_from_string(const std::string& s);
ScenarioKind kind_from_string(const std::string& s);

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

struct Color {
  float r = 0, g = 0, b = 0;
};

struct Object {
  int id = 0;
  Shape shape = Shape::Cube;
  double size = 0.025;    // half-extent for boxy shapes, radius for round ones
  double height = 0.05;   // vertical extent
  Color color;
  double x = 0, y = 0, z = 0;  // z is the center height
  double support_height = 0;   // height of the surface the object rests on
  int support_id = -1;         // -1: table, otherwise supporting object id
  int sides = 4;               // clutter polygons only
};

struct Gripper {
  double x = 0, y = 0, z = 0;
  double aperture = 1.0;  // 1 fully open, 0 fully closed
  int held_object = -1;
};

struct WorldState {
  int time_step = 0;
  Gripper gripper;
  std::vector<Object> objects;
  Background background = Background::Plain;
  int background_phase = 0;
  std::uint64_t rng_stream = 0;
};

struct TaskSpec {
  Skill skill = Skill::Push;
  ScenarioKind kind = ScenarioKind::Goal2Cube2;
  int manipuland_id = 0;
  int pad_id = 0;  // target object: a pad, cone or cup
};

struct Command {
  double dx = 0, dy = 0, dz = 0;
  int grip = 0;  // open = -1, noop = 0, close = +1
};

struct ContactEvent {
  int time_step = 0;
  int object_id = 0;
  bool palm_closed = false;  // palm touches object while fingers are closed
};

struct TraceStep {
  WorldState state;  // state the command was issued from
  Command command;
  Frame frame;
  std::vector<double> proprio;
};

struct Trace {
  std::vector<TraceStep> steps;
  std::vector<ContactEvent> events;
  WorldState final_state;
};

struct SuccessRecord {
  bool reach = false;
  bool pick = false;
  bool push_or_place = false;
};

struct WorldConfig {
  int resolution = 64;
  double dt = 0.04;          // 25 Hz
  double max_speed = 0.625;  // m/s; 0.025 m per tick

  double xmin = -0.30, xmax = 0.30;
  double ymin = -0.20, ymax = 0.20;
  double zmin = 0.0, zmax = 0.25;
  double place_x = 0.21, place_y = 0.115;  // object placement half-extents

  double cube_half = 0.025;
  double cube_height = 0.05;
  double pad_half = 0.055;
  double pad_height = 0.006;
  double finger_radius = 0.012;
  double grasp_radius_factor = 1.5;  // r_g = factor * object size
  double grasp_aperture = 0.3;
  double aperture_rate = 0.2;  // per tick; full travel in 5 ticks

  double max_step() const { return max_speed * dt; }
};

std::pair<WorldState, TaskSpec> sample_scenario(ScenarioKind kind, Skill skill,
                                                std::uint64_t seed,
                                                const WorldConfig& cfg = {});

WorldState step(const WorldState& state, const Command& cmd, const WorldConfig& cfg,
                std::vector<ContactEvent>* events = nullptr);

Frame render(const WorldState& state, const WorldConfig& cfg);

// [x, y, z, aperture], each normalized into [-1, 1] by the workspace bounds.
std::vector<double> proprio(const WorldState& state, const WorldConfig& cfg);
int proprio_dim();

SuccessRecord evaluate_success(const Trace& trace, const TaskSpec& task);

// Plans a full command sequence for (state, task); throws PlanningFailure.
using ExpertFn =
    std::function<std::vector<Command>(const WorldState&, const TaskSpec&)>;

// Runs the expert to completion and renders the final state.
Frame target_image(const WorldState& initial, const TaskSpec& task, const ExpertFn& expert,
                   const WorldConfig& cfg);

const Object& find_object(const WorldState& state, int id);

struct PlanningFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Footprint-center containment on the target object (pad, cone or cup).
bool on_target(const Object& obj, const Object& target);

}  // namespace geeco::sim
