#include "geeco/expert.hpp"

#include <cmath>

#include "geeco/rng.hpp"

namespace geeco::expert {

using sim::Command;
using sim::Object;
using sim::PlanningFailure;
using sim::TaskSpec;
using sim::WorldConfig;
using sim::WorldState;

namespace {

struct P3 {
  double x, y, z;
};

// Appends straight-line motion commands from `from` to `to` at full speed.
void move_to(std::vector<Command>& cmds, P3& from, const P3& to, double max_step) {
  while (true) {
    const double dx = to.x - from.x, dy = to.y - from.y, dz = to.z - from.z;
    const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (dist < 1e-9) return;
    const double s = std::min(1.0, max_step / dist);
    Command c;
    c.dx = dx * s;
    c.dy = dy * s;
    c.dz = dz * s;
    cmds.push_back(c);
    from.x += c.dx;
    from.y += c.dy;
    from.z += c.dz;
  }
}

void dwell(std::vector<Command>& cmds, int grip, int ticks) {
  for (int i = 0; i < ticks; ++i) {
    Command c;
    c.grip = grip;
    cmds.push_back(c);
  }
}

double point_segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::min(1.0, std::max(0.0, t));
  const double cx = ax + t * vx, cy = ay + t * vy;
  return std::hypot(px - cx, py - cy);
}

std::vector<Command> finish(std::vector<Command> cmds, int horizon) {
  if (static_cast<int>(cmds.size()) > horizon)
    throw PlanningFailure("expert: plan exceeds the episode horizon");
  cmds.resize(static_cast<std::size_t>(horizon));  // pad with noop
  return cmds;
}

constexpr int kGripDwell = 5;
constexpr double kSafeZ = 0.10;

}  // namespace

std::vector<Command> plan_push(const WorldState& state, const TaskSpec& task,
                               const WorldConfig& cfg, int horizon) {
  const Object& obj = sim::find_object(state, task.manipuland_id);
  const Object& pad = sim::find_object(state, task.pad_id);
  const double contact = obj.size + cfg.finger_radius;

  double dirx = obj.x - pad.x, diry = obj.y - pad.y;
  const double dist = std::hypot(dirx, diry);
  if (dist < 1e-6) throw PlanningFailure("plan_push: object already at pad center");
  dirx /= dist;
  diry /= dist;

  const double bx = obj.x + dirx * (contact + 0.015);
  const double by = obj.y + diry * (contact + 0.015);
  if (bx < cfg.xmin + 0.01 || bx > cfg.xmax - 0.01 || by < cfg.ymin + 0.01 ||
      by > cfg.ymax - 0.01)
    throw PlanningFailure("plan_push: approach point outside the workspace");

  // the object -> pad corridor must be free of other movable objects
  for (const auto& o : state.objects) {
    if (o.id == obj.id || o.id == pad.id) continue;
    if (o.shape == sim::Shape::Pad) continue;  // flat, push passes over contact at pad level
    const double clearance = o.size + obj.size + cfg.finger_radius + 0.005;
    if (point_segment_distance(o.x, o.y, bx, by, pad.x, pad.y) < clearance)
      throw PlanningFailure("plan_push: push corridor obstructed");
  }

  std::vector<Command> cmds;
  P3 g{state.gripper.x, state.gripper.y, state.gripper.z};
  const double ms = cfg.max_step();
  move_to(cmds, g, {bx, by, kSafeZ}, ms);
  move_to(cmds, g, {bx, by, obj.z}, ms);
  move_to(cmds, g, {pad.x + dirx * contact, pad.y + diry * contact, obj.z}, ms);
  move_to(cmds, g, {g.x, g.y, kSafeZ}, ms);
  return finish(std::move(cmds), horizon);
}

std::vector<Command> plan_pick_place(const WorldState& state, const TaskSpec& task,
                                     const WorldConfig& cfg, int horizon) {
  const Object& obj = sim::find_object(state, task.manipuland_id);
  const Object& pad = sim::find_object(state, task.pad_id);

  std::vector<Command> cmds;
  P3 g{state.gripper.x, state.gripper.y, state.gripper.z};
  const double ms = cfg.max_step();
  move_to(cmds, g, {obj.x, obj.y, kSafeZ}, ms);
  move_to(cmds, g, {obj.x, obj.y, obj.z}, ms);
  dwell(cmds, +1, kGripDwell);
  move_to(cmds, g, {obj.x, obj.y, kSafeZ + 0.02}, ms);
  move_to(cmds, g, {pad.x, pad.y, kSafeZ + 0.02}, ms);
  move_to(cmds, g, {pad.x, pad.y, pad.support_height + pad.height + 0.5 * obj.height + 0.015}, ms);
  dwell(cmds, -1, kGripDwell);
  move_to(cmds, g, {pad.x, pad.y, kSafeZ + 0.02}, ms);
  return finish(std::move(cmds), horizon);
}

std::vector<Command> plan(const WorldState& state, const TaskSpec& task, const WorldConfig& cfg,
                          int horizon) {
  return task.skill == sim::Skill::Push ? plan_push(state, task, cfg, horizon)
                                        : plan_pick_place(state, task, cfg, horizon);
}

sim::ExpertFn make_expert(const WorldConfig& cfg, int horizon) {
  return [cfg, horizon](const WorldState& s, const TaskSpec& t) {
    return plan(s, t, cfg, horizon);
  };
}

data::Episode record_episode(const WorldState& state, const TaskSpec& task,
                             const std::vector<Command>& plan, std::uint64_t seed,
                             const WorldConfig& cfg) {
  data::Episode ep;
  ep.task = task;
  ep.seed = seed;
  WorldState s = state;
  for (const auto& cmd : plan) {
    data::EpisodeStep st;
    st.image = data::quantize_frame(sim::render(s, cfg));
    const auto x = sim::proprio(s, cfg);
    st.x.assign(x.begin(), x.end());
    const Object& obj = sim::find_object(s, task.manipuland_id);
    st.q_ee[0] = static_cast<float>(s.gripper.x);
    st.q_ee[1] = static_cast<float>(s.gripper.y);
    st.q_ee[2] = static_cast<float>(s.gripper.z);
    st.q_obj[0] = static_cast<float>(obj.x);
    st.q_obj[1] = static_cast<float>(obj.y);
    st.q_obj[2] = static_cast<float>(obj.z);
    st.u_grp = static_cast<std::int8_t>(cmd.grip);
    // the stored f32 displacement doubles as the replay command, so the
    // canonical step must execute exactly the displacement it stores; iterate
    // until the float-rounded executed displacement is its own fixed point
    // (the rounded values live in float locals, not round-tripped in place)
    float fdx = static_cast<float>(cmd.dx);
    float fdy = static_cast<float>(cmd.dy);
    float fdz = static_cast<float>(cmd.dz);
    Command exec = cmd;
    WorldState next = s;
    for (int iter = 0; iter < 5; ++iter) {
      exec.dx = fdx;
      exec.dy = fdy;
      exec.dz = fdz;
      next = sim::step(s, exec, cfg);
      const float dx = static_cast<float>(next.gripper.x - s.gripper.x);
      const float dy = static_cast<float>(next.gripper.y - s.gripper.y);
      const float dz = static_cast<float>(next.gripper.z - s.gripper.z);
      if (dx == fdx && dy == fdy && dz == fdz) break;
      fdx = dx;
      fdy = dy;
      fdz = dz;
    }
    st.u_dee[0] = fdx;
    st.u_dee[1] = fdy;
    st.u_dee[2] = fdz;
    ep.steps.push_back(std::move(st));
    s = next;
  }
  return ep;
}

bool replay_matches(const data::Episode& ep, const WorldConfig& cfg) {
  auto [state, task] = sim::sample_scenario(ep.task.kind, ep.task.skill, ep.seed, cfg);
  task = ep.task;  // stored task overrides the sampled draw
  WorldState s = state;
  for (const auto& st : ep.steps) {
    if (data::quantize_frame(sim::render(s, cfg)) != st.image) return false;
    Command cmd;
    cmd.dx = st.u_dee[0];
    cmd.dy = st.u_dee[1];
    cmd.dz = st.u_dee[2];
    cmd.grip = st.u_grp;
    s = sim::step(s, cmd, cfg);
  }
  return true;
}

GeneratedEpisode generate_episode(sim::Skill skill, sim::ScenarioKind kind, int index,
                                  int horizon, std::uint64_t master_seed,
                                  const WorldConfig& cfg) {
  const int combo = index % 4;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const std::uint64_t seed =
        derive_seed(master_seed, static_cast<std::uint64_t>(index) * 16 + attempt);
    auto [state, task] = sim::sample_scenario(kind, skill, seed, cfg);
    task.manipuland_id = combo / 2;
    task.pad_id = 2 + combo % 2;
    try {
      const auto cmds = plan(state, task, cfg, horizon);
      data::Episode ep = record_episode(state, task, cmds, seed, cfg);
      // only successful demonstrations are stored; judge the trajectory the
      // episode actually stores (float-rounded commands)
      sim::Trace trace;
      WorldState s = state;
      for (const auto& st : ep.steps) {
        Command c;
        c.dx = st.u_dee[0];
        c.dy = st.u_dee[1];
        c.dz = st.u_dee[2];
        c.grip = st.u_grp;
        trace.steps.push_back({s, c, dynimg::Frame({3, 1, 1}), {}});
        s = sim::step(s, c, cfg, &trace.events);
      }
      trace.final_state = s;
      const auto rec = sim::evaluate_success(trace, task);
      const bool ok = task.skill == sim::Skill::Push
                          ? rec.reach && rec.push_or_place
                          : rec.reach && rec.pick && rec.push_or_place;
      if (ok) return {std::move(ep), attempt};
    } catch (const PlanningFailure&) {
    }
  }
  throw PlanningFailure("generate_episode: no feasible scenario after 10 resamples");
}

GenerateResult generate_dataset(sim::Skill skill, sim::ScenarioKind kind, int n_episodes,
                                int horizon, std::uint64_t seed,
                                const std::string& out_prefix, const WorldConfig& cfg) {
  if (n_episodes < 4) throw std::invalid_argument("generate_dataset: need at least 4 episodes");
  if (horizon < 20) throw std::invalid_argument("generate_dataset: horizon must be >= 20");

  std::vector<data::Episode> episodes;
  int resampled = 0;
  for (int i = 0; i < n_episodes; ++i) {
    auto gen = generate_episode(skill, kind, i, horizon, seed, cfg);
    resampled += gen.resamples;
    episodes.push_back(std::move(gen.episode));
  }

  const int n_train = n_episodes / 2;
  const int n_val = (n_episodes - n_train) / 2;
  const int n_test = n_episodes - n_train - n_val;
  GenerateResult res{n_train, n_val, n_test, resampled};

  auto write_split = [&](const std::string& split, int begin, int count) {
    data::Dataset ds;
    ds.skill = skill;
    ds.kind = kind;
    ds.split = split;
    ds.episode_length = horizon;
    ds.height = cfg.resolution;
    ds.width = cfg.resolution;
    ds.proprio_dim = sim::proprio_dim();
    ds.resampled = resampled;
    ds.episodes.assign(episodes.begin() + begin, episodes.begin() + begin + count);
    data::save_dataset(ds, out_prefix + "_" + split);
  };
  write_split("train", 0, n_train);
  write_split("val", n_train, n_val);
  write_split("test", n_train + n_val, n_test);
  return res;
}

}  // namespace geeco::expert
