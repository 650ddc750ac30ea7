#pragma once

// Scripted expert policies (pushing, pick-and-place), demonstration
// recording and dataset generation.

#include <cstdint>
#include <string>
#include <vector>

#include "geeco/dataset.hpp"
#include "geeco/world.hpp"

namespace geeco::expert {

// Waypoint plan padded with noop commands to exactly `horizon` ticks.
// Throws sim::PlanningFailure when the scene is infeasible or the plan does
// not fit into the horizon.
std::vector<sim::Command> plan_push(const sim::WorldState& state, const sim::TaskSpec& task,
                                    const sim::WorldConfig& cfg, int horizon);
std::vector<sim::Command> plan_pick_place(const sim::WorldState& state,
                                          const sim::TaskSpec& task,
                                          const sim::WorldConfig& cfg, int horizon);
std::vector<sim::Command> plan(const sim::WorldState& state, const sim::TaskSpec& task,
                               const sim::WorldConfig& cfg, int horizon);

sim::ExpertFn make_expert(const sim::WorldConfig& cfg, int horizon);

// Executes the plan from `state`, rendering and labelling every tick.
// Stored u_dee is the displacement the simulator actually executed.
data::Episode record_episode(const sim::WorldState& state, const sim::TaskSpec& task,
                             const std::vector<sim::Command>& plan, std::uint64_t seed,
                             const sim::WorldConfig& cfg);

// Re-simulates from the stored seed and commands; true iff every stored
// frame is reproduced bitwise (after u8 quantization).
bool replay_matches(const data::Episode& ep, const sim::WorldConfig& cfg);

// Samples a scenario for episode `index`, balanced over the four
// (manipuland, target) combinations, resampling planning failures.
struct GeneratedEpisode {
  data::Episode episode;
  int resamples = 0;
};
GeneratedEpisode generate_episode(sim::Skill skill, sim::ScenarioKind kind, int index,
                                  int horizon, std::uint64_t master_seed,
                                  const sim::WorldConfig& cfg);

// Writes <out_prefix>_{train,val,test}.bin/.manifest with a 2:1:1 split.
struct GenerateResult {
  int n_train = 0, n_val = 0, n_test = 0;
  int resampled = 0;
};
GenerateResult generate_dataset(sim::Skill skill, sim::ScenarioKind kind, int n_episodes,
                                int horizon, std::uint64_t seed,
                                const std::string& out_prefix, const sim::WorldConfig& cfg);

}  // namespace geeco::expert
