#pragma once

// Visual MPC: CEM over end-effector displacement sequences, scored by the L2
// distance between a forward model's predicted final frame and a goal frame.
// Two forward models are provided: an oracle wrapping the simulator and a
// small learned action-conditioned frame predictor at 32x32.

#include <cstdint>
#include <memory>
#include <vector>

#include "geeco/dataset.hpp"
#include "geeco/dynimg.hpp"
#include "geeco/param_store.hpp"
#include "geeco/world.hpp"

namespace geeco::plan {

// 2x2 box-average downsampling, used to bring 64x64 observations to the
// planner's 32x32 working resolution.
dynimg::Frame downsample2x(const dynimg::Frame& f);

double l2_frame_distance(const dynimg::Frame& a, const dynimg::Frame& b);

class ForwardModel {
 public:
  virtual ~ForwardModel() = default;
  // Binds the model to the current situation; called before each replan.
  virtual void bind(const sim::WorldState& state, const dynimg::Frame& observation) = 0;
  // Predicted frame after executing the action sequence from the bound state.
  virtual dynimg::Frame predict(const std::vector<sim::Command>& actions) = 0;
};

class OracleModel : public ForwardModel {
 public:
  OracleModel(const sim::WorldConfig& cfg, int resolution);
  void bind(const sim::WorldState& state, const dynimg::Frame& observation) override;
  dynimg::Frame predict(const std::vector<sim::Command>& actions) override;

 private:
  sim::WorldConfig cfg_;
  sim::WorldState state_;
  bool bound_ = false;
};

// Action-conditioned single-step predictor applied recurrently. The network
// outputs a residual added to its input frame, so a static scene is learned
// almost for free.
class LearnedModel : public ForwardModel {
 public:
  LearnedModel(const sim::WorldConfig& cfg, std::uint64_t seed);

  void bind(const sim::WorldState& state, const dynimg::Frame& observation) override;
  dynimg::Frame predict(const std::vector<sim::Command>& actions) override;

  dynimg::Frame step_predict(const dynimg::Frame& frame, const sim::Command& action) const;
  // One Adam step on a mini-batch of (frame, action, next frame) transitions;
  // returns the mean L1 loss.
  double train_step(const std::vector<std::tuple<dynimg::Frame, sim::Command, dynimg::Frame>>&
                        batch,
                    double lr);

  ParamStoreT<float>& parameters() { return params_; }
  static constexpr int kResolution = 32;

 private:
  sim::WorldConfig cfg_;
  ParamStoreT<float> params_;
  dynimg::Frame obs_;
  bool bound_ = false;
};

// Trains the learned model on adjacent-frame transitions from a dataset
// (frames are downsampled to 32x32); returns the running loss curve.
std::vector<double> train_forward_model(LearnedModel& model, const data::Dataset& ds, int steps,
                                        int batch, double lr, std::uint64_t seed);

struct CemParams {
  int horizon = 13;  // P
  int iterations = 4;
  int samples = 200;
  int elites = 10;
  double sigma_init = 0.5;
  double sigma_min = 1e-4;
};

struct CemResult {
  std::vector<sim::Command> best;      // length P, workspace units
  double best_cost = 0;
  std::vector<double> iter_best_cost;  // one entry per iteration, non-increasing
  // final sampling distribution over normalized displacements, [P][3]
  std::vector<std::array<double, 3>> mu, sigma;
};

CemResult cem_plan(ForwardModel& model, const dynimg::Frame& target, const CemParams& p,
                   std::uint64_t seed, const sim::WorldConfig& wcfg);

// Ground-truth bottleneck schedule: `n_goals` frames taken from an expert
// demonstration at indices ceil(H / n_goals) * j, each held for
// budget / n_goals control ticks.
struct Schedule {
  std::vector<int> frame_indices;  // 1-based step index into the demo
  int ticks_per_goal = 0;
};
Schedule bottleneck_schedule(int demo_length, int n_goals, int budget);

struct VfsOptions {
  CemParams cem;
  int n_goals = 10;
  int budget = 400;
};

struct VfsResult {
  sim::Trace trace;
  int replans = 0;
};

// Closed-loop visual foresight: replans every `cem.horizon` ticks against the
// sub-goal frame active at the replan tick.
VfsResult run_vfs(ForwardModel& model, const sim::WorldState& world0, const data::Episode& demo,
                  const VfsOptions& opt, std::uint64_t seed, const sim::WorldConfig& wcfg);

}  // namespace geeco::plan
