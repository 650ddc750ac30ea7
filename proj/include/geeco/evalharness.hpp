#pragma once

// Trial runner and reporting: repeated task evaluations with per-trial seeds,
// Wald binomial confidence intervals and text/JSON report emission.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "geeco/world.hpp"

namespace geeco::eval {

// Wald interval in percentage points: 100 p +- 100 * 1.96 * sqrt(p(1-p)/n).
struct Ci {
  double mean = 0;
  double halfwidth = 0;
};
Ci binomial_ci(int successes, int trials);
std::string format_ci(const Ci& ci);  // "79.80 ± 2.49"

// A policy rolls out from the sampled initial state; the target frame is the
// rendered outcome of a successful expert run on the same scene (null when
// the policy is unconditioned).
using Policy = std::function<sim::Trace(const sim::WorldState&, const sim::TaskSpec&,
                                        const dynimg::Frame* target, std::uint64_t trial_seed)>;

struct TrialOptions {
  sim::Skill skill = sim::Skill::Push;
  sim::ScenarioKind kind = sim::ScenarioKind::Goal2Cube2;
  int trials = 200;
  std::uint64_t seed = 1;
  int expert_horizon = 60;  // used to produce target images
};

struct Counts {
  int n = 0, reach = 0, pick = 0, final_ok = 0;
};

Counts run_trials(const Policy& policy, const TrialOptions& opt, const sim::WorldConfig& cfg);

struct ResultRow {
  std::string label;
  sim::Skill skill = sim::Skill::Push;
  Counts counts;
};

std::string render_report(const std::vector<ResultRow>& rows);
void write_report(const std::vector<ResultRow>& rows, const std::string& text_path,
                  const std::string& json_path);

}  // namespace geeco::eval
