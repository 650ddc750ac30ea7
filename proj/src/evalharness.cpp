#include "geeco/evalharness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "geeco/expert.hpp"
#include "geeco/param_store.hpp"  // IoError
#include "geeco/rng.hpp"

#include "json.hpp"

namespace geeco::eval {

Ci binomial_ci(int successes, int trials) {
  if (trials <= 0) throw std::invalid_argument("binomial_ci: trials must be positive");
  if (successes < 0 || successes > trials)
    throw std::invalid_argument("binomial_ci: successes out of range");
  const double p = static_cast<double>(successes) / trials;
  return {100.0 * p, 100.0 * 1.96 * std::sqrt(p * (1.0 - p) / trials)};
}

std::string format_ci(const Ci& ci) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", ci.mean, ci.halfwidth);
  return buf;
}

Counts run_trials(const Policy& policy, const TrialOptions& opt, const sim::WorldConfig& cfg) {
  if (opt.trials <= 0) throw std::invalid_argument("run_trials: trials must be positive");
  Counts counts;
  for (int i = 0; i < opt.trials; ++i) {
    const std::uint64_t trial_seed = derive_seed(opt.seed, static_cast<std::uint64_t>(i));
    // resample until the expert can demonstrate the task, so every trial has
    // a reachable goal and a valid target image
    sim::WorldState world;
    sim::TaskSpec task;
    dynimg::Frame target;
    bool found = false;
    for (int attempt = 0; attempt < 10 && !found; ++attempt) {
      const std::uint64_t s = derive_seed(trial_seed, static_cast<std::uint64_t>(attempt));
      try {
        auto [w, t] = sim::sample_scenario(opt.kind, opt.skill, s, cfg);
        const auto cmds = expert::plan(w, t, cfg, opt.expert_horizon);
        sim::Trace tr;
        sim::WorldState ws = w;
        for (const auto& c : cmds) {
          tr.steps.push_back({ws, c, dynimg::Frame({3, 1, 1}), {}});
          ws = sim::step(ws, c, cfg, &tr.events);
        }
        tr.final_state = ws;
        const auto rec = sim::evaluate_success(tr, t);
        const bool ok = t.skill == sim::Skill::Push ? rec.reach && rec.push_or_place
                                                   : rec.reach && rec.pick && rec.push_or_place;
        if (!ok) continue;
        world = w;
        task = t;
        target = sim::render(ws, cfg);
        found = true;
      } catch (const sim::PlanningFailure&) {
      }
    }
    if (!found) throw sim::PlanningFailure("run_trials: no demonstrable scenario for trial");

    const sim::Trace tr = policy(world, task, &target, trial_seed);
    const auto rec = sim::evaluate_success(tr, task);
    ++counts.n;
    counts.reach += rec.reach ? 1 : 0;
    counts.pick += rec.pick ? 1 : 0;
    counts.final_ok += rec.push_or_place ? 1 : 0;
  }
  return counts;
}

std::string render_report(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  os << "label\tskill\tn\treach\tpick\tfinal\n";
  for (const auto& r : rows) {
    os << r.label << "\t" << sim::to_string(r.skill) << "\t" << r.counts.n << "\t"
       << format_ci(binomial_ci(r.counts.reach, r.counts.n)) << "\t";
    if (r.skill == sim::Skill::PickPlace)
      os << format_ci(binomial_ci(r.counts.pick, r.counts.n));
    else
      os << "-";
    os << "\t" << format_ci(binomial_ci(r.counts.final_ok, r.counts.n)) << "\n";
  }
  return os.str();
}

void write_report(const std::vector<ResultRow>& rows, const std::string& text_path,
                  const std::string& json_path) {
  if (!text_path.empty()) {
    std::ofstream f(text_path);
    if (!f) throw IoError("write_report: cannot open " + text_path);
    f << render_report(rows);
  }
  if (!json_path.empty()) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json row;
      row["label"] = r.label;
      row["skill"] = sim::to_string(r.skill);
      row["trials"] = r.counts.n;
      auto ci_obj = [](const Ci& ci) {
        return nlohmann::json{{"mean", ci.mean}, {"halfwidth", ci.halfwidth}};
      };
      row["reach"] = ci_obj(binomial_ci(r.counts.reach, r.counts.n));
      if (r.skill == sim::Skill::PickPlace)
        row["pick"] = ci_obj(binomial_ci(r.counts.pick, r.counts.n));
      row["final"] = ci_obj(binomial_ci(r.counts.final_ok, r.counts.n));
      j.push_back(row);
    }
    std::ofstream f(json_path);
    if (!f) throw IoError("write_report: cannot open " + json_path);
    f << j.dump(2) << "\n";
  }
}

}  // namespace geeco::eval
