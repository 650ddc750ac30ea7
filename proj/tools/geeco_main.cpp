// Single entry point: gen-data, train, eval, rollout, plan and dynimg
// subcommands, driven by flags and an optional sectioned config file
// (flags win over file values; unknown keys are errors).
//
// Exit codes: 0 success, 2 invalid arguments, 3 I/O failure, 4 planning
// failure. GEECO_SEED overrides the master seed when set.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "geeco/controller.hpp"
#include "geeco/dynimg.hpp"
#include "geeco/evalharness.hpp"
#include "geeco/expert.hpp"
#include "geeco/image.hpp"
#include "geeco/param_store.hpp"
#include "geeco/planner.hpp"
#include "geeco/rng.hpp"
#include "geeco/world.hpp"

namespace {

namespace fs = std::filesystem;
using namespace geeco;

std::uint64_t apply_seed_env(std::uint64_t seed) {
  if (const char* env = std::getenv("GEECO_SEED")) return std::stoull(env);
  return seed;
}

sim::Skill parse_skill(const std::string& s) { return sim::skill_from_string(s); }

void refuse_existing(const std::vector<std::string>& paths, bool force) {
  if (force) return;
  for (const auto& p : paths)
    if (fs::exists(p))
      throw IoError("output " + p + " exists; pass --force to overwrite");
}

// Builds a trial policy around a trained controller checkpoint.
eval::Policy make_controller_policy(const ctrl::ControllerConfig& ccfg, const std::string& ckpt,
                                    int budget, const sim::WorldConfig& wcfg) {
  auto controller = std::make_shared<ctrl::Controller<float>>(ccfg, 0);
  load_checkpoint(controller->params, ckpt);
  return [controller, budget, wcfg](const sim::WorldState& w, const sim::TaskSpec& t,
                                    const dynimg::Frame* target, std::uint64_t) {
    return ctrl::rollout(*controller, w, t, target, budget, wcfg);
  };
}

struct GenDataArgs {
  std::string skill = "push", scenario = "goal2cube2", out;
  int n = 400, horizon = 60, resolution = 64;
  std::uint64_t seed = 1;
  bool force = false;
};

int cmd_gen_data(const GenDataArgs& a) {
  sim::WorldConfig cfg;
  cfg.resolution = a.resolution;
  const std::uint64_t seed = apply_seed_env(a.seed);
  refuse_existing({a.out + "_train.bin", a.out + "_val.bin", a.out + "_test.bin"}, a.force);
  const auto res = expert::generate_dataset(parse_skill(a.skill),
                                            sim::kind_from_string(a.scenario), a.n, a.horizon,
                                            seed, a.out, cfg);
  std::cout << "wrote " << a.out << "_{train,val,test}: " << res.n_train << "/" << res.n_val
            << "/" << res.n_test << " episodes, H=" << a.horizon << ", res=" << a.resolution
            << ", resampled=" << res.resampled << "\n";
  return 0;
}

struct TrainArgs {
  std::string model = "geeco", variant = "D", data, out, log;
  double lambda = 1.0, lr = 1e-4;
  int k = 4, batch = 8, steps = 10000, resolution = 64;
  int val_every = 0, val_trials = 16, val_budget = 200;
  std::uint64_t seed = 1;
  bool force = false;
};

int cmd_train(const TrainArgs& a) {
  const std::uint64_t seed = apply_seed_env(a.seed);
  refuse_existing({a.out + ".bin", a.out + ".manifest"}, a.force);
  sim::WorldConfig wcfg;
  wcfg.resolution = a.resolution;
  const data::Dataset train_ds = data::load_dataset(a.data + "_train");

  if (a.model == "vfs-fm") {
    plan::LearnedModel model(wcfg, seed);
    const auto losses = plan::train_forward_model(model, train_ds, a.steps, a.batch, a.lr, seed);
    save_checkpoint(model.parameters(), a.out);
    if (!a.log.empty()) {
      std::ofstream f(a.log);
      if (!f) throw IoError("train: cannot open log " + a.log);
      for (std::size_t i = 0; i < losses.size(); ++i)
        f << "step=" << i + 1 << " loss_l1=" << losses[i] << "\n";
    }
    std::cout << "forward model trained for " << a.steps << " steps, final L1 "
              << (losses.empty() ? 0.0 : losses.back()) << ", checkpoint " << a.out << "\n";
    return 0;
  }
  if (a.model != "geeco") throw std::invalid_argument("train: unknown model '" + a.model + "'");

  ctrl::ControllerConfig ccfg;
  ccfg.variant = ctrl::variant_from_string(a.variant);
  ccfg.lambda = a.lambda;
  ccfg.buffer_size = a.k;
  ccfg.resolution = a.resolution;
  ctrl::Controller<float> controller(ccfg, seed);

  std::optional<data::Dataset> val_ds;
  if (a.val_every > 0) val_ds = data::load_dataset(a.data + "_val");

  ctrl::TrainOptions opt;
  opt.steps = a.steps;
  opt.batch = a.batch;
  opt.lr = a.lr;
  opt.seed = seed;
  opt.val_every = a.val_every;
  opt.val_trials = a.val_trials;
  opt.val_budget = a.val_budget;
  opt.log_path = a.log;
  opt.ckpt_path = a.out;
  const auto res = ctrl::train(controller, train_ds, val_ds ? &*val_ds : nullptr, wcfg, opt);
  std::cout << "trained " << a.variant << " for " << a.steps << " steps";
  if (res.best_step > 0)
    std::cout << "; best validation final-success " << res.best_val_final << " at step "
              << res.best_step;
  std::cout << "; checkpoint " << a.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string policy = "expert", variant = "D", ckpt, label;
  std::string skill = "push", scenario = "goal2cube2";
  std::string out_text, out_json;
  int trials = 200, budget = 200, horizon = 60, resolution = 64, k = 4;
  std::uint64_t seed = 1;
};

int cmd_eval(const EvalArgs& a) {
  const std::uint64_t seed = apply_seed_env(a.seed);
  sim::WorldConfig wcfg;
  wcfg.resolution = a.resolution;

  eval::Policy policy;
  if (a.policy == "expert") {
    policy = [&wcfg, &a](const sim::WorldState& w, const sim::TaskSpec& t, const dynimg::Frame*,
                         std::uint64_t) {
      const auto cmds = expert::plan(w, t, wcfg, a.horizon);
      sim::Trace tr;
      sim::WorldState s = w;
      for (const auto& c : cmds) {
        tr.steps.push_back({s, c, dynimg::Frame({3, 1, 1}), {}});
        s = sim::step(s, c, wcfg, &tr.events);
      }
      tr.final_state = s;
      return tr;
    };
  } else if (a.policy == "noop") {
    policy = [&wcfg, &a](const sim::WorldState& w, const sim::TaskSpec&, const dynimg::Frame*,
                         std::uint64_t) {
      sim::Trace tr;
      sim::WorldState s = w;
      for (int i = 0; i < a.budget; ++i) s = sim::step(s, sim::Command{}, wcfg, &tr.events);
      tr.final_state = s;
      return tr;
    };
  } else if (a.policy == "ckpt") {
    if (a.ckpt.empty()) throw std::invalid_argument("eval: --ckpt required for policy 'ckpt'");
    ctrl::ControllerConfig ccfg;
    ccfg.variant = ctrl::variant_from_string(a.variant);
    ccfg.buffer_size = a.k;
    ccfg.resolution = a.resolution;
    policy = make_controller_policy(ccfg, a.ckpt, a.budget, wcfg);
  } else {
    throw std::invalid_argument("eval: unknown policy '" + a.policy + "'");
  }

  eval::TrialOptions opt;
  opt.skill = parse_skill(a.skill);
  opt.kind = sim::kind_from_string(a.scenario);
  opt.trials = a.trials;
  opt.seed = seed;
  opt.expert_horizon = a.horizon;
  const auto counts = eval::run_trials(policy, opt, wcfg);

  eval::ResultRow row;
  row.label = a.label.empty() ? a.policy + "-" + a.scenario + "-s" + std::to_string(seed)
                              : a.label;
  row.skill = opt.skill;
  row.counts = counts;
  std::cout << eval::render_report({row});
  eval::write_report({row}, a.out_text, a.out_json);
  return 0;
}

struct RolloutArgs {
  std::string variant = "D", ckpt, skill = "push", scenario = "goal2cube2", out_frame;
  int budget = 200, resolution = 64, k = 4, horizon = 60;
  std::uint64_t seed = 1;
};

int cmd_rollout(const RolloutArgs& a) {
  const std::uint64_t seed = apply_seed_env(a.seed);
  sim::WorldConfig wcfg;
  wcfg.resolution = a.resolution;
  ctrl::ControllerConfig ccfg;
  ccfg.variant = ctrl::variant_from_string(a.variant);
  ccfg.buffer_size = a.k;
  ccfg.resolution = a.resolution;
  ctrl::Controller<float> controller(ccfg, 0);
  load_checkpoint(controller.params, a.ckpt);

  auto [world, task] = sim::sample_scenario(sim::kind_from_string(a.scenario),
                                            parse_skill(a.skill), seed, wcfg);
  const dynimg::Frame target =
      sim::target_image(world, task, expert::make_expert(wcfg, a.horizon), wcfg);
  const sim::Trace tr = ctrl::rollout(controller, world, task, &target, a.budget, wcfg);
  const auto rec = sim::evaluate_success(tr, task);
  std::cout << "reach=" << rec.reach << " pick=" << rec.pick << " final=" << rec.push_or_place
            << "\n";
  if (!a.out_frame.empty()) img::write_ppm(sim::render(tr.final_state, wcfg), a.out_frame);
  return 0;
}

struct PlanArgs {
  std::string model = "oracle", ckpt, skill = "push", scenario = "goal2cube2", label;
  std::string out_text, out_json;
  int trials = 20, budget = 400, n_goals = 10, horizon = 60, resolution = 64;
  plan::CemParams cem;
  std::uint64_t seed = 1;
};

int cmd_plan(const PlanArgs& a) {
  const std::uint64_t seed = apply_seed_env(a.seed);
  sim::WorldConfig wcfg;
  wcfg.resolution = a.resolution;

  std::unique_ptr<plan::ForwardModel> model;
  if (a.model == "oracle") {
    model = std::make_unique<plan::OracleModel>(wcfg, 32);
  } else if (a.model == "learned") {
    if (a.ckpt.empty()) throw std::invalid_argument("plan: --ckpt required for model 'learned'");
    auto learned = std::make_unique<plan::LearnedModel>(wcfg, 0);
    load_checkpoint(learned->parameters(), a.ckpt);
    model = std::move(learned);
  } else {
    throw std::invalid_argument("plan: unknown model '" + a.model + "'");
  }

  plan::VfsOptions vopt;
  vopt.cem = a.cem;
  vopt.n_goals = a.n_goals;
  vopt.budget = a.budget;

  eval::Policy policy = [&](const sim::WorldState& w, const sim::TaskSpec& t,
                            const dynimg::Frame*, std::uint64_t trial_seed) {
    const auto cmds = expert::plan(w, t, wcfg, a.horizon);
    const data::Episode demo = expert::record_episode(w, t, cmds, trial_seed, wcfg);
    return plan::run_vfs(*model, w, demo, vopt, trial_seed, wcfg).trace;
  };

  eval::TrialOptions opt;
  opt.skill = parse_skill(a.skill);
  opt.kind = sim::kind_from_string(a.scenario);
  opt.trials = a.trials;
  opt.seed = seed;
  opt.expert_horizon = a.horizon;
  const auto counts = eval::run_trials(policy, opt, wcfg);

  eval::ResultRow row;
  row.label = a.label.empty() ? "vfs-" + a.model + "-" + a.scenario + "-s" + std::to_string(seed)
                              : a.label;
  row.skill = opt.skill;
  row.counts = counts;
  std::cout << eval::render_report({row});
  eval::write_report({row}, a.out_text, a.out_json);
  return 0;
}

struct DynimgArgs {
  std::string data, out;
  int episode = 0, t0 = 0, window = 4;
  bool pair = false;
};

int cmd_dynimg(const DynimgArgs& a) {
  const data::Dataset ds = data::load_dataset(a.data);
  if (a.episode < 0 || a.episode >= static_cast<int>(ds.episodes.size()))
    throw std::invalid_argument("dynimg: episode index out of range");
  const auto& ep = ds.episodes[static_cast<std::size_t>(a.episode)];
  if (a.window < 1 || a.t0 < 0 || a.t0 + a.window > static_cast<int>(ep.steps.size()))
    throw std::invalid_argument("dynimg: window out of range");

  dynimg::FrameSequence frames;
  for (int j = 0; j < a.window; ++j)
    frames.push_back(data::dequantize_frame(ep.steps[static_cast<std::size_t>(a.t0 + j)].image,
                                            ds.height, ds.width));
  img::write_ppm(dynimg::normalize(dynimg::dynamic_image(frames)), a.out);
  std::cout << "wrote " << a.out << "\n";
  if (a.pair) {
    const dynimg::Frame target =
        data::dequantize_frame(ep.steps.back().image, ds.height, ds.width);
    const std::string pair_path = fs::path(a.out).replace_extension().string() + "_pair.ppm";
    img::write_ppm(dynimg::normalize(dynimg::dynamic_pair(frames.front(), target)), pair_path);
    std::cout << "wrote " << pair_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geeco: goal-conditioned end-to-end visuomotor control laboratory"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a sectioned config file");
  app.allow_config_extras(CLI::config_extras_mode::error);

  GenDataArgs gd;
  auto* c_gd = app.add_subcommand("gen-data", "generate expert demonstration datasets");
  c_gd->add_option("--skill", gd.skill, "push | pick")->capture_default_str();
  c_gd->add_option("--scenario", gd.scenario, "scenario kind")->capture_default_str();
  c_gd->add_option("--n", gd.n, "episodes before the 2:1:1 split")->capture_default_str();
  c_gd->add_option("--horizon", gd.horizon, "episode length in ticks")->capture_default_str();
  c_gd->add_option("--resolution", gd.resolution, "render resolution")->capture_default_str();
  c_gd->add_option("--seed", gd.seed, "master seed")->capture_default_str();
  c_gd->add_option("--out", gd.out, "output prefix")->required();
  c_gd->add_flag("--force", gd.force, "overwrite existing outputs");

  TrainArgs ta;
  auto* c_tr = app.add_subcommand("train", "train a controller or forward model");
  c_tr->add_option("--model", ta.model, "geeco | vfs-fm")->capture_default_str();
  c_tr->add_option("--variant", ta.variant, "R | D | F | UNCOND")->capture_default_str();
  c_tr->add_option("--lambda", ta.lambda, "pose auxiliary loss weight")->capture_default_str();
  c_tr->add_option("--k", ta.k, "observation buffer size")->capture_default_str();
  c_tr->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str();
  c_tr->add_option("--batch", ta.batch, "windows per step")->capture_default_str();
  c_tr->add_option("--steps", ta.steps, "training steps")->capture_default_str();
  c_tr->add_option("--resolution", ta.resolution, "frame resolution")->capture_default_str();
  c_tr->add_option("--val-every", ta.val_every, "validation period; 0 disables")
      ->capture_default_str();
  c_tr->add_option("--val-trials", ta.val_trials, "validation rollouts")->capture_default_str();
  c_tr->add_option("--val-budget", ta.val_budget, "validation rollout ticks")
      ->capture_default_str();
  c_tr->add_option("--seed", ta.seed, "master seed")->capture_default_str();
  c_tr->add_option("--data", ta.data, "dataset prefix (expects <prefix>_train)")->required();
  c_tr->add_option("--out", ta.out, "checkpoint path")->required();
  c_tr->add_option("--log", ta.log, "training log path")->capture_default_str();
  c_tr->add_flag("--force", ta.force, "overwrite existing checkpoint");

  EvalArgs ea;
  auto* c_ev = app.add_subcommand("eval", "run evaluation trials and write reports");
  c_ev->add_option("--policy", ea.policy, "expert | noop | ckpt")->capture_default_str();
  c_ev->add_option("--variant", ea.variant, "controller variant for policy 'ckpt'")
      ->capture_default_str();
  c_ev->add_option("--ckpt", ea.ckpt, "checkpoint path for policy 'ckpt'");
  c_ev->add_option("--label", ea.label, "report row label");
  c_ev->add_option("--skill", ea.skill, "push | pick")->capture_default_str();
  c_ev->add_option("--scenario", ea.scenario, "scenario kind")->capture_default_str();
  c_ev->add_option("--trials", ea.trials, "number of trials")->capture_default_str();
  c_ev->add_option("--budget", ea.budget, "policy rollout ticks")->capture_default_str();
  c_ev->add_option("--horizon", ea.horizon, "expert horizon for targets")->capture_default_str();
  c_ev->add_option("--resolution", ea.resolution, "frame resolution")->capture_default_str();
  c_ev->add_option("--k", ea.k, "observation buffer size")->capture_default_str();
  c_ev->add_option("--seed", ea.seed, "master seed")->capture_default_str();
  c_ev->add_option("--out-text", ea.out_text, "text report path");
  c_ev->add_option("--out-json", ea.out_json, "JSON report path");

  RolloutArgs ra;
  auto* c_ro = app.add_subcommand("rollout", "run a single controller rollout");
  c_ro->add_option("--variant", ra.variant, "R | D | F | UNCOND")->capture_default_str();
  c_ro->add_option("--ckpt", ra.ckpt, "checkpoint path")->required();
  c_ro->add_option("--skill", ra.skill, "push | pick")->capture_default_str();
  c_ro->add_option("--scenario", ra.scenario, "scenario kind")->capture_default_str();
  c_ro->add_option("--budget", ra.budget, "rollout ticks")->capture_default_str();
  c_ro->add_option("--horizon", ra.horizon, "expert horizon for the target")
      ->capture_default_str();
  c_ro->add_option("--resolution", ra.resolution, "frame resolution")->capture_default_str();
  c_ro->add_option("--k", ra.k, "observation buffer size")->capture_default_str();
  c_ro->add_option("--seed", ra.seed, "scenario seed")->capture_default_str();
  c_ro->add_option("--out-frame", ra.out_frame, "write the final frame as PPM");

  PlanArgs pa;
  auto* c_pl = app.add_subcommand("plan", "visual MPC with ground-truth bottlenecks");
  c_pl->add_option("--model", pa.model, "oracle | learned")->capture_default_str();
  c_pl->add_option("--ckpt", pa.ckpt, "forward-model checkpoint for 'learned'");
  c_pl->add_option("--skill", pa.skill, "push | pick")->capture_default_str();
  c_pl->add_option("--scenario", pa.scenario, "scenario kind")->capture_default_str();
  c_pl->add_option("--label", pa.label, "report row label");
  c_pl->add_option("--trials", pa.trials, "number of trials")->capture_default_str();
  c_pl->add_option("--budget", pa.budget, "control ticks per trial")->capture_default_str();
  c_pl->add_option("--n-goals", pa.n_goals, "bottleneck sub-goals")->capture_default_str();
  c_pl->add_option("--horizon", pa.horizon, "expert demo length")->capture_default_str();
  c_pl->add_option("--resolution", pa.resolution, "frame resolution")->capture_default_str();
  c_pl->add_option("--cem-horizon", pa.cem.horizon, "CEM plan length P")->capture_default_str();
  c_pl->add_option("--cem-iters", pa.cem.iterations, "CEM iterations")->capture_default_str();
  c_pl->add_option("--cem-samples", pa.cem.samples, "CEM samples")->capture_default_str();
  c_pl->add_option("--cem-elites", pa.cem.elites, "CEM elites")->capture_default_str();
  c_pl->add_option("--sigma-init", pa.cem.sigma_init, "initial sampling std")
      ->capture_default_str();
  c_pl->add_option("--seed", pa.seed, "master seed")->capture_default_str();
  c_pl->add_option("--out-text", pa.out_text, "text report path");
  c_pl->add_option("--out-json", pa.out_json, "JSON report path");

  DynimgArgs da;
  auto* c_dy = app.add_subcommand("dynimg", "render dynamic images from a dataset");
  c_dy->add_option("--data", da.data, "dataset prefix")->required();
  c_dy->add_option("--episode", da.episode, "episode index")->capture_default_str();
  c_dy->add_option("--t0", da.t0, "window start")->capture_default_str();
  c_dy->add_option("--window", da.window, "window length")->capture_default_str();
  c_dy->add_option("--out", da.out, "output PPM path")->required();
  c_dy->add_flag("--pair", da.pair, "also write the (I_t, I_T) pair difference");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (c_gd->parsed()) return cmd_gen_data(gd);
    if (c_tr->parsed()) return cmd_train(ta);
    if (c_ev->parsed()) return cmd_eval(ea);
    if (c_ro->parsed()) return cmd_rollout(ra);
    if (c_pl->parsed()) return cmd_plan(pa);
    if (c_dy->parsed()) return cmd_dynimg(da);
  } catch (const sim::PlanningFailure& e) {
    std::cerr << "planning failure: " << e.what() << "\n";
    return 4;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid arguments: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "invalid arguments: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
