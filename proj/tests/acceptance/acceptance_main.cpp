// Acceptance gate: one pass/fail line per criterion, exit 0 iff all pass.
//
// Usage: acceptance [--work-dir DIR] [--cli PATH] [N ...]
//   N        criterion numbers to run (default: all)
//   DIR      cache directory for datasets, checkpoints and evaluation counts;
//            expensive artifacts found there are reused instead of recomputed
//   PATH     command-line binary used by the determinism criterion

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "geeco/controller.hpp"
#include "geeco/dataset.hpp"
#include "geeco/dynimg.hpp"
#include "geeco/evalharness.hpp"
#include "geeco/expert.hpp"
#include "geeco/ops.hpp"
#include "geeco/param_store.hpp"
#include "geeco/planner.hpp"
#include "geeco/rng.hpp"
#include "geeco/world.hpp"

#include "json.hpp"

namespace fs = std::filesystem;
using namespace geeco;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_work = "acceptance_work";
std::string g_cli = "geeco";

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os.precision(prec);
  os << std::fixed << v;
  return os.str();
}

// ---------------------------------------------------------------- criterion 1

bool criterion1(std::string& msg) {
  const auto t0 = Clock::now();
  double max_coeff_err = 0, max_sum_err = 0;
  for (int H = 1; H <= 100; ++H) {
    const auto coeffs = dynimg::rank_coefficients(H);
    double sum = 0;
    for (int t = 1; t <= H; ++t) {
      double brute = 0;  // unsimplified double sum over ranking pairs
      for (int q = t; q <= H; ++q) brute += (2.0 * q - H - 1.0) / q;
      max_coeff_err = std::max(max_coeff_err, std::abs(coeffs.alpha[t - 1] - brute));
      sum += coeffs.alpha[t - 1];
    }
    max_sum_err = std::max(max_sum_err, std::abs(sum));
  }
  const double dt = seconds_since(t0);
  msg = "coefficient err " + fmt(max_coeff_err, 16) + " (tol 1e-12), zero-sum err " +
        fmt(max_sum_err, 12) + " (tol 1e-9), " + fmt(dt) + "s (limit 1s)";
  return max_coeff_err < 1e-12 && max_sum_err < 1e-9 && dt < 1.0;
}

// ---------------------------------------------------------------- criterion 2

bool criterion2(std::string& msg) {
  const auto t0 = Clock::now();
  auto rng = make_rng(2024);
  std::uniform_real_distribution<float> uni(0.0f, 1.0f);
  std::uniform_int_distribution<int> uh(2, 9);
  double worst = 0;
  auto rand_frames = [&](int H, const std::vector<int>& shape) {
    std::vector<dynimg::Frame> fs;
    for (int t = 0; t < H; ++t) {
      dynimg::Frame f(shape);
      for (auto& v : f.data) v = uni(rng);
      fs.push_back(std::move(f));
    }
    return fs;
  };
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<int> shape{3, 5, 4};
    const int H = uh(rng);
    const auto xs = rand_frames(H, shape);
    const auto ys = rand_frames(H, shape);
    const float a = 0.3f + uni(rng), b = uni(rng) - 0.5f;

    // offset invariance: a common additive frame cancels (the coefficients sum to zero)
    auto shifted = xs;
    for (auto& f : shifted)
      for (std::size_t i = 0; i < f.numel(); ++i) f[i] += ys[0][i];
    const auto di_x = dynimg::dynamic_image(xs);
    const auto di_shift = dynimg::dynamic_image(shifted);
    for (std::size_t i = 0; i < di_x.numel(); ++i)
      worst = std::max(worst, std::abs(double(di_shift[i]) - double(di_x[i])));

    // linearity: rho(aX + bY) = a rho(X) + b rho(Y)
    auto mixed = xs;
    for (int t = 0; t < H; ++t)
      for (std::size_t i = 0; i < mixed[t].numel(); ++i)
        mixed[t][i] = a * xs[t][i] + b * ys[t][i];
    const auto di_y = dynimg::dynamic_image(ys);
    const auto di_mix = dynimg::dynamic_image(mixed);
    for (std::size_t i = 0; i < di_mix.numel(); ++i)
      worst = std::max(worst,
                       std::abs(double(di_mix[i]) - (a * double(di_x[i]) + b * double(di_y[i]))));

    // H = 1 maps to zero
    const auto di_one = dynimg::dynamic_image({xs[0]});
    for (std::size_t i = 0; i < di_one.numel(); ++i)
      worst = std::max(worst, std::abs(double(di_one[i])));

    // H = 2 is half the frame difference
    const auto di_two = dynimg::dynamic_image({xs[0], ys[0]});
    for (std::size_t i = 0; i < di_two.numel(); ++i)
      worst = std::max(worst,
                       std::abs(double(di_two[i]) - 0.5 * (double(ys[0][i]) - double(xs[0][i]))));
  }
  const double dt = seconds_since(t0);
  msg = "max invariance err " + fmt(worst, 8) + " (tol 1e-5) over 100 random inputs, " +
        fmt(dt) + "s (limit 10s)";
  return worst < 1e-5 && dt < 10.0;
}

// ---------------------------------------------------------------- criterion 3

using Tensor = TensorT<double>;

double rel_err(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// central finite differences of scalar() w.r.t. x against the analytic grad;
// the floor keeps round-off noise on near-zero gradients from dominating the
// relative error
double fd_check(Tensor& x, const Tensor& grad, const std::function<double()>& scalar,
                int stride = 1, double floor = 1e-9) {
  const double h = 1e-5;
  double worst = 0;
  for (std::size_t i = 0; i < x.numel(); i += static_cast<std::size_t>(stride)) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = scalar();
    x[i] = keep - h;
    const double dn = scalar();
    x[i] = keep;
    worst = std::max(worst, rel_err(grad[i], (up - dn) / (2.0 * h), floor));
  }
  return worst;
}

Tensor randn(const std::vector<int>& shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Tensor t(shape);
  for (auto& v : t.data) v = g(rng);
  return t;
}

bool criterion3(std::string& msg) {
  const auto t0 = Clock::now();
  double worst_op = 0, worst_e2e = 0;

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto rng = make_rng(seed);
    // projection weights make each op's output a scalar
    const auto project = [](const Tensor& y, const Tensor& r) {
      double s = 0;
      for (std::size_t i = 0; i < y.numel(); ++i) s += y[i] * r[i];
      return s;
    };

    {  // conv2d, both strides
      for (int stride : {1, 2}) {
        Tensor x = randn({2, 6, 6}, rng);
        Tensor k = randn({3, 2, 3, 3}, rng, 0.5);
        Tensor r = randn(ops::conv2d(x, k, stride).shape, rng);
        const auto scalar = [&] { return project(ops::conv2d(x, k, stride), r); };
        Tensor gx(x.shape), gk(k.shape);
        ops::conv2d_backward(x, k, stride, r, gx, gk);
        worst_op = std::max(worst_op, fd_check(x, gx, scalar));
        worst_op = std::max(worst_op, fd_check(k, gk, scalar));
      }
    }
    {  // dense
      Tensor x = randn({5}, rng), w = randn({4, 5}, rng), b = randn({4}, rng);
      Tensor r = randn({4}, rng);
      const auto scalar = [&] { return project(ops::dense(x, w, b), r); };
      Tensor gx(x.shape), gw(w.shape), gb(b.shape);
      ops::dense_backward(x, w, r, gx, gw, gb);
      worst_op = std::max(worst_op, fd_check(x, gx, scalar));
      worst_op = std::max(worst_op, fd_check(w, gw, scalar));
      worst_op = std::max(worst_op, fd_check(b, gb, scalar));
    }
    {  // relu, away from the kink
      Tensor x = randn({12}, rng);
      for (auto& v : x.data)
        if (std::abs(v) < 0.1) v += (v >= 0 ? 0.2 : -0.2);
      Tensor r = randn({12}, rng);
      const auto scalar = [&] { return project(ops::relu(x), r); };
      const Tensor gx = ops::relu_backward(x, r);
      Tensor xc = x;
      worst_op = std::max(worst_op, fd_check(xc, gx, [&] { return project(ops::relu(xc), r); }));
      (void)scalar;
    }
    {  // lstm_cell: all six inputs
      const int d = 5, hdim = 4;
      Tensor x = randn({d}, rng), h0 = randn({hdim}, rng, 0.5), c0 = randn({hdim}, rng, 0.5);
      Tensor wx = randn({4 * hdim, d}, rng, 0.4), wh = randn({4 * hdim, hdim}, rng, 0.4);
      Tensor b = randn({4 * hdim}, rng, 0.2);
      Tensor r = randn({hdim}, rng);
      const auto scalar = [&] {
        Tensor h(std::vector<int>{hdim}), c(std::vector<int>{hdim});
        ops::lstm_cell(x, h0, c0, wx, wh, b, h, c,
                       static_cast<ops::LstmCache<double>*>(nullptr));
        return project(h, r);
      };
      ops::LstmCache<double> cache;
      Tensor h(std::vector<int>{hdim}), c(std::vector<int>{hdim});
      ops::lstm_cell(x, h0, c0, wx, wh, b, h, c, &cache);
      Tensor gx(x.shape), gh(h0.shape), gc(c0.shape), gwx(wx.shape), gwh(wh.shape), gb(b.shape);
      Tensor gc_in(std::vector<int>{hdim});  // no gradient flows in via c
      ops::lstm_cell_backward(cache, wx, wh, r, gc_in, gx, gh, gc, gwx, gwh, gb);
      worst_op = std::max(worst_op, fd_check(x, gx, scalar));
      worst_op = std::max(worst_op, fd_check(h0, gh, scalar));
      worst_op = std::max(worst_op, fd_check(c0, gc, scalar));
      worst_op = std::max(worst_op, fd_check(wx, gwx, scalar));
      worst_op = std::max(worst_op, fd_check(wh, gwh, scalar));
      worst_op = std::max(worst_op, fd_check(b, gb, scalar));
    }
    {  // mse and l1 (offset keeps l1 away from its kink)
      Tensor p = randn({6}, rng), t = randn({6}, rng);
      for (std::size_t i = 0; i < p.numel(); ++i)
        if (std::abs(p[i] - t[i]) < 0.05) p[i] += 0.1;
      const Tensor gm = ops::mse_backward(p, t);
      worst_op = std::max(worst_op, fd_check(p, gm, [&] { return double(ops::mse(p, t)); }));
      const Tensor gl = ops::l1_backward(p, t);
      worst_op = std::max(worst_op, fd_check(p, gl, [&] { return double(ops::l1(p, t)); }));
    }
    {  // softmax cross-entropy on logits
      Tensor logits = randn({3}, rng), target(std::vector<int>{3});
      target[static_cast<std::size_t>(seed % 3)] = 1.0;
      const Tensor g = ops::cce_backward(logits, target);
      worst_op = std::max(
          worst_op,
          fd_check(logits, g, [&] { return double(ops::categorical_cross_entropy(logits, target)); }));
    }
    {  // upsample2x
      Tensor x = randn({2, 3, 3}, rng);
      Tensor r = randn({2, 6, 6}, rng);
      const Tensor g = ops::upsample2x_backward(r);
      worst_op = std::max(worst_op, fd_check(x, g, [&] { return project(ops::upsample2x(x), r); }));
    }
  }

  // end-to-end: total objective of a tiny controller, every variant
  ctrl::ControllerConfig tiny;
  tiny.resolution = 8;
  tiny.encoder.filters = {2, 2};
  tiny.encoder.strides = {2, 2};
  tiny.lstm_size = 6;
  tiny.fc_size = 5;
  tiny.lambda = 0.7;
  for (auto variant : {ctrl::Variant::R, ctrl::Variant::D, ctrl::Variant::F,
                       ctrl::Variant::Uncond}) {
    tiny.variant = variant;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      ctrl::Controller<double> net(tiny, seed);
      auto rng = make_rng(seed + 77);
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      ctrl::Window w;
      for (int t = 0; t < tiny.buffer_size; ++t) {
        dynimg::Frame f({3, 8, 8});
        for (auto& v : f.data) v = static_cast<float>(uni(rng));
        w.frames.push_back(std::move(f));
        w.proprios.push_back({uni(rng) - 0.5, uni(rng) - 0.5, uni(rng) - 0.5, uni(rng) - 0.5});
      }
      w.target = dynimg::Frame({3, 8, 8});
      for (auto& v : w.target.data) v = static_cast<float>(uni(rng));
      w.u_dee = {0.4, -0.2, 0.1};
      w.grip_class = static_cast<int>(seed % 3);
      w.q_ee = {0.1, 0.2, -0.3};
      w.q_obj = {-0.1, 0.0, 0.2};

      net.params.zero_grads();
      net.train_window(w, 1.0);
      const auto scalar = [&] { return net.train_window(w, 0.0).total(tiny.lambda); };
      for (auto& [name, entry] : net.params.params) {
        Tensor& value = entry.value;
        const int stride = std::max<int>(1, static_cast<int>(value.numel() / 24));
        worst_e2e = std::max(worst_e2e, fd_check(value, entry.grad, scalar, stride, 1e-6));
      }
    }
  }

  const double dt = seconds_since(t0);
  msg = "op rel err " + fmt(worst_op, 7) + " (tol 1e-4), end-to-end rel err " +
        fmt(worst_e2e, 6) + " (tol 1e-3), 5 seeds each, " + fmt(dt, 1) + "s (limit 300s)";
  return worst_op < 1e-4 && worst_e2e < 1e-3 && dt < 300.0;
}

// ---------------------------------------------------------------- criterion 4

bool criterion4(std::string& msg) {
  const auto a = eval::binomial_ci(798, 1000);
  const auto b = eval::binomial_ci(998, 1000);
  msg = "798/1000 -> " + eval::format_ci(a) + " (want 79.80 ± 2.49), 998/1000 -> " +
        eval::format_ci(b) + " (want 99.80 ± 0.28)";
  return std::abs(a.mean - 79.80) < 0.01 && std::abs(a.halfwidth - 2.49) < 0.01 &&
         std::abs(b.mean - 99.80) < 0.01 && std::abs(b.halfwidth - 0.28) < 0.01;
}

// ---------------------------------------------------------------- criterion 5

bool criterion5(std::string& msg) {
  const auto t0 = Clock::now();
  const sim::WorldConfig cfg;
  int ok_push = 0, ok_pick = 0, replay_ok = 0;
  const int n = 500;
  for (auto skill : {sim::Skill::Push, sim::Skill::PickPlace}) {
    for (int i = 0; i < n; ++i) {
      const auto gen = expert::generate_episode(skill, sim::ScenarioKind::Goal2Cube2, i, 60,
                                                4242, cfg);
      const auto& ep = gen.episode;
      auto [world, sampled] = sim::sample_scenario(ep.task.kind, ep.task.skill, ep.seed, cfg);
      const sim::TaskSpec task = ep.task;  // the generator rebalances the combo
      sim::Trace tr;
      auto s = world;
      for (const auto& st : ep.steps) {
        sim::Command c;
        c.dx = st.u_dee[0];
        c.dy = st.u_dee[1];
        c.dz = st.u_dee[2];
        c.grip = st.u_grp;
        tr.steps.push_back({s, c, dynimg::Frame({3, 1, 1}), {}});
        s = sim::step(s, c, cfg, &tr.events);
      }
      tr.final_state = s;
      const auto rec = sim::evaluate_success(tr, task);
      if (skill == sim::Skill::Push) {
        if (rec.reach && rec.push_or_place) ++ok_push;
      } else {
        if (rec.reach && rec.pick && rec.push_or_place) ++ok_pick;
      }
      if (expert::replay_matches(ep, cfg)) ++replay_ok;
    }
  }
  const double dt = seconds_since(t0);
  msg = "push " + std::to_string(ok_push) + "/500, pick-place " + std::to_string(ok_pick) +
        "/500, bitwise replays " + std::to_string(replay_ok) + "/1000, " + fmt(dt, 1) +
        "s (limit 600s)";
  return ok_push == n && ok_pick == n && replay_ok == 2 * n && dt < 600.0;
}

// --------------------------------------------------- shared training plumbing

constexpr int kTrainSteps = 30000;  // well under the 150k-step allowance
constexpr int kEvalBudget = 200;    // rollout ticks per evaluation trial
constexpr std::uint64_t kDataSeed = 11;

std::string dataset_prefix() {
  const std::string prefix = g_work + "/push64";
  if (!fs::exists(prefix + "_train.bin")) {
    std::cout << "  [building 800-episode pushing dataset at 64x64]" << std::endl;
    expert::generate_dataset(sim::Skill::Push, sim::ScenarioKind::Goal2Cube2, 800, 60,
                             kDataSeed, prefix, sim::WorldConfig{});
  }
  return prefix;
}

ctrl::ControllerConfig desk_config(ctrl::Variant v) {
  ctrl::ControllerConfig cfg;
  cfg.variant = v;
  cfg.lambda = 1.0;
  return cfg;
}

// trains (or loads a cached) checkpoint for the given variant and seed
std::string checkpoint_for(ctrl::Variant v, std::uint64_t seed) {
  const std::string prefix =
      g_work + "/ckpt_" + ctrl::to_string(v) + "_s" + std::to_string(seed);
  if (fs::exists(prefix + ".bin")) return prefix;

  std::cout << "  [training GEECO-" << ctrl::to_string(v) << " seed " << seed << ", "
            << kTrainSteps << " steps]" << std::endl;
  const std::string data = dataset_prefix();
  const auto train_ds = data::load_dataset(data + "_train");
  const auto val_ds = data::load_dataset(data + "_val");
  ctrl::Controller<float> net(desk_config(v), seed);
  ctrl::TrainOptions opt;
  opt.steps = kTrainSteps;
  opt.batch = 8;
  opt.lr = 2e-4;
  opt.seed = seed;
  opt.log_every = 200;
  opt.val_every = 1000;
  opt.val_trials = 32;
  opt.val_budget = kEvalBudget;
  opt.ckpt_path = prefix;
  opt.log_path = prefix + ".log";
  ctrl::train(net, train_ds, &val_ds, sim::WorldConfig{}, opt);
  return prefix;
}

// evaluates a checkpoint over pushing trials, caching the counts on disk
eval::Counts eval_counts(ctrl::Variant v, std::uint64_t seed, sim::ScenarioKind kind,
                         int trials) {
  const std::string tag = g_work + "/eval_" + ctrl::to_string(v) + "_s" +
                          std::to_string(seed) + "_" + sim::to_string(kind) + ".json";
  if (fs::exists(tag)) {
    nlohmann::json j;
    std::ifstream(tag) >> j;
    return {j["n"], j["reach"], j["pick"], j["final"]};
  }
  const std::string ckpt = checkpoint_for(v, seed);
  ctrl::Controller<float> net(desk_config(v), seed);
  load_checkpoint(net.params, ckpt);
  const sim::WorldConfig cfg;
  eval::Policy policy = [&](const sim::WorldState& w, const sim::TaskSpec& task,
                            const dynimg::Frame* target, std::uint64_t) {
    return ctrl::rollout(net, w, task, target, kEvalBudget, cfg);
  };
  eval::TrialOptions opt;
  opt.skill = sim::Skill::Push;
  opt.kind = kind;
  opt.trials = trials;
  opt.seed = 909;
  std::cout << "  [evaluating GEECO-" << ctrl::to_string(v) << " seed " << seed << " on "
            << sim::to_string(kind) << ", " << trials << " trials]" << std::endl;
  const auto counts = eval::run_trials(policy, opt, cfg);
  nlohmann::json j{{"n", counts.n},
                   {"reach", counts.reach},
                   {"pick", counts.pick},
                   {"final", counts.final_ok}};
  std::ofstream(tag) << j.dump() << "\n";
  return counts;
}

// ---------------------------------------------------------------- criterion 6

bool criterion6(std::string& msg) {
  std::ostringstream os;
  bool pass = false;
  for (std::uint64_t seed = 1; seed <= 3 && !pass; ++seed) {
    const auto c = eval_counts(ctrl::Variant::D, seed, sim::ScenarioKind::Goal2Cube2, 200);
    const double reach = 100.0 * c.reach / c.n, push = 100.0 * c.final_ok / c.n;
    os << "seed " << seed << ": reach " << fmt(reach, 1) << "% push " << fmt(push, 1) << "%; ";
    pass = reach >= 70.0 && push >= 40.0;
  }
  msg = os.str() + "thresholds reach >= 70% and push >= 40% over 200 trials, best of 3 seeds";
  return pass;
}

// ---------------------------------------------------------------- criterion 7

bool criterion7(std::string& msg) {
  // reuse the first criterion-6 seed that has a cached evaluation, else seed 1
  std::uint64_t d_seed = 1;
  for (std::uint64_t s = 1; s <= 3; ++s)
    if (fs::exists(g_work + "/eval_D_s" + std::to_string(s) + "_goal2cube2.json")) {
      d_seed = s;
      break;
    }
  std::ostringstream os;
  std::array<double, 3> drop{};
  const std::array<ctrl::Variant, 3> variants{ctrl::Variant::R, ctrl::Variant::D,
                                             ctrl::Variant::F};
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const std::uint64_t seed = variants[i] == ctrl::Variant::D ? d_seed : 1;
    const auto clean = eval_counts(variants[i], seed, sim::ScenarioKind::Goal2Cube2, 200);
    const auto prisma = eval_counts(variants[i], seed, sim::ScenarioKind::BgPrisma, 200);
    const double cr = static_cast<double>(clean.reach) / clean.n;
    const double pr = static_cast<double>(prisma.reach) / prisma.n;
    drop[i] = cr > 0 ? (cr - pr) / cr : 0.0;
    os << ctrl::to_string(variants[i]) << ": reach " << fmt(100 * cr, 1) << "% -> "
       << fmt(100 * pr, 1) << "% (rel drop " << fmt(100 * drop[i], 1) << "%); ";
  }
  msg = os.str() + "require R's relative drop strictly above D's and F's";
  return drop[0] > drop[1] && drop[0] > drop[2];
}

// ---------------------------------------------------------------- criterion 8

// fake model used for the exact refit/monotonicity checks: the "frame" is the
// final end-effector position, so the cost landscape is a known quadratic
class PointModel : public plan::ForwardModel {
 public:
  void bind(const sim::WorldState& state, const dynimg::Frame&) override { state_ = state; }
  dynimg::Frame predict(const std::vector<sim::Command>& actions) override {
    double x = state_.gripper.x, y = state_.gripper.y, z = state_.gripper.z;
    for (const auto& a : actions) x += a.dx, y += a.dy, z += a.dz;
    dynimg::Frame f({3, 1, 1});
    f.data = {float(x), float(y), float(z)};
    return f;
  }

 private:
  sim::WorldState state_;
};

bool criterion8(std::string& msg) {
  const auto t0 = Clock::now();
  const sim::WorldConfig cfg;

  // exact invariants on the known landscape
  {
    PointModel model;
    sim::WorldState s;
    model.bind(s, dynimg::Frame());
    plan::CemParams p;
    p.horizon = 4;
    p.iterations = 5;
    p.samples = 40;
    p.elites = 8;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      dynimg::Frame goal({3, 1, 1});
      goal.data = {0.05f, -0.04f, 0.03f};
      const auto res = plan::cem_plan(model, goal, p, seed, cfg);
      for (std::size_t i = 1; i < res.iter_best_cost.size(); ++i)
        if (res.iter_best_cost[i] > res.iter_best_cost[i - 1]) {
          msg = "per-iteration best cost increased";
          return false;
        }
      for (const auto& st : res.sigma)
        for (double v : st)
          if (v < p.sigma_min) {
            msg = "sigma fell below its floor";
            return false;
          }
    }
  }

  // 100 reach tasks: follow ground-truth bottlenecks from a straight-line
  // demonstration with the oracle model at 64x64
  sim::WorldConfig res64 = cfg;
  res64.resolution = 64;
  plan::CemParams cem;  // P=13, 4 iterations, 200 samples, 10 elites
  // the MPC driver narrows the sampling spread so candidate endpoints stay in
  // the image-overlap basin of the nearby sub-goal (~3 cm under this camera)
  cem.sigma_init = 0.3;
  int hits = 0;
  const int tasks = 100;
  auto rng = make_rng(31);
  std::uniform_real_distribution<double> ux(cfg.xmin + 0.05, cfg.xmax - 0.05);
  std::uniform_real_distribution<double> uy(cfg.ymin + 0.05, cfg.ymax - 0.05);
  std::uniform_real_distribution<double> uz(0.04, 0.20);
  for (int i = 0; i < tasks; ++i) {
    auto [world, task] =
        sim::sample_scenario(sim::ScenarioKind::Goal2Cube2, sim::Skill::Push,
                             derive_seed(31, static_cast<std::uint64_t>(i)), cfg);
    const sim::Vec3 goal{ux(rng), uy(rng), uz(rng)};

    // straight-line demonstration, H = 60 ticks
    const int H = 60;
    std::vector<dynimg::Frame> demo;
    {
      auto s = world;
      const double step_frac = 1.0 / H;
      for (int t = 1; t <= H; ++t) {
        sim::Command c;
        c.dx = (goal.x - world.gripper.x) * step_frac;
        c.dy = (goal.y - world.gripper.y) * step_frac;
        c.dz = (goal.z - world.gripper.z) * step_frac;
        s = sim::step(s, c, cfg);
        demo.push_back(sim::render(s, res64));
      }
    }
    // one sub-goal per 13-tick replan; the last two replans polish the final
    // sub-goal, which is where most of the residual positioning error lives
    const auto sched = plan::bottleneck_schedule(H, 10, 130);

    plan::OracleModel oracle(cfg, 64);
    auto s = world;
    int tick = 0;
    std::vector<sim::Command> current;
    for (int t = 0; t < 156; ++t) {
      if (t % cem.horizon == 0) {
        const int goal_idx = std::min(t / sched.ticks_per_goal, 9);
        const int frame = std::min(sched.frame_indices[goal_idx], H) - 1;
        oracle.bind(s, sim::render(s, res64));
        const auto p = plan::cem_plan(oracle, demo[frame], cem,
                                      derive_seed(77, static_cast<std::uint64_t>(i * 256 + t)),
                                      cfg);
        current = p.best;
        tick = 0;
      }
      s = sim::step(s, current[static_cast<std::size_t>(tick++)], cfg);
    }
    const double dx = s.gripper.x - goal.x, dy = s.gripper.y - goal.y,
                 dz = s.gripper.z - goal.z;
    if (std::sqrt(dx * dx + dy * dy + dz * dz) < 0.02) ++hits;
  }

  const double dt = seconds_since(t0);
  msg = "final EE-to-goal < 2cm on " + std::to_string(hits) + "/100 reach tasks (need 90), " +
        "refit and monotonicity invariants exact, " + fmt(dt, 1) + "s (limit 900s)";
  return hits >= 90 && dt < 900.0;
}

// ---------------------------------------------------------------- criterion 9

bool files_equal(const std::string& a, const std::string& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  return !ca.empty() && ca == cb;
}

bool criterion9(std::string& msg) {
  const std::string d = g_work + "/determinism";
  fs::create_directories(d);
  auto run = [&](const std::string& args) {
    const std::string cmd = g_cli + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };

  const std::string gen_args =
      "gen-data --skill push --n 8 --horizon 24 --resolution 64 --seed 5 --force --out ";
  if (!run(gen_args + d + "/a") || !run(gen_args + d + "/b")) {
    msg = "gen-data invocation failed";
    return false;
  }
  bool gen_same = true;
  for (const std::string split : {"train", "val", "test"})
    gen_same = gen_same && files_equal(d + "/a_" + split + ".bin", d + "/b_" + split + ".bin");

  const std::string train_args =
      "train --model geeco --variant D --steps 15 --batch 2 --seed 9 --force --data " + d +
      "/a --out ";
  if (!run(train_args + d + "/ck_a") || !run(train_args + d + "/ck_b")) {
    msg = "train invocation failed";
    return false;
  }
  const bool train_same = files_equal(d + "/ck_a.bin", d + "/ck_b.bin");

  const std::string eval_args =
      "eval --policy expert --skill push --trials 4 --seed 3 --out-json ";
  if (!run(eval_args + d + "/ev_a.json") || !run(eval_args + d + "/ev_b.json")) {
    msg = "eval invocation failed";
    return false;
  }
  const bool eval_same = files_equal(d + "/ev_a.json", d + "/ev_b.json");

  msg = std::string("gen-data ") + (gen_same ? "identical" : "DIFFERS") + ", train " +
        (train_same ? "identical" : "DIFFERS") + ", eval " + (eval_same ? "identical" : "DIFFERS");
  return gen_same && train_same && eval_same;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work-dir" && i + 1 < argc) {
      g_work = argv[++i];
    } else if (arg == "--cli" && i + 1 < argc) {
      g_cli = argv[++i];
    } else {
      wanted.insert(std::atoi(arg.c_str()));
    }
  }
  fs::create_directories(g_work);

  struct Criterion {
    int id;
    const char* title;
    std::function<bool(std::string&)> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "rank-pooling exactness", criterion1},
      {2, "dynamic-image invariances", criterion2},
      {3, "gradient fidelity", criterion3},
      {4, "statistics fidelity", criterion4},
      {5, "expert soundness", criterion5},
      {6, "desk-scale learning, pushing", criterion6},
      {7, "ablation ordering under background distortion", criterion7},
      {8, "planner soundness", criterion8},
      {9, "determinism", criterion9},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    std::string msg;
    bool ok = false;
    try {
      ok = c.fn(msg);
    } catch (const std::exception& e) {
      msg = std::string("exception: ") + e.what();
    }
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.title << " — "
              << msg << std::endl;
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
