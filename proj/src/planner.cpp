#include "geeco/planner.hpp"

#include <algorithm>
#include <cmath>

#include "geeco/ops.hpp"
#include "geeco/rng.hpp"

namespace geeco::plan {

using dynimg::Frame;

Frame downsample2x(const Frame& f) {
  const int c = f.dim(0), h = f.dim(1), w = f.dim(2);
  if (h % 2 != 0 || w % 2 != 0) throw std::invalid_argument("downsample2x: odd resolution");
  Frame out({c, h / 2, w / 2});
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < h / 2; ++y)
      for (int x = 0; x < w / 2; ++x)
        out.at3(ci, y, x) = 0.25f * (f.at3(ci, 2 * y, 2 * x) + f.at3(ci, 2 * y, 2 * x + 1) +
                                     f.at3(ci, 2 * y + 1, 2 * x) + f.at3(ci, 2 * y + 1, 2 * x + 1));
  return out;
}

double l2_frame_distance(const Frame& a, const Frame& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("l2_frame_distance: shape mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

// ---- oracle ----

OracleModel::OracleModel(const sim::WorldConfig& cfg, int resolution) : cfg_(cfg) {
  cfg_.resolution = resolution;
}

void OracleModel::bind(const sim::WorldState& state, const Frame&) {
  state_ = state;
  bound_ = true;
}

Frame OracleModel::predict(const std::vector<sim::Command>& actions) {
  if (!bound_) throw std::runtime_error("oracle model: predict before bind");
  sim::WorldState s = state_;
  for (const auto& a : actions) s = sim::step(s, a, cfg_);
  return sim::render(s, cfg_);
}

// ---- learned model ----

namespace {

struct LayerDef {
  const char* name;
  int c_in, c_out, stride;
  bool upsample_before, relu;
};

// 32x32 input; 3 strided encoder convs to 4x4, action concat, one mixing
// conv, 3 upsampling decoder convs back to 32x32 (last one linear).
constexpr int kActionDim = 4;
const LayerDef kLayers[] = {
    {"enc0", 3, 16, 2, false, true},  {"enc1", 16, 32, 2, false, true},
    {"enc2", 32, 64, 2, false, true}, {"mid", 64 + kActionDim, 64, 1, false, true},
    {"dec0", 64, 32, 1, true, true},  {"dec1", 32, 16, 1, true, true},
    {"dec2", 16, 3, 1, true, false},
};

void add_bias(TensorF& pre, const TensorF& b) {
  const int span = pre.dim(1) * pre.dim(2);
  for (int c = 0; c < pre.dim(0); ++c)
    for (int i = 0; i < span; ++i) pre.data[static_cast<std::size_t>(c) * span + i] += b[c];
}

void bias_grad(const TensorF& dpre, TensorF& gb) {
  const int span = dpre.dim(1) * dpre.dim(2);
  for (int c = 0; c < dpre.dim(0); ++c) {
    float acc = 0;
    for (int i = 0; i < span; ++i) acc += dpre.data[static_cast<std::size_t>(c) * span + i];
    gb[c] += acc;
  }
}

std::array<float, kActionDim> normalized_action(const sim::Command& a,
                                                const sim::WorldConfig& cfg) {
  const float ms = static_cast<float>(cfg.max_step());
  return {static_cast<float>(a.dx) / ms, static_cast<float>(a.dy) / ms,
          static_cast<float>(a.dz) / ms, static_cast<float>(a.grip)};
}

struct ModelPass {
  std::vector<TensorF> inputs, preacts;
  TensorF pre_clamp;
};

}  // namespace

LearnedModel::LearnedModel(const sim::WorldConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  auto rng = make_rng(seed);
  for (const auto& l : kLayers) {
    const int fan_in = l.c_in * 9;
    params_.add(std::string(l.name) + ".w", fan_in_uniform<float>({l.c_out, l.c_in, 3, 3},
                                                                  fan_in, rng));
    // fan-in-scaled biases keep units off the exact ReLU kink
    params_.add(std::string(l.name) + ".b", fan_in_uniform<float>({l.c_out}, fan_in, rng));
  }
}

void LearnedModel::bind(const sim::WorldState&, const Frame& observation) {
  obs_ = observation;
  bound_ = true;
}

namespace {

Frame model_forward(const ParamStoreT<float>& params, const sim::WorldConfig& cfg,
                    const Frame& frame, const sim::Command& action, ModelPass* pass) {
  if (frame.dim(1) != LearnedModel::kResolution || frame.dim(2) != LearnedModel::kResolution)
    throw std::invalid_argument("learned model: expects 32x32 frames");
  TensorF x = frame;
  const auto act = normalized_action(action, cfg);
  for (const auto& l : kLayers) {
    if (l.upsample_before) x = geeco::ops::upsample2x(x);
    if (std::string(l.name) == "mid") {
      // append the tiled action channels
      TensorF cat({l.c_in, x.dim(1), x.dim(2)});
      const int span = x.dim(1) * x.dim(2);
      std::copy(x.data.begin(), x.data.end(), cat.data.begin());
      for (int c = 0; c < kActionDim; ++c)
        for (int i = 0; i < span; ++i)
          cat.data[static_cast<std::size_t>(64 + c) * span + i] = act[c];
      x = std::move(cat);
    }
    if (pass) pass->inputs.push_back(x);
    TensorF pre = geeco::ops::conv2d(x, params.value(std::string(l.name) + ".w"), l.stride);
    add_bias(pre, params.value(std::string(l.name) + ".b"));
    if (pass) pass->preacts.push_back(pre);
    x = l.relu ? geeco::ops::relu(pre) : pre;
  }
  TensorF pre_clamp = frame;
  pre_clamp += x;
  if (pass) pass->pre_clamp = pre_clamp;
  Frame out(pre_clamp.shape);
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = std::min(std::max(pre_clamp[i], 0.0f), 1.0f);
  return out;
}

void model_backward(ParamStoreT<float>& params, const ModelPass& pass, const TensorF& grad_out) {
  TensorF g(grad_out.shape);
  for (std::size_t i = 0; i < g.numel(); ++i)
    g[i] = (pass.pre_clamp[i] > 0.0f && pass.pre_clamp[i] < 1.0f) ? grad_out[i] : 0.0f;
  const int n = static_cast<int>(std::size(kLayers));
  for (int li = n - 1; li >= 0; --li) {
    const auto& l = kLayers[li];
    const std::string id = l.name;
    TensorF dpre = l.relu ? geeco::ops::relu_backward(pass.preacts[li], g) : g;
    bias_grad(dpre, params.grad(id + ".b"));
    TensorF dinput;
    geeco::ops::conv2d_backward(pass.inputs[li], params.value(id + ".w"), l.stride, dpre, dinput,
                                params.grad(id + ".w"));
    if (id == "mid") {
      // drop the gradient on the action channels
      TensorF trimmed({64, dinput.dim(1), dinput.dim(2)});
      std::copy(dinput.data.begin(),
                dinput.data.begin() + static_cast<std::ptrdiff_t>(trimmed.numel()),
                trimmed.data.begin());
      dinput = std::move(trimmed);
    }
    if (l.upsample_before) dinput = geeco::ops::upsample2x_backward(dinput);
    g = std::move(dinput);
  }
}

}  // namespace

Frame LearnedModel::step_predict(const Frame& frame, const sim::Command& action) const {
  return model_forward(params_, cfg_, frame, action, nullptr);
}

Frame LearnedModel::predict(const std::vector<sim::Command>& actions) {
  if (!bound_) throw std::runtime_error("learned model: predict before bind");
  Frame f = obs_;
  for (const auto& a : actions) f = step_predict(f, a);
  return f;
}

double LearnedModel::train_step(
    const std::vector<std::tuple<Frame, sim::Command, Frame>>& batch, double lr) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  params_.zero_grads();
  double loss = 0;
  for (const auto& [frame, action, next] : batch) {
    ModelPass pass;
    const Frame pred = model_forward(params_, cfg_, frame, action, &pass);
    loss += static_cast<double>(geeco::ops::l1(pred, next)) / batch.size();
    const TensorF g =
        geeco::ops::l1_backward(pred, next, static_cast<float>(1.0 / batch.size()));
    model_backward(params_, pass, g);
  }
  params_.mark_all_grads_set();
  adam_step(params_, lr);
  return loss;
}

std::vector<double> train_forward_model(LearnedModel& model, const data::Dataset& ds, int steps,
                                        int batch, double lr, std::uint64_t seed) {
  if (ds.episodes.empty()) throw std::invalid_argument("train_forward_model: empty dataset");
  auto rng = make_rng(seed);
  std::uniform_int_distribution<int> uep(0, static_cast<int>(ds.episodes.size()) - 1);
  std::uniform_int_distribution<int> ut(0, ds.episode_length - 2);
  auto frame_at = [&](const data::Episode& ep, int t) {
    Frame f = data::dequantize_frame(ep.steps[static_cast<std::size_t>(t)].image, ds.height,
                                     ds.width);
    while (f.dim(1) > LearnedModel::kResolution) f = downsample2x(f);
    return f;
  };
  std::vector<double> losses;
  for (int s = 0; s < steps; ++s) {
    std::vector<std::tuple<Frame, sim::Command, Frame>> b;
    for (int i = 0; i < batch; ++i) {
      const auto& ep = ds.episodes[static_cast<std::size_t>(uep(rng))];
      const int t = ut(rng);
      const auto& st = ep.steps[static_cast<std::size_t>(t)];
      sim::Command cmd;
      cmd.dx = st.u_dee[0];
      cmd.dy = st.u_dee[1];
      cmd.dz = st.u_dee[2];
      cmd.grip = st.u_grp;
      b.emplace_back(frame_at(ep, t), cmd, frame_at(ep, t + 1));
    }
    losses.push_back(model.train_step(b, lr));
  }
  return losses;
}

// ---- CEM ----

CemResult cem_plan(ForwardModel& model, const Frame& target, const CemParams& p,
                   std::uint64_t seed, const sim::WorldConfig& wcfg) {
  if (p.elites <= 0 || p.samples < p.elites)
    throw std::invalid_argument("cem_plan: need samples >= elites > 0");
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> ugrip(-1, 1);
  const double ms = wcfg.max_step();

  std::vector<std::array<double, 3>> mu(p.horizon, {0, 0, 0});
  std::vector<std::array<double, 3>> sigma(p.horizon, {p.sigma_init, p.sigma_init, p.sigma_init});

  struct Candidate {
    std::vector<std::array<double, 3>> a;  // normalized displacements
    std::vector<int> grip;
    double cost = 0;
  };
  auto to_commands = [&](const Candidate& c) {
    std::vector<sim::Command> cmds(static_cast<std::size_t>(p.horizon));
    for (int t = 0; t < p.horizon; ++t) {
      cmds[t].dx = c.a[t][0] * ms;
      cmds[t].dy = c.a[t][1] * ms;
      cmds[t].dz = c.a[t][2] * ms;
      cmds[t].grip = c.grip[t];
    }
    return cmds;
  };

  Candidate incumbent;
  bool have_incumbent = false;
  CemResult res;

  for (int it = 0; it < p.iterations; ++it) {
    std::vector<Candidate> pool;
    for (int s = 0; s < p.samples; ++s) {
      Candidate c;
      c.a.resize(static_cast<std::size_t>(p.horizon));
      c.grip.resize(static_cast<std::size_t>(p.horizon));
      for (int t = 0; t < p.horizon; ++t) {
        for (int d = 0; d < 3; ++d) {
          const double v = mu[t][d] + sigma[t][d] * gauss(rng);
          c.a[t][d] = std::min(1.0, std::max(-1.0, v));
        }
        c.grip[t] = ugrip(rng);
      }
      pool.push_back(std::move(c));
    }
    // elitism: the running best competes in every iteration
    if (have_incumbent) pool.push_back(incumbent);
    for (auto& c : pool) c.cost = l2_frame_distance(model.predict(to_commands(c)), target);
    std::stable_sort(pool.begin(), pool.end(),
                     [](const Candidate& x, const Candidate& y) { return x.cost < y.cost; });

    for (int t = 0; t < p.horizon; ++t)
      for (int d = 0; d < 3; ++d) {
        double mean = 0;
        for (int e = 0; e < p.elites; ++e) mean += pool[e].a[t][d];
        mean /= p.elites;
        double var = 0;
        for (int e = 0; e < p.elites; ++e) {
          const double dv = pool[e].a[t][d] - mean;
          var += dv * dv;
        }
        var /= p.elites;
        mu[t][d] = mean;
        sigma[t][d] = std::max(std::sqrt(var), p.sigma_min);
      }

    incumbent = pool.front();
    have_incumbent = true;
    res.iter_best_cost.push_back(incumbent.cost);
  }

  res.best = to_commands(incumbent);
  res.best_cost = incumbent.cost;
  res.mu = mu;
  res.sigma = sigma;
  return res;
}

Schedule bottleneck_schedule(int demo_length, int n_goals, int budget) {
  if (demo_length <= 0 || n_goals <= 0 || budget < n_goals)
    throw std::invalid_argument("bottleneck_schedule: invalid arguments");
  Schedule s;
  const int per = (demo_length + n_goals - 1) / n_goals;
  for (int j = 1; j <= n_goals; ++j) s.frame_indices.push_back(std::min(j * per, demo_length));
  s.ticks_per_goal = budget / n_goals;
  return s;
}

VfsResult run_vfs(ForwardModel& model, const sim::WorldState& world0, const data::Episode& demo,
                  const VfsOptions& opt, std::uint64_t seed, const sim::WorldConfig& wcfg) {
  const int H = static_cast<int>(demo.steps.size());
  const Schedule sched = bottleneck_schedule(H, opt.n_goals, opt.budget);
  const int res_h = static_cast<int>(std::sqrt(demo.steps.front().image.size() / 3.0) + 0.5);

  auto goal_frame = [&](int goal) {
    // demo frames are pre-step; the padded tail makes the last one final
    const int idx = std::min(sched.frame_indices[static_cast<std::size_t>(goal)], H - 1);
    Frame f = data::dequantize_frame(demo.steps[static_cast<std::size_t>(idx)].image, res_h,
                                     res_h);
    while (f.dim(1) > 32) f = downsample2x(f);
    return f;
  };

  sim::WorldConfig small = wcfg;
  small.resolution = 32;

  VfsResult out;
  sim::WorldState s = world0;
  std::vector<sim::Command> current;
  for (int t = 0; t < opt.budget; ++t) {
    if (t % opt.cem.horizon == 0) {
      const int goal = std::min(t / sched.ticks_per_goal, opt.n_goals - 1);
      model.bind(s, sim::render(s, small));
      const auto plan = cem_plan(model, goal_frame(goal), opt.cem,
                                 derive_seed(seed, static_cast<std::uint64_t>(out.replans)),
                                 wcfg);
      current = plan.best;
      ++out.replans;
    }
    const sim::Command cmd = current[static_cast<std::size_t>(t % opt.cem.horizon)];
    out.trace.steps.push_back({s, cmd, Frame({3, 1, 1}), sim::proprio(s, wcfg)});
    s = sim::step(s, cmd, wcfg, &out.trace.events);
  }
  out.trace.final_state = s;
  return out;
}

}  // namespace geeco::plan
