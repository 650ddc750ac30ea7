#pragma once

// The GEECO controller family: full model F (observation, motion and
// goal-difference branches), ablations R (feature residual) and D (dynamic
// pair difference), and the unconditioned variant. Training minimises
// MSE(dEE) + CCE(grip) + lambda * (MSE(qEE) + MSE(qOBJ)) over sliding
// windows; inference keeps LSTM state across control steps within a task.

#include <array>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "geeco/dataset.hpp"
#include "geeco/dynimg.hpp"
#include "geeco/ops.hpp"
#include "geeco/param_store.hpp"
#include "geeco/rng.hpp"
#include "geeco/world.hpp"

namespace geeco::ctrl {

enum class Variant { R, D, F, Uncond };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct EncoderSpec {
  std::vector<int> filters{16, 24, 32, 64, 96, 128};
  std::vector<int> strides{1, 2, 2, 2, 2, 2};
  int kernel = 3;

  int out_channels() const { return filters.back(); }
  int stride_product() const {
    return std::accumulate(strides.begin(), strides.end(), 1, std::multiplies<int>());
  }
};

struct ControllerConfig {
  Variant variant = Variant::D;
  double lambda = 1.0;
  int buffer_size = 4;  // K
  EncoderSpec encoder;
  int lstm_size = 128;
  int fc_size = 128;
  int head_dim = 3;
  int resolution = 64;
  int proprio_dim = 4;

  bool uses_diff() const { return variant == Variant::D || variant == Variant::F; }
  bool uses_dyn() const { return variant == Variant::F; }
  bool conditioned() const { return variant != Variant::Uncond; }
  // channels per spatial cell of the fused state tensor
  int state_channels() const {
    const int c = encoder.out_channels();
    switch (variant) {
      case Variant::R: return c + proprio_dim + c;
      case Variant::D: return c + proprio_dim + c;
      case Variant::F: return 3 * c + proprio_dim;
      case Variant::Uncond: return c + proprio_dim;
    }
    return 0;
  }
};

// One training sample: K consecutive (frame, proprio) pairs, the episode's
// final frame as target, and the labels at the window's last step. Action
// and pose labels are pre-normalized into [-1, 1].
struct Window {
  std::vector<dynimg::Frame> frames;
  std::vector<std::vector<double>> proprios;
  dynimg::Frame target;
  std::array<double, 3> u_dee{0, 0, 0};
  int grip_class = 1;  // 0 open, 1 noop, 2 close
  std::array<double, 3> q_ee{0, 0, 0};
  std::array<double, 3> q_obj{0, 0, 0};
};

struct LossTerms {
  double dee = 0, grp = 0, qee = 0, qobj = 0;
  double total(double lambda) const { return dee + grp + lambda * (qee + qobj); }
};

template <typename T>
TensorT<T> to_tensor(const dynimg::Frame& f) {
  TensorT<T> t(f.shape);
  for (std::size_t i = 0; i < f.numel(); ++i) t[i] = static_cast<T>(f[i]);
  return t;
}

template <typename T>
class Controller {
 public:
  ControllerConfig cfg;
  ParamStoreT<T> params;

  Controller(const ControllerConfig& config, std::uint64_t seed) : cfg(config) {
    if (cfg.resolution / cfg.encoder.stride_product() != 2)
      throw std::invalid_argument("controller: encoder must map the input resolution to 2x2");
    auto rng = make_rng(seed);
    auto add_encoder = [&](const std::string& prefix) {
      int c_in = 3;
      for (std::size_t l = 0; l < cfg.encoder.filters.size(); ++l) {
        const int c_out = cfg.encoder.filters[l];
        const int k = cfg.encoder.kernel;
        params.add(prefix + ".conv" + std::to_string(l) + ".w",
                   fan_in_uniform<T>({c_out, c_in, k, k}, c_in * k * k, rng));
        // biases share the fan-in scaling so no unit sits exactly on the
        // ReLU kink at initialization
        params.add(prefix + ".conv" + std::to_string(l) + ".b",
                   fan_in_uniform<T>({c_out}, c_in * k * k, rng));
        c_in = c_out;
      }
    };
    add_encoder("obs");
    if (cfg.uses_dyn()) add_encoder("dyn");
    if (cfg.uses_diff()) add_encoder("diff");

    const int d = 4 * cfg.state_channels();
    const int h = cfg.lstm_size;
    params.add("lstm.wx", fan_in_uniform<T>({4 * h, d}, d, rng));
    params.add("lstm.wh", fan_in_uniform<T>({4 * h, h}, h, rng));
    {
      TensorT<T> b({4 * h});
      for (int j = 0; j < h; ++j) b[h + j] = T(1);  // forget-gate bias
      params.add("lstm.b", std::move(b));
    }
    params.add("fc.w", fan_in_uniform<T>({cfg.fc_size, h}, h, rng));
    params.add("fc.b", fan_in_uniform<T>({cfg.fc_size}, h, rng));
    for (const char* head : {"head_dee", "head_grp", "head_qee", "head_qobj"}) {
      params.add(std::string(head) + ".w",
                 fan_in_uniform<T>({cfg.head_dim, cfg.fc_size}, cfg.fc_size, rng));
      params.add(std::string(head) + ".b",
                 fan_in_uniform<T>({cfg.head_dim}, cfg.fc_size, rng));
    }
  }

  int encoder_count() const { return 1 + (cfg.uses_dyn() ? 1 : 0) + (cfg.uses_diff() ? 1 : 0); }

  struct EncoderPass {
    std::vector<TensorT<T>> inputs;   // input of each conv layer
    std::vector<TensorT<T>> preacts;  // conv + bias, pre-ReLU
    TensorT<T> out;
    bool used = false;
  };

  struct StepCache {
    EncoderPass obs, diff;
    TensorT<T> proprio;
    TensorT<T> state_vec;  // flattened fused state fed into the LSTM
    ops::LstmCache<T> lstm;
  };

  struct ForwardTrace {
    std::vector<StepCache> steps;
    EncoderPass target_pass;  // R
    EncoderPass dyn_pass;     // F
    TensorT<T> h_last, c_last;
    TensorT<T> fc_pre, fc_out;
    TensorT<T> dee, grp_logits, qee, qobj;
  };

  EncoderPass encode(const std::string& prefix, const TensorT<T>& image) const {
    EncoderPass p;
    p.used = true;
    TensorT<T> x = image;
    for (std::size_t l = 0; l < cfg.encoder.filters.size(); ++l) {
      const auto& w = params.value(prefix + ".conv" + std::to_string(l) + ".w");
      const auto& b = params.value(prefix + ".conv" + std::to_string(l) + ".b");
      p.inputs.push_back(x);
      TensorT<T> pre = ops::conv2d(x, w, cfg.encoder.strides[l]);
      const int span = pre.dim(1) * pre.dim(2);
      for (int c = 0; c < pre.dim(0); ++c)
        for (int i = 0; i < span; ++i) pre.data[static_cast<std::size_t>(c) * span + i] += b[c];
      p.preacts.push_back(pre);
      x = ops::relu(pre);
    }
    p.out = std::move(x);
    return p;
  }

  void encode_backward(const std::string& prefix, const EncoderPass& p, TensorT<T> grad_out,
                       ParamStoreT<T>& store) const {
    for (int l = static_cast<int>(cfg.encoder.filters.size()) - 1; l >= 0; --l) {
      const std::string id = prefix + ".conv" + std::to_string(l);
      TensorT<T> dpre = ops::relu_backward(p.preacts[l], grad_out);
      auto& gb = store.grad(id + ".b");
      const int span = dpre.dim(1) * dpre.dim(2);
      for (int c = 0; c < dpre.dim(0); ++c) {
        T acc = T(0);
        for (int i = 0; i < span; ++i) acc += dpre.data[static_cast<std::size_t>(c) * span + i];
        gb[c] += acc;
      }
      TensorT<T> dinput;
      ops::conv2d_backward(p.inputs[l], store.value(id + ".w"), cfg.encoder.strides[l], dpre,
                           dinput, store.grad(id + ".w"));
      grad_out = std::move(dinput);
    }
  }

  // Fuses encoder outputs and the tiled proprio into the flat LSTM input.
  TensorT<T> fuse(const std::vector<const TensorT<T>*>& channel_blocks,
                  const TensorT<T>& proprio, int proprio_slot) const {
    const int sh = channel_blocks.front()->dim(1), sw = channel_blocks.front()->dim(2);
    TensorT<T> s({cfg.state_channels(), sh, sw});
    int c0 = 0;
    int slot = 0;
    auto copy_block = [&](const TensorT<T>& b) {
      for (int c = 0; c < b.dim(0); ++c)
        for (int y = 0; y < sh; ++y)
          for (int x = 0; x < sw; ++x) s.at3(c0 + c, y, x) = b.at3(c, y, x);
      c0 += b.dim(0);
    };
    auto copy_proprio = [&]() {
      for (int c = 0; c < static_cast<int>(proprio.numel()); ++c)
        for (int y = 0; y < sh; ++y)
          for (int x = 0; x < sw; ++x) s.at3(c0 + c, y, x) = proprio[c];
      c0 += static_cast<int>(proprio.numel());
    };
    for (const auto* b : channel_blocks) {
      if (slot == proprio_slot) copy_proprio();
      copy_block(*b);
      ++slot;
    }
    if (slot == proprio_slot || proprio_slot >= slot) copy_proprio();
    TensorT<T> flat({static_cast<int>(s.numel())});
    flat.data = std::move(s.data);
    return flat;
  }

  // One LSTM step with fused state; returns the step cache.
  void lstm_step(const TensorT<T>& state_vec, TensorT<T>& h, TensorT<T>& c,
                 ops::LstmCache<T>& cache) const {
    TensorT<T> h_new, c_new;
    ops::lstm_cell(state_vec, h, c, params.value("lstm.wx"), params.value("lstm.wh"),
                   params.value("lstm.b"), h_new, c_new, &cache);
    h = std::move(h_new);
    c = std::move(c_new);
  }

  static dynimg::Frame normalized_pair(const dynimg::Frame& cur, const dynimg::Frame& tgt) {
    return dynimg::normalize(dynimg::dynamic_pair(cur, tgt));
  }

  ForwardTrace forward(const Window& w, TensorT<T> h, TensorT<T> c) const {
    const int K = cfg.buffer_size;
    if (static_cast<int>(w.frames.size()) != K || static_cast<int>(w.proprios.size()) != K)
      throw std::invalid_argument("controller: window must hold exactly K pairs");
    if (cfg.conditioned() && w.target.numel() == 0)
      throw std::runtime_error("controller: conditioned variant requires a bound target");

    ForwardTrace tr;
    auto proprio_tensor = [&](int j) {
      TensorT<T> p({cfg.proprio_dim});
      for (int i = 0; i < cfg.proprio_dim; ++i) p[i] = static_cast<T>(w.proprios[j][i]);
      return p;
    };

    if (cfg.variant == Variant::R) {
      tr.target_pass = encode("obs", to_tensor<T>(w.target));
      for (int j = 0; j < K; ++j) {
        StepCache sc;
        sc.obs = encode("obs", to_tensor<T>(w.frames[j]));
        sc.proprio = proprio_tensor(j);
        TensorT<T> residual(tr.target_pass.out.shape);
        for (std::size_t i = 0; i < residual.numel(); ++i)
          residual[i] = tr.target_pass.out[i] - sc.obs.out[i];
        sc.state_vec = fuse({&sc.obs.out, &residual}, sc.proprio, 1);
        lstm_step(sc.state_vec, h, c, sc.lstm);
        tr.steps.push_back(std::move(sc));
      }
    } else if (cfg.variant == Variant::D) {
      for (int j = 0; j < K; ++j) {
        StepCache sc;
        sc.obs = encode("obs", to_tensor<T>(w.frames[j]));
        sc.diff = encode("diff", to_tensor<T>(normalized_pair(w.frames[j], w.target)));
        sc.proprio = proprio_tensor(j);
        sc.state_vec = fuse({&sc.obs.out, &sc.diff.out}, sc.proprio, 1);
        lstm_step(sc.state_vec, h, c, sc.lstm);
        tr.steps.push_back(std::move(sc));
      }
    } else if (cfg.variant == Variant::F) {
      StepCache sc;
      sc.obs = encode("obs", to_tensor<T>(w.frames[K - 1]));
      tr.dyn_pass = encode("dyn", to_tensor<T>(dynimg::normalize(dynimg::dynamic_image(w.frames))));
      sc.diff = encode("diff", to_tensor<T>(normalized_pair(w.frames[K - 1], w.target)));
      sc.proprio = proprio_tensor(K - 1);
      sc.state_vec = fuse({&sc.obs.out, &tr.dyn_pass.out, &sc.diff.out}, sc.proprio, 2);
      lstm_step(sc.state_vec, h, c, sc.lstm);
      tr.steps.push_back(std::move(sc));
    } else {  // Uncond
      StepCache sc;
      sc.obs = encode("obs", to_tensor<T>(w.frames[K - 1]));
      sc.proprio = proprio_tensor(K - 1);
      sc.state_vec = fuse({&sc.obs.out}, sc.proprio, 1);
      lstm_step(sc.state_vec, h, c, sc.lstm);
      tr.steps.push_back(std::move(sc));
    }

    tr.h_last = h;
    tr.c_last = c;
    tr.fc_pre = ops::dense(tr.h_last, params.value("fc.w"), params.value("fc.b"));
    tr.fc_out = ops::relu(tr.fc_pre);
    tr.dee = ops::dense(tr.fc_out, params.value("head_dee.w"), params.value("head_dee.b"));
    tr.grp_logits = ops::dense(tr.fc_out, params.value("head_grp.w"), params.value("head_grp.b"));
    tr.qee = ops::dense(tr.fc_out, params.value("head_qee.w"), params.value("head_qee.b"));
    tr.qobj = ops::dense(tr.fc_out, params.value("head_qobj.w"), params.value("head_qobj.b"));
    return tr;
  }

  LossTerms losses(const ForwardTrace& tr, const Window& w) const {
    TensorT<T> dee_t({3}), qee_t({3}), qobj_t({3}), onehot({3});
    for (int i = 0; i < 3; ++i) {
      dee_t[i] = static_cast<T>(w.u_dee[i]);
      qee_t[i] = static_cast<T>(w.q_ee[i]);
      qobj_t[i] = static_cast<T>(w.q_obj[i]);
    }
    onehot[w.grip_class] = T(1);
    LossTerms lt;
    lt.dee = static_cast<double>(ops::mse(tr.dee, dee_t));
    lt.grp = static_cast<double>(ops::categorical_cross_entropy(tr.grp_logits, onehot));
    lt.qee = static_cast<double>(ops::mse(tr.qee, qee_t));
    lt.qobj = static_cast<double>(ops::mse(tr.qobj, qobj_t));
    return lt;
  }

  // Backpropagates the Eq.-style loss; gradients accumulate scaled by gs.
  void backward(const ForwardTrace& tr, const Window& w, double gs) {
    TensorT<T> dee_t({3}), qee_t({3}), qobj_t({3}), onehot({3});
    for (int i = 0; i < 3; ++i) {
      dee_t[i] = static_cast<T>(w.u_dee[i]);
      qee_t[i] = static_cast<T>(w.q_ee[i]);
      qobj_t[i] = static_cast<T>(w.q_obj[i]);
    }
    onehot[w.grip_class] = T(1);

    TensorT<T> d_fc(tr.fc_out.shape);
    auto head_back = [&](const char* name, const TensorT<T>& out, const TensorT<T>& gout) {
      TensorT<T> dx;
      ops::dense_backward(tr.fc_out, params.value(std::string(name) + ".w"), gout, dx,
                          params.grad(std::string(name) + ".w"),
                          params.grad(std::string(name) + ".b"));
      d_fc += dx;
      (void)out;
    };
    head_back("head_dee", tr.dee, ops::mse_backward(tr.dee, dee_t, static_cast<T>(gs)));
    head_back("head_grp", tr.grp_logits, ops::cce_backward(tr.grp_logits, onehot, static_cast<T>(gs)));
    head_back("head_qee", tr.qee, ops::mse_backward(tr.qee, qee_t, static_cast<T>(cfg.lambda * gs)));
    head_back("head_qobj", tr.qobj,
              ops::mse_backward(tr.qobj, qobj_t, static_cast<T>(cfg.lambda * gs)));

    TensorT<T> d_fc_pre = ops::relu_backward(tr.fc_pre, d_fc);
    TensorT<T> d_h;
    ops::dense_backward(tr.h_last, params.value("fc.w"), d_fc_pre, d_h, params.grad("fc.w"),
                        params.grad("fc.b"));

    TensorT<T> d_c({cfg.lstm_size});
    TensorT<T> d_target_feat;  // accumulated grad on psi_obs(I_T), R only
    if (cfg.variant == Variant::R) d_target_feat = TensorT<T>(tr.target_pass.out.shape);

    for (int j = static_cast<int>(tr.steps.size()) - 1; j >= 0; --j) {
      const auto& sc = tr.steps[j];
      TensorT<T> d_state, d_h_prev, d_c_prev;
      ops::lstm_cell_backward(sc.lstm, params.value("lstm.wx"), params.value("lstm.wh"), d_h,
                              d_c, d_state, d_h_prev, d_c_prev, params.grad("lstm.wx"),
                              params.grad("lstm.wh"), params.grad("lstm.b"));
      d_h = std::move(d_h_prev);
      d_c = std::move(d_c_prev);

      // un-fuse the flat state gradient into channel blocks
      const int cells = 4;
      const int c_enc = cfg.encoder.out_channels();
      auto block = [&](int c_offset, int channels) {
        TensorT<T> g({channels, 2, 2});
        for (int ci = 0; ci < channels; ++ci)
          for (int i = 0; i < cells; ++i)
            g.data[static_cast<std::size_t>(ci) * cells + i] =
                d_state[(static_cast<std::size_t>(c_offset) + ci) * cells + i];
        return g;
      };
      if (cfg.variant == Variant::R) {
        TensorT<T> d_obs = block(0, c_enc);
        TensorT<T> d_res = block(c_enc + cfg.proprio_dim, c_enc);
        d_target_feat += d_res;
        for (std::size_t i = 0; i < d_obs.numel(); ++i) d_obs[i] -= d_res[i];
        encode_backward("obs", sc.obs, std::move(d_obs), params);
      } else if (cfg.variant == Variant::D) {
        encode_backward("obs", sc.obs, block(0, c_enc), params);
        encode_backward("diff", sc.diff, block(c_enc + cfg.proprio_dim, c_enc), params);
      } else if (cfg.variant == Variant::F) {
        encode_backward("obs", sc.obs, block(0, c_enc), params);
        encode_backward("dyn", tr.dyn_pass, block(c_enc, c_enc), params);
        encode_backward("diff", sc.diff, block(2 * c_enc + cfg.proprio_dim, c_enc), params);
      } else {
        encode_backward("obs", sc.obs, block(0, c_enc), params);
      }
    }
    if (cfg.variant == Variant::R)
      encode_backward("obs", tr.target_pass, std::move(d_target_feat), params);
  }

  LossTerms train_window(const Window& w, double grad_scale) {
    TensorT<T> h({cfg.lstm_size}), c({cfg.lstm_size});
    ForwardTrace tr = forward(w, h, c);
    const LossTerms lt = losses(tr, w);
    backward(tr, w, grad_scale);
    return lt;
  }

  // ---- inference ----

  struct State {
    dynimg::Frame target;  // empty when unconditioned
  };

  State initial_state(const dynimg::Frame* target) const {
    State st;
    if (target) st.target = *target;
    return st;
  }

  struct Output {
    std::array<double, 3> u_dee{0, 0, 0};
    int grip = 0;  // open = -1, noop = 0, close = +1
    std::array<double, 3> q_ee{0, 0, 0}, q_obj{0, 0, 0};
    std::array<double, 3> grip_logits{0, 0, 0};
  };

  Output control_step(const State& st, const std::vector<dynimg::Frame>& frames,
                      const std::vector<std::vector<double>>& proprios) const {
    Window w;
    w.frames = frames;
    w.proprios = proprios;
    w.target = st.target;
    // Training runs every K-frame window from a zero LSTM state, so inference
    // re-runs the current window the same way each tick. Carrying the
    // recurrent state across overlapping windows compounds it over hundreds of
    // steps, far outside the training regime, and the outputs saturate.
    TensorT<T> h({cfg.lstm_size}), c({cfg.lstm_size});
    ForwardTrace tr = forward(w, h, c);
    Output out;
    int best = 0;
    for (int i = 0; i < 3; ++i) {
      out.u_dee[i] = static_cast<double>(tr.dee[i]);
      out.q_ee[i] = static_cast<double>(tr.qee[i]);
      out.q_obj[i] = static_cast<double>(tr.qobj[i]);
      out.grip_logits[i] = static_cast<double>(tr.grp_logits[i]);
      if (tr.grp_logits[i] > tr.grp_logits[best]) best = i;
    }
    out.grip = best - 1;  // logits ordered (open, noop, close)
    return out;
  }
};

// Sliding window of the K most recent (frame, proprio) pairs; left-padded
// with copies of the oldest entry until K real pairs have been pushed.
class ObservationBuffer {
 public:
  explicit ObservationBuffer(int capacity) : capacity_(capacity) {}

  void push(dynimg::Frame frame, std::vector<double> proprio) {
    frames_.push_back(std::move(frame));
    proprios_.push_back(std::move(proprio));
    while (static_cast<int>(frames_.size()) > capacity_) {
      frames_.pop_front();
      proprios_.pop_front();
    }
  }

  bool empty() const { return frames_.empty(); }

  std::vector<dynimg::Frame> frames() const { return padded(frames_); }
  std::vector<std::vector<double>> proprios() const { return padded(proprios_); }

 private:
  template <typename V>
  std::vector<V> padded(const std::deque<V>& d) const {
    if (d.empty()) throw std::runtime_error("observation buffer: empty");
    std::vector<V> out;
    for (int i = static_cast<int>(d.size()); i < capacity_; ++i) out.push_back(d.front());
    for (const auto& v : d) out.push_back(v);
    return out;
  }

  int capacity_;
  std::deque<dynimg::Frame> frames_;
  std::deque<std::vector<double>> proprios_;
};

// ---- label normalization and window extraction ----

std::array<double, 3> normalize_position(double x, double y, double z,
                                         const sim::WorldConfig& cfg);
std::array<double, 3> denormalize_delta(const std::array<double, 3>& d,
                                        const sim::WorldConfig& cfg);
Window make_window(const data::Dataset& ds, int episode, int t0, int k,
                   const sim::WorldConfig& cfg);

// ---- closed-loop rollout ----

template <typename T>
sim::Trace rollout(const Controller<T>& ctrl, const sim::WorldState& world0,
                   const sim::TaskSpec& task, const dynimg::Frame* target, int max_steps,
                   const sim::WorldConfig& wcfg) {
  sim::Trace trace;
  typename Controller<T>::State st =
      ctrl.initial_state(ctrl.cfg.conditioned() ? target : nullptr);
  if (ctrl.cfg.conditioned() && !target)
    throw std::runtime_error("rollout: conditioned variant requires a target image");
  ObservationBuffer buf(ctrl.cfg.buffer_size);
  sim::WorldState s = world0;
  for (int t = 0; t < max_steps; ++t) {
    dynimg::Frame frame = sim::render(s, wcfg);
    auto x = sim::proprio(s, wcfg);
    buf.push(frame, x);
    const auto out = ctrl.control_step(st, buf.frames(), buf.proprios());
    sim::Command cmd;
    const auto d = denormalize_delta(out.u_dee, wcfg);
    cmd.dx = d[0];
    cmd.dy = d[1];
    cmd.dz = d[2];
    cmd.grip = out.grip;
    trace.steps.push_back({s, cmd, std::move(frame), std::move(x)});
    s = sim::step(s, cmd, wcfg, &trace.events);
  }
  trace.final_state = s;
  return trace;
}

// ---- training ----

struct TrainOptions {
  int steps = 10000;
  int batch = 8;
  double lr = 1e-4;
  std::uint64_t seed = 1;
  int log_every = 100;
  int val_every = 0;    // 0 disables validation rollouts
  int val_trials = 16;
  int val_budget = 200;
  std::string log_path;   // line-delimited records; empty disables
  std::string ckpt_path;  // best-checkpoint prefix; empty disables
};

struct TrainRecord {
  int step = 0;
  LossTerms loss;
  double val_final = -1, val_reach = -1;
};

struct TrainResult {
  std::vector<TrainRecord> log;
  double best_val_final = -1, best_val_reach = -1;
  int best_step = -1;
};

// Evaluates the controller on validation episodes: the world is rebuilt from
// each episode's seed and the stored final frame is the target.
template <typename T>
std::pair<double, double> validate(const Controller<T>& ctrl, const data::Dataset& val,
                                   int trials, int budget, const sim::WorldConfig& wcfg) {
  int n = std::min<int>(trials, static_cast<int>(val.episodes.size()));
  if (n == 0) return {0.0, 0.0};
  int final_ok = 0, reach_ok = 0;
  for (int i = 0; i < n; ++i) {
    const auto& ep = val.episodes[i];
    auto [world, sampled_task] = sim::sample_scenario(ep.task.kind, ep.task.skill, ep.seed, wcfg);
    const dynimg::Frame target =
        data::dequantize_frame(ep.steps.back().image, val.height, val.width);
    sim::Trace tr = rollout(ctrl, world, ep.task, &target, budget, wcfg);
    const auto rec = sim::evaluate_success(tr, ep.task);
    final_ok += rec.push_or_place ? 1 : 0;
    reach_ok += rec.reach ? 1 : 0;
  }
  return {static_cast<double>(final_ok) / n, static_cast<double>(reach_ok) / n};
}

template <typename T>
TrainResult train(Controller<T>& ctrl, const data::Dataset& train_ds,
                  const data::Dataset* val_ds, const sim::WorldConfig& wcfg,
                  const TrainOptions& opt) {
  if (train_ds.episodes.empty())
    throw std::invalid_argument("train: dataset is empty");
  if (train_ds.height != ctrl.cfg.resolution)
    throw std::invalid_argument("train: dataset resolution does not match the controller");
  const int K = ctrl.cfg.buffer_size;
  const int max_t0 = train_ds.episode_length - K;
  auto rng = make_rng(opt.seed);
  std::uniform_int_distribution<int> uep(0, static_cast<int>(train_ds.episodes.size()) - 1);
  std::uniform_int_distribution<int> ut(0, max_t0);
  std::uniform_real_distribution<double> ukeep(0.0, 1.0);
  // Episodes are noop-padded to a fixed length, so uniform window sampling is
  // dominated by all-zero labels; downweight those so the motion labels set
  // the gradient scale while still teaching the policy to hold still when done.
  constexpr double kIdleKeep = 0.25;
  auto sample_window = [&]() {
    for (;;) {
      Window w = make_window(train_ds, uep(rng), ut(rng), K, wcfg);
      const bool idle = w.grip_class == 1 && w.u_dee[0] == 0.0 && w.u_dee[1] == 0.0 &&
                        w.u_dee[2] == 0.0;
      if (!idle || ukeep(rng) < kIdleKeep) return w;
    }
  };

  TrainResult res;
  std::ofstream log;
  if (!opt.log_path.empty()) {
    log.open(opt.log_path);
    if (!log) throw IoError("train: cannot open log " + opt.log_path);
  }

  LossTerms running{};
  int running_n = 0;
  for (int step = 1; step <= opt.steps; ++step) {
    ctrl.params.zero_grads();
    LossTerms batch_loss{};
    for (int b = 0; b < opt.batch; ++b) {
      const Window w = sample_window();
      const LossTerms lt = ctrl.train_window(w, 1.0 / opt.batch);
      batch_loss.dee += lt.dee / opt.batch;
      batch_loss.grp += lt.grp / opt.batch;
      batch_loss.qee += lt.qee / opt.batch;
      batch_loss.qobj += lt.qobj / opt.batch;
    }
    ctrl.params.mark_all_grads_set();
    adam_step(ctrl.params, opt.lr);

    running.dee += batch_loss.dee;
    running.grp += batch_loss.grp;
    running.qee += batch_loss.qee;
    running.qobj += batch_loss.qobj;
    ++running_n;

    const bool do_val = val_ds && opt.val_every > 0 &&
                        (step % opt.val_every == 0 || step == opt.steps);
    if (step % opt.log_every == 0 || step == opt.steps || do_val) {
      TrainRecord rec;
      rec.step = step;
      rec.loss = {running.dee / running_n, running.grp / running_n, running.qee / running_n,
                  running.qobj / running_n};
      running = {};
      running_n = 0;
      if (do_val) {
        auto [vfinal, vreach] = validate(ctrl, *val_ds, opt.val_trials, opt.val_budget, wcfg);
        rec.val_final = vfinal;
        rec.val_reach = vreach;
        const bool better = vfinal > res.best_val_final ||
                            (vfinal == res.best_val_final && vreach >= res.best_val_reach);
        if (better) {
          res.best_val_final = vfinal;
          res.best_val_reach = vreach;
          res.best_step = step;
          if (!opt.ckpt_path.empty()) save_checkpoint(ctrl.params, opt.ckpt_path);
        }
      }
      if (log) {
        log << "step=" << rec.step << " loss_dee=" << rec.loss.dee
            << " loss_grp=" << rec.loss.grp << " loss_qee=" << rec.loss.qee
            << " loss_qobj=" << rec.loss.qobj;
        if (rec.val_final >= 0)
          log << " val_final=" << rec.val_final << " val_reach=" << rec.val_reach;
        log << "\n" << std::flush;
      }
      res.log.push_back(rec);
    }
  }
  // fall back to the last parameters when validation never ran
  if (!opt.ckpt_path.empty() && res.best_step < 0) save_checkpoint(ctrl.params, opt.ckpt_path);
  return res;
}

}  // namespace geeco::ctrl
