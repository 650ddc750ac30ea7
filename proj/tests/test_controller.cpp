#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "geeco/controller.hpp"
#include "geeco/expert.hpp"
#include "geeco/rng.hpp"

using namespace geeco;
using ctrl::Controller;
using ctrl::ControllerConfig;
using ctrl::Variant;
using ctrl::Window;

namespace {

// Tiny configuration: 8x8 frames, 2-channel encoders, so double-precision
// finite differences over every parameter stay affordable.
ControllerConfig tiny_config(Variant v) {
  ControllerConfig cfg;
  cfg.variant = v;
  cfg.encoder.filters = {2, 2};
  cfg.encoder.strides = {2, 2};
  cfg.lstm_size = 6;
  cfg.fc_size = 5;
  cfg.resolution = 8;
  cfg.proprio_dim = 4;
  return cfg;
}

dynimg::Frame random_frame(std::mt19937_64& rng, int res = 8) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  dynimg::Frame f({3, res, res});
  for (auto& v : f.data) v = u(rng);
  return f;
}

Window random_window(std::mt19937_64& rng, int k = 4, int res = 8) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Window w;
  for (int j = 0; j < k; ++j) {
    w.frames.push_back(random_frame(rng, res));
    w.proprios.push_back({u(rng), u(rng), u(rng), u(rng)});
  }
  w.target = random_frame(rng, res);
  for (int i = 0; i < 3; ++i) {
    w.u_dee[i] = u(rng);
    w.q_ee[i] = u(rng);
    w.q_obj[i] = u(rng);
  }
  w.grip_class = static_cast<int>(rng() % 3);
  return w;
}

double window_loss(Controller<double>& c, const Window& w) {
  TensorT<double> h({c.cfg.lstm_size}), zc({c.cfg.lstm_size});
  const auto tr = c.forward(w, h, zc);
  return c.losses(tr, w).total(c.cfg.lambda);
}

}  // namespace

TEST_CASE("the variants build 3, 2, 2 and 1 encoder banks respectively") {
  CHECK(Controller<float>(tiny_config(Variant::F), 1).encoder_count() == 3);
  CHECK(Controller<float>(tiny_config(Variant::D), 1).encoder_count() == 2);
  CHECK(Controller<float>(tiny_config(Variant::R), 1).encoder_count() == 1);
  CHECK(Controller<float>(tiny_config(Variant::Uncond), 1).encoder_count() == 1);

  Controller<float> f(tiny_config(Variant::F), 1);
  CHECK_NOTHROW(f.params.value("dyn.conv0.w"));
  CHECK_NOTHROW(f.params.value("diff.conv0.w"));
  Controller<float> r(tiny_config(Variant::R), 1);
  CHECK_THROWS_AS(r.params.value("diff.conv0.w"), std::invalid_argument);
}

TEST_CASE("state channel arithmetic matches the fusion layout") {
  const int c = tiny_config(Variant::F).encoder.out_channels();
  CHECK(tiny_config(Variant::F).state_channels() == 3 * c + 4);
  CHECK(tiny_config(Variant::D).state_channels() == 2 * c + 4);
  CHECK(tiny_config(Variant::R).state_channels() == 2 * c + 4);
  CHECK(tiny_config(Variant::Uncond).state_channels() == c + 4);

  auto rng = make_rng(3);
  Controller<double> ctl(tiny_config(Variant::F), 1);
  const Window w = random_window(rng);
  TensorT<double> h({6}), cc({6});
  const auto tr = ctl.forward(w, h, cc);
  CHECK(tr.steps.size() == 1);  // F consumes the fused buffer in one update
  CHECK(tr.steps[0].state_vec.numel() ==
        static_cast<std::size_t>(4 * ctl.cfg.state_channels()));
}

TEST_CASE("R and D run one LSTM update per buffered frame") {
  auto rng = make_rng(4);
  const Window w = random_window(rng);
  TensorT<double> h({6}), c({6});
  Controller<double> r(tiny_config(Variant::R), 1);
  CHECK(r.forward(w, h, c).steps.size() == 4);
  Controller<double> d(tiny_config(Variant::D), 1);
  CHECK(d.forward(w, h, c).steps.size() == 4);
}

TEST_CASE("two controllers built from the same seed are identical") {
  Controller<float> a(tiny_config(Variant::D), 9);
  Controller<float> b(tiny_config(Variant::D), 9);
  for (const auto& [name, e] : a.params.params) {
    const auto& other = b.params.value(name);
    for (std::size_t i = 0; i < e.value.numel(); ++i) CHECK(e.value[i] == other[i]);
  }
  Controller<float> c(tiny_config(Variant::D), 10);
  bool any_diff = false;
  for (const auto& [name, e] : a.params.params)
    for (std::size_t i = 0; i < e.value.numel(); ++i)
      any_diff |= e.value[i] != c.params.value(name)[i];
  CHECK(any_diff);
}

TEST_CASE("the residual branch vanishes when the buffer already shows the target") {
  auto rng = make_rng(5);
  Controller<double> ctl(tiny_config(Variant::R), 2);
  Window w = random_window(rng);
  const dynimg::Frame same = random_frame(rng);
  for (auto& f : w.frames) f = same;
  w.target = same;
  TensorT<double> h({6}), c({6});
  const auto tr = ctl.forward(w, h, c);
  // state layout: [psi_obs | proprio | residual]; the residual block is zero
  const int c_enc = ctl.cfg.encoder.out_channels();
  for (int ch = c_enc + 4; ch < ctl.cfg.state_channels(); ++ch)
    for (int i = 0; i < 4; ++i)
      CHECK(tr.steps[0].state_vec[static_cast<std::size_t>(ch) * 4 + i] == doctest::Approx(0.0));
}

TEST_CASE("for D the pair difference of identical frames encodes the mid-gray map") {
  auto rng = make_rng(6);
  Window w = random_window(rng);
  w.target = w.frames[3];
  const auto pair = dynimg::normalize(dynimg::dynamic_pair(w.frames[3], w.target));
  for (std::size_t i = 0; i < pair.numel(); ++i) CHECK(pair[i] == doctest::Approx(0.5f));
}

TEST_CASE("conditioned variants refuse to run without a bound target") {
  auto rng = make_rng(7);
  Controller<double> ctl(tiny_config(Variant::D), 2);
  Window w = random_window(rng);
  w.target = dynimg::Frame();
  TensorT<double> h({6}), c({6});
  CHECK_THROWS_AS(ctl.forward(w, h, c), std::runtime_error);
}

TEST_CASE("the loss decomposes into its four labelled terms") {
  auto rng = make_rng(8);
  Controller<double> ctl(tiny_config(Variant::D), 3);
  const Window w = random_window(rng);
  TensorT<double> h({6}), c({6});
  const auto tr = ctl.forward(w, h, c);
  const auto lt = ctl.losses(tr, w);

  TensorT<double> dee_t({3}), onehot({3});
  for (int i = 0; i < 3; ++i) dee_t[i] = w.u_dee[i];
  onehot[w.grip_class] = 1.0;
  CHECK(std::abs(lt.dee - ops::mse(tr.dee, dee_t)) < 1e-6);
  CHECK(std::abs(lt.grp - ops::categorical_cross_entropy(tr.grp_logits, onehot)) < 1e-6);
  CHECK(std::abs(lt.total(2.0) - (lt.dee + lt.grp + 2.0 * (lt.qee + lt.qobj))) < 1e-6);
}

TEST_CASE("lambda = 0 silences the pose gradients") {
  auto rng = make_rng(9);
  auto cfg = tiny_config(Variant::D);
  cfg.lambda = 0.0;
  Controller<double> ctl(cfg, 3);
  const Window w = random_window(rng);
  ctl.params.zero_grads();
  ctl.train_window(w, 1.0);
  const auto& g_qee = ctl.params.at("head_qee.w").grad;
  for (std::size_t i = 0; i < g_qee.numel(); ++i) CHECK(g_qee[i] == 0.0);
  const auto& g_dee = ctl.params.at("head_dee.w").grad;
  double mag = 0;
  for (std::size_t i = 0; i < g_dee.numel(); ++i) mag += std::abs(g_dee[i]);
  CHECK(mag > 0.0);
}

TEST_CASE("end-to-end gradients pass finite differences for every variant, 5 seeds") {
  const double h_fd = 1e-5, tol = 1e-3;
  for (Variant v : {Variant::R, Variant::D, Variant::F, Variant::Uncond}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto rng = make_rng(100 * seed + static_cast<int>(v));
      Controller<double> ctl(tiny_config(v), seed);
      const Window w = random_window(rng);

      ctl.params.zero_grads();
      ctl.train_window(w, 1.0);

      // probe a spread of parameters from every tensor
      for (auto& [name, e] : ctl.params.params) {
        const std::size_t stride = std::max<std::size_t>(1, e.value.numel() / 5);
        for (std::size_t i = 0; i < e.value.numel(); i += stride) {
          const double keep = e.value[i];
          e.value[i] = keep + h_fd;
          const double up = window_loss(ctl, w);
          e.value[i] = keep - h_fd;
          const double down = window_loss(ctl, w);
          e.value[i] = keep;
          const double numeric = (up - down) / (2.0 * h_fd);
          const double analytic = e.grad[i];
          const double diff = std::abs(analytic - numeric);
          const double rel = diff / std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
          CHECK((diff < 1e-9 || rel < tol));
        }
      }
    }
  }
}

TEST_CASE("pair-difference conditioning cancels a global background shift; raw features do not") {
  auto rng = make_rng(11);
  Window w = random_window(rng);
  // keep values below saturation so the shift is exactly common-mode
  for (auto& f : w.frames)
    for (auto& v : f.data) v *= 0.8f;
  for (auto& v : w.target.data) v *= 0.8f;
  Window shifted = w;
  const float off = 0.12f;
  for (auto& f : shifted.frames)
    for (auto& v : f.data) v = std::min(1.0f, v + off);
  for (auto& v : shifted.target.data) v = std::min(1.0f, v + off);

  // D's conditioning input is unchanged under the shift
  const auto pair_a = dynimg::normalize(dynimg::dynamic_pair(w.frames[3], w.target));
  const auto pair_b =
      dynimg::normalize(dynimg::dynamic_pair(shifted.frames[3], shifted.target));
  for (std::size_t i = 0; i < pair_a.numel(); ++i)
    CHECK(pair_a[i] == doctest::Approx(pair_b[i]).epsilon(1e-5));

  // R's conditioning path sees the raw frames and produces different features
  Controller<double> r(tiny_config(Variant::R), 4);
  TensorT<double> h({6}), c({6});
  const auto fa = r.forward(w, h, c);
  const auto fb = r.forward(shifted, h, c);
  double diff = 0;
  for (std::size_t i = 0; i < fa.steps[0].state_vec.numel(); ++i)
    diff += std::abs(fa.steps[0].state_vec[i] - fb.steps[0].state_vec[i]);
  CHECK(diff > 1e-3);
}

TEST_CASE("the observation buffer left-pads with its oldest entry") {
  ctrl::ObservationBuffer buf(4);
  CHECK_THROWS_AS(buf.frames(), std::runtime_error);
  auto rng = make_rng(12);
  const auto f0 = random_frame(rng);
  buf.push(f0, {0.1, 0.2, 0.3, 0.4});
  auto frames = buf.frames();
  REQUIRE(frames.size() == 4);
  for (const auto& f : frames)
    for (std::size_t i = 0; i < f.numel(); ++i) CHECK(f[i] == f0[i]);

  const auto f1 = random_frame(rng);
  buf.push(f1, {0.5, 0.6, 0.7, 0.8});
  frames = buf.frames();
  CHECK(frames[0][0] == f0[0]);
  CHECK(frames[2][0] == f0[0]);
  CHECK(frames[3][0] == f1[0]);
  CHECK(buf.proprios()[0][0] == 0.1);

  for (int i = 0; i < 6; ++i) buf.push(random_frame(rng), {1, 1, 1, 1});
  CHECK(buf.frames().size() == 4);
}

TEST_CASE("control_step maps the argmax gripper logit to open, noop, close") {
  auto rng = make_rng(13);
  Controller<double> ctl(tiny_config(Variant::D), 5);
  const Window w = random_window(rng);
  auto st = ctl.initial_state(&w.target);
  const auto out = ctl.control_step(st, w.frames, w.proprios);
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (out.grip_logits[i] > out.grip_logits[best]) best = i;
  CHECK(out.grip == best - 1);
}

TEST_CASE("control_step is a pure function of the current window") {
  auto rng = make_rng(14);
  Controller<double> ctl(tiny_config(Variant::D), 5);
  const Window w = random_window(rng);
  auto st = ctl.initial_state(&w.target);
  // every call re-runs the window from a zero LSTM state, matching how
  // training windows are processed: identical input, identical output
  const auto out1 = ctl.control_step(st, w.frames, w.proprios);
  const auto out2 = ctl.control_step(st, w.frames, w.proprios);
  for (int i = 0; i < 3; ++i) CHECK(out2.u_dee[i] == out1.u_dee[i]);
  CHECK(out2.grip == out1.grip);

  // it still matches the training-side forward pass on the same window
  auto st_reset = ctl.initial_state(&w.target);
  const auto out1b = ctl.control_step(st_reset, w.frames, w.proprios);
  for (int i = 0; i < 3; ++i) CHECK(out1b.u_dee[i] == out1.u_dee[i]);
}

TEST_CASE("make_window normalizes labels into the controller's action units") {
  const sim::WorldConfig wcfg;
  auto gen = expert::generate_episode(sim::Skill::Push, sim::ScenarioKind::Goal2Cube2, 0, 60, 31,
                                      wcfg);
  data::Dataset ds;
  ds.skill = sim::Skill::Push;
  ds.episode_length = 60;
  ds.height = ds.width = 64;
  ds.proprio_dim = 4;
  ds.episodes.push_back(gen.episode);

  const Window w = ctrl::make_window(ds, 0, 5, 4, wcfg);
  REQUIRE(w.frames.size() == 4);
  const auto& st = gen.episode.steps[8];
  CHECK(w.u_dee[0] == doctest::Approx(st.u_dee[0] / wcfg.max_step()));
  CHECK(w.grip_class == st.u_grp + 1);
  for (int i = 0; i < 3; ++i) {
    CHECK(w.q_ee[i] >= -1.0);
    CHECK(w.q_ee[i] <= 1.0);
  }
  // de-normalization inverts the action scaling
  const auto d = ctrl::denormalize_delta(w.u_dee, wcfg);
  CHECK(d[0] == doctest::Approx(st.u_dee[0]).epsilon(1e-6));

  CHECK_THROWS_AS(ctrl::make_window(ds, 0, 57, 4, wcfg), std::out_of_range);
  CHECK_THROWS_AS(ctrl::make_window(ds, 1, 0, 4, wcfg), std::out_of_range);
}

TEST_CASE("a tiny controller overfits eight demonstrations") {
  const sim::WorldConfig wcfg;
  expert::generate_dataset(sim::Skill::Push, sim::ScenarioKind::Goal2Cube2, 8, 60, 41,
                           "ctl_overfit_ds", wcfg);
  auto ds = data::load_dataset("ctl_overfit_ds_train");

  ControllerConfig cfg;
  cfg.variant = Variant::D;
  cfg.encoder.filters = {4, 8, 8, 8, 8, 8};
  cfg.encoder.strides = {1, 2, 2, 2, 2, 2};
  cfg.lstm_size = 32;
  cfg.fc_size = 32;
  cfg.resolution = 64;
  Controller<float> ctl(cfg, 1);

  ctrl::TrainOptions opt;
  opt.steps = 400;
  opt.batch = 4;
  opt.lr = 1e-3;
  opt.seed = 2;
  opt.log_every = 10;
  const auto res = ctrl::train(ctl, ds, nullptr, wcfg, opt);
  REQUIRE(res.log.size() >= 10);
  auto total = [&](const ctrl::TrainRecord& r) { return r.loss.total(cfg.lambda); };
  const double first = total(res.log.front());
  const double last = total(res.log.back());
  CHECK(last < 0.35 * first);  // the loss collapses on a memorizable set
}

TEST_CASE("training rejects a dataset whose resolution differs from the model") {
  const sim::WorldConfig wcfg;
  auto ds = data::load_dataset("ctl_overfit_ds_train");
  Controller<float> ctl(tiny_config(Variant::D), 1);  // expects 8x8 frames
  ctrl::TrainOptions opt;
  opt.steps = 1;
  CHECK_THROWS_AS(ctrl::train(ctl, ds, nullptr, wcfg, opt), std::invalid_argument);
}

TEST_CASE("controller checkpoints restore bit-identical float parameters") {
  Controller<float> a(tiny_config(Variant::F), 21);
  save_checkpoint(a.params, "ctl_ckpt_test");
  Controller<float> b(tiny_config(Variant::F), 22);
  load_checkpoint(b.params, "ctl_ckpt_test");
  for (const auto& [name, e] : a.params.params)
    for (std::size_t i = 0; i < e.value.numel(); ++i)
      CHECK(e.value[i] == b.params.value(name)[i]);

  Controller<float> wrong(tiny_config(Variant::D), 21);  // fewer encoder banks
  CHECK_THROWS_AS(load_checkpoint(wrong.params, "ctl_ckpt_test"), IoError);
}

TEST_CASE("unsupported resolutions are rejected at build time") {
  auto cfg = tiny_config(Variant::D);
  cfg.resolution = 12;
  CHECK_THROWS_AS(Controller<float>(cfg, 1), std::invalid_argument);
}
