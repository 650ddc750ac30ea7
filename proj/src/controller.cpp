#include "geeco/controller.hpp"

namespace geeco::ctrl {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::R: return "R";
    case Variant::D: return "D";
    case Variant::F: return "F";
    case Variant::Uncond: return "UNCOND";
  }
  throw std::invalid_argument("unknown variant");
}

Variant variant_from_string(const std::string& s) {
  if (s == "R") return Variant::R;
  if (s == "D") return Variant::D;
  if (s == "F") return Variant::F;
  if (s == "UNCOND") return Variant::Uncond;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

std::array<double, 3> normalize_position(double x, double y, double z,
                                         const sim::WorldConfig& cfg) {
  auto norm = [](double v, double lo, double hi) { return 2.0 * (v - lo) / (hi - lo) - 1.0; };
  return {norm(x, cfg.xmin, cfg.xmax), norm(y, cfg.ymin, cfg.ymax), norm(z, cfg.zmin, cfg.zmax)};
}

std::array<double, 3> denormalize_delta(const std::array<double, 3>& d,
                                        const sim::WorldConfig& cfg) {
  const double ms = cfg.max_step();
  return {d[0] * ms, d[1] * ms, d[2] * ms};
}

Window make_window(const data::Dataset& ds, int episode, int t0, int k,
                   const sim::WorldConfig& cfg) {
  if (episode < 0 || episode >= static_cast<int>(ds.episodes.size()))
    throw std::out_of_range("make_window: episode index");
  const auto& ep = ds.episodes[static_cast<std::size_t>(episode)];
  if (t0 < 0 || t0 + k > static_cast<int>(ep.steps.size()))
    throw std::out_of_range("make_window: window exceeds the episode");

  Window w;
  for (int j = 0; j < k; ++j) {
    const auto& st = ep.steps[static_cast<std::size_t>(t0 + j)];
    w.frames.push_back(data::dequantize_frame(st.image, ds.height, ds.width));
    w.proprios.emplace_back(st.x.begin(), st.x.end());
  }
  w.target = data::dequantize_frame(ep.steps.back().image, ds.height, ds.width);

  const auto& last = ep.steps[static_cast<std::size_t>(t0 + k - 1)];
  const double ms = cfg.max_step();
  for (int i = 0; i < 3; ++i) w.u_dee[i] = last.u_dee[i] / ms;
  w.grip_class = last.u_grp + 1;
  w.q_ee = normalize_position(last.q_ee[0], last.q_ee[1], last.q_ee[2], cfg);
  w.q_obj = normalize_position(last.q_obj[0], last.q_obj[1], last.q_obj[2], cfg);
  return w;
}

}  // namespace geeco::ctrl
