#include "geeco/dynimg.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace geeco::dynimg {

CoefficientVector rank_coefficients(int horizon) {
  if (horizon < 1) throw std::invalid_argument("rank_coefficients: H must be >= 1");
  CoefficientVector cv;
  cv.harmonics.resize(static_cast<std::size_t>(horizon) + 1);
  cv.harmonics[0] = 0.0;
  for (int t = 1; t <= horizon; ++t) cv.harmonics[t] = cv.harmonics[t - 1] + 1.0 / t;
  cv.alpha.resize(static_cast<std::size_t>(horizon));
  const double hH = cv.harmonics[horizon];
  for (int t = 1; t <= horizon; ++t)
    cv.alpha[t - 1] = 2.0 * (horizon - t + 1) - (horizon + 1.0) * (hH - cv.harmonics[t - 1]);
  return cv;
}

DynamicMap dynamic_image(const FrameSequence& seq) {
  if (seq.empty()) throw std::invalid_argument("dynamic_image: empty sequence");
  const auto& shape = seq.front().shape;
  for (const auto& f : seq)
    if (f.shape != shape) throw std::invalid_argument("dynamic_image: shape mismatch in sequence");
  const CoefficientVector cv = rank_coefficients(static_cast<int>(seq.size()));
  DynamicMap out(shape);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const double a = cv.alpha[t];
    const auto& f = seq[t];
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += a * static_cast<double>(f[i]);
  }
  return out;
}

Frame normalize(const DynamicMap& map) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : map.data) {
    if (!std::isfinite(v)) throw std::invalid_argument("normalize: non-finite input");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Frame out(map.shape);
  if (hi - lo < 1e-12) {
    out.fill(0.5f);
    return out;
  }
  const double scale = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < map.numel(); ++i)
    out[i] = static_cast<float>((map[i] - lo) * scale);
  return out;
}

DynamicMap dynamic_pair(const Frame& current, const Frame& target) {
  if (current.shape != target.shape)
    throw std::invalid_argument("dynamic_pair: shape mismatch");
  DynamicMap out(current.shape);
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = 0.5 * (static_cast<double>(target[i]) - static_cast<double>(current[i]));
  return out;
}

}  // namespace geeco::dynimg
