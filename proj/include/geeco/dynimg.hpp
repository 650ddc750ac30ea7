#pragma once

// Approximate rank pooling: collapses a temporally ordered frame sequence
// into a single signed map via closed-form coefficients over harmonic
// numbers. All entry points are pure functions.

#include <vector>

#include "geeco/tensor.hpp"

namespace geeco::dynimg {

// RGB frame, [3, h, w], values in [0,1]. Storage is single precision;
// pooling arithmetic runs in double.
using Frame = TensorT<float>;
using FrameSequence = std::vector<Frame>;
using DynamicMap = TensorT<double>;

struct CoefficientVector {
  std::vector<double> alpha;      // alpha[t-1] for t = 1..H
  std::vector<double> harmonics;  // harmonics[t] = H_t, t = 0..H
};

// alpha_t = 2(H - t + 1) - (H + 1)(H_H - H_{t-1}), H_0 = 0.
CoefficientVector rank_coefficients(int horizon);

DynamicMap dynamic_image(const FrameSequence& seq);

// Joint min-max over all channels to [0,1]; a constant map yields all-0.5.
Frame normalize(const DynamicMap& map);

// Equals dynamic_image({current, target}) = 0.5 * (target - current).
DynamicMap dynamic_pair(const Frame& current, const Frame& target);

}  // namespace geeco::dynimg
