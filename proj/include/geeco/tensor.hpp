#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace geeco {

// Dense row-major tensor. Shape is fixed at construction; data is owned.
template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;

  TensorT() = default;

  explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), T(0));
  }

  TensorT(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel_of(shape))
      throw std::invalid_argument("tensor: data size does not match shape");
  }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t numel() const { return data.size(); }

  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  // 3D access: [c, y, x] for image-like tensors.
  T& at3(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  const T& at3(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  void zero() { fill(T(0)); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  TensorT& operator+=(const TensorT& o) {
    if (!same_shape(o)) throw std::invalid_argument("tensor: shape mismatch in +=");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }

  TensorT& operator*=(T s) {
    for (auto& v : data) v *= s;
    return *this;
  }
};

using Tensor = TensorT<double>;
using TensorF = TensorT<float>;

template <typename T>
inline TensorT<T> random_uniform(std::vector<int> shape, T lo, T hi, std::mt19937_64& rng) {
  TensorT<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
  for (auto& v : t.data) v = static_cast<T>(dist(rng));
  return t;
}

// Fan-in scaled uniform init: U(-sqrt(1/fan_in), sqrt(1/fan_in)).
template <typename T>
inline TensorT<T> fan_in_uniform(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
  double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  return random_uniform<T>(std::move(shape), static_cast<T>(-bound), static_cast<T>(bound), rng);
}

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace geeco
