#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "geeco/tensor.hpp"

namespace geeco {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Named parameter container with per-parameter Adam state.
template <typename T>
struct ParamStoreT {
  struct Entry {
    TensorT<T> value, grad, adam_m, adam_v;
    std::int64_t step = 0;
    bool grad_set = false;
  };

  std::map<std::string, Entry> params;

  TensorT<T>& add(const std::string& name, TensorT<T> value) {
    if (params.count(name)) throw std::invalid_argument("param store: duplicate name " + name);
    Entry e;
    e.grad = TensorT<T>(value.shape);
    e.adam_m = TensorT<T>(value.shape);
    e.adam_v = TensorT<T>(value.shape);
    e.value = std::move(value);
    return params.emplace(name, std::move(e)).first->second.value;
  }

  Entry& at(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("param store: unknown name " + name);
    return it->second;
  }
  const Entry& at(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("param store: unknown name " + name);
    return it->second;
  }

  TensorT<T>& value(const std::string& name) { return at(name).value; }
  const TensorT<T>& value(const std::string& name) const { return at(name).value; }
  TensorT<T>& grad(const std::string& name) {
    auto& e = at(name);
    e.grad_set = true;
    return e.grad;
  }

  void zero_grads() {
    for (auto& [name, e] : params) {
      e.grad.zero();
      e.grad_set = false;
    }
  }

  void mark_all_grads_set() {
    for (auto& [name, e] : params) e.grad_set = true;
  }

  std::size_t total_params() const {
    std::size_t n = 0;
    for (const auto& [name, e] : params) n += e.value.numel();
    return n;
  }
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update over every parameter; gradients must have
// been populated for all entries and are zeroed afterwards.
template <typename T>
inline void adam_step(ParamStoreT<T>& store, double lr, const AdamConfig& cfg = {}) {
  for (auto& [name, e] : store.params) {
    if (!e.grad_set)
      throw std::runtime_error("adam_step: gradient not populated for " + name);
  }
  for (auto& [name, e] : store.params) {
    e.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(e.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(e.step));
    for (std::size_t i = 0; i < e.value.numel(); ++i) {
      const double g = static_cast<double>(e.grad[i]);
      const double m = cfg.beta1 * static_cast<double>(e.adam_m[i]) + (1.0 - cfg.beta1) * g;
      const double v = cfg.beta2 * static_cast<double>(e.adam_v[i]) + (1.0 - cfg.beta2) * g * g;
      e.adam_m[i] = static_cast<T>(m);
      e.adam_v[i] = static_cast<T>(v);
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      e.value[i] = static_cast<T>(static_cast<double>(e.value[i]) -
                                  lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
    e.grad.zero();
    e.grad_set = false;
  }
}

inline constexpr const char* kCheckpointVersion = "geeco-ckpt-v1";

// Checkpoint: <path>.bin holds raw little-endian f32 values in manifest
// order; <path>.manifest is text: version line, then "name shape byte-offset".
template <typename T>
inline void save_checkpoint(const ParamStoreT<T>& store, const std::string& path) {
  std::ofstream bin(path + ".bin", std::ios::binary);
  std::ofstream man(path + ".manifest");
  if (!bin || !man) throw IoError("checkpoint: cannot open " + path + " for writing");
  man << kCheckpointVersion << "\n";
  std::uint64_t offset = 0;
  for (const auto& [name, e] : store.params) {
    man << name << " " << shape_str(e.value.shape) << " " << offset << "\n";
    for (std::size_t i = 0; i < e.value.numel(); ++i) {
      const float v = static_cast<float>(e.value[i]);
      bin.write(reinterpret_cast<const char*>(&v), sizeof(float));
    }
    offset += e.value.numel() * sizeof(float);
  }
  if (!bin || !man) throw IoError("checkpoint: write failure at " + path);
}

// Loads values into an already-built store; names and shapes must match.
template <typename T>
inline void load_checkpoint(ParamStoreT<T>& store, const std::string& path) {
  std::ifstream bin(path + ".bin", std::ios::binary);
  std::ifstream man(path + ".manifest");
  if (!bin || !man) throw IoError("checkpoint: cannot open " + path);
  std::string version;
  std::getline(man, version);
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported version '" + version + "'");
  std::string line;
  std::size_t seen = 0;
  while (std::getline(man, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string name, shape;
    std::uint64_t offset;
    ss >> name >> shape >> offset;
    auto it = store.params.find(name);
    if (it == store.params.end()) throw IoError("checkpoint: unknown parameter " + name);
    auto& e = it->second;
    if (shape != shape_str(e.value.shape))
      throw IoError("checkpoint: shape mismatch for " + name);
    bin.seekg(static_cast<std::streamoff>(offset));
    for (std::size_t i = 0; i < e.value.numel(); ++i) {
      float v;
      bin.read(reinterpret_cast<char*>(&v), sizeof(float));
      e.value[i] = static_cast<T>(v);
    }
    if (!bin) throw IoError("checkpoint: truncated data for " + name);
    ++seen;
  }
  if (seen != store.params.size())
    throw IoError("checkpoint: manifest is missing parameters");
}

using ParamStore = ParamStoreT<double>;
using ParamStoreF = ParamStoreT<float>;

}  // namespace geeco
