#include "geeco/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "geeco/param_store.hpp"  // IoError

namespace geeco::data {

namespace {

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

std::vector<std::uint8_t> quantize_frame(const dynimg::Frame& f) {
  std::vector<std::uint8_t> out(f.numel());
  for (std::size_t i = 0; i < f.numel(); ++i) {
    const float v = std::min(std::max(f[i], 0.0f), 1.0f);
    out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

dynimg::Frame dequantize_frame(const std::vector<std::uint8_t>& bytes, int height, int width) {
  dynimg::Frame f({3, height, width});
  if (bytes.size() != f.numel()) throw std::invalid_argument("dequantize: size mismatch");
  for (std::size_t i = 0; i < bytes.size(); ++i)
    f[i] = static_cast<float>(bytes[i]) / 255.0f;
  return f;
}

void save_dataset(const Dataset& ds, const std::string& prefix) {
  std::ofstream bin(prefix + ".bin", std::ios::binary);
  std::ofstream man(prefix + ".manifest");
  if (!bin || !man) throw IoError("dataset: cannot open " + prefix + " for writing");

  bin.write("GECO", 4);
  write_pod<std::uint32_t>(bin, 1);
  write_pod<std::uint8_t>(bin, static_cast<std::uint8_t>(ds.skill));
  write_pod<std::uint32_t>(bin, static_cast<std::uint32_t>(ds.episode_length));
  write_pod<std::uint32_t>(bin, static_cast<std::uint32_t>(ds.episodes.size()));
  write_pod<std::uint32_t>(bin, static_cast<std::uint32_t>(ds.height));
  write_pod<std::uint32_t>(bin, static_cast<std::uint32_t>(ds.width));

  for (const auto& ep : ds.episodes) {
    write_pod<std::uint8_t>(bin, static_cast<std::uint8_t>(ep.task.skill));
    write_pod<std::uint8_t>(bin, static_cast<std::uint8_t>(ep.task.kind));
    write_pod<std::uint32_t>(bin, static_cast<std::uint32_t>(ep.task.manipuland_id));
    write_pod<std::uint32_t>(bin, static_cast<std::uint32_t>(ep.task.pad_id));
    write_pod<std::uint64_t>(bin, ep.seed);
    if (static_cast<int>(ep.steps.size()) != ds.episode_length)
      throw std::invalid_argument("dataset: episode length mismatch");
    for (const auto& st : ep.steps) {
      bin.write(reinterpret_cast<const char*>(st.image.data()),
                static_cast<std::streamsize>(st.image.size()));
      bin.write(reinterpret_cast<const char*>(st.x.data()),
                static_cast<std::streamsize>(st.x.size() * sizeof(float)));
      bin.write(reinterpret_cast<const char*>(st.u_dee), 3 * sizeof(float));
      write_pod<std::int8_t>(bin, st.u_grp);
      bin.write(reinterpret_cast<const char*>(st.q_ee), 3 * sizeof(float));
      bin.write(reinterpret_cast<const char*>(st.q_obj), 3 * sizeof(float));
    }
  }
  if (!bin) throw IoError("dataset: write failure at " + prefix);

  man << "version: " << kDatasetVersion << "\n"
      << "skill: " << sim::to_string(ds.skill) << "\n"
      << "scenario_kind: " << sim::to_string(ds.kind) << "\n"
      << "split: " << ds.split << "\n"
      << "n_episodes: " << ds.episodes.size() << "\n"
      << "episode_length: " << ds.episode_length << "\n"
      << "height: " << ds.height << "\n"
      << "width: " << ds.width << "\n"
      << "proprio_dim: " << ds.proprio_dim << "\n"
      << "resampled: " << ds.resampled << "\n";
  if (!man) throw IoError("dataset: manifest write failure at " + prefix);
}

Dataset load_dataset(const std::string& prefix) {
  std::ifstream man(prefix + ".manifest");
  if (!man) throw IoError("dataset: cannot open " + prefix + ".manifest");
  Dataset ds;
  std::string line;
  while (std::getline(man, line)) {
    const auto pos = line.find(": ");
    if (pos == std::string::npos) continue;
    const std::string key = line.substr(0, pos);
    const std::string val = line.substr(pos + 2);
    if (key == "version") {
      if (val != kDatasetVersion) throw IoError("dataset: unsupported version " + val);
    } else if (key == "skill") {
      ds.skill = sim::skill_from_string(val);
    } else if (key == "scenario_kind") {
      ds.kind = sim::kind_from_string(val);
    } else if (key == "split") {
      ds.split = val;
    } else if (key == "episode_length") {
      ds.episode_length = std::stoi(val);
    } else if (key == "height") {
      ds.height = std::stoi(val);
    } else if (key == "width") {
      ds.width = std::stoi(val);
    } else if (key == "proprio_dim") {
      ds.proprio_dim = std::stoi(val);
    } else if (key == "resampled") {
      ds.resampled = std::stoi(val);
    }
  }

  std::ifstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw IoError("dataset: cannot open " + prefix + ".bin");
  char magic[4];
  bin.read(magic, 4);
  if (std::memcmp(magic, "GECO", 4) != 0) throw IoError("dataset: bad magic in " + prefix);
  if (read_pod<std::uint32_t>(bin) != 1) throw IoError("dataset: bad binary version");
  ds.skill = static_cast<sim::Skill>(read_pod<std::uint8_t>(bin));
  const int H = static_cast<int>(read_pod<std::uint32_t>(bin));
  const int N = static_cast<int>(read_pod<std::uint32_t>(bin));
  const int h = static_cast<int>(read_pod<std::uint32_t>(bin));
  const int w = static_cast<int>(read_pod<std::uint32_t>(bin));
  if (H != ds.episode_length || h != ds.height || w != ds.width)
    throw IoError("dataset: manifest and binary header disagree for " + prefix);

  const int P = ds.proprio_dim;
  ds.episodes.resize(static_cast<std::size_t>(N));
  for (auto& ep : ds.episodes) {
    ep.task.skill = static_cast<sim::Skill>(read_pod<std::uint8_t>(bin));
    ep.task.kind = static_cast<sim::ScenarioKind>(read_pod<std::uint8_t>(bin));
    ep.task.manipuland_id = static_cast<int>(read_pod<std::uint32_t>(bin));
    ep.task.pad_id = static_cast<int>(read_pod<std::uint32_t>(bin));
    ep.seed = read_pod<std::uint64_t>(bin);
    ep.steps.resize(static_cast<std::size_t>(H));
    for (auto& st : ep.steps) {
      st.image.resize(static_cast<std::size_t>(3) * h * w);
      bin.read(reinterpret_cast<char*>(st.image.data()),
               static_cast<std::streamsize>(st.image.size()));
      st.x.resize(static_cast<std::size_t>(P));
      bin.read(reinterpret_cast<char*>(st.x.data()),
               static_cast<std::streamsize>(P * sizeof(float)));
      bin.read(reinterpret_cast<char*>(st.u_dee), 3 * sizeof(float));
      st.u_grp = read_pod<std::int8_t>(bin);
      bin.read(reinterpret_cast<char*>(st.q_ee), 3 * sizeof(float));
      bin.read(reinterpret_cast<char*>(st.q_obj), 3 * sizeof(float));
    }
  }
  if (!bin) throw IoError("dataset: truncated binary " + prefix);
  return ds;
}

}  // namespace geeco::data
