#pragma once

// On-disk demonstration format "geeco-data-v1".
//
// <prefix>.bin   header {magic "GECO", version u32, skill u8, H u32, N u32,
//                height u32, width u32}, then N episode blocks, each:
//                task {skill u8, kind u8, manipuland u32, pad u32}, seed u64,
//                then H records {image u8[3hw], x f32[P], u_dee f32[3],
//                u_grp i8, q_ee f32[3], q_obj f32[3]}; little-endian.
// <prefix>.manifest  text key/value lines; carries P (proprio_dim) and split.

#include <cstdint>
#include <string>
#include <vector>

#include "geeco/world.hpp"

namespace geeco::data {

inline constexpr const char* kDatasetVersion = "geeco-data-v1";

struct EpisodeStep {
  std::vector<std::uint8_t> image;  // u8 RGB, 3*h*w
  std::vector<float> x;             // proprio, length P
  float u_dee[3] = {0, 0, 0};
  std::int8_t u_grp = 0;
  float q_ee[3] = {0, 0, 0};
  float q_obj[3] = {0, 0, 0};
};

struct Episode {
  sim::TaskSpec task;
  std::uint64_t seed = 0;
  std::vector<EpisodeStep> steps;
};

struct Dataset {
  sim::Skill skill = sim::Skill::Push;
  sim::ScenarioKind kind = sim::ScenarioKind::Goal2Cube2;
  std::string split = "train";
  int episode_length = 0;
  int height = 0, width = 0;
  int proprio_dim = 0;
  int resampled = 0;  // planning-failure episodes that were resampled
  std::vector<Episode> episodes;
};

void save_dataset(const Dataset& ds, const std::string& prefix);
Dataset load_dataset(const std::string& prefix);

// Frame <-> u8 conversion used for storage.
std::vector<std::uint8_t> quantize_frame(const dynimg::Frame& f);
dynimg::Frame dequantize_frame(const std::vector<std::uint8_t>& bytes, int height, int width);

}  // namespace geeco::data
