#pragma once

// Lossless frame export (binary PPM, 8-bit).

#include <string>

#include "geeco/dynimg.hpp"

namespace geeco::img {

void write_ppm(const dynimg::Frame& frame, const std::string& path);
dynimg::Frame read_ppm(const std::string& path);

}  // namespace geeco::img
