#pragma once

#include <filesystem>

#include "bandpose/imaging.hpp"

namespace bandpose {

// Binary PPM (P6, maxval 255). Channels are mapped to [0,1] by /255.
RasterImage load_ppm(const std::filesystem::path& path);
void save_ppm(const std::filesystem::path& path, const RasterImage& img);

// 8-bit label raster: P5 PGM, or P6 PPM whose red channel carries the id.
LabelImage load_label_raster(const std::filesystem::path& path);
void save_pgm(const std::filesystem::path& path, const LabelImage& labels);

}  // namespace bandpose
