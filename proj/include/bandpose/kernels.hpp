#pragma once

// Data-parallel pixel kernels. Each kernel has a straightforward serial
// reference in `serial` and an OpenMP implementation in `parallel`; the public
// imaging / color_model entry points call the parallel versions. The serial
// versions are kept for tests and for the benchmark target.

#include <span>

#include "bandpose/imaging.hpp"

namespace bandpose::kernels {

namespace serial {

HueSatImage rgb_to_hue_saturation(const RasterImage& img);
// Brute force over every disk offset.
BinaryImage erode_disk(const BinaryImage& b, int radius);
// Direct gather over every kernel tap.
ScalarImage convolve(const BinaryImage& b, const Kernel2D& kernel);
// Separable Gaussian with clamped borders.
RasterImage gaussian_blur(const RasterImage& img, double sigma);

}  // namespace serial

namespace parallel {

HueSatImage rgb_to_hue_saturation(const RasterImage& img);
// Row-run formulation: a pixel survives iff, for every disk row, the
// horizontal run of ones through it covers the disk chord.
BinaryImage erode_disk(const BinaryImage& b, int radius);
// Gather that skips kernel rows without any 1-pixels.
ScalarImage convolve(const BinaryImage& b, const Kernel2D& kernel);
RasterImage gaussian_blur(const RasterImage& img, double sigma);

}  // namespace parallel

std::vector<double> gaussian_taps(double sigma);

}  // namespace bandpose::kernels
