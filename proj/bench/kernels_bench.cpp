// Serial reference vs OpenMP kernels on a camera-sized frame.
#include <benchmark/benchmark.h>

#include <random>

#include "bandpose/detection.hpp"
#include "bandpose/kernels.hpp"
#include "bandpose/synthetic.hpp"

using namespace bandpose;

namespace {

const RasterImage& frame() {
  static const RasterImage img = [] {
    const CameraModel cam = reference_camera();
    SceneSpec scene{.pose = sweep_pose(500, 30, 251, cam), .spec = reference_pointer(),
                    .band_colors = reference_band_colors()};
    scene.noise_sigma = 0.01;
    return render(scene, cam).image;
  }();
  return img;
}

const BinaryImage& mask() {
  static const BinaryImage b = [] {
    const HueSatImage hs = kernels::parallel::rgb_to_hue_saturation(frame());
    BinaryImage out(hs.width, hs.height);
    for (std::size_t i = 0; i < hs.saturation.size(); ++i) out.bits()[i] = hs.saturation[i] > 0.25f;
    return out;
  }();
  return b;
}

void BM_HueSerial(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(kernels::serial::rgb_to_hue_saturation(frame()));
}
void BM_HueParallel(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(kernels::parallel::rgb_to_hue_saturation(frame()));
}
void BM_ErodeSerial(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(kernels::serial::erode_disk(mask(), static_cast<int>(s.range(0))));
}
void BM_ErodeParallel(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(kernels::parallel::erode_disk(mask(), static_cast<int>(s.range(0))));
}
void BM_ConvolveSerial(benchmark::State& s) {
  const Kernel2D k = junction_kernel(5.0, 0.26, 0.3);
  for (auto _ : s) benchmark::DoNotOptimize(kernels::serial::convolve(mask(), k));
}
void BM_ConvolveParallel(benchmark::State& s) {
  const Kernel2D k = junction_kernel(5.0, 0.26, 0.3);
  for (auto _ : s) benchmark::DoNotOptimize(kernels::parallel::convolve(mask(), k));
}
void BM_BlurSerial(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(kernels::serial::gaussian_blur(frame(), 3.0));
}
void BM_BlurParallel(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(kernels::parallel::gaussian_blur(frame(), 3.0));
}

}  // namespace

BENCHMARK(BM_HueSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HueParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ErodeSerial)->Arg(2)->Arg(5)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ErodeParallel)->Arg(2)->Arg(5)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvolveSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvolveParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BlurSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BlurParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
