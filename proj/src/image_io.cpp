#include "bandpose/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "bandpose/error.hpp"

namespace bandpose {

namespace {

struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

void skip_space_and_comments(std::istream& in) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

NetpbmHeader read_header(std::istream& in, const std::filesystem::path& path) {
  NetpbmHeader h;
  in >> h.magic;
  skip_space_and_comments(in);
  in >> h.width;
  skip_space_and_comments(in);
  in >> h.height;
  skip_space_and_comments(in);
  in >> h.maxval;
  if (!in || (h.magic != "P5" && h.magic != "P6") || h.width < 1 || h.height < 1) {
    throw Error(ErrorKind::Io, "image-io", "malformed netpbm header in " + path.string());
  }
  if (h.maxval != 255) {
    throw Error(ErrorKind::Io, "image-io", "only maxval 255 is supported: " + path.string());
  }
  in.get();  // single whitespace before raster
  return h;
}

std::vector<unsigned char> read_raster(std::istream& in, std::size_t bytes, const std::filesystem::path& path) {
  std::vector<unsigned char> data(bytes);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) {
    throw Error(ErrorKind::Io, "image-io", "truncated raster in " + path.string());
  }
  return data;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "image-io", "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "image-io", "cannot write " + path.string());
  return out;
}

unsigned char quantize(float v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
}

}  // namespace

RasterImage load_ppm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const NetpbmHeader h = read_header(in, path);
  if (h.magic != "P6") throw Error(ErrorKind::Io, "image-io", "expected binary PPM (P6): " + path.string());
  const auto data = read_raster(in, static_cast<std::size_t>(h.width) * h.height * 3, path);
  std::vector<Rgb> px(static_cast<std::size_t>(h.width) * h.height);
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = {data[3 * i] / 255.f, data[3 * i + 1] / 255.f, data[3 * i + 2] / 255.f};
  }
  return RasterImage(h.width, h.height, std::move(px));
}

void save_ppm(const std::filesystem::path& path, const RasterImage& img) {
  auto out = open_out(path);
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> data;
  data.reserve(img.pixels().size() * 3);
  for (const Rgb& p : img.pixels()) {
    data.push_back(quantize(p.r));
    data.push_back(quantize(p.g));
    data.push_back(quantize(p.b));
  }
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

LabelImage load_label_raster(const std::filesystem::path& path) {
  auto in = open_in(path);
  const NetpbmHeader h = read_header(in, path);
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  const int channels = h.magic == "P6" ? 3 : 1;
  const auto data = read_raster(in, n * channels, path);
  LabelImage labels(h.width, h.height);
  for (std::size_t i = 0; i < n; ++i) labels.labels[i] = data[i * channels];
  return labels;
}

void save_pgm(const std::filesystem::path& path, const LabelImage& labels) {
  auto out = open_out(path);
  out << "P5\n" << labels.width << ' ' << labels.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(labels.labels.data()), static_cast<std::streamsize>(labels.labels.size()));
}

}  // namespace bandpose
