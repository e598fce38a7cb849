#include "cada/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "cada/errors.hpp"

namespace cada {

namespace {

struct PnmFile {
  bool color = false;  // P6
  int width = 0;
  int height = 0;
  std::vector<unsigned char> pixels;  // interleaved for P6
};

[[noreturn]] void fail(const std::string& path, std::istream& is, const std::string& msg) {
  const auto pos = is.tellg();
  const std::string at = pos >= 0 ? std::to_string(static_cast<long long>(pos)) : "EOF";
  throw DataError(path + ": " + msg + " (at byte " + at + ")");
}

// Whitespace/comment skipper for PNM headers ('#' to end of line).
void skip_separators(std::istream& is) {
  for (;;) {
    const int c = is.peek();
    if (c == '#') {
      while (is.peek() != '\n' && is.peek() != EOF) is.get();
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      is.get();
    } else {
      return;
    }
  }
}

int read_header_int(std::istream& is, const std::string& path, const char* what) {
  skip_separators(is);
  int value = 0;
  bool any = false;
  while (is.peek() >= '0' && is.peek() <= '9') {
    value = value * 10 + (is.get() - '0');
    any = true;
    if (value > 1 << 24) fail(path, is, std::string("unreasonable ") + what);
  }
  if (!any) fail(path, is, std::string("expected ") + what);
  return value;
}

PnmFile read_pnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open image: " + path);
  char m0 = 0, m1 = 0;
  is.get(m0);
  is.get(m1);
  if (!is || m0 != 'P' || (m1 != '5' && m1 != '6'))
    throw DataError(path + ": expected magic P5 or P6 (at byte 0)");
  PnmFile f;
  f.color = m1 == '6';
  f.width = read_header_int(is, path, "width");
  f.height = read_header_int(is, path, "height");
  const int maxval = read_header_int(is, path, "maxval");
  if (f.width < 1 || f.height < 1) fail(path, is, "non-positive dimensions");
  if (maxval != 255)
    fail(path, is, "unsupported maxval " + std::to_string(maxval) + " (only 8-bit handled)");
  // exactly one whitespace byte separates header and payload
  const int sep = is.get();
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n')
    fail(path, is, "missing whitespace before pixel payload");
  const std::size_t need =
      static_cast<std::size_t>(f.width) * f.height * (f.color ? 3 : 1);
  f.pixels.resize(need);
  is.read(reinterpret_cast<char*>(f.pixels.data()), static_cast<std::streamsize>(need));
  const std::size_t got = static_cast<std::size_t>(is.gcount());
  if (got != need) {
    throw DataError(path + ": truncated pixel payload, need " + std::to_string(need) +
                    " bytes but got " + std::to_string(got));
  }
  return f;
}

inline unsigned char quantize(double v) {
  const double c = std::min(1.0, std::max(0.0, v));
  return static_cast<unsigned char>(std::lround(c * 255.0));
}

}  // namespace

Tensor load_image(const std::string& path, bool take_green) {
  const PnmFile f = read_pnm(path);
  Tensor img({1, f.height, f.width});
  if (!f.color) {
    for (int i = 0; i < img.numel(); ++i) img[i] = f.pixels[static_cast<std::size_t>(i)] / 255.0;
  } else if (take_green) {
    for (int i = 0; i < img.numel(); ++i)
      img[i] = f.pixels[static_cast<std::size_t>(i) * 3 + 1] / 255.0;
  } else {
    for (int i = 0; i < img.numel(); ++i) {
      const std::size_t b = static_cast<std::size_t>(i) * 3;
      img[i] = (f.pixels[b] + f.pixels[b + 1] + f.pixels[b + 2]) / (3.0 * 255.0);
    }
  }
  return img;
}

Tensor load_image_rgb(const std::string& path) {
  const PnmFile f = read_pnm(path);
  Tensor img({3, f.height, f.width});
  const int plane = f.height * f.width;
  for (int i = 0; i < plane; ++i) {
    if (f.color) {
      const std::size_t b = static_cast<std::size_t>(i) * 3;
      img[i] = f.pixels[b] / 255.0;
      img[plane + i] = f.pixels[b + 1] / 255.0;
      img[2 * plane + i] = f.pixels[b + 2] / 255.0;
    } else {
      const double v = f.pixels[static_cast<std::size_t>(i)] / 255.0;
      img[i] = img[plane + i] = img[2 * plane + i] = v;
    }
  }
  return img;
}

void save_pgm(const std::string& path, const Tensor& img) {
  int h = 0, w = 0;
  if (img.ndim() == 3 && img.dim(0) == 1) {
    h = img.dim(1);
    w = img.dim(2);
  } else if (img.ndim() == 2) {
    h = img.dim(0);
    w = img.dim(1);
  } else {
    throw std::invalid_argument("save_pgm: expected [1,H,W] or [H,W], got " + shape_str(img));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "P5\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w);
  for (int i = 0; i < h * w; ++i) buf[static_cast<std::size_t>(i)] = quantize(img[i]);
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  os.close();
  if (!os) throw DataError("write failed: " + path);
}

void save_ppm(const std::string& path, const Tensor& rgb) {
  if (rgb.ndim() != 3 || rgb.dim(0) != 3)
    throw std::invalid_argument("save_ppm: expected [3,H,W], got " + shape_str(rgb));
  const int h = rgb.dim(1), w = rgb.dim(2), plane = h * w;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> buf(static_cast<std::size_t>(plane) * 3);
  for (int i = 0; i < plane; ++i) {
    buf[static_cast<std::size_t>(i) * 3] = quantize(rgb[i]);
    buf[static_cast<std::size_t>(i) * 3 + 1] = quantize(rgb[plane + i]);
    buf[static_cast<std::size_t>(i) * 3 + 2] = quantize(rgb[2 * plane + i]);
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  os.close();
  if (!os) throw DataError("write failed: " + path);
}

}  // namespace cada
