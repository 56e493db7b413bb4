#include "gs/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <csetjmp>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

namespace gs {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors by longjmp; keep the message for the exception we throw afterwards.
thread_local std::string png_message;

void png_fail(png_structp png, png_const_charp msg) {
  png_message = msg;
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

}  // namespace

std::uint16_t quantize16(double v) {
  const double c = std::clamp(v, -1.0, 1.0);
  return static_cast<std::uint16_t>(std::lround((c + 1.0) * 0.5 * 65535.0));
}

double dequantize16(std::uint16_t q) { return static_cast<double>(q) / 65535.0 * 2.0 - 1.0; }

void write_png16(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 1) {
    throw ShapeError("write_png16 needs a [1,H,W] image, got " + to_string(image.shape()));
  }
  const std::size_t H = image.dim(1), W = image.dim(2);
  File f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  std::vector<png_byte> row(W * 2);
  if (setjmp(png_jmpbuf(png))) throw std::runtime_error("libpng: " + png_message + " writing '" + path.string() + "'");
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      const std::uint16_t q = quantize16(image[r * W + c]);
      row[2 * c] = static_cast<png_byte>(q >> 8);  // PNG is big-endian
      row[2 * c + 1] = static_cast<png_byte>(q & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

Tensor read_png(const std::filesystem::path& path) {
  File f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "'");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw std::runtime_error("'" + path.string() + "' is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  // Everything with a destructor lives outside the setjmp region.
  std::vector<png_byte> row;
  std::optional<Tensor> out;
  std::size_t W = 0, H = 0;
  if (setjmp(png_jmpbuf(png))) throw std::runtime_error("libpng: " + png_message + " reading '" + path.string() + "'");
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  W = png_get_image_width(png, info);
  H = png_get_image_height(png, info);
  const int channels = png_get_channels(png, info);
  const bool wide = png_get_bit_depth(png, info) == 16;
  const double full = wide ? 65535.0 : 255.0;
  row.resize(png_get_rowbytes(png, info));
  out.emplace(Shape{1, H, W});
  for (std::size_t r = 0; r < H; ++r) {
    png_read_row(png, row.data(), nullptr);
    for (std::size_t c = 0; c < W; ++c) {
      auto sample = [&](int ch) {
        const std::size_t i = c * static_cast<std::size_t>(channels) + static_cast<std::size_t>(ch);
        return wide ? static_cast<double>((row[2 * i] << 8) | row[2 * i + 1]) : static_cast<double>(row[i]);
      };
      double v = channels >= 3 ? 0.299 * sample(0) + 0.587 * sample(1) + 0.114 * sample(2) : sample(0);
      (*out)[r * W + c] = v / full * 2.0 - 1.0;
    }
  }
  return std::move(*out);
}

std::vector<Tensor> load_png_folder(const std::filesystem::path& dir, std::size_t size) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("image folder '" + dir.string() + "' not found");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no .png files in '" + dir.string() + "'");
  std::vector<Tensor> out;
  for (const auto& p : files) {
    Tensor t = read_png(p);
    if (t.dim(1) != size || t.dim(2) != size) {
      throw ShapeError("'" + p.string() + "' is " + std::to_string(t.dim(1)) + "x" + std::to_string(t.dim(2)) +
                       ", expected " + std::to_string(size) + "x" + std::to_string(size));
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace gs
