#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "maskfix/token_grid.hpp"

namespace maskfix {

// Per-channel uniform quantizer: q bins of width 256 / q per channel, one
// token per pixel, codebook size q^3.
struct QuantizerConfig {
  int bins = 16;  // q

  int vocab() const { return bins * bins * bins; }
  int bin_width() const { return 256 / bins; }
  void validate() const;  // q >= 2 and q divides 256
};

// Plain 8-bit RGB raster, row-major, channels interleaved.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // 3 * height * width bytes

  std::uint8_t& at(int y, int x, int channel);
  std::uint8_t at(int y, int x, int channel) const;
};

RgbImage make_image(int height, int width);

// token = floor(r/D) + floor(g/D)*q + floor(b/D)*q^2 with D = 256/q.
Token quantize_pixel(int r, int g, int b, int q);

// Inverse by base-q digit extraction; channels land on bin centers, the
// value that minimizes worst-case reconstruction error.
std::array<std::uint8_t, 3> dequantize_token(Token token, int q);

TokenGrid encode_image(const RgbImage& image, int q);

// Requires a complete grid over the q^3 codebook.
RgbImage decode_grid(const TokenGrid& grid, int q);

// Binary PPM (P6), maxval 255 only. write emits exactly
// "P6\n<w> <h>\n255\n" followed by raw RGB bytes; read accepts standard
// whitespace and '#' comments in the header and reports malformed input as
// ParseError with a byte offset.
RgbImage read_ppm(const std::string& path);
void write_ppm(const RgbImage& image, const std::string& path);

// Binary PGM (P5) for rank visualizations: one sample per cell, maxval as
// given (capped at 65535), two-byte big-endian samples when maxval > 255.
void write_pgm(const std::vector<int>& samples, int height, int width,
               int maxval, const std::string& path);
std::vector<int> read_pgm(const std::string& path, int& height, int& width,
                          int& maxval);

}  // namespace maskfix
