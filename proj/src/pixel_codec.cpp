#include "maskfix/pixel_codec.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

#include "maskfix/errors.hpp"

namespace maskfix {

void QuantizerConfig::validate() const {
  if (bins < 2) throw std::invalid_argument("quantizer needs at least 2 bins");
  if (256 % bins != 0) {
    throw std::invalid_argument("bins must divide 256 evenly");
  }
}

std::uint8_t& RgbImage::at(int y, int x, int channel) {
  return pixels[static_cast<std::size_t>((y * width + x) * 3 + channel)];
}

std::uint8_t RgbImage::at(int y, int x, int channel) const {
  return pixels[static_cast<std::size_t>((y * width + x) * 3 + channel)];
}

RgbImage make_image(int height, int width) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("image dimensions must be positive");
  }
  RgbImage image;
  image.height = height;
  image.width = width;
  image.pixels.assign(static_cast<std::size_t>(3 * height * width), 0);
  return image;
}

Token quantize_pixel(int r, int g, int b, int q) {
  QuantizerConfig{q}.validate();
  if (r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255) {
    throw std::invalid_argument("channel values must lie in [0, 255]");
  }
  int delta = 256 / q;
  return static_cast<Token>(r / delta + (g / delta) * q + (b / delta) * q * q);
}

std::array<std::uint8_t, 3> dequantize_token(Token token, int q) {
  QuantizerConfig{q}.validate();
  if (token < 0 || token >= q * q * q) {
    throw std::invalid_argument("token outside the q^3 codebook");
  }
  int delta = 256 / q;
  int r_bin = token % q;
  int g_bin = (token / q) % q;
  int b_bin = token / (q * q);
  auto center = [delta](int bin) {
    return static_cast<std::uint8_t>(bin * delta + delta / 2);
  };
  return {center(r_bin), center(g_bin), center(b_bin)};
}

TokenGrid encode_image(const RgbImage& image, int q) {
  QuantizerConfig config{q};
  config.validate();
  std::vector<Token> cells;
  cells.reserve(static_cast<std::size_t>(image.height * image.width));
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      cells.push_back(
          quantize_pixel(image.at(y, x, 0), image.at(y, x, 1),
                         image.at(y, x, 2), q));
    }
  }
  return TokenGrid(image.height, image.width, Vocabulary(config.vocab()),
                   std::move(cells));
}

RgbImage decode_grid(const TokenGrid& grid, int q) {
  QuantizerConfig config{q};
  config.validate();
  if (grid.vocab().size() != config.vocab()) {
    throw std::invalid_argument("grid vocabulary does not match q^3");
  }
  if (grid.masked_count() != 0) {
    throw std::invalid_argument("cannot decode a grid with masked cells");
  }
  RgbImage image = make_image(grid.height(), grid.width());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      auto rgb = dequantize_token(grid.cell(flat_index(y, x, grid.width())), q);
      for (int c = 0; c < 3; ++c) image.at(y, x, c) = rgb[c];
    }
  }
  return image;
}

namespace {

// Header scanner that knows where it is, so parse errors can say which byte
// broke. Skips whitespace and '#' comments between tokens.
class HeaderReader {
 public:
  explicit HeaderReader(std::istream& in) : in_(in) {}

  std::size_t offset() const { return offset_; }

  int get() {
    int c = in_.get();
    if (c != EOF) ++offset_;
    return c;
  }

  void skip_separators() {
    for (;;) {
      int c = in_.peek();
      if (c == '#') {
        while (c != EOF && c != '\n') c = get();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        get();
      } else {
        return;
      }
    }
  }

  // Offset of the first digit of the most recent read_number.
  std::size_t last_number_at() const { return last_number_at_; }

  int read_number(const char* what) {
    skip_separators();
    std::size_t start = offset_;
    last_number_at_ = start;
    long long value = 0;
    int digits = 0;
    while (std::isdigit(in_.peek())) {
      value = value * 10 + (get() - '0');
      ++digits;
      if (value > 1'000'000'000) {
        throw ParseError(std::string(what) + " is out of range", start);
      }
    }
    if (digits == 0) {
      throw ParseError(std::string("expected ") + what, offset_);
    }
    return static_cast<int>(value);
  }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
  std::size_t last_number_at_ = 0;
};

}  // namespace

RgbImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path);

  HeaderReader reader(in);
  if (reader.get() != 'P' || reader.get() != '6') {
    throw ParseError("not a binary PPM (magic must be P6)", 0);
  }
  int width = reader.read_number("width");
  int height = reader.read_number("height");
  if (width < 1 || height < 1) {
    throw ParseError("image dimensions must be positive", 2);
  }
  int maxval = reader.read_number("maxval");
  if (maxval != 255) {
    throw ParseError("only maxval 255 is supported", reader.last_number_at());
  }
  int sep = reader.get();
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n') {
    throw ParseError("expected single whitespace after maxval",
                     reader.offset());
  }

  RgbImage image = make_image(height, width);
  in.read(reinterpret_cast<char*>(image.pixels.data()),
          static_cast<std::streamsize>(image.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != image.pixels.size()) {
    throw ParseError("truncated pixel data",
                     reader.offset() + static_cast<std::size_t>(in.gcount()));
  }
  return image;
}

void write_ppm(const RgbImage& image, const std::string& path) {
  if (image.pixels.size() !=
      static_cast<std::size_t>(3 * image.height * image.width)) {
    throw std::invalid_argument("image buffer does not match its dimensions");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError("cannot open " + path + " for writing");
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  out.flush();
  if (!out) throw OutputError("failed while writing " + path);
}

void write_pgm(const std::vector<int>& samples, int height, int width,
               int maxval, const std::string& path) {
  if (height < 1 || width < 1 ||
      samples.size() != static_cast<std::size_t>(height * width)) {
    throw std::invalid_argument("sample buffer does not match dimensions");
  }
  if (maxval < 1 || maxval > 65535) {
    throw std::invalid_argument("pgm maxval must lie in [1, 65535]");
  }
  for (int v : samples) {
    if (v < 0 || v > maxval) {
      throw std::invalid_argument("pgm sample outside [0, maxval]");
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError("cannot open " + path + " for writing");
  out << "P5\n" << width << " " << height << "\n" << maxval << "\n";
  if (maxval > 255) {
    for (int v : samples) {
      out.put(static_cast<char>((v >> 8) & 0xff));
      out.put(static_cast<char>(v & 0xff));
    }
  } else {
    for (int v : samples) out.put(static_cast<char>(v & 0xff));
  }
  out.flush();
  if (!out) throw OutputError("failed while writing " + path);
}

std::vector<int> read_pgm(const std::string& path, int& height, int& width,
                          int& maxval) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path);

  HeaderReader reader(in);
  if (reader.get() != 'P' || reader.get() != '5') {
    throw ParseError("not a binary PGM (magic must be P5)", 0);
  }
  width = reader.read_number("width");
  height = reader.read_number("height");
  maxval = reader.read_number("maxval");
  if (width < 1 || height < 1) {
    throw ParseError("image dimensions must be positive", 2);
  }
  if (maxval < 1 || maxval > 65535) {
    throw ParseError("pgm maxval must lie in [1, 65535]",
                     reader.last_number_at());
  }
  int sep = reader.get();
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n') {
    throw ParseError("expected single whitespace after maxval",
                     reader.offset());
  }

  std::size_t count = static_cast<std::size_t>(height) *
                      static_cast<std::size_t>(width);
  int bytes_per = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> body(count * static_cast<std::size_t>(bytes_per));
  in.read(reinterpret_cast<char*>(body.data()),
          static_cast<std::streamsize>(body.size()));
  if (static_cast<std::size_t>(in.gcount()) != body.size()) {
    throw ParseError("truncated pixel data",
                     reader.offset() + static_cast<std::size_t>(in.gcount()));
  }
  std::vector<int> samples(count);
  for (std::size_t i = 0; i < count; ++i) {
    samples[i] = bytes_per == 2 ? (body[2 * i] << 8) | body[2 * i + 1]
                                : body[i];
  }
  return samples;
}

}  // namespace maskfix
