#include "maskfix/synthetic.hpp"

#include <algorithm>
#include <stdexcept>

#include "maskfix/rng.hpp"

namespace maskfix {

TokenGrid striped_grid(int height, int width, int vocab, int phase,
                       int class_label) {
  if (class_label != 0 && class_label != 1) {
    throw std::invalid_argument("stripe class must be 0 or 1");
  }
  if (phase < 0) throw std::invalid_argument("phase must be >= 0");
  Vocabulary v(vocab);
  std::vector<Token> cells;
  cells.reserve(static_cast<std::size_t>(height * width));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      int along = class_label == 0 ? x : y;
      cells.push_back(static_cast<Token>((phase + along) % vocab));
    }
  }
  return TokenGrid(height, width, v, std::move(cells));
}

std::vector<std::pair<TokenGrid, int>> striped_dataset(
    int height, int width, int vocab,
    const std::vector<int>& phases_class0,
    const std::vector<int>& phases_class1) {
  std::vector<std::pair<TokenGrid, int>> data;
  data.reserve(phases_class0.size() + phases_class1.size());
  for (int phase : phases_class0) {
    data.emplace_back(striped_grid(height, width, vocab, phase, 0), 0);
  }
  for (int phase : phases_class1) {
    data.emplace_back(striped_grid(height, width, vocab, phase, 1), 1);
  }
  return data;
}

RgbImage gradient_image(int height, int width, std::uint64_t seed) {
  RgbImage image = make_image(height, width);
  Rng rng = derive_rng(seed, stream::kInit, 2);
  int base_r = static_cast<int>(rng.below(64));
  int base_g = static_cast<int>(rng.below(64));
  int base_b = static_cast<int>(rng.below(64));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      image.at(y, x, 0) =
          static_cast<std::uint8_t>((base_r + 191 * x / std::max(1, width - 1)) & 0xff);
      image.at(y, x, 1) =
          static_cast<std::uint8_t>((base_g + 191 * y / std::max(1, height - 1)) & 0xff);
      image.at(y, x, 2) =
          static_cast<std::uint8_t>((base_b + 95 * (x + y) /
                                     std::max(1, width + height - 2)) & 0xff);
    }
  }
  return image;
}

}  // namespace maskfix
