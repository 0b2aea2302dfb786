#include "maskfix/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "maskfix/errors.hpp"
#include "maskfix/pixel_codec.hpp"
#include "maskfix/synthetic.hpp"

namespace maskfix {

Dataset load_ppm_dataset(const std::string& dir, int bins) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw DatasetError("dataset directory " + dir + " does not exist");
  }
  fs::path index_path = fs::path(dir) / "index.csv";
  std::ifstream index(index_path);
  if (!index) {
    throw DatasetError("dataset index " + index_path.string() + " is missing");
  }

  std::string line;
  if (!std::getline(index, line) || line.rfind("file,label", 0) != 0) {
    throw DatasetError("dataset index must start with a 'file,label' header");
  }

  Dataset data;
  data.vocab = QuantizerConfig{bins}.vocab();
  int line_no = 1;
  while (std::getline(index, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw DatasetError("index line " + std::to_string(line_no) +
                         " is not file,label: '" + line + "'");
    }
    std::string file = line.substr(0, comma);
    std::string label_text = line.substr(comma + 1);
    int label = 0;
    try {
      std::size_t used = 0;
      label = std::stoi(label_text, &used);
      if (used != label_text.size() || label < 0) {
        throw std::invalid_argument(label_text);
      }
    } catch (...) {
      throw DatasetError("index line " + std::to_string(line_no) +
                         " has a bad label: '" + label_text + "'");
    }

    fs::path image_path = fs::path(dir) / file;
    RgbImage image;
    try {
      image = read_ppm(image_path.string());
    } catch (const ParseError& e) {
      throw DatasetError("image " + image_path.string() + ": " + e.what());
    }
    if (data.examples.empty()) {
      data.height = image.height;
      data.width = image.width;
    } else if (image.height != data.height || image.width != data.width) {
      throw DatasetError("image " + image_path.string() +
                         " does not match the dataset's size");
    }
    data.examples.emplace_back(encode_image(image, bins), label);
    data.num_classes = std::max(data.num_classes, label + 1);
  }
  if (data.examples.empty()) {
    throw DatasetError("dataset index lists no images");
  }
  return data;
}

Dataset make_stripes_dataset(int height, int width, int vocab, int phases) {
  std::vector<int> phase_list(static_cast<std::size_t>(phases));
  for (int p = 0; p < phases; ++p) phase_list[static_cast<std::size_t>(p)] = p;
  Dataset data;
  data.examples = striped_dataset(height, width, vocab, phase_list, phase_list);
  data.height = height;
  data.width = width;
  data.vocab = vocab;
  data.num_classes = 2;
  return data;
}

Dataset load_dataset(const TrainRunConfig& config) {
  Dataset data;
  if (config.dataset == "ppm") {
    data = load_ppm_dataset(config.data_dir, config.bins);
  } else {
    data = make_stripes_dataset(config.stripe_height, config.stripe_width,
                                config.stripe_vocab, config.stripe_phases);
  }
  data.num_classes = std::max(data.num_classes, config.num_classes);
  return data;
}

}  // namespace maskfix
