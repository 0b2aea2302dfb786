#include "maskfix/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "maskfix/errors.hpp"

namespace maskfix {

namespace {

std::string trim(const std::string& text) {
  std::size_t begin = text.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  std::size_t end = text.find_last_not_of(" \t\r");
  return text.substr(begin, end - begin + 1);
}

double to_double(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (...) {
    throw ConfigError("value '" + value + "' is not a number", key);
  }
}

long long to_ll(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    long long parsed = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (...) {
    throw ConfigError("value '" + value + "' is not an integer", key);
  }
}

int to_int(const std::string& value, const std::string& key) {
  long long parsed = to_ll(value, key);
  if (parsed < -2147483648LL || parsed > 2147483647LL) {
    throw ConfigError("value '" + value + "' is out of range", key);
  }
  return static_cast<int>(parsed);
}

bool to_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("value '" + value + "' is not a boolean", key);
}

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

}  // namespace

void TrainRunConfig::validate() const {
  try {
    train.validate();
    ModelConfig model{layers,      hidden_dim, heads, 2, 1,
                      num_classes, train.dropout};
    // Shape fields are checked here; vocab and positions come from the
    // dataset, so placeholders stand in for them.
    model.validate();
  } catch (const std::invalid_argument& e) {
    // Library-level validators name the offending field first.
    std::string message = e.what();
    throw ConfigError(message, message.substr(0, message.find(' ')));
  }
  if (dataset != "stripes" && dataset != "ppm") {
    throw ConfigError("dataset must be 'stripes' or 'ppm'", "dataset");
  }
  if (dataset == "ppm" && data_dir.empty()) {
    throw ConfigError("ppm dataset needs data_dir", "data_dir");
  }
  if (stripe_height < 1 || stripe_width < 1) {
    throw ConfigError("stripe grid must be at least 1x1", "stripe_height");
  }
  if (stripe_vocab < 2) {
    throw ConfigError("stripe_vocab must be >= 2", "stripe_vocab");
  }
  if (stripe_phases < 1 || stripe_phases > stripe_vocab) {
    throw ConfigError("stripe_phases must lie in [1, stripe_vocab]",
                      "stripe_phases");
  }
  if (bins < 2 || 256 % bins != 0) {
    throw ConfigError("bins must divide 256 and be >= 2", "bins");
  }
  if (checkpoint_every < 0) {
    throw ConfigError("checkpoint_every must be >= 0", "checkpoint_every");
  }
  if (log_every < 1) throw ConfigError("log_every must be >= 1", "log_every");
  if (out_dir.empty()) throw ConfigError("out_dir must be set", "out_dir");
}

void apply_config_entry(TrainRunConfig& config, const std::string& key,
                        const std::string& value) {
  TrainConfig& t = config.train;
  if (key == "alpha") t.alpha = to_double(value, key);
  else if (key == "learning_rate") t.learning_rate = to_double(value, key);
  else if (key == "adam_beta1") t.adam_beta1 = to_double(value, key);
  else if (key == "adam_beta2") t.adam_beta2 = to_double(value, key);
  else if (key == "adam_eps") t.adam_eps = to_double(value, key);
  else if (key == "weight_decay") t.weight_decay = to_double(value, key);
  else if (key == "warmup_steps") t.warmup_steps = to_ll(value, key);
  else if (key == "grad_clip_norm") t.grad_clip_norm = to_double(value, key);
  else if (key == "cfg_dropout") t.cfg_dropout = to_double(value, key);
  else if (key == "dropout") t.dropout = to_double(value, key);
  else if (key == "batch_size") t.batch_size = to_int(value, key);
  else if (key == "total_steps") t.total_steps = to_ll(value, key);
  else if (key == "decay_tail_fraction")
    t.decay_tail_fraction = to_double(value, key);
  else if (key == "seed")
    t.seed = static_cast<std::uint64_t>(to_ll(value, key));
  else if (key == "steps") t.steps = to_int(value, key);
  else if (key == "order") {
    try {
      t.order = order_kind_from_string(value);
    } catch (const std::invalid_argument&) {
      throw ConfigError("unknown ordering '" + value + "'", key);
    }
  } else if (key == "random_roll") t.random_roll = to_bool(value, key);
  else if (key == "scheduler") {
    try {
      t.scheduler = schedule_kind_from_string(value);
    } catch (const std::invalid_argument&) {
      throw ConfigError("unknown scheduler '" + value + "'", key);
    }
  } else if (key == "layers") config.layers = to_int(value, key);
  else if (key == "hidden_dim") config.hidden_dim = to_int(value, key);
  else if (key == "heads") config.heads = to_int(value, key);
  else if (key == "num_classes") config.num_classes = to_int(value, key);
  else if (key == "dataset") config.dataset = value;
  else if (key == "data_dir") config.data_dir = value;
  else if (key == "bins") config.bins = to_int(value, key);
  else if (key == "stripe_height") config.stripe_height = to_int(value, key);
  else if (key == "stripe_width") config.stripe_width = to_int(value, key);
  else if (key == "stripe_vocab") config.stripe_vocab = to_int(value, key);
  else if (key == "stripe_phases") config.stripe_phases = to_int(value, key);
  else if (key == "out_dir") config.out_dir = value;
  else if (key == "checkpoint_every")
    config.checkpoint_every = to_ll(value, key);
  else if (key == "log_every") config.log_every = to_ll(value, key);
  else throw ConfigError("unknown key '" + key + "'", key);
}

namespace {

TrainRunConfig parse_lines(std::istream& in) {
  TrainRunConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::string entry = trim(line);
    if (entry.empty()) continue;
    std::size_t eq = entry.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(
          "line " + std::to_string(line_no) + " is not key = value: '" +
              entry + "'",
          entry);
    }
    std::string key = trim(entry.substr(0, eq));
    std::string value = trim(entry.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + " has no key",
                        key);
    }
    try {
      apply_config_entry(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(
          std::string(e.what()) + " (line " + std::to_string(line_no) + ")",
          e.key());
    }
  }
  return config;
}

}  // namespace

TrainRunConfig parse_train_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path, "");
  return parse_lines(in);
}

TrainRunConfig parse_train_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_lines(in);
}

std::vector<std::pair<std::string, std::string>> dump_config(
    const TrainRunConfig& config) {
  const TrainConfig& t = config.train;
  return {
      {"alpha", format_double(t.alpha)},
      {"learning_rate", format_double(t.learning_rate)},
      {"adam_beta1", format_double(t.adam_beta1)},
      {"adam_beta2", format_double(t.adam_beta2)},
      {"adam_eps", format_double(t.adam_eps)},
      {"weight_decay", format_double(t.weight_decay)},
      {"warmup_steps", std::to_string(t.warmup_steps)},
      {"grad_clip_norm", format_double(t.grad_clip_norm)},
      {"cfg_dropout", format_double(t.cfg_dropout)},
      {"dropout", format_double(t.dropout)},
      {"batch_size", std::to_string(t.batch_size)},
      {"total_steps", std::to_string(t.total_steps)},
      {"decay_tail_fraction", format_double(t.decay_tail_fraction)},
      {"seed", std::to_string(t.seed)},
      {"steps", std::to_string(t.steps)},
      {"order", to_string(t.order)},
      {"random_roll", t.random_roll ? "true" : "false"},
      {"scheduler", to_string(t.scheduler)},
      {"layers", std::to_string(config.layers)},
      {"hidden_dim", std::to_string(config.hidden_dim)},
      {"heads", std::to_string(config.heads)},
      {"num_classes", std::to_string(config.num_classes)},
      {"dataset", config.dataset},
      {"data_dir", config.data_dir},
      {"bins", std::to_string(config.bins)},
      {"stripe_height", std::to_string(config.stripe_height)},
      {"stripe_width", std::to_string(config.stripe_width)},
      {"stripe_vocab", std::to_string(config.stripe_vocab)},
      {"stripe_phases", std::to_string(config.stripe_phases)},
      {"out_dir", config.out_dir},
      {"checkpoint_every", std::to_string(config.checkpoint_every)},
      {"log_every", std::to_string(config.log_every)},
  };
}

}  // namespace maskfix
