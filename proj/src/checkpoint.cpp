#include "maskfix/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "maskfix/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");
static_assert(sizeof(float) == 4, "checkpoint format assumes 32-bit floats");

namespace maskfix {

namespace {

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void write_tensor(std::ofstream& out, const std::string& name,
                  const MatT<float>& m) {
  if (m.cols() == 1) {
    out << name << " 1 " << m.rows() << "\n";
  } else {
    out << name << " 2 " << m.rows() << " " << m.cols() << "\n";
  }
  std::vector<float> row_major(static_cast<std::size_t>(m.rows()) *
                               static_cast<std::size_t>(m.cols()));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) row_major[k++] = m(i, j);
  }
  out.write(reinterpret_cast<const char*>(row_major.data()),
            static_cast<std::streamsize>(row_major.size() * sizeof(float)));
}

struct RawTensor {
  long long rows = 0;
  long long cols = 0;
  std::vector<float> data;  // row-major
};

void assign_tensor(MatT<float>& dest, const std::string& name,
                   const std::map<std::string, RawTensor>& raw) {
  auto it = raw.find(name);
  if (it == raw.end()) {
    throw CheckpointError("checkpoint is missing tensor " + name);
  }
  const RawTensor& t = it->second;
  if (t.rows != dest.rows() || t.cols != dest.cols()) {
    throw CheckpointError("tensor " + name + " has shape " +
                          std::to_string(t.rows) + "x" + std::to_string(t.cols) +
                          ", config expects " + std::to_string(dest.rows()) +
                          "x" + std::to_string(dest.cols()));
  }
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < dest.rows(); ++i) {
    for (Eigen::Index j = 0; j < dest.cols(); ++j) dest(i, j) = t.data[k++];
  }
}

long long parse_ll(const std::string& text, const std::string& key) {
  try {
    std::size_t used = 0;
    long long value = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (...) {
    throw CheckpointError("bad value for header key " + key + ": " + text);
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const Parameters& params,
                     long long step, std::uint64_t seed,
                     const AdamState* opt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError("cannot open " + path + " for writing");

  const ModelConfig& c = params.config;
  out << "MFX1 layers=" << c.layers << " hidden_dim=" << c.hidden_dim
      << " heads=" << c.heads << " vocab=" << c.vocab
      << " positions=" << c.positions << " num_classes=" << c.num_classes
      << " dropout=" << format_double(c.dropout) << " step=" << step
      << " seed=" << seed;
  if (opt != nullptr) out << " opt_step=" << opt->step;
  out << "\n";

  std::vector<std::pair<std::string, const MatT<float>*>> tensors;
  params.for_each_tensor([&](const std::string& name, const MatT<float>& m) {
    tensors.emplace_back(name, &m);
  });
  if (opt != nullptr) {
    opt->m.for_each_tensor([&](const std::string& name, const MatT<float>& m) {
      tensors.emplace_back("opt.m." + name, &m);
    });
    opt->v.for_each_tensor([&](const std::string& name, const MatT<float>& m) {
      tensors.emplace_back("opt.v." + name, &m);
    });
  }
  std::sort(tensors.begin(), tensors.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [name, m] : tensors) write_tensor(out, name, *m);

  out.flush();
  if (!out) throw OutputError("failed while writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);

  std::string header;
  if (!std::getline(in, header)) throw ParseError("empty checkpoint file", 0);
  std::size_t offset = header.size() + 1;

  std::istringstream head(header);
  std::string magic;
  head >> magic;
  if (magic != "MFX1") throw ParseError("bad magic, expected MFX1", 0);

  std::map<std::string, std::string> fields;
  std::string kv;
  while (head >> kv) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ParseError("header token without '=': " + kv, 0);
    }
    fields[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  for (const char* required :
       {"layers", "hidden_dim", "heads", "vocab", "positions", "num_classes",
        "dropout", "step", "seed"}) {
    if (fields.count(required) == 0) {
      throw ParseError(std::string("header missing key ") + required, 0);
    }
  }

  Checkpoint ckpt;
  ckpt.config.layers = static_cast<int>(parse_ll(fields["layers"], "layers"));
  ckpt.config.hidden_dim =
      static_cast<int>(parse_ll(fields["hidden_dim"], "hidden_dim"));
  ckpt.config.heads = static_cast<int>(parse_ll(fields["heads"], "heads"));
  ckpt.config.vocab = static_cast<int>(parse_ll(fields["vocab"], "vocab"));
  ckpt.config.positions =
      static_cast<int>(parse_ll(fields["positions"], "positions"));
  ckpt.config.num_classes =
      static_cast<int>(parse_ll(fields["num_classes"], "num_classes"));
  try {
    ckpt.config.dropout = std::stod(fields["dropout"]);
  } catch (...) {
    throw CheckpointError("bad value for header key dropout: " +
                          fields["dropout"]);
  }
  ckpt.step = parse_ll(fields["step"], "step");
  ckpt.seed = static_cast<std::uint64_t>(parse_ll(fields["seed"], "seed"));
  try {
    ckpt.config.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid configuration in header: ") +
                          e.what());
  }

  std::map<std::string, RawTensor> raw;
  std::string line;
  while (std::getline(in, line)) {
    std::size_t line_offset = offset;
    offset += line.size() + 1;
    if (line.empty()) {
      throw ParseError("unexpected blank tensor header", line_offset);
    }
    std::istringstream rec(line);
    std::string name;
    int rank = 0;
    rec >> name >> rank;
    if (rec.fail() || (rank != 1 && rank != 2)) {
      throw ParseError("bad tensor header: " + line, line_offset);
    }
    RawTensor t;
    if (rank == 1) {
      rec >> t.rows;
      t.cols = 1;
    } else {
      rec >> t.rows >> t.cols;
    }
    std::string extra;
    if (rec.fail() || t.rows < 1 || t.cols < 1 || (rec >> extra)) {
      throw ParseError("bad tensor dimensions: " + line, line_offset);
    }
    std::size_t count = static_cast<std::size_t>(t.rows) *
                        static_cast<std::size_t>(t.cols);
    t.data.resize(count);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float)) {
      throw ParseError("truncated tensor data for " + name, offset);
    }
    offset += count * sizeof(float);
    if (!raw.emplace(name, std::move(t)).second) {
      throw ParseError("duplicate tensor " + name, line_offset);
    }
  }

  detail::shape_parameters(ckpt.params, ckpt.config);
  ckpt.params.for_each_tensor([&](const std::string& name, MatT<float>& m) {
    assign_tensor(m, name, raw);
  });

  bool has_opt = raw.count("opt.m.tok_emb") > 0;
  std::size_t expected = 0;
  ckpt.params.for_each_tensor(
      [&](const std::string&, const MatT<float>&) { ++expected; });
  if (has_opt) {
    AdamState state = make_adam_state(ckpt.params);
    state.m.for_each_tensor([&](const std::string& name, MatT<float>& m) {
      assign_tensor(m, "opt.m." + name, raw);
    });
    state.v.for_each_tensor([&](const std::string& name, MatT<float>& m) {
      assign_tensor(m, "opt.v." + name, raw);
    });
    if (fields.count("opt_step") == 0) {
      throw CheckpointError("optimizer tensors present but opt_step missing");
    }
    state.step = parse_ll(fields["opt_step"], "opt_step");
    ckpt.opt = std::move(state);
    expected *= 3;
  }
  if (raw.size() != expected) {
    throw CheckpointError("checkpoint holds " + std::to_string(raw.size()) +
                          " tensors, configuration expects " +
                          std::to_string(expected));
  }
  return ckpt;
}

}  // namespace maskfix
