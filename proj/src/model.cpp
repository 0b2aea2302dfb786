#include "maskfix/model.hpp"

namespace maskfix {

long long count_parameters(const ModelConfig& config) {
  config.validate();
  long long d = config.hidden_dim;
  long long count = 0;
  count += (config.vocab + 1LL) * d;        // token embedding (incl. mask row)
  count += static_cast<long long>(config.positions) * d;
  count += (config.num_classes + 1LL) * d;  // class embedding (incl. null)
  count += d * config.vocab;                // output head
  long long per_block = 0;
  per_block += d * 3 * d + 3 * d;  // qkv
  per_block += d * d + d;          // attention projection
  per_block += d * 4 * d + 4 * d;  // fc1
  per_block += 4 * d * d + d;      // fc2
  per_block += 6 * d * d + 6 * d;  // modulation
  count += per_block * config.layers;
  return count;
}

}  // namespace maskfix
