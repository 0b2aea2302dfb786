#include "maskfix/errors.hpp"

namespace maskfix {

ParseError::ParseError(const std::string& message, std::size_t byte_offset)
    : std::runtime_error(message + " (byte " + std::to_string(byte_offset) + ")"),
      byte_offset_(byte_offset) {}

ConfigError::ConfigError(const std::string& message, const std::string& key)
    : std::runtime_error(message), key_(key) {}

}  // namespace maskfix
