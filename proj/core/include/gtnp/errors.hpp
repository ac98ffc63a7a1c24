#pragma once

#include <stdexcept>
#include <string>

namespace gtnp {

// Error taxonomy mapped to process exit codes by the command-line tool:
// config_error -> 2, data_error -> 3, numeric_error -> 4.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct data_error : std::runtime_error {
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct shape_error : std::runtime_error {
  explicit shape_error(const std::string& msg) : std::runtime_error(msg) {}
};

void warn(const std::string& msg);
void info(const std::string& msg);

}  // namespace gtnp
