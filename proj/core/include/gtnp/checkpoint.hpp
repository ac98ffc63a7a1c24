#pragma once

#include <map>
#include <string>
#include <vector>

#include "gtnp/tensor.hpp"

namespace gtnp {

// Named-tensor archive: a single-line JSON header (names, shapes, byte
// offsets, plus free-form metadata) followed by one little-endian float64
// blob. Round-trips bit-exactly.
struct TensorArchive {
  std::vector<std::pair<std::string, Tensor>> entries;
  std::map<std::string, std::string> meta_str;
  std::map<std::string, long long> meta_int;

  void add(const std::string& name, const Tensor& t);
  const Tensor& get(const std::string& name) const;  // data_error when missing
  bool has(const std::string& name) const;
};

void save_archive(const TensorArchive& ar, const std::string& path);
TensorArchive load_archive(const std::string& path);

}  // namespace gtnp
