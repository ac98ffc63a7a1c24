// Named-tensor archive: one-line JSON header + little-endian float64 blob.

#include "gtnp/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "gtnp/errors.hpp"

namespace gtnp {

using nlohmann::json;

void TensorArchive::add(const std::string& name, const Tensor& t) {
  for (const auto& e : entries)
    if (e.first == name) throw data_error("archive: duplicate tensor name " + name);
  entries.emplace_back(name, t);
}

const Tensor& TensorArchive::get(const std::string& name) const {
  for (const auto& e : entries)
    if (e.first == name) return e.second;
  throw data_error("archive: missing tensor " + name);
}

bool TensorArchive::has(const std::string& name) const {
  for (const auto& e : entries)
    if (e.first == name) return true;
  return false;
}

static void write_doubles_le(std::ostream& os, const double* v, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    uint64_t bits;
    std::memcpy(&bits, &v[i], 8);
    unsigned char buf[8];
    for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>(bits >> (8 * b));
    os.write(reinterpret_cast<const char*>(buf), 8);
  }
}

static void read_doubles_le(std::istream& is, double* v, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    if (!is) throw data_error("archive: truncated blob");
    uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<uint64_t>(buf[b]) << (8 * b);
    std::memcpy(&v[i], &bits, 8);
  }
}

void save_archive(const TensorArchive& ar, const std::string& path) {
  json header;
  header["format"] = "gtnp-archive";
  header["version"] = 1;
  json tensors = json::array();
  long long offset = 0;
  for (const auto& [name, t] : ar.entries) {
    json e;
    e["name"] = name;
    e["shape"] = t.shape;
    e["offset"] = offset;
    tensors.push_back(e);
    offset += static_cast<long long>(t.numel()) * 8;
  }
  header["tensors"] = tensors;
  header["meta"] = json::object();
  for (const auto& [k, v] : ar.meta_str) header["meta"][k] = v;
  header["meta_int"] = json::object();
  for (const auto& [k, v] : ar.meta_int) header["meta_int"][k] = v;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("archive: cannot open " + path + " for writing");
  os << header.dump() << '\n';
  for (const auto& [name, t] : ar.entries)
    write_doubles_le(os, t.data.data(), t.data.size());
  if (!os) throw data_error("archive: write failed for " + path);
}

TensorArchive load_archive(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("archive: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw data_error("archive: missing header line");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw data_error(std::string("archive: bad header: ") + e.what());
  }
  if (header.value("format", "") != "gtnp-archive")
    throw data_error("archive: unrecognized format in " + path);

  TensorArchive ar;
  try {
    for (const auto& e : header.at("tensors")) {
      std::string name = e.at("name").get<std::string>();
      std::vector<int> shape = e.at("shape").get<std::vector<int>>();
      Tensor t(shape);
      read_doubles_le(is, t.data.data(), t.data.size());
      ar.entries.emplace_back(std::move(name), std::move(t));
    }
    for (const auto& [k, v] : header.at("meta").items())
      ar.meta_str[k] = v.get<std::string>();
    for (const auto& [k, v] : header.at("meta_int").items())
      ar.meta_int[k] = v.get<long long>();
  } catch (const json::exception& e) {
    throw data_error(std::string("archive: bad header fields: ") + e.what());
  }
  return ar;
}

}  // namespace gtnp
