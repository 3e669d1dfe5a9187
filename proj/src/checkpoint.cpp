#include "hfnd/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace hfnd::nn {

namespace {

constexpr char kMagic[8] = {'H', 'F', 'N', 'D', 'P', 'R', 'M', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b, 8);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Mat*>>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out.write(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, mat] : entries) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(mat->rows()));
    put_u32(out, static_cast<std::uint32_t>(mat->cols()));
    for (Eigen::Index i = 0; i < mat->size(); ++i) put_f64(out, mat->data()[i]);
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

void load_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Mat*>>& entries) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error(path + ": not a parameter checkpoint");
  }
  const std::uint32_t count = get_u32(in);
  if (count != entries.size()) {
    throw std::runtime_error(path + ": expected " + std::to_string(entries.size()) +
                             " entries, file has " + std::to_string(count));
  }
  std::unordered_map<std::string, Mat*> wanted;
  for (const auto& [name, mat] : entries) wanted.emplace(name, mat);
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error(path + ": truncated file");
    const auto rows = static_cast<Eigen::Index>(get_u32(in));
    const auto cols = static_cast<Eigen::Index>(get_u32(in));
    const auto it = wanted.find(name);
    if (it == wanted.end()) throw std::runtime_error(path + ": unexpected entry '" + name + "'");
    Mat* mat = it->second;
    if (mat->rows() != rows || mat->cols() != cols) {
      throw std::runtime_error(path + ": shape mismatch for '" + name + "'");
    }
    for (Eigen::Index i = 0; i < mat->size(); ++i) mat->data()[i] = get_f64(in);
    wanted.erase(it);
  }
  if (!wanted.empty()) {
    throw std::runtime_error(path + ": missing entry '" + wanted.begin()->first + "'");
  }
}

}  // namespace hfnd::nn
