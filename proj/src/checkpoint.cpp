#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "mfgvo/gradnet.hpp"

namespace mfgvo::gradnet {

namespace {
constexpr char kMagic[5] = "MFG1";
constexpr std::uint32_t kMaxNameLength = 4096;
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxValues = std::uint64_t{1} << 32;
}  // namespace

void write_checkpoint(std::ostream& out,
                      const std::vector<NamedTensor>& entries) {
  out.write(kMagic, 4);
  detail::put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (numel(e.shape) != e.values.size()) {
      throw DimensionError("checkpoint entry '" + e.name +
                           "' value count does not match its shape");
    }
    detail::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(e.shape.size()));
    for (int d : e.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : e.values) detail::put_f64(out, v);
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

std::vector<NamedTensor> read_checkpoint(std::istream& in) {
  constexpr const char* what = "checkpoint";
  detail::expect_magic(in, kMagic, what);
  const std::uint32_t count = detail::get_u32(in, what);
  std::vector<NamedTensor> entries;
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor e;
    const std::uint32_t name_len = detail::get_u32(in, what);
    if (name_len > kMaxNameLength) throw FormatError("checkpoint: name too long");
    e.name.resize(name_len);
    detail::get_bytes(in, e.name.data(), name_len, what);
    const std::uint32_t rank = detail::get_u32(in, what);
    if (rank > kMaxRank) throw FormatError("checkpoint: rank too large");
    std::uint64_t total = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t d = detail::get_u32(in, what);
      if (d > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
        throw FormatError("checkpoint: extent overflow");
      }
      total *= d;
      if (total > kMaxValues) throw FormatError("checkpoint: tensor too large");
      e.shape.push_back(static_cast<int>(d));
    }
    e.values.reserve(total);
    for (std::uint64_t i = 0; i < total; ++i) {
      e.values.push_back(detail::get_f64(in, what));
    }
    entries.push_back(std::move(e));
  }
  detail::expect_eof(in, what);
  return entries;
}

void save_checkpoint(const std::string& path,
                     const std::vector<NamedTensor>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_checkpoint(out, entries);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace mfgvo::gradnet
