#include "fdsi/array_io.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

namespace fdsi::io {
namespace {

constexpr std::uint8_t kMagic[4] = {'F', 'D', 'S', 'I'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.push_back(static_cast<std::uint8_t>((value >> (8 * b)) & 0xFFu));
  }
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  if (offset + sizeof(T) > bytes.size()) throw ArrayFormatError("array file truncated");
  T value = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    value |= static_cast<T>(bytes[offset + b]) << (8 * b);
  }
  offset += sizeof(T);
  return value;
}

}  // namespace

std::size_t ArrayFile::element_count() const noexcept {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t acc, std::uint32_t d) { return acc * d; });
}

std::uint64_t payload_checksum(std::span<const double> values) noexcept {
  std::uint64_t sum = 0;
  for (double v : values) sum += std::bit_cast<std::uint64_t>(v);
  return sum;
}

std::vector<std::uint8_t> encode_array(std::span<const std::uint32_t> dims,
                                       std::span<const double> values) {
  std::size_t count = 1;
  for (auto d : dims) count *= d;
  if (count != values.size()) {
    throw ArrayFormatError("declared dims hold " + std::to_string(count) + " values, got " +
                           std::to_string(values.size()));
  }
  std::vector<std::uint8_t> out;
  out.reserve(12 + 4 * dims.size() + 8 * values.size() + 8);
  for (auto c : kMagic) out.push_back(c);
  put_le<std::uint32_t>(out, kArrayFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put_le<std::uint32_t>(out, d);
  for (double v : values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  put_le<std::uint64_t>(out, payload_checksum(values));
  return out;
}

ArrayFile decode_array(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw ArrayFormatError("bad magic");
  }
  std::size_t offset = 4;
  const auto version = get_le<std::uint32_t>(bytes, offset);
  if (version != kArrayFormatVersion) {
    throw ArrayFormatError("unsupported array format version " + std::to_string(version));
  }
  const auto rank = get_le<std::uint32_t>(bytes, offset);
  ArrayFile file;
  file.dims.reserve(rank);
  for (std::uint32_t r = 0; r < rank; ++r) file.dims.push_back(get_le<std::uint32_t>(bytes, offset));
  const std::size_t count = file.element_count();
  if (bytes.size() != offset + 8 * count + 8) throw ArrayFormatError("declared size does not match payload");
  file.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    file.values[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset));
  }
  const auto stored = get_le<std::uint64_t>(bytes, offset);
  if (stored != payload_checksum(file.values)) throw ArrayFormatError("checksum mismatch");
  return file;
}

void write_array(const std::filesystem::path& path, std::span<const std::uint32_t> dims,
                 std::span<const double> values) {
  const auto bytes = encode_array(dims, values);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ArrayFile read_array(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArrayFormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_array(bytes);
  } catch (const ArrayFormatError& e) {
    throw ArrayFormatError(path.string() + ": " + e.what());
  }
}

bool verify_array(const std::filesystem::path& path) noexcept {
  try {
    (void)read_array(path);
    return true;
  } catch (...) {
    return false;
  }
}

void write_vector(const std::filesystem::path& path, std::span<const double> values) {
  const std::uint32_t dims[1] = {static_cast<std::uint32_t>(values.size())};
  write_array(path, dims, values);
}

std::vector<double> read_vector(const std::filesystem::path& path) {
  auto file = read_array(path);
  if (file.dims.size() != 1) throw ArrayFormatError(path.string() + ": expected rank 1");
  return std::move(file.values);
}

void write_matrix(const std::filesystem::path& path, const RowMatrix& m) {
  const std::uint32_t dims[2] = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  write_array(path, dims, std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
}

RowMatrix read_matrix(const std::filesystem::path& path) {
  auto file = read_array(path);
  if (file.dims.size() != 2) throw ArrayFormatError(path.string() + ": expected rank 2");
  RowMatrix m(file.dims[0], file.dims[1]);
  std::copy(file.values.begin(), file.values.end(), m.data());
  return m;
}

}  // namespace fdsi::io
