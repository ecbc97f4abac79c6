#pragma once

// Binary array container used for every numeric artifact in a run directory.
//
// Layout (all integers little-endian):
//   "FDSI" magic | u32 version | u32 rank | rank x u32 dims |
//   prod(dims) x f64 payload (row-major) | u64 checksum
// The checksum is the wrapping sum of the payload's IEEE-754 bit patterns.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "fdsi/common.hpp"

namespace fdsi::io {

inline constexpr std::uint32_t kArrayFormatVersion = 1;

class ArrayFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ArrayFile {
  std::vector<std::uint32_t> dims;
  std::vector<double> values;

  [[nodiscard]] std::size_t element_count() const noexcept;
};

[[nodiscard]] std::uint64_t payload_checksum(std::span<const double> values) noexcept;

[[nodiscard]] std::vector<std::uint8_t> encode_array(std::span<const std::uint32_t> dims,
                                                     std::span<const double> values);
[[nodiscard]] ArrayFile decode_array(std::span<const std::uint8_t> bytes);

/// Writes through a temporary sibling file and renames, so a crash never leaves
/// a truncated artifact that would pass the existence check on resume.
void write_array(const std::filesystem::path& path, std::span<const std::uint32_t> dims,
                 std::span<const double> values);
[[nodiscard]] ArrayFile read_array(const std::filesystem::path& path);

/// True when the file exists, parses and its checksum matches.
[[nodiscard]] bool verify_array(const std::filesystem::path& path) noexcept;

void write_vector(const std::filesystem::path& path, std::span<const double> values);
[[nodiscard]] std::vector<double> read_vector(const std::filesystem::path& path);

void write_matrix(const std::filesystem::path& path, const RowMatrix& m);
[[nodiscard]] RowMatrix read_matrix(const std::filesystem::path& path);

}  // namespace fdsi::io
