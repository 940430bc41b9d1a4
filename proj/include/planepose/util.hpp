#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace planepose {

/// SplitMix64 mix of (seed, stream): independent per-row seeds that do not
/// depend on evaluation order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
/// FNV-1a of a file's bytes, hex encoded. Throws IoError.
std::string file_hash(const std::filesystem::path& path);

/// Splits one CSV line on commas; no quoting (fields never contain commas).
std::vector<std::string> split_csv(std::string_view line);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws FormatError when absent.
  std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Writes `bytes` to `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace planepose
