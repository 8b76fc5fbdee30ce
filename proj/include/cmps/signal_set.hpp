#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cmps/error.hpp"

namespace cmps {

using Metadata = std::map<std::string, std::string>;

/// A batch of equal-length real series with sample spacing dt, row-major.
struct SignalSet {
  std::size_t n_signals = 0;
  std::size_t length = 0;
  double dt = 1.0;
  std::vector<double> data;
  Metadata metadata;

  SignalSet() = default;
  SignalSet(std::size_t n, std::size_t len, double dt_)
      : n_signals(n), length(len), dt(dt_), data(n * len, 0.0) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * length, length}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * length, length}; }
  double& at(std::size_t i, std::size_t k) { return data[i * length + k]; }
  double at(std::size_t i, std::size_t k) const { return data[i * length + k]; }
};

// Binary layout, all little-endian:
//   "CMPS" | u32 version=1 | u32 n_signals | u32 length | f64 dt | f64[n_signals*length]
inline constexpr std::uint32_t kSignalSetVersion = 1;
inline constexpr std::size_t kSignalSetHeaderSize = 4 + 4 + 4 + 4 + 8;

std::vector<unsigned char> encode_signal_set(const SignalSet& set);
/// Throws FormatError ("bad magic", "unsupported version", "payload size mismatch", ...).
SignalSet decode_signal_set(std::span<const unsigned char> bytes);

/// Path of the text sidecar: "<path>.meta".
std::filesystem::path metadata_path(const std::filesystem::path& path);

/// Writes the dataset and its sidecar atomically (write to temp, then rename).
void write_signal_set(const std::filesystem::path& path, const SignalSet& set);
/// Reads the dataset; the sidecar is loaded into metadata when it exists.
SignalSet read_signal_set(const std::filesystem::path& path);

std::string format_metadata(const Metadata& md);
Metadata parse_metadata(const std::string& text);

/// Atomic whole-file writes.
void write_file_atomic(const std::filesystem::path& path, std::span<const unsigned char> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);

/// FNV-1a 64-bit, hex encoded.
std::string fnv1a_hex(std::span<const unsigned char> bytes);

/// Shortest decimal that round-trips a double.
std::string format_double(double v);

}  // namespace cmps
