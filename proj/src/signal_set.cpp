#include "cmps/signal_set.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cmps/error.hpp"

namespace cmps {

namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

template <typename T>
void put(std::vector<unsigned char>& out, T value) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T get(std::span<const unsigned char> bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<unsigned char> encode_signal_set(const SignalSet& set) {
  if (set.data.size() != set.n_signals * set.length)
    throw FormatError("signal set payload does not match its declared shape");
  if (set.n_signals > UINT32_MAX || set.length > UINT32_MAX)
    throw FormatError("signal set too large for the u32 header");
  std::vector<unsigned char> out;
  out.reserve(kSignalSetHeaderSize + set.data.size() * 8);
  out.insert(out.end(), {'C', 'M', 'P', 'S'});
  put<std::uint32_t>(out, kSignalSetVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(set.n_signals));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(set.length));
  put<double>(out, set.dt);
  const auto* p = reinterpret_cast<const unsigned char*>(set.data.data());
  out.insert(out.end(), p, p + set.data.size() * sizeof(double));
  return out;
}

SignalSet decode_signal_set(std::span<const unsigned char> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "CMPS", 4) != 0) throw FormatError("bad magic");
  if (bytes.size() < kSignalSetHeaderSize) throw FormatError("payload size mismatch (truncated header)");
  const auto version = get<std::uint32_t>(bytes, 4);
  if (version != kSignalSetVersion) throw FormatError("unsupported version " + std::to_string(version));
  SignalSet set;
  set.n_signals = get<std::uint32_t>(bytes, 8);
  set.length = get<std::uint32_t>(bytes, 12);
  set.dt = get<double>(bytes, 16);
  const std::size_t expected = kSignalSetHeaderSize + set.n_signals * set.length * sizeof(double);
  if (bytes.size() != expected)
    throw FormatError("payload size mismatch (expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(bytes.size()) + ")");
  if (!(set.dt > 0.0) || !std::isfinite(set.dt)) throw FormatError("dt must be > 0");
  set.data.resize(set.n_signals * set.length);
  std::memcpy(set.data.data(), bytes.data() + kSignalSetHeaderSize, set.data.size() * sizeof(double));
  return set;
}

std::filesystem::path metadata_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta");
}

void write_file_atomic(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_signal_set(const std::filesystem::path& path, const SignalSet& set) {
  write_file_atomic(path, encode_signal_set(set));
  Metadata md = set.metadata;
  md["n_signals"] = std::to_string(set.n_signals);
  md["length"] = std::to_string(set.length);
  md["dt"] = format_double(set.dt);
  write_file_atomic(metadata_path(path), format_metadata(md));
}

SignalSet read_signal_set(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  SignalSet set = decode_signal_set(bytes);
  const auto meta = metadata_path(path);
  if (std::filesystem::exists(meta)) {
    const auto mb = read_file_bytes(meta);
    set.metadata = parse_metadata(std::string(mb.begin(), mb.end()));
  }
  return set;
}

std::string format_metadata(const Metadata& md) {
  std::ostringstream os;
  for (const auto& [k, v] : md) os << k << " = " << v << '\n';
  return os.str();
}

Metadata parse_metadata(const std::string& text) {
  Metadata md;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("metadata line without '=': " + line);
    md[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return md;
}

std::string fnv1a_hex(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace cmps
