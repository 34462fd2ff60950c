// SPDX-License-Identifier: Apache-2.0
/**
 * @file   common.hpp
 * @brief  Error types, seeding, hashing, byte-level I/O and a tiny logger
 *         shared by every module.
 */
#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <boost/crc.hpp>

namespace modl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct ContractError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct PolicyError : Error {
  using Error::Error;
};
struct ChecksumError : Error {
  using Error::Error;
};

/// Probabilities are clamped into [kProbEps, 1 - kProbEps] before any log.
inline constexpr double kProbEps = 1e-7;

inline double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

// splitmix64 finalizer; used to derive independent streams from one seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return mix_seed(mix_seed(mix_seed(base) ^ a) ^ b);
}

/// CRC-64/XZ. Used both as a file checksum and as a content hash for caching.
inline std::uint64_t crc64(const void* data, std::size_t n, std::uint64_t seed = 0) {
  boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, 0xFFFFFFFFFFFFFFFFULL, 0xFFFFFFFFFFFFFFFFULL,
                     true, true>
      crc(seed ^ 0xFFFFFFFFFFFFFFFFULL);
  crc.process_bytes(data, n);
  return crc.checksum();
}

inline std::uint64_t hash_string(std::string_view s) { return crc64(s.data(), s.size()); }

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

/// Little-endian byte writer for the binary artifact formats.
class ByteWriter {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void checksum() { u64(crc64(buf_.data(), buf_.size())); }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::vector<char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> buf, std::string what)
      : buf_(std::move(buf)), what_(std::move(what)) {}

  /// Verifies the trailing checksum and drops it from the readable range.
  void verify_checksum() {
    if (buf_.size() < 8) throw ChecksumError(what_ + ": file too short for checksum");
    const std::size_t body = buf_.size() - 8;
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i)
      stored |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[body + i])) << (8 * i);
    if (stored != crc64(buf_.data(), body)) throw ChecksumError(what_ + ": checksum mismatch");
    end_ = body;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == limit(); }
  std::size_t remaining() const { return limit() - pos_; }

 private:
  std::size_t limit() const { return end_ ? end_ : buf_.size(); }
  void need(std::size_t n) const {
    if (pos_ + n > limit()) throw ParseError(what_ + ": unexpected end of data");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::vector<char> buf_;
  std::string what_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

inline std::vector<char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes to a sibling temp file and renames it over the target.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_file_atomic(const std::filesystem::path& path, const std::vector<char>& bytes) {
  write_file_atomic(path, std::string_view(bytes.data(), bytes.size()));
}

/// Shortest text form of a double that parses back to the same bits.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Logging

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

inline std::atomic<LogLevel>& log_threshold() {
  static std::atomic<LogLevel> level{LogLevel::Warn};
  return level;
}

inline void log(LogLevel level, const std::string& msg) {
  static std::mutex mu;
  if (level < log_threshold().load()) return;
  static constexpr const char* names[] = {"debug", "info", "warn", "error"};
  std::lock_guard lock(mu);
  std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << '\n';
}

/// Runs fn(0..n-1) on up to `workers` threads. Results must be written to
/// per-index slots by the caller; the first exception is rethrown.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (first) std::rethrow_exception(first);
}

}  // namespace modl
