// Copyright 2026 The stsnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef STSNET_COMMON_HPP_
#define STSNET_COMMON_HPP_

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace stsnet {

// Error taxonomy. Every failed precondition throws one of these; the CLI maps
// any of them to a nonzero exit code.
struct dimension_error : std::runtime_error {
  explicit dimension_error(const std::string& m) : std::runtime_error(m) {}
};
struct parameter_error : std::runtime_error {
  explicit parameter_error(const std::string& m) : std::runtime_error(m) {}
};
struct contract_error : std::runtime_error {
  explicit contract_error(const std::string& m) : std::runtime_error(m) {}
};
struct format_error : std::runtime_error {
  explicit format_error(const std::string& m) : std::runtime_error(m) {}
};
struct path_error : std::runtime_error {
  explicit path_error(const std::string& m) : std::runtime_error(m) {}
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out.empty() ? "scalar" : out;
}

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Deterministic RNG. Self-contained (no std::*_distribution) so that streams
// are byte-identical across standard libraries and platforms. Substreams
// derived from (seed, stream) are independent, which is what makes per-sample
// dataset generation order-free and reproducible.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(mix(seed, 0)) {}
  Rng(uint64_t seed, uint64_t stream) : state_(mix(seed, stream)) {}

  uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0,1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static uint64_t mix(uint64_t seed, uint64_t stream) {
    uint64_t s = seed;
    uint64_t a = splitmix64(s);
    s = stream ^ 0xA5A5A5A55A5A5A5Aull;
    uint64_t b = splitmix64(s);
    s = a ^ (b * 0x9E3779B97F4A7C15ull);
    splitmix64(s);
    return s;
  }

  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Runs fn(i) for i in [0,n). Work is split into contiguous ranges, one per
// thread; callers must write to disjoint outputs. Reduction order is the
// caller's responsibility (keep it index-ordered for determinism).
inline void parallel_for(int64_t n, int num_threads,
                         const std::function<void(int64_t)>& fn) {
  if (n <= 0) return;
  if (num_threads <= 1 || n == 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  int t = static_cast<int>(std::min<int64_t>(num_threads, n));
  std::vector<std::thread> pool;
  pool.reserve(t);
  int64_t chunk = (n + t - 1) / t;
  for (int k = 0; k < t; ++k) {
    int64_t lo = k * chunk;
    int64_t hi = std::min<int64_t>(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline int default_threads() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// FNV-1a, used for dataset checksums.
struct Fnv1a64 {
  uint64_t state = 0xCBF29CE484222325ull;
  void update(const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      state ^= p[i];
      state *= 0x100000001B3ull;
    }
  }
  uint64_t digest() const { return state; }
};

// Little-endian binary IO, independent of host byte order.
inline void write_u32_le(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t read_u32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

inline void write_f32_le(std::ostream& os, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  write_u32_le(os, u);
}

inline float read_f32_le(std::istream& is) {
  uint32_t u = read_u32_le(is);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

inline void append_f32_le(std::vector<unsigned char>& buf, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  buf.push_back(static_cast<unsigned char>(u));
  buf.push_back(static_cast<unsigned char>(u >> 8));
  buf.push_back(static_cast<unsigned char>(u >> 16));
  buf.push_back(static_cast<unsigned char>(u >> 24));
}

}  // namespace stsnet

#endif  // STSNET_COMMON_HPP_
