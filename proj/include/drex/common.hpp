#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace drex {

// Error taxonomy. Input-side failures (bad files, bad flags, malformed data)
// map to CLI exit code 2; contract/numeric failures map to exit code 1.
class Error : public std::runtime_error {
 public:
  enum class Kind { kInput, kInternal };
  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error(Kind::kInternal, w) {}
};
struct ContractError : Error {
  explicit ContractError(const std::string& w) : Error(Kind::kInternal, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(Kind::kInternal, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(Kind::kInput, w) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(Kind::kInput, w) {}
};
struct ChecksumError : Error {
  explicit ChecksumError(const std::string& w) : Error(Kind::kInput, w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(Kind::kInput, w) {}
};
struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error(Kind::kInput, w) {}
};

std::uint64_t fnv1a64(std::string_view s);
std::uint64_t splitmix64(std::uint64_t x);

// Deterministic RNG. mt19937_64 has a standardized sequence; the helpers
// below replace std::uniform_real_distribution / std::shuffle, whose outputs
// are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n), unbiased
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

// Named substream: independent generators derived from one master seed, so
// adding a consumer never perturbs the draws of existing ones.
std::uint64_t substream_seed(std::uint64_t master_seed, std::string_view purpose);
Rng substream(std::uint64_t master_seed, std::string_view purpose);

// Splits [0, n) into contiguous chunks and runs fn(chunk, begin, end).
// threads <= 1 runs inline on the calling thread. Callers that reduce must
// merge per-chunk accumulators in chunk order to stay deterministic.
void parallel_chunks(std::size_t n, int threads,
                     const std::function<void(int chunk, std::size_t begin, std::size_t end)>& fn);

}  // namespace drex
