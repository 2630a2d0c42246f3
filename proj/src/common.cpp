#include "drex/common.hpp"

#include <thread>

namespace drex {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ContractError("Rng::below: n must be positive");
  // rejection sampling over the top multiple of n
  const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

std::uint64_t substream_seed(std::uint64_t master_seed, std::string_view purpose) {
  return splitmix64(master_seed ^ fnv1a64(purpose));
}

Rng substream(std::uint64_t master_seed, std::string_view purpose) {
  return Rng(substream_seed(master_seed, purpose));
}

void parallel_chunks(std::size_t n, int threads,
                     const std::function<void(int, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  std::size_t want = threads <= 1 ? 1 : static_cast<std::size_t>(threads);
  if (want > n) want = n;
  if (want == 1) {
    fn(0, 0, n);
    return;
  }
  const std::size_t base = n / want;
  const std::size_t rem = n % want;
  std::vector<std::thread> pool;
  pool.reserve(want);
  std::size_t begin = 0;
  for (std::size_t c = 0; c < want; ++c) {
    const std::size_t len = base + (c < rem ? 1 : 0);
    const std::size_t end = begin + len;
    pool.emplace_back(fn, static_cast<int>(c), begin, end);
    begin = end;
  }
  for (auto& t : pool) t.join();
}

}  // namespace drex
