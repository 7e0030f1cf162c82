#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace suffixrl {

// 64-bit FNV-1a content hash. Stable across platforms and standard libraries,
// which std::hash is not; used for dataset/vocab fingerprints in manifests.
std::uint64_t fnv1a64(std::string_view data);
std::string hash_hex(std::uint64_t h);

// Seed derivation for nested deterministic RNG streams (per-iteration,
// per-task, per-worker). splitmix64 mixing.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0);

// mt19937_64 core with hand-rolled draws. uniform_int_distribution,
// discrete_distribution and std::shuffle are implementation-defined, so using
// them would tie reproducibility to one standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform in [0,1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0,n), rejection-sampled.
  std::uint64_t next_below(std::uint64_t n);

 private:
  std::mt19937_64 gen_;
};

// Fisher-Yates with Rng::next_below.
template <class T>
void seeded_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

std::vector<std::string> split_whitespace(std::string_view text);

// log(sum(exp(x_i))) with max shift.
double log_sum_exp(std::span<const double> values);

bool all_finite(std::span<const double> values);

// Shortest round-trip decimal form (std::to_chars); deterministic text for
// CSV/report output.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

// Runs fn(i) for i in [0,n). parallelism <= 1 runs inline; otherwise threads
// process contiguous chunks. fn must only write to slots owned by its i.
void parallel_for(std::size_t n, int parallelism, const std::function<void(std::size_t)>& fn);

}  // namespace suffixrl
