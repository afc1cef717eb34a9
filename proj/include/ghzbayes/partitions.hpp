#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ghzbayes {

// One group of identical GHZ blocks: `copies` blocks of 2^exponent qubits.
// Negative exponents are only meaningful for rescaled slow-atom frames.
struct Block {
  int exponent = 0;
  int copies = 1;
  bool operator==(const Block&) const = default;
};

// Multiset of GHZ block sizes. Blocks are kept with distinct exponents in
// descending order.
class Partition {
 public:
  Partition() = default;
  // Merges duplicate exponents and sorts; throws on copies < 1 or
  // exponent < 0.
  explicit Partition(std::vector<Block> blocks);

  const std::vector<Block>& blocks() const { return blocks_; }
  int n_total() const { return n_total_; }
  // Number of GHZ blocks, M.
  int block_count() const;
  int max_exponent() const;
  // Block exponents in measurement order (largest first, one per copy).
  std::vector<int> measurement_order() const;

  // "3x4+3x2+3x1" (copies x block size).
  std::string to_string() const;
  static Partition parse(const std::string& text);

  bool operator==(const Partition& other) const { return blocks_ == other.blocks_; }

 private:
  std::vector<Block> blocks_;
  int n_total_ = 0;
};

struct EnumerationLimits {
  int k_cap = -1;                // largest allowed exponent, -1 for none
  int max_blocks = -1;           // largest allowed block count M, -1 for none
  std::size_t budget = 0;        // maximum partitions returned, 0 for none
};

struct PartitionList {
  std::vector<Partition> partitions;
  bool truncated = false;
};

// All binary partitions of n_total, ordered lexicographically by descending
// block sizes (so the largest-block partition comes first).
PartitionList enumerate_partitions(int n_total, const EnumerationLimits& limits = {});

// Convenience overload returning only the list.
std::vector<Partition> enumerate_partitions(int n_total, int k_cap);

// Number of binary partitions of n (with optional exponent cap), by DP.
std::uint64_t count_binary_partitions(int n, int k_cap = -1);

// Amplitudes of a GHZ-block product state over the J_z eigenvalue index
// n = 0..n_total: amplitude[n] = sqrt(#subsets of blocks of total size n / 2^M).
struct FrequencySpectrum {
  int n_total = 0;
  std::vector<double> amplitude;
};

FrequencySpectrum frequency_amplitudes(const Partition& p);

// Subset-sum counts as doubles (exact while below 2^53).
std::vector<double> subset_sum_counts(const Partition& p);

}  // namespace ghzbayes
