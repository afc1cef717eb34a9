#include "ghzbayes/partitions.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ghzbayes {

Partition::Partition(std::vector<Block> blocks) {
  std::map<int, int, std::greater<int>> merged;
  for (const Block& b : blocks) {
    if (b.copies < 1) throw std::invalid_argument("block copies must be >= 1");
    if (b.exponent < 0) throw std::invalid_argument("block exponent must be >= 0");
    if (b.exponent > 30) throw std::invalid_argument("block exponent too large");
    merged[b.exponent] += b.copies;
  }
  for (const auto& [k, m] : merged) {
    blocks_.push_back({k, m});
    n_total_ += m << k;
  }
}

int Partition::block_count() const {
  int m = 0;
  for (const Block& b : blocks_) m += b.copies;
  return m;
}

int Partition::max_exponent() const {
  return blocks_.empty() ? -1 : blocks_.front().exponent;
}

std::vector<int> Partition::measurement_order() const {
  std::vector<int> order;
  for (const Block& b : blocks_) order.insert(order.end(), b.copies, b.exponent);
  return order;
}

std::string Partition::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (i) os << '+';
    os << blocks_[i].copies << 'x' << (1 << blocks_[i].exponent);
  }
  return os.str();
}

Partition Partition::parse(const std::string& text) {
  std::vector<Block> blocks;
  std::stringstream ss(text);
  std::string term;
  while (std::getline(ss, term, '+')) {
    const auto x = term.find('x');
    if (x == std::string::npos) throw std::invalid_argument("bad partition term: " + term);
    std::size_t used = 0;
    const int copies = std::stoi(term.substr(0, x), &used);
    const int size = std::stoi(term.substr(x + 1));
    if (size < 1 || (size & (size - 1)) != 0) {
      throw std::invalid_argument("block size must be a power of two: " + term);
    }
    int k = 0;
    while ((1 << k) < size) ++k;
    blocks.push_back({k, copies});
  }
  if (blocks.empty()) throw std::invalid_argument("empty partition");
  return Partition(std::move(blocks));
}

namespace {

struct Enumerator {
  const EnumerationLimits& limits;
  PartitionList& out;
  std::vector<Block> current;

  // Fill `remaining` qubits with exponents <= k, `blocks_used` so far.
  // Returns false once the budget is exhausted.
  bool run(int remaining, int k, int blocks_used) {
    if (remaining == 0) {
      if (limits.budget && out.partitions.size() >= limits.budget) {
        out.truncated = true;
        return false;
      }
      out.partitions.emplace_back(current);
      return true;
    }
    if (k < 0) return true;
    if (k == 0) {
      if (limits.max_blocks >= 0 && blocks_used + remaining > limits.max_blocks) return true;
      current.push_back({0, remaining});
      const bool go = run(0, -1, blocks_used + remaining);
      current.pop_back();
      return go;
    }
    const int size = 1 << k;
    for (int copies = remaining / size; copies >= 0; --copies) {
      const int used = blocks_used + copies;
      if (limits.max_blocks >= 0 && used > limits.max_blocks) continue;
      // Lower bound on blocks still needed with sizes below 2^k.
      const int rest = remaining - copies * size;
      if (limits.max_blocks >= 0 && rest > 0) {
        const int min_more = (rest + (size / 2) - 1) / (size / 2);
        if (used + min_more > limits.max_blocks) continue;
      }
      if (copies) current.push_back({k, copies});
      const bool go = run(rest, k - 1, used);
      if (copies) current.pop_back();
      if (!go) return false;
    }
    return true;
  }
};

}  // namespace

PartitionList enumerate_partitions(int n_total, const EnumerationLimits& limits) {
  if (n_total < 1) throw std::invalid_argument("n_total must be >= 1");
  int k = 0;
  while ((2 << k) <= n_total) ++k;
  if (limits.k_cap >= 0) k = std::min(k, limits.k_cap);
  PartitionList out;
  Enumerator e{limits, out, {}};
  e.run(n_total, k, 0);
  return out;
}

std::vector<Partition> enumerate_partitions(int n_total, int k_cap) {
  EnumerationLimits limits;
  limits.k_cap = k_cap;
  return enumerate_partitions(n_total, limits).partitions;
}

std::uint64_t count_binary_partitions(int n, int k_cap) {
  if (n < 0) return 0;
  std::vector<std::uint64_t> ways(n + 1, 0);
  ways[0] = 1;
  for (int k = 0; (1 << k) <= std::max(n, 1); ++k) {
    if (k_cap >= 0 && k > k_cap) break;
    const int size = 1 << k;
    for (int s = size; s <= n; ++s) ways[s] += ways[s - size];
  }
  return ways[n];
}

std::vector<double> subset_sum_counts(const Partition& p) {
  const int n = p.n_total();
  if (p.block_count() <= 63) {
    std::vector<std::uint64_t> c(n + 1, 0);
    c[0] = 1;
    int reach = 0;
    for (int k : p.measurement_order()) {
      const int size = 1 << k;
      reach += size;
      for (int s = reach; s >= size; --s) c[s] += c[s - size];
    }
    return {c.begin(), c.end()};
  }
  std::vector<double> c(n + 1, 0.0);
  c[0] = 1.0;
  int reach = 0;
  for (int k : p.measurement_order()) {
    const int size = 1 << k;
    reach += size;
    for (int s = reach; s >= size; --s) c[s] += c[s - size];
  }
  return c;
}

FrequencySpectrum frequency_amplitudes(const Partition& p) {
  FrequencySpectrum s;
  s.n_total = p.n_total();
  const std::vector<double> counts = subset_sum_counts(p);
  const double scale = std::ldexp(1.0, -p.block_count());
  s.amplitude.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    s.amplitude[i] = std::sqrt(counts[i] * scale);
  }
  return s;
}

}  // namespace ghzbayes
