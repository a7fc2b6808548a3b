#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace convkernel {

// A point of the Boolean hypercube {-1,+1}^d. Coordinates are stored as
// int8 signs; the ambient dimension is coords.size().
struct HypercubePoint {
  std::vector<std::int8_t> coords;

  int dim() const { return static_cast<int>(coords.size()); }
  bool valid() const;

  friend bool operator==(const HypercubePoint& a, const HypercubePoint& b) {
    return a.coords == b.coords;
  }
};

using PointList = std::vector<HypercubePoint>;

// ---------------------------------------------------------------------------
// Deterministic random streams.
//
// Sub-seeds are derived with SplitMix64 so that independent streams (points
// vs. labels) never overlap. Signs come from the top bit of MT19937-64 draws.
// Gaussians use the Marsaglia polar method on top of MT19937-64 uniforms;
// this fixes the algorithm once so a seed reproduces labels bit-exactly.
// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream);

class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : engine_(seed) {}
  double next();

 private:
  double uniform_open();  // uniform in (-1, 1)
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

// ---------------------------------------------------------------------------
// Index sets and cyclic-diameter combinatorics.
// ---------------------------------------------------------------------------

// A subset S of {0,...,d-1} (0-based internally; external I/O is 1-based),
// with its cyclic diameter gamma(S) cached: the size of the smallest
// contiguous wrap-around index window containing S. gamma({}) = 0,
// gamma({i}) = 1.
class IndexSet {
 public:
  IndexSet(std::vector<int> members, int ambient_dim);
  static IndexSet from_one_based(const std::vector<int>& members, int ambient_dim);

  const std::vector<int>& members() const { return members_; }
  int ambient_dim() const { return ambient_dim_; }
  int size() const { return static_cast<int>(members_.size()); }
  int diameter() const { return diameter_; }
  bool empty() const { return members_.empty(); }

  IndexSet shifted(int offset) const;  // elementwise cyclic shift
  std::string to_string() const;       // 1-based, e.g. "{1,5}"

  friend bool operator==(const IndexSet& a, const IndexSet& b) {
    return a.ambient_dim_ == b.ambient_dim_ && a.members_ == b.members_;
  }
  // Lexicographic order on the sorted member list.
  friend bool operator<(const IndexSet& a, const IndexSet& b) {
    return a.members_ < b.members_;
  }

 private:
  std::vector<int> members_;
  int ambient_dim_;
  int diameter_;
};

// Smallest contiguous cyclic window containing the (sorted, 0-based) members.
int cyclic_diameter(const std::vector<int>& sorted_members, int ambient_dim);
int cyclic_diameter(const IndexSet& s);

// All S with |S| = l and gamma(S) <= q, each once, lexicographically sorted.
// Requires 0 <= l <= q < d/2.
std::vector<IndexSet> enumerate_local_subsets(int l, int q, int d);

// Closed form |{S : |S| = l, gamma(S) <= q}| = d * binom(q-1, l-1) for l > 0,
// 1 for l = 0. Same precondition as the enumeration.
std::int64_t count_local_subsets(int l, int q, int d);

// Parity monomial Y_S(x) = prod_{j in S} x_j; Y_{}(x) = 1.
int monomial_eval(const IndexSet& s, const HypercubePoint& x);

// ---------------------------------------------------------------------------
// Sampling and datasets.
// ---------------------------------------------------------------------------

// n i.i.d. uniform points of {-1,+1}^d; deterministic per seed.
PointList sample_points(std::size_t n, int d, std::uint64_t seed);

// Labels y_i = f*(x_i) + eps_i with f*(x) = x_1 ... x_{L*} and
// eps_i ~ N(0, sigma^2). The point stream and noise stream use independent
// derived sub-seeds, so the same points can be re-labelled reproducibly.
struct Dataset {
  PointList points;
  std::vector<double> labels;
  double noise_variance = 0.0;      // sigma^2
  int ground_truth_degree = 1;      // L*
  std::uint64_t seed = 0;

  std::size_t size() const { return points.size(); }
  int dim() const { return points.empty() ? 0 : points.front().dim(); }
  IndexSet ground_truth_set() const;
  double ground_truth_value(const HypercubePoint& x) const;
};

Dataset make_dataset(std::size_t n, int d, int l_star, double noise_std, std::uint64_t seed);

// CSV with a header line recording d, n, sigma, L*, seed; one row per sample
// (coords as +-1 integers, then the label).
std::string dataset_to_csv(const Dataset& ds);

// All 2^d points in binary-counter order (bit j of the counter -> coord j,
// bit 0 -> +1, bit 1 -> -1). Used by exhaustive oracles; d <= 24 guard.
PointList all_hypercube_points(int d);

// Duplicate sample points make the Gram matrix exactly singular, so the
// lambda = 0 interpolator of noisy labels does not exist on such draws.
bool has_duplicate_points(const PointList& points);

}  // namespace convkernel
