#include "convkernel/hypercube.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "convkernel/errors.hpp"

namespace convkernel {

bool HypercubePoint::valid() const {
  if (coords.empty()) return false;
  for (auto c : coords)
    if (c != 1 && c != -1) return false;
  return true;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s ^= stream * 0xA0761D6478BD642Full;
  std::uint64_t b = splitmix64(s);
  return a ^ (b + 0x2545F4914F6CDD1Dull * (stream + 1));
}

double GaussianSampler::uniform_open() {
  // 53 random bits -> [0,1), mapped to (-1,1); zero is fine for the polar test.
  const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return 2.0 * u - 1.0;
}

double GaussianSampler::next() {
  if (spare_) {
    double v = *spare_;
    spare_.reset();
    return v;
  }
  // Marsaglia polar method.
  for (;;) {
    const double u = uniform_open();
    const double v = uniform_open();
    const double s = u * u + v * v;
    if (s >= 1.0 || s == 0.0) continue;
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    return u * f;
  }
}

// ---------------------------------------------------------------------------

int cyclic_diameter(const std::vector<int>& sorted_members, int ambient_dim) {
  const int d = ambient_dim;
  const int l = static_cast<int>(sorted_members.size());
  if (l == 0) return 0;
  // Window size = d - (largest gap between cyclically consecutive members) + 1.
  int max_gap = sorted_members.front() + d - sorted_members.back();
  for (int i = 0; i + 1 < l; ++i) max_gap = std::max(max_gap, sorted_members[i + 1] - sorted_members[i]);
  return d - max_gap + 1;
}

int cyclic_diameter(const IndexSet& s) { return cyclic_diameter(s.members(), s.ambient_dim()); }

IndexSet::IndexSet(std::vector<int> members, int ambient_dim)
    : members_(std::move(members)), ambient_dim_(ambient_dim) {
  if (ambient_dim_ < 1) throw std::invalid_argument("IndexSet: ambient dimension must be >= 1");
  std::sort(members_.begin(), members_.end());
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (members_[i] < 0 || members_[i] >= ambient_dim_)
      throw std::invalid_argument("IndexSet: index out of range");
    if (i > 0 && members_[i] == members_[i - 1])
      throw std::invalid_argument("IndexSet: duplicate index");
  }
  diameter_ = cyclic_diameter(members_, ambient_dim_);
}

IndexSet IndexSet::from_one_based(const std::vector<int>& members, int ambient_dim) {
  std::vector<int> zero_based;
  zero_based.reserve(members.size());
  for (int m : members) zero_based.push_back(m - 1);
  return IndexSet(std::move(zero_based), ambient_dim);
}

IndexSet IndexSet::shifted(int offset) const {
  std::vector<int> shifted_members;
  shifted_members.reserve(members_.size());
  const int d = ambient_dim_;
  for (int m : members_) shifted_members.push_back((((m + offset) % d) + d) % d);
  return IndexSet(std::move(shifted_members), d);
}

std::string IndexSet::to_string() const {
  std::string out = "{";
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(members_[i] + 1);
  }
  out += "}";
  return out;
}

std::vector<IndexSet> enumerate_local_subsets(int l, int q, int d) {
  if (l < 0 || q < l) throw std::invalid_argument("enumerate_local_subsets: need 0 <= l <= q");
  if (2 * q >= d)
    throw std::invalid_argument("enumerate_local_subsets: counting formula requires q < d/2");
  std::vector<IndexSet> out;
  if (l == 0) {
    out.emplace_back(std::vector<int>{}, d);
    return out;
  }
  // Every S with gamma(S) <= q < d/2 has a unique minimal window; generate it
  // as (window start s, offsets {0} + T) with T an (l-1)-subset of {1..q-1}.
  // max(T)+1 is then automatically the minimal window size.
  std::vector<int> offsets(static_cast<std::size_t>(l) - 1);
  for (int i = 0; i < l - 1; ++i) offsets[i] = i + 1;
  auto emit_for_offsets = [&](const std::vector<int>& t) {
    for (int s = 0; s < d; ++s) {
      std::vector<int> members;
      members.reserve(l);
      members.push_back(s);
      for (int o : t) members.push_back((s + o) % d);
      out.emplace_back(std::move(members), d);
    }
  };
  if (l == 1) {
    emit_for_offsets({});
  } else {
    // iterate (l-1)-combinations of {1..q-1}
    for (;;) {
      emit_for_offsets(offsets);
      int i = l - 2;
      while (i >= 0 && offsets[i] == q - 1 - (l - 2 - i)) --i;
      if (i < 0) break;
      ++offsets[i];
      for (int j = i + 1; j < l - 1; ++j) offsets[j] = offsets[j - 1] + 1;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::int64_t count_local_subsets(int l, int q, int d) {
  if (l < 0 || q < l) throw std::invalid_argument("count_local_subsets: need 0 <= l <= q");
  if (2 * q >= d) throw std::invalid_argument("count_local_subsets: counting formula requires q < d/2");
  if (l == 0) return 1;
  // d * binom(q-1, l-1)
  std::int64_t b = 1;
  for (int i = 1; i <= l - 1; ++i) b = b * (q - 1 - (l - 1) + i) / i;
  return static_cast<std::int64_t>(d) * b;
}

int monomial_eval(const IndexSet& s, const HypercubePoint& x) {
  if (s.ambient_dim() != x.dim()) throw std::invalid_argument("monomial_eval: dimension mismatch");
  int prod = 1;
  for (int m : s.members()) prod *= x.coords[static_cast<std::size_t>(m)];
  return prod;
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::uint64_t kPointStream = 0;
constexpr std::uint64_t kNoiseStream = 1;
}  // namespace

PointList sample_points(std::size_t n, int d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("sample_points: need n >= 1 and d >= 1");
  std::mt19937_64 engine(derive_stream_seed(seed, kPointStream));
  PointList pts(n);
  for (auto& p : pts) {
    p.coords.resize(static_cast<std::size_t>(d));
    for (auto& c : p.coords) c = (engine() >> 63) ? std::int8_t{1} : std::int8_t{-1};
  }
  return pts;
}

IndexSet Dataset::ground_truth_set() const {
  std::vector<int> members(static_cast<std::size_t>(ground_truth_degree));
  for (int i = 0; i < ground_truth_degree; ++i) members[static_cast<std::size_t>(i)] = i;
  return IndexSet(std::move(members), dim());
}

double Dataset::ground_truth_value(const HypercubePoint& x) const {
  int prod = 1;
  for (int i = 0; i < ground_truth_degree; ++i) prod *= x.coords[static_cast<std::size_t>(i)];
  return static_cast<double>(prod);
}

Dataset make_dataset(std::size_t n, int d, int l_star, double noise_std, std::uint64_t seed) {
  if (l_star < 1 || l_star > d) throw std::invalid_argument("make_dataset: need 1 <= L* <= d");
  if (noise_std < 0.0) throw std::invalid_argument("make_dataset: need sigma >= 0");
  Dataset ds;
  ds.points = sample_points(n, d, seed);
  ds.noise_variance = noise_std * noise_std;
  ds.ground_truth_degree = l_star;
  ds.seed = seed;
  ds.labels.resize(n);
  GaussianSampler noise(derive_stream_seed(seed, kNoiseStream));
  for (std::size_t i = 0; i < n; ++i) {
    double y = ds.ground_truth_value(ds.points[i]);
    if (noise_std > 0.0) y += noise_std * noise.next();
    ds.labels[i] = y;
  }
  return ds;
}

std::string dataset_to_csv(const Dataset& ds) {
  char buf[64];
  std::string out = "# d=" + std::to_string(ds.dim()) + " n=" + std::to_string(ds.size());
  std::snprintf(buf, sizeof(buf), " sigma=%.17g", std::sqrt(ds.noise_variance));
  out += buf;
  out += " Lstar=" + std::to_string(ds.ground_truth_degree) + " seed=" + std::to_string(ds.seed) + "\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (auto c : ds.points[i].coords) {
      out += (c > 0 ? "1," : "-1,");
    }
    std::snprintf(buf, sizeof(buf), "%.17g\n", ds.labels[i]);
    out += buf;
  }
  return out;
}

bool has_duplicate_points(const PointList& points) {
  std::vector<const std::vector<std::int8_t>*> refs;
  refs.reserve(points.size());
  for (const auto& p : points) refs.push_back(&p.coords);
  std::sort(refs.begin(), refs.end(), [](const auto* a, const auto* b) { return *a < *b; });
  for (std::size_t i = 1; i < refs.size(); ++i)
    if (*refs[i] == *refs[i - 1]) return true;
  return false;
}

PointList all_hypercube_points(int d) {
  if (d < 1 || d > 24) throw ResourceLimitError("all_hypercube_points: d out of supported range");
  const std::size_t n = std::size_t{1} << d;
  PointList pts(n);
  for (std::size_t u = 0; u < n; ++u) {
    pts[u].coords.resize(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j)
      pts[u].coords[static_cast<std::size_t>(j)] = ((u >> j) & 1u) ? std::int8_t{-1} : std::int8_t{1};
  }
  return pts;
}

}  // namespace convkernel
