#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace contpop {

using BigInt = boost::multiprecision::cpp_int;

/// Stirling numbers of the second kind S(n, l), 1 <= l <= n <= n_max, held
/// as exact integers.
class StirlingTable {
 public:
  static constexpr int kDefaultMax = 64;

  explicit StirlingTable(int n_max = kDefaultMax);

  int n_max() const { return n_max_; }
  /// Throws DomainError unless 1 <= l <= n <= n_max.
  const BigInt& operator()(int n, int l) const;

  /// Shared default table (n_max = 64).
  static const StirlingTable& shared();

 private:
  int n_max_;
  std::vector<std::vector<BigInt>> rows_;
};

/// S(n, l) from the alternating binomial sum, evaluated in exact integers.
BigInt stirling_alternating_sum(int n, int l);

BigInt stirling(int n, int l);
BigInt factorial(int n);
BigInt binomial(std::uint64_t n, std::uint64_t k);

/// Touchard polynomial T_n(kappa) = sum_l S(n, l) kappa^l.
double touchard(int n, double kappa);

/// Largest point list accepted by for_each_split.
inline constexpr std::size_t kMaxSplitSize = 20;

/// Visits every ordered split (xi, eta \ xi) of eta exactly once; 2^|eta| calls.
/// Throws CapacityError for |eta| > kMaxSplitSize.
template <class T, class Fn>
void for_each_split(std::span<const T> eta, Fn&& fn);

/// Product over xi of phi(x); the empty product is 1.
template <class T, class Phi>
double product_functional(std::span<const T> xi, Phi&& phi) {
  double p = 1.0;
  for (const auto& x : xi) p *= phi(x);
  return p;
}

void check_split_capacity(std::size_t n);

template <class T, class Fn>
void for_each_split(std::span<const T> eta, Fn&& fn) {
  check_split_capacity(eta.size());
  const std::size_t n = eta.size();
  std::vector<T> xi, rest;
  xi.reserve(n);
  rest.reserve(n);
  const std::uint32_t count = std::uint32_t{1} << n;
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    xi.clear();
    rest.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (std::uint32_t{1} << i)) {
        xi.push_back(eta[i]);
      } else {
        rest.push_back(eta[i]);
      }
    }
    fn(std::span<const T>(xi), std::span<const T>(rest));
  }
}

}  // namespace contpop
