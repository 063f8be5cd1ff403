#include "contpop/combinatorics.hpp"

#include <cmath>
#include <string>

#include "contpop/errors.hpp"

namespace contpop {

StirlingTable::StirlingTable(int n_max) : n_max_(n_max) {
  if (n_max < 1) throw DomainError("Stirling table order must be >= 1");
  rows_.resize(static_cast<std::size_t>(n_max) + 1);
  rows_[0] = {BigInt(1)};
  for (int n = 1; n <= n_max; ++n) {
    auto& row = rows_[static_cast<std::size_t>(n)];
    const auto& prev = rows_[static_cast<std::size_t>(n - 1)];
    row.assign(static_cast<std::size_t>(n) + 1, BigInt(0));
    for (int l = 1; l <= n; ++l) {
      BigInt v = 0;
      if (l <= n - 1) v += l * prev[static_cast<std::size_t>(l)];
      v += prev[static_cast<std::size_t>(l - 1)];
      row[static_cast<std::size_t>(l)] = v;
    }
  }
}

const BigInt& StirlingTable::operator()(int n, int l) const {
  if (l < 1 || l > n || n > n_max_) {
    throw DomainError("stirling(" + std::to_string(n) + ", " + std::to_string(l) +
                      ") outside 1 <= l <= n <= " + std::to_string(n_max_));
  }
  return rows_[static_cast<std::size_t>(n)][static_cast<std::size_t>(l)];
}

const StirlingTable& StirlingTable::shared() {
  static const StirlingTable table;
  return table;
}

BigInt stirling(int n, int l) { return StirlingTable::shared()(n, l); }

BigInt factorial(int n) {
  if (n < 0) throw DomainError("factorial of a negative number");
  BigInt f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

BigInt binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  BigInt c = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    c *= n - k + i;
    c /= i;
  }
  return c;
}

BigInt stirling_alternating_sum(int n, int l) {
  if (l < 1 || l > n) throw DomainError("stirling_alternating_sum: need 1 <= l <= n");
  BigInt sum = 0;
  for (int s = 0; s <= l; ++s) {
    BigInt term = binomial(static_cast<std::uint64_t>(l), static_cast<std::uint64_t>(s)) *
                  boost::multiprecision::pow(BigInt(s), static_cast<unsigned>(n));
    if ((l - s) % 2 == 0) {
      sum += term;
    } else {
      sum -= term;
    }
  }
  return sum / factorial(l);
}

double touchard(int n, double kappa) {
  const auto& table = StirlingTable::shared();
  if (n < 1 || n > table.n_max()) throw DomainError("touchard order out of range");
  if (!(kappa >= 0.0)) throw DomainError("touchard argument must be >= 0");
  // Horner in kappa; the coefficients are exact until this conversion.
  double acc = 0.0;
  for (int l = n; l >= 1; --l) acc = acc * kappa + table(n, l).convert_to<double>();
  return acc * kappa;
}

void check_split_capacity(std::size_t n) {
  if (n > kMaxSplitSize) {
    throw CapacityError("subset enumeration limited to " + std::to_string(kMaxSplitSize) +
                        " points, got " + std::to_string(n));
  }
}

}  // namespace contpop
