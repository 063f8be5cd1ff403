#include "contpop/field.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "contpop/errors.hpp"

namespace contpop {
namespace {

int infer_dim(const std::vector<int>& counts) { return static_cast<int>(counts.size()); }

Box intersect(const Box& a, const Box& b, int dim) {
  Box r;
  for (int i = 0; i < dim; ++i) {
    r.lower[i] = std::max(a.lower[i], b.lower[i]);
    r.upper[i] = std::max(r.lower[i], std::min(a.upper[i], b.upper[i]));
  }
  return r;
}

bool box_inside(const Box& inner, const Box& outer, int dim) {
  for (int i = 0; i < dim; ++i) {
    if (inner.lower[i] < outer.lower[i] || inner.upper[i] > outer.upper[i]) return false;
  }
  return true;
}

}  // namespace

Point uniform_in_box(Philox& rng, const Box& box, int dim) {
  Point p{};
  for (int i = 0; i < dim; ++i) {
    p[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * rng.uniform();
  }
  return p;
}

ScalarField ScalarField::constant(double value) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw DomainError("field value must be finite and >= 0");
  }
  ScalarField f;
  f.kind_ = Kind::constant;
  f.value_ = value;
  f.sup_ = value;
  return f;
}

ScalarField ScalarField::box(double value, const Box& support) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw DomainError("field value must be finite and >= 0");
  }
  ScalarField f;
  f.kind_ = Kind::box;
  f.value_ = value;
  f.support_ = support;
  f.sup_ = value;
  return f;
}

ScalarField ScalarField::grid(const Box& extent, std::vector<int> counts,
                              std::vector<double> values) {
  if (counts.empty() || counts.size() > 3) throw DomainError("grid field needs 1-3 axes");
  std::size_t total = 1;
  for (int c : counts) {
    if (c < 1) throw DomainError("grid counts must be positive");
    total *= static_cast<std::size_t>(c);
  }
  if (values.size() != total) throw DomainError("grid value count does not match counts");
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw DomainError("field values must be finite and >= 0");
    }
  }
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (!(extent.upper[i] > extent.lower[i])) throw DomainError("grid extent is empty");
  }
  ScalarField f;
  f.kind_ = Kind::grid;
  f.support_ = extent;
  f.counts_ = std::move(counts);
  f.values_ = std::move(values);
  f.sup_ = *std::max_element(f.values_.begin(), f.values_.end());
  return f;
}

std::size_t ScalarField::cell_of(const Point& x) const {
  std::size_t idx = 0;
  const int dim = infer_dim(counts_);
  for (int i = 0; i < dim; ++i) {
    const double h = (support_.upper[i] - support_.lower[i]) / counts_[i];
    int c = static_cast<int>(std::floor((x[i] - support_.lower[i]) / h));
    c = std::clamp(c, 0, counts_[i] - 1);
    idx = idx * static_cast<std::size_t>(counts_[i]) + static_cast<std::size_t>(c);
  }
  return idx;
}

double ScalarField::value(const Point& x) const {
  switch (kind_) {
    case Kind::constant:
      return value_;
    case Kind::box: {
      for (int i = 0; i < 3; ++i) {
        if (support_.upper[i] == support_.lower[i]) continue;
        if (x[i] < support_.lower[i] || x[i] > support_.upper[i]) return 0.0;
      }
      return value_;
    }
    case Kind::grid: {
      const int dim = infer_dim(counts_);
      for (int i = 0; i < dim; ++i) {
        if (x[i] < support_.lower[i] || x[i] > support_.upper[i]) return 0.0;
      }
      return values_[cell_of(x)];
    }
  }
  return 0.0;
}

double ScalarField::inf_over(const Box& region, int dim) const {
  switch (kind_) {
    case Kind::constant:
      return value_;
    case Kind::box:
      return box_inside(region, support_, dim) ? value_ : 0.0;
    case Kind::grid: {
      if (!box_inside(region, support_, dim)) return 0.0;
      double lo = sup_;
      // Iterate over grid cells overlapping the region.
      std::array<int, 3> first{}, last{};
      for (int i = 0; i < dim; ++i) {
        const double h = (support_.upper[i] - support_.lower[i]) / counts_[i];
        first[i] = std::clamp(static_cast<int>(std::floor((region.lower[i] - support_.lower[i]) / h)),
                              0, counts_[i] - 1);
        last[i] = std::clamp(
            static_cast<int>(std::ceil((region.upper[i] - support_.lower[i]) / h)) - 1, first[i],
            counts_[i] - 1);
      }
      std::array<int, 3> c = first;
      while (true) {
        std::size_t idx = 0;
        for (int i = 0; i < dim; ++i) {
          idx = idx * static_cast<std::size_t>(counts_[i]) + static_cast<std::size_t>(c[i]);
        }
        lo = std::min(lo, values_[idx]);
        int axis = dim - 1;
        while (axis >= 0 && ++c[axis] > last[axis]) {
          c[axis] = first[axis];
          --axis;
        }
        if (axis < 0) break;
      }
      return lo;
    }
  }
  return 0.0;
}

double ScalarField::integral(const Box& region, int dim) const {
  switch (kind_) {
    case Kind::constant:
      return value_ * region.volume(dim);
    case Kind::box:
      return value_ * intersect(region, support_, dim).volume(dim);
    case Kind::grid: {
      double total = 0.0;
      std::array<int, 3> c{};
      while (true) {
        Box cell;
        std::size_t idx = 0;
        for (int i = 0; i < dim; ++i) {
          const double h = (support_.upper[i] - support_.lower[i]) / counts_[i];
          cell.lower[i] = support_.lower[i] + h * c[i];
          cell.upper[i] = cell.lower[i] + h;
          idx = idx * static_cast<std::size_t>(counts_[i]) + static_cast<std::size_t>(c[i]);
        }
        total += values_[idx] * intersect(region, cell, dim).volume(dim);
        int axis = dim - 1;
        while (axis >= 0 && ++c[axis] >= counts_[axis]) {
          c[axis] = 0;
          --axis;
        }
        if (axis < 0) break;
      }
      return total;
    }
  }
  return 0.0;
}

Point ScalarField::sample(Philox& rng, const Box& region, int dim) const {
  switch (kind_) {
    case Kind::constant:
      return uniform_in_box(rng, region, dim);
    case Kind::box:
      return uniform_in_box(rng, intersect(region, support_, dim), dim);
    case Kind::grid: {
      if (!(sup_ > 0.0)) throw DomainError("cannot sample from a zero field");
      // Rejection against the supremum.
      while (true) {
        const Point p = uniform_in_box(rng, region, dim);
        if (rng.uniform() * sup_ < value(p)) return p;
      }
    }
  }
  return {};
}

std::string ScalarField::kind_name() const {
  switch (kind_) {
    case Kind::constant: return "constant";
    case Kind::box: return "box";
    case Kind::grid: return "grid";
  }
  return "unknown";
}

}  // namespace contpop
