#include "contpop/hierarchy.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <complex>
#include <mutex>
#include <sstream>

#include <fftw3.h>

#include "contpop/errors.hpp"

namespace contpop {
namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

constexpr double kMaxClipFraction = 1e-3;
constexpr double kStepGuard = 0.5;

}  // namespace

Closure parse_closure(const std::string& name) {
  if (name == "zero-third-cumulant" || name == "cumulant") return Closure::zero_third_cumulant;
  if (name == "kirkwood") return Closure::kirkwood;
  if (name == "mean-field") return Closure::mean_field;
  throw ConfigError("unknown closure '" + name + "'");
}

std::string closure_name(Closure c) {
  switch (c) {
    case Closure::zero_third_cumulant: return "zero-third-cumulant";
    case Closure::kirkwood: return "kirkwood";
    case Closure::mean_field: return "mean-field";
  }
  return "unknown";
}

double close_third(Closure closure, double k2_12, double k2_13, double k2_23, double k1_1,
                   double k1_2, double k1_3) {
  switch (closure) {
    case Closure::zero_third_cumulant:
      return k2_12 * k1_3 + k2_13 * k1_2 + k2_23 * k1_1 - 2.0 * k1_1 * k1_2 * k1_3;
    case Closure::kirkwood:
      return k2_12 * k2_13 * k2_23 / std::max(k1_1 * k1_2 * k1_3, kKirkwoodFloor);
    case Closure::mean_field:
      return k2_12 * k1_3;
  }
  throw ConfigError("unknown closure");
}

/// Circular convolution on the periodic separation grid via FFTW.
struct HierarchySolver::Fft {
  int total = 0;
  int complex_total = 0;
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_complex* spec_b = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  std::vector<std::complex<double>> kernel_hat;

  Fft(int dim, int n, std::span<const double> kernel, double weight) {
    std::vector<int> dims(static_cast<std::size_t>(dim), n);
    total = 1;
    for (int i = 0; i < dim; ++i) total *= n;
    complex_total = total / n * (n / 2 + 1);
    real = fftw_alloc_real(static_cast<std::size_t>(total));
    spec = fftw_alloc_complex(static_cast<std::size_t>(complex_total));
    spec_b = fftw_alloc_complex(static_cast<std::size_t>(complex_total));
    {
      std::lock_guard lock(fftw_planner_mutex());
      forward = fftw_plan_dft_r2c(dim, dims.data(), real, spec, FFTW_ESTIMATE);
      backward = fftw_plan_dft_c2r(dim, dims.data(), spec, real, FFTW_ESTIMATE);
    }
    std::copy(kernel.begin(), kernel.end(), real);
    fftw_execute(forward);
    kernel_hat.resize(static_cast<std::size_t>(complex_total));
    for (int i = 0; i < complex_total; ++i) {
      kernel_hat[static_cast<std::size_t>(i)] = std::complex<double>(spec[i][0], spec[i][1]) * weight;
    }
  }

  ~Fft() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
    fftw_free(real);
    fftw_free(spec);
    fftw_free(spec_b);
  }

  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  // out_j = weight * sum_i a_i f_{j-i}
  void convolve_kernel(std::span<const double> f, std::vector<double>& out) {
    std::copy(f.begin(), f.end(), real);
    fftw_execute(forward);
    for (int i = 0; i < complex_total; ++i) {
      const auto p = std::complex<double>(spec[i][0], spec[i][1]) * kernel_hat[static_cast<std::size_t>(i)];
      spec[i][0] = p.real();
      spec[i][1] = p.imag();
    }
    fftw_execute(backward);
    out.assign(real, real + total);
    for (auto& v : out) v /= total;
  }

  // out_j = sum_i f_i g_{j-i}
  void convolve(std::span<const double> f, std::span<const double> g, std::vector<double>& out) {
    std::copy(g.begin(), g.end(), real);
    fftw_execute(forward);
    std::memcpy(spec_b, spec, sizeof(fftw_complex) * static_cast<std::size_t>(complex_total));
    std::copy(f.begin(), f.end(), real);
    fftw_execute(forward);
    for (int i = 0; i < complex_total; ++i) {
      const auto p = std::complex<double>(spec[i][0], spec[i][1]) *
                     std::complex<double>(spec_b[i][0], spec_b[i][1]);
      spec[i][0] = p.real();
      spec[i][1] = p.imag();
    }
    fftw_execute(backward);
    out.assign(real, real + total);
    for (auto& v : out) v /= total;
  }
};

HierarchySolver::HierarchySolver(const ModelParams& params, HierarchyOptions options)
    : params_(&params), options_(options), dim_(params.dim()), n_(options.points_per_axis) {
  if (options_.n_max != 1 && options_.n_max != 2) throw DomainError("n_max must be 1 or 2");
  if (n_ < 4) throw DomainError("hierarchy grid needs at least 4 points per axis");
  const auto& window = params.window();
  const auto& kernel = params.kernel();
  if (options_.mode == HierarchyMode::homogeneous) {
    if (!window.periodic()) throw DomainError("homogeneous mode requires a periodic window");
    if (!params.b().is_constant() || !params.m().is_constant()) {
      throw DomainError("homogeneous mode requires constant b and m");
    }
    cell_volume_ = 1.0;
    for (int i = 0; i < dim_; ++i) cell_volume_ *= window.side(i) / n_;
    a_grid_.resize(k2_size());
    for (std::size_t j = 0; j < a_grid_.size(); ++j) a_grid_[j] = kernel(separation(j));
    fft_ = std::make_unique<Fft>(dim_, n_, a_grid_, cell_volume_);
  } else {
    if (dim_ != 1) throw DomainError("full-grid mode is limited to d = 1");
    const auto domain = window.domain();
    spacing_ = (domain.upper[0] - domain.lower[0]) / n_;
    origin_ = window.periodic() ? 0.0 : domain.lower[0] + 0.5 * spacing_;
    cell_volume_ = spacing_;
    const auto n = static_cast<std::size_t>(n_);
    a_grid_.resize(n * n);
    b_grid_.resize(n);
    m_grid_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Point xi{position(i), 0.0, 0.0};
      b_grid_[i] = params.b().value(xi);
      m_grid_[i] = params.m().value(xi);
      for (std::size_t j = 0; j < n; ++j) {
        const Point xj{position(j), 0.0, 0.0};
        a_grid_[i * n + j] = kernel(window.displacement(xi, xj));
      }
    }
  }
}

HierarchySolver::~HierarchySolver() = default;

std::size_t HierarchySolver::k1_size() const {
  return options_.mode == HierarchyMode::homogeneous ? 1 : static_cast<std::size_t>(n_);
}

std::size_t HierarchySolver::k2_size() const {
  if (options_.mode == HierarchyMode::full_grid) return static_cast<std::size_t>(n_) * n_;
  std::size_t t = 1;
  for (int i = 0; i < dim_; ++i) t *= static_cast<std::size_t>(n_);
  return t;
}

Point HierarchySolver::separation(std::size_t j) const {
  Point p{};
  const auto& window = params_->window();
  for (int i = dim_ - 1; i >= 0; --i) {
    const auto idx = static_cast<int>(j % static_cast<std::size_t>(n_));
    j /= static_cast<std::size_t>(n_);
    const int signed_idx = idx <= n_ / 2 ? idx : idx - n_;
    p[i] = signed_idx * window.side(i) / n_;
  }
  return p;
}

double HierarchySolver::position(std::size_t i) const {
  return origin_ + spacing_ * static_cast<double>(i);
}

double HierarchySolver::kernel_mass() const {
  double s = 0.0;
  if (options_.mode == HierarchyMode::homogeneous) {
    for (double a : a_grid_) s += a;
  } else {
    // Row through the middle of the grid.
    const auto n = static_cast<std::size_t>(n_);
    for (std::size_t j = 0; j < n; ++j) s += a_grid_[(n / 2) * n + j];
  }
  return s * cell_volume_;
}

HierarchyState HierarchySolver::poisson_state(const ScalarField& rho0) const {
  HierarchyState s;
  if (options_.mode == HierarchyMode::homogeneous) {
    if (!rho0.is_constant()) throw DomainError("homogeneous mode needs a constant initial density");
    const double r = rho0.constant_value();
    s.k1 = {r};
    if (options_.n_max == 2) s.k2.assign(k2_size(), r * r);
  } else {
    const auto n = static_cast<std::size_t>(n_);
    s.k1.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.k1[i] = rho0.value(Point{position(i), 0.0, 0.0});
    if (options_.n_max == 2) {
      s.k2.resize(n * n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) s.k2[i * n + j] = s.k1[i] * s.k1[j];
      }
    }
  }
  return s;
}

void HierarchySolver::rhs(const HierarchyState& s, std::vector<double>& d1,
                          std::vector<double>& d2) const {
  if (s.k1.size() != k1_size() || (options_.n_max == 2 && s.k2.size() != k2_size())) {
    throw DomainError("hierarchy state does not match the solver grid");
  }
  if (options_.mode == HierarchyMode::homogeneous) {
    rhs_homogeneous(s, d1, d2);
  } else {
    rhs_full(s, d1, d2);
  }
}

void HierarchySolver::rhs_homogeneous(const HierarchyState& s, std::vector<double>& d1,
                                      std::vector<double>& d2) const {
  const double b = params_->b().constant_value();
  const double m = params_->m().constant_value();
  const double rho = s.k1[0];
  const double mass_a = kernel_mass();
  d1.assign(1, 0.0);
  if (options_.n_max == 1) {
    d1[0] = b - m * rho - mass_a * rho * rho;
    d2.clear();
    return;
  }
  const std::size_t total = k2_size();
  double pair_loss = 0.0;
  for (std::size_t j = 0; j < total; ++j) pair_loss += a_grid_[j] * s.k2[j];
  pair_loss *= cell_volume_;
  d1[0] = b - m * rho - pair_loss;

  d2.resize(total);
  std::vector<double> coupling(total, 0.0);
  switch (options_.closure) {
    case Closure::zero_third_cumulant: {
      std::vector<double> conv;
      fft_->convolve_kernel(s.k2, conv);
      for (std::size_t j = 0; j < total; ++j) {
        coupling[j] = 2.0 * (rho * s.k2[j] * mass_a + rho * pair_loss + rho * conv[j] -
                             2.0 * rho * rho * rho * mass_a);
      }
      break;
    }
    case Closure::kirkwood: {
      std::vector<double> weighted(total), conv;
      for (std::size_t j = 0; j < total; ++j) weighted[j] = a_grid_[j] * s.k2[j];
      fft_->convolve(weighted, s.k2, conv);
      const double denom = std::max(rho * rho * rho, kKirkwoodFloor);
      for (std::size_t j = 0; j < total; ++j) {
        coupling[j] = 2.0 * s.k2[j] * conv[j] * cell_volume_ / denom;
      }
      break;
    }
    case Closure::mean_field:
      for (std::size_t j = 0; j < total; ++j) coupling[j] = 2.0 * mass_a * rho * s.k2[j];
      break;
  }
  for (std::size_t j = 0; j < total; ++j) {
    d2[j] = -(2.0 * m + 2.0 * a_grid_[j]) * s.k2[j] - coupling[j] + 2.0 * b * rho;
  }
}

void HierarchySolver::rhs_full(const HierarchyState& s, std::vector<double>& d1,
                               std::vector<double>& d2) const {
  const auto n = static_cast<std::size_t>(n_);
  const double h = cell_volume_;
  const auto& k1 = s.k1;
  auto a = [&](std::size_t i, std::size_t j) { return a_grid_[i * n + j]; };

  // P_i = h sum_y a_iy k1_y
  std::vector<double> P(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t y = 0; y < n; ++y) acc += a(i, y) * k1[y];
    P[i] = acc * h;
  }
  d1.resize(n);
  if (options_.n_max == 1) {
    for (std::size_t i = 0; i < n; ++i) d1[i] = b_grid_[i] - m_grid_[i] * k1[i] - k1[i] * P[i];
    d2.clear();
    return;
  }
  const auto& k2 = s.k2;
  auto K2 = [&](std::size_t i, std::size_t j) { return k2[i * n + j]; };
  // Q_i = h sum_y a_iy k2_iy
  std::vector<double> Q(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t y = 0; y < n; ++y) acc += a(i, y) * K2(i, y);
    Q[i] = acc * h;
  }
  for (std::size_t i = 0; i < n; ++i) d1[i] = b_grid_[i] - m_grid_[i] * k1[i] - Q[i];

  // coupling(i, j) = h sum_y a_iy k3(i, j, y)
  std::vector<double> coupling(n * n, 0.0);
  switch (options_.closure) {
    case Closure::zero_third_cumulant: {
      // M_ij = h sum_y a_iy k2_yj
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t y = 0; y < n; ++y) acc += a(i, y) * K2(y, j);
          coupling[i * n + j] =
              K2(i, j) * P[i] + k1[j] * Q[i] + k1[i] * acc * h - 2.0 * k1[i] * k1[j] * P[i];
        }
      }
      break;
    }
    case Closure::kirkwood: {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t y = 0; y < n; ++y) {
            acc += a(i, y) * close_third(Closure::kirkwood, K2(i, j), K2(i, y), K2(j, y), k1[i],
                                         k1[j], k1[y]);
          }
          coupling[i * n + j] = acc * h;
        }
      }
      break;
    }
    case Closure::mean_field:
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) coupling[i * n + j] = K2(i, j) * P[i];
      }
      break;
  }
  d2.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      d2[i * n + j] = -(m_grid_[i] + m_grid_[j] + 2.0 * a(i, j)) * K2(i, j) -
                      (coupling[i * n + j] + coupling[j * n + i]) + b_grid_[i] * k1[j] +
                      b_grid_[j] * k1[i];
    }
  }
}

std::vector<double> HierarchySolver::rhs_order1(const HierarchyState& s) const {
  std::vector<double> d1, d2;
  rhs(s, d1, d2);
  return d1;
}

std::vector<double> HierarchySolver::rhs_order2(const HierarchyState& s) const {
  if (options_.n_max != 2) throw DomainError("rhs_order2 requires n_max = 2");
  std::vector<double> d1, d2;
  rhs(s, d1, d2);
  return d2;
}

double HierarchySolver::stiffness(const HierarchyState& s) const {
  const double sup_k1 = s.k1.empty() ? 0.0 : *std::max_element(s.k1.begin(), s.k1.end());
  return params_->m_sup() + 2.0 * params_->a_sup() + params_->a_integral() * sup_k1;
}

double HierarchySolver::mass(const HierarchyState& s) const {
  const double w1 = options_.mode == HierarchyMode::homogeneous ? params_->window().volume()
                                                                 : cell_volume_;
  const double w2 = options_.mode == HierarchyMode::homogeneous
                        ? params_->window().volume() * cell_volume_
                        : cell_volume_ * cell_volume_;
  double m = 0.0;
  for (double v : s.k1) m += std::abs(v) * w1;
  for (double v : s.k2) m += std::abs(v) * w2;
  return m;
}

HierarchyTrajectory HierarchySolver::integrate(HierarchyState state, double t_end, double dt,
                                               std::span<const double> snapshot_times) const {
  if (!(dt > 0.0)) throw DomainError("dt must be > 0");
  if (!(t_end >= state.t)) throw DomainError("t_end precedes the initial time");
  std::vector<double> targets;
  for (double t : snapshot_times) {
    if (t < state.t || t > t_end) throw DomainError("snapshot time outside the integration range");
    targets.push_back(t);
  }
  targets.push_back(t_end);
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

  const double w1 = options_.mode == HierarchyMode::homogeneous ? params_->window().volume()
                                                                 : cell_volume_;
  const double w2 = options_.mode == HierarchyMode::homogeneous
                        ? params_->window().volume() * cell_volume_
                        : cell_volume_ * cell_volume_;

  HierarchyTrajectory traj;
  const std::size_t n1 = state.k1.size();
  const std::size_t n2 = state.k2.size();
  std::vector<double> a1, a2, b1, b2, c1, c2, e1, e2;
  HierarchyState stage;

  auto check_finite = [&](const HierarchyState& s) {
    for (double v : s.k1) {
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "hierarchy diverged at t = " << s.t;
        throw NumericalError(os.str());
      }
    }
    for (double v : s.k2) {
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "hierarchy diverged at t = " << s.t;
        throw NumericalError(os.str());
      }
    }
  };

  for (double target : targets) {
    const double span = target - state.t;
    if (span > 0.0) {
      const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(span / dt - 1e-9)));
      const double h = span / static_cast<double>(steps);
      const double t0 = state.t;
      for (std::size_t k = 0; k < steps; ++k) {
        if (h * stiffness(state) > kStepGuard) {
          std::ostringstream os;
          os << "step size " << h << " violates the stability guard at t = " << state.t;
          throw NumericalError(os.str());
        }
        rhs(state, a1, a2);
        stage.k1.resize(n1);
        stage.k2.resize(n2);
        for (std::size_t i = 0; i < n1; ++i) stage.k1[i] = state.k1[i] + 0.5 * h * a1[i];
        for (std::size_t i = 0; i < n2; ++i) stage.k2[i] = state.k2[i] + 0.5 * h * a2[i];
        rhs(stage, b1, b2);
        for (std::size_t i = 0; i < n1; ++i) stage.k1[i] = state.k1[i] + 0.5 * h * b1[i];
        for (std::size_t i = 0; i < n2; ++i) stage.k2[i] = state.k2[i] + 0.5 * h * b2[i];
        rhs(stage, c1, c2);
        for (std::size_t i = 0; i < n1; ++i) stage.k1[i] = state.k1[i] + h * c1[i];
        for (std::size_t i = 0; i < n2; ++i) stage.k2[i] = state.k2[i] + h * c2[i];
        rhs(stage, e1, e2);
        for (std::size_t i = 0; i < n1; ++i) {
          state.k1[i] += h / 6.0 * (a1[i] + 2.0 * (b1[i] + c1[i]) + e1[i]);
        }
        for (std::size_t i = 0; i < n2; ++i) {
          state.k2[i] += h / 6.0 * (a2[i] + 2.0 * (b2[i] + c2[i]) + e2[i]);
        }
        state.t = k + 1 == steps ? target : t0 + h * static_cast<double>(k + 1);
        check_finite(state);
        // Correlation functions are nonnegative; clip closure undershoot.
        for (auto& v : state.k1) {
          if (v < 0.0) {
            traj.clip_mass += -v * w1;
            ++traj.clip_events;
            v = 0.0;
          }
        }
        for (auto& v : state.k2) {
          if (v < 0.0) {
            traj.clip_mass += -v * w2;
            ++traj.clip_events;
            v = 0.0;
          }
        }
        if (traj.clip_mass > kMaxClipFraction * mass(state) && traj.clip_mass > 0.0) {
          std::ostringstream os;
          os << "clipped mass " << traj.clip_mass << " exceeds 1e-3 of the total at t = " << state.t;
          throw NumericalError(os.str());
        }
        ++traj.steps;
      }
    }
    traj.snapshots.push_back(state);
  }
  return traj;
}

}  // namespace contpop
