#include "contpop/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <set>
#include <thread>

#include "contpop/errors.hpp"

namespace contpop {
namespace {

// Per-axis cap on the number of cells.
constexpr std::array<int, 3> kMaxCellsPerAxis{4096, 128, 32};

}  // namespace

CappedRunError::CappedRunError(std::size_t replica, std::uint64_t cap)
    : std::runtime_error("replica " + std::to_string(replica) + " exceeded the event cap of " +
                         std::to_string(cap)),
      replica_(replica) {}

PointConfiguration sample_initial(const InitialCondition& init, const Window& window, Philox& rng) {
  PointConfiguration config;
  const int dim = window.dim();
  const Box domain = window.domain();
  switch (init.kind) {
    case InitialCondition::Kind::empty:
      break;
    case InitialCondition::Kind::explicit_list:
      for (const auto& p : init.points) {
        if (!window.in_domain(p)) throw DomainError("initial point lies outside the window");
      }
      config.positions = init.points;
      break;
    case InitialCondition::Kind::poisson: {
      const double sup = init.density.sup();
      if (!std::isfinite(sup) || sup < 0.0) throw DomainError("initial density must be bounded and >= 0");
      const double mass = init.density.integral(domain, dim);
      if (mass <= 0.0) break;
      std::poisson_distribution<std::uint64_t> count(mass);
      const std::uint64_t n = count(rng);
      config.positions.reserve(n);
      for (std::uint64_t i = 0; i < n; ++i) {
        config.positions.push_back(init.density.sample(rng, domain, dim));
      }
      break;
    }
  }
  return config;
}

Simulation::Simulation(const ModelParams& params, const PointConfiguration& initial, Philox rng)
    : params_(&params), rng_(rng), dim_(params.dim()), domain_(params.window().domain()) {
  const auto& window = params.window();
  const double r_cut = params.kernel().r_cut();
  std::size_t total_cells = 1;
  for (int i = 0; i < dim_; ++i) {
    const double extent = domain_.upper[i] - domain_.lower[i];
    int n = kMaxCellsPerAxis[static_cast<std::size_t>(dim_ - 1)];
    if (r_cut > 0.0) n = std::min<int>(n, static_cast<int>(std::floor(extent / r_cut)));
    ncell_[i] = std::max(n, 1);
    cell_side_[i] = extent / ncell_[i];
    total_cells *= static_cast<std::size_t>(ncell_[i]);
  }
  members_.resize(total_cells);
  neighbors_.resize(total_cells);
  cell_rate_.assign(total_cells, 0.0);

  // Neighbor cells within one cell per axis, deduplicated when wrapping folds
  // them onto each other.
  for (std::size_t c = 0; c < total_cells; ++c) {
    std::array<int, 3> coord{};
    std::size_t rest = c;
    for (int i = dim_ - 1; i >= 0; --i) {
      coord[i] = static_cast<int>(rest % static_cast<std::size_t>(ncell_[i]));
      rest /= static_cast<std::size_t>(ncell_[i]);
    }
    std::set<std::uint32_t> found;
    std::array<int, 3> off{-1, -1, -1};
    for (int i = dim_; i < 3; ++i) off[i] = 0;
    while (true) {
      bool valid = true;
      std::size_t idx = 0;
      for (int i = 0; i < dim_; ++i) {
        int v = coord[i] + off[i];
        if (window.periodic()) {
          v = (v % ncell_[i] + ncell_[i]) % ncell_[i];
        } else if (v < 0 || v >= ncell_[i]) {
          valid = false;
        }
        idx = idx * static_cast<std::size_t>(ncell_[i]) + static_cast<std::size_t>(std::max(v, 0));
      }
      if (valid) found.insert(static_cast<std::uint32_t>(idx));
      int axis = dim_ - 1;
      while (axis >= 0 && ++off[axis] > 1) {
        off[axis] = -1;
        --axis;
      }
      if (axis < 0) break;
    }
    neighbors_[c].assign(found.begin(), found.end());
  }

  b_total_ = params.b().integral(domain_, dim_);
  for (const auto& p : initial.positions) {
    if (!window.in_domain(p)) throw DomainError("configuration point lies outside the window");
    insert(p);
  }
}

std::uint32_t Simulation::cell_of(const Point& x) const {
  std::size_t idx = 0;
  for (int i = 0; i < dim_; ++i) {
    int c = static_cast<int>(std::floor((x[i] - domain_.lower[i]) / cell_side_[i]));
    c = std::clamp(c, 0, ncell_[i] - 1);
    idx = idx * static_cast<std::size_t>(ncell_[i]) + static_cast<std::size_t>(c);
  }
  return static_cast<std::uint32_t>(idx);
}

void Simulation::insert(const Point& x) {
  const auto& kernel = params_->kernel();
  const auto& window = params_->window();
  const auto id = static_cast<std::uint32_t>(pos_.size());
  const std::uint32_t c = cell_of(x);
  double own = params_->m().value(x);
  double shared = 0.0;
  if (!kernel.is_zero()) {
    for (std::uint32_t nc : neighbors_[c]) {
      for (std::uint32_t j : members_[nc]) {
        const double w = kernel(window.displacement(pos_[j], x));
        if (w == 0.0) continue;
        rate_[j] += w;
        cell_rate_[nc] += w;
        shared += w;
      }
    }
  }
  own += shared;
  pos_.push_back(x);
  rate_.push_back(own);
  cell_.push_back(c);
  slot_.push_back(static_cast<std::uint32_t>(members_[c].size()));
  members_[c].push_back(id);
  cell_rate_[c] += own;
  d_total_ += own + shared;
}

void Simulation::remove(std::uint32_t i) {
  const auto& kernel = params_->kernel();
  const auto& window = params_->window();
  const std::uint32_t c = cell_[i];
  const Point x = pos_[i];

  // Detach from its cell first so the neighbor sweep skips it.
  auto& home = members_[c];
  const std::uint32_t moved = home.back();
  home[slot_[i]] = moved;
  slot_[moved] = slot_[i];
  home.pop_back();
  cell_rate_[c] -= rate_[i];
  double shared = 0.0;
  if (!kernel.is_zero()) {
    for (std::uint32_t nc : neighbors_[c]) {
      for (std::uint32_t j : members_[nc]) {
        const double w = kernel(window.displacement(pos_[j], x));
        if (w == 0.0) continue;
        rate_[j] -= w;
        cell_rate_[nc] -= w;
        shared += w;
      }
    }
  }
  d_total_ -= rate_[i] + shared;

  const auto last = static_cast<std::uint32_t>(pos_.size() - 1);
  if (i != last) {
    pos_[i] = pos_[last];
    rate_[i] = rate_[last];
    cell_[i] = cell_[last];
    slot_[i] = slot_[last];
    members_[cell_[i]][slot_[i]] = i;
  }
  pos_.pop_back();
  rate_.pop_back();
  cell_.pop_back();
  slot_.pop_back();
  if (pos_.empty()) {
    d_total_ = 0.0;
    std::fill(cell_rate_.begin(), cell_rate_.end(), 0.0);
  }
}

std::uint32_t Simulation::select_victim(double u) const {
  std::size_t chosen_cell = cell_rate_.size();
  std::size_t last_positive = cell_rate_.size();
  for (std::size_t c = 0; c < cell_rate_.size(); ++c) {
    if (members_[c].empty()) continue;
    if (cell_rate_[c] > 0.0) last_positive = c;
    if (u < cell_rate_[c]) {
      chosen_cell = c;
      break;
    }
    u -= cell_rate_[c];
  }
  if (chosen_cell == cell_rate_.size()) {
    // Rounding overshoot: fall back to the last cell carrying rate.
    chosen_cell = last_positive;
    u = cell_rate_[chosen_cell];
  }
  const auto& list = members_[chosen_cell];
  std::uint32_t fallback = list.back();
  for (std::uint32_t j : list) {
    if (rate_[j] > 0.0) fallback = j;
    if (u < rate_[j]) return j;
    u -= rate_[j];
  }
  return fallback;
}

EventRecord Simulation::step() {
  const double total = b_total_ + (pos_.empty() ? 0.0 : d_total_);
  EventRecord ev;
  if (!(total > 0.0)) return ev;
  ev.waiting_time = rng_.exponential(total);
  t_ += ev.waiting_time;
  const double u = rng_.uniform() * total;
  if (u < b_total_) {
    Point x = params_->b().sample(rng_, domain_, dim_);
    if (params_->window().periodic()) {
      for (int i = 0; i < dim_; ++i) {
        const double L = params_->window().side(i);
        x[i] -= L * std::floor(x[i] / L);
        if (x[i] >= L) x[i] = 0.0;
      }
    }
    insert(x);
    ev.kind = EventRecord::Kind::birth;
    ev.where = x;
    ++births_;
  } else {
    const std::uint32_t victim = select_victim(rng_.uniform() * d_total_);
    ev.kind = EventRecord::Kind::death;
    ev.where = pos_[victim];
    remove(victim);
    ++deaths_;
  }
  ++events_;
  if (events_ % kAuditInterval == 0) audit();
  return ev;
}

void Simulation::advance_to(double t_stop, std::uint64_t max_events, std::size_t replica) {
  while (t_ < t_stop) {
    const double total = b_total_ + (pos_.empty() ? 0.0 : d_total_);
    if (!(total > 0.0)) {
      t_ = t_stop;
      return;
    }
    // Peek the waiting time on a copy so a discarded draw does not advance
    // state past the snapshot.
    Philox peek = rng_;
    const double dt = peek.exponential(total);
    if (t_ + dt > t_stop) {
      rng_ = peek;
      t_ = t_stop;
      return;
    }
    if (events_ >= max_events) throw CappedRunError(replica, max_events);
    step();
  }
}

PointConfiguration Simulation::configuration() const {
  PointConfiguration c;
  c.positions = pos_;
  c.death_rates = rate_;
  return c;
}

void Simulation::rebuild_rates() {
  const auto& kernel = params_->kernel();
  const auto& window = params_->window();
  std::fill(cell_rate_.begin(), cell_rate_.end(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < pos_.size(); ++i) {
    double r = params_->m().value(pos_[i]);
    if (!kernel.is_zero()) {
      for (std::uint32_t nc : neighbors_[cell_[i]]) {
        for (std::uint32_t j : members_[nc]) {
          if (j == i) continue;
          r += kernel(window.displacement(pos_[j], pos_[i]));
        }
      }
    }
    rate_[i] = r;
    cell_rate_[cell_[i]] += r;
    total += r;
  }
  d_total_ = total;
}

double Simulation::audit() {
  const double before = d_total_;
  rebuild_rates();
  const double residual =
      d_total_ > 0.0 ? std::abs(before - d_total_) / d_total_ : std::abs(before - d_total_);
  max_audit_residual_ = std::max(max_audit_residual_, residual);
  return residual;
}

double Simulation::death_rate_total_from_scratch() const {
  return interaction_energy(pos_, *params_);
}

bool Simulation::index_consistent() const {
  std::size_t registered = 0;
  for (std::size_t c = 0; c < members_.size(); ++c) {
    for (std::size_t s = 0; s < members_[c].size(); ++s) {
      const std::uint32_t j = members_[c][s];
      if (j >= pos_.size() || cell_[j] != c || slot_[j] != s || cell_of(pos_[j]) != c) return false;
      ++registered;
    }
  }
  return registered == pos_.size();
}

Ensemble run_replicas(const ReplicaPlan& plan, const ModelParams& params,
                      const InitialCondition& init) {
  if (plan.snapshots.empty()) throw DomainError("snapshot grid is empty");
  for (std::size_t i = 0; i < plan.snapshots.size(); ++i) {
    if (!(plan.snapshots[i] >= 0.0) || (i > 0 && !(plan.snapshots[i] > plan.snapshots[i - 1]))) {
      throw DomainError("snapshot times must be >= 0 and strictly increasing");
    }
  }
  Ensemble out;
  out.times = plan.snapshots;
  out.snapshots.assign(plan.snapshots.size(), std::vector<PointConfiguration>(plan.replicas));
  out.stats.resize(plan.replicas);
  std::vector<std::exception_ptr> errors(plan.replicas);

  auto run_one = [&](std::size_t r) {
    try {
      Philox rng(plan.seed, r);
      const PointConfiguration start = sample_initial(init, params.window(), rng);
      Simulation sim(params, start, rng);
      for (std::size_t s = 0; s < plan.snapshots.size(); ++s) {
        sim.advance_to(plan.snapshots[s], plan.max_events, r);
        PointConfiguration snap;
        snap.positions = sim.configuration().positions;
        out.snapshots[s][r] = std::move(snap);
      }
      auto& st = out.stats[r];
      st.events = sim.events();
      st.births = sim.births();
      st.deaths = sim.deaths();
      st.final_audit_residual = sim.audit();
      st.max_audit_residual = sim.max_audit_residual();
    } catch (...) {
      errors[r] = std::current_exception();
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(plan.threads,
                                                           static_cast<unsigned>(plan.replicas)));
  if (threads <= 1) {
    for (std::size_t r = 0; r < plan.replicas; ++r) run_one(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < plan.replicas; r = next++) run_one(r);
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace contpop
