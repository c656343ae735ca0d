#include "ppsynth/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "ppsynth/numutil.hpp"

namespace ppsynth {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPosInf = std::numeric_limits<double>::infinity();

double kinetic_energy(const std::vector<double>& p, const std::vector<double>& inv_mass) {
  double k = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) k += inv_mass[i] * p[i] * p[i];
  return 0.5 * k;
}

// Velocity, used by the generalized no-U-turn criterion.
std::vector<double> p_sharp(const PhasePoint& z, const std::vector<double>& inv_mass) {
  std::vector<double> v(z.p.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = inv_mass[i] * z.p[i];
  return v;
}

bool no_uturn(const std::vector<double>& sharp_beg, const std::vector<double>& sharp_end,
              const std::vector<double>& rho) {
  double a = 0.0;
  double b = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    a += sharp_beg[i] * rho[i];
    b += sharp_end[i] * rho[i];
  }
  return a > 0.0 && b > 0.0;
}

void sample_momentum(PhasePoint& z, const std::vector<double>& inv_mass, Rng& rng) {
  for (std::size_t i = 0; i < z.p.size(); ++i)
    z.p[i] = rng.normal() / std::sqrt(inv_mass[i]);
}

// Running variance accumulator for the mass-matrix windows.
struct Welford {
  std::vector<double> mean;
  std::vector<double> m2;
  long n = 0;

  explicit Welford(int dim) : mean(dim, 0.0), m2(dim, 0.0) {}
  void reset() {
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(m2.begin(), m2.end(), 0.0);
    n = 0;
  }
  void add(const std::vector<double>& x) {
    ++n;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double d = x[i] - mean[i];
      mean[i] += d / static_cast<double>(n);
      m2[i] += d * (x[i] - mean[i]);
    }
  }
  // Sample variance shrunk toward 1e-3, matching the usual diagonal
  // adaptation regularization.
  std::vector<double> regularized_variance() const {
    std::vector<double> v(mean.size(), 1.0);
    if (n < 2) return v;
    double w = static_cast<double>(n) / (static_cast<double>(n) + 5.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      double var = m2[i] / static_cast<double>(n - 1);
      v[i] = w * var + (1.0 - w) * 1e-3;
      if (!(v[i] > 0.0) || !std::isfinite(v[i])) v[i] = 1e-3;
    }
    return v;
  }
};

struct DualAveraging {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  long counter = 0;
  double delta;

  explicit DualAveraging(double target) : delta(target) {}

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = std::log(eps);
    h_bar = 0.0;
    counter = 0;
  }
  double update(double accept_prob) {
    constexpr double gamma = 0.05;
    constexpr double t0 = 10.0;
    constexpr double kappa = 0.75;
    ++counter;
    double m = static_cast<double>(counter);
    h_bar = (1.0 - 1.0 / (m + t0)) * h_bar + (delta - accept_prob) / (m + t0);
    log_eps = mu - std::sqrt(m) / gamma * h_bar;
    double eta = std::pow(m, -kappa);
    log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
    return std::exp(log_eps);
  }
  double final_eps() const { return std::exp(log_eps_bar); }
};

// Warmup schedule: a fast ramp-in, doubling variance windows, and a fast
// tail where only the step size keeps adapting.
struct WarmupSchedule {
  int init_buffer = 0;
  int term_buffer = 0;
  std::vector<int> window_ends; // iteration indices closing a variance window

  WarmupSchedule(int tune) {
    if (tune < 20) return; // too short for windowed adaptation
    init_buffer = 75;
    term_buffer = 50;
    int base = 25;
    if (init_buffer + base + term_buffer > tune) {
      init_buffer = static_cast<int>(0.15 * tune);
      term_buffer = static_cast<int>(0.10 * tune);
      base = tune - init_buffer - term_buffer;
    }
    int start = init_buffer;
    int width = base;
    int last = tune - term_buffer;
    while (true) {
      int end = start + width;
      if (end >= last || end + 2 * width > last) {
        window_ends.push_back(last);
        break;
      }
      window_ends.push_back(end);
      start = end;
      width *= 2;
    }
  }
  bool in_window(int m) const {
    if (window_ends.empty()) return false;
    return m >= init_buffer && m < window_ends.back();
  }
};

class ChainRunner {
 public:
  ChainRunner(const BoundModel& model, const SamplerConfig& cfg, int chain_index)
      : model_(model),
        cfg_(cfg),
        rng_(cfg.seed, static_cast<unsigned long long>(chain_index)),
        dim_(model.dimension()),
        inv_mass_(model.dimension(), 1.0) {}

  // Returns empty message on success.
  std::string run(ChainDraws& out) {
    PhasePoint z;
    if (!initialize(z)) return "failed to initialize chain: no finite starting point after 10 attempts";

    double eps = find_initial_step(z, 1.0);
    DualAveraging da(cfg_.target_accept);
    da.restart(eps);
    WarmupSchedule sched(cfg_.tune);
    Welford acc(dim_);
    std::size_t next_window = 0;

    for (int m = 0; m < cfg_.tune; ++m) {
      Transition t = transition(z, eps);
      eps = da.update(t.accept_prob);
      if (sched.in_window(m)) acc.add(z.q);
      if (next_window < sched.window_ends.size() && m + 1 == sched.window_ends[next_window]) {
        inv_mass_ = acc.regularized_variance();
        acc.reset();
        ++next_window;
        refresh_gradient(z);
        eps = find_initial_step(z, eps);
        da.restart(eps);
      }
    }
    eps = cfg_.tune > 0 ? da.final_eps() : eps;
    out.step_size = eps;

    out.draws.reserve(cfg_.draws);
    out.energy.reserve(cfg_.draws);
    out.divergent.reserve(cfg_.draws);
    out.pointwise_loglik.reserve(cfg_.draws);
    for (int m = 0; m < cfg_.draws; ++m) {
      Transition t = transition(z, eps);
      out.draws.push_back(model_.to_constrained(z.q));
      out.energy.push_back(t.energy);
      out.divergent.push_back(t.divergent ? 1 : 0);
      out.pointwise_loglik.push_back(model_.pointwise_loglik(z.q));
    }
    return {};
  }

 private:
  struct Transition {
    double accept_prob = 1.0;
    double energy = 0.0;
    bool divergent = false;
  };

  bool initialize(PhasePoint& z) {
    z.q.assign(dim_, 0.0);
    z.p.assign(dim_, 0.0);
    z.grad.assign(dim_, 0.0);
    for (int attempt = 0; attempt < 10; ++attempt) {
      for (int i = 0; i < dim_; ++i) z.q[i] = rng_.uniform(-2.0, 2.0);
      GradResult g = model_.logp_grad(z.q);
      if (g.ok) {
        z.logp = g.logp;
        z.grad = g.grad;
        return true;
      }
    }
    return false;
  }

  void refresh_gradient(PhasePoint& z) {
    GradResult g = model_.logp_grad(z.q);
    if (g.ok) {
      z.logp = g.logp;
      z.grad = g.grad;
    }
  }

  double hamiltonian_of(const PhasePoint& z) const {
    double h = -z.logp + kinetic_energy(z.p, inv_mass_);
    return std::isfinite(h) ? h : kPosInf;
  }

  // Doubles or halves the step until a single leapfrog step crosses the 0.8
  // acceptance boundary.
  double find_initial_step(const PhasePoint& origin, double eps) {
    const double log_bound = std::log(0.8);
    int direction = 0;
    for (int iter = 0; iter < 100; ++iter) {
      PhasePoint z = origin;
      sample_momentum(z, inv_mass_, rng_);
      double h0 = hamiltonian_of(z);
      double delta = kNegInf;
      if (leapfrog(model_, z, eps, inv_mass_)) delta = h0 - hamiltonian_of(z);
      int want = delta > log_bound ? 1 : -1;
      if (direction == 0) direction = want;
      if (want != direction) break;
      eps = direction == 1 ? eps * 2.0 : eps * 0.5;
      if (eps > 1e7 || eps < 1e-10) break;
    }
    return eps;
  }

  // One balanced subtree of 2^depth leapfrog steps starting from z (which is
  // left at the far end). Returns false on divergence or an internal U-turn.
  bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose,
                  std::vector<double>& sharp_beg, std::vector<double>& sharp_end,
                  std::vector<double>& rho, double h0, double sign, double eps,
                  int& n_leapfrog, double& log_sum_weight, double& sum_metro_prob,
                  bool& divergent) {
    if (depth == 0) {
      double h = kPosInf;
      if (leapfrog(model_, z, sign * eps, inv_mass_)) h = hamiltonian_of(z);
      ++n_leapfrog;
      double delta = h0 - h; // log acceptance weight of this leaf
      if (h - h0 > cfg_.divergence_energy_threshold) {
        divergent = true;
        return false;
      }
      log_sum_weight = logaddexp(log_sum_weight, delta);
      sum_metro_prob += delta > 0.0 ? 1.0 : std::exp(delta);
      z_propose = z;
      for (int i = 0; i < dim_; ++i) rho[i] += z.p[i];
      sharp_beg = p_sharp(z, inv_mass_);
      sharp_end = sharp_beg;
      return true;
    }

    double lsw_left = kNegInf;
    std::vector<double> sharp_left_end(dim_);
    std::vector<double> rho_subtree(dim_, 0.0);
    if (!build_tree(depth - 1, z, z_propose, sharp_beg, sharp_left_end, rho_subtree, h0,
                    sign, eps, n_leapfrog, lsw_left, sum_metro_prob, divergent))
      return false;

    PhasePoint z_propose_right;
    double lsw_right = kNegInf;
    std::vector<double> sharp_right_beg(dim_);
    if (!build_tree(depth - 1, z, z_propose_right, sharp_right_beg, sharp_end, rho_subtree,
                    h0, sign, eps, n_leapfrog, lsw_right, sum_metro_prob, divergent))
      return false;

    double lsw_subtree = logaddexp(lsw_left, lsw_right);
    log_sum_weight = logaddexp(log_sum_weight, lsw_subtree);
    if (lsw_right > lsw_subtree || rng_.uniform() < std::exp(lsw_right - lsw_subtree))
      z_propose = z_propose_right;

    for (int i = 0; i < dim_; ++i) rho[i] += rho_subtree[i];
    return no_uturn(sharp_beg, sharp_end, rho_subtree);
  }

  Transition transition(PhasePoint& z, double eps) {
    sample_momentum(z, inv_mass_, rng_);
    double h0 = hamiltonian_of(z);

    PhasePoint z_minus = z;
    PhasePoint z_plus = z;
    PhasePoint z_propose = z;
    double h_propose = h0;
    std::vector<double> sharp_minus = p_sharp(z, inv_mass_);
    std::vector<double> sharp_plus = sharp_minus;
    std::vector<double> rho = z.p;

    double log_sum_weight = 0.0; // the current point carries weight 1
    double sum_metro_prob = 0.0;
    int n_leapfrog = 0;
    bool divergent = false;

    for (int depth = 0; depth < cfg_.max_treedepth; ++depth) {
      double sign = rng_.uniform() < 0.5 ? -1.0 : 1.0;
      PhasePoint& edge = sign > 0 ? z_plus : z_minus;
      std::vector<double>& sharp_edge = sign > 0 ? sharp_plus : sharp_minus;

      PhasePoint z_propose_sub;
      double lsw_subtree = kNegInf;
      std::vector<double> rho_subtree(dim_, 0.0);
      std::vector<double> sharp_beg_sub(dim_);
      std::vector<double> sharp_end_sub(dim_);
      bool valid = build_tree(depth, edge, z_propose_sub, sharp_beg_sub, sharp_end_sub,
                              rho_subtree, h0, sign, eps, n_leapfrog, lsw_subtree,
                              sum_metro_prob, divergent);
      if (valid) sharp_edge = sharp_end_sub;
      if (!valid) break;

      // Biased progressive sampling favors the new subtree.
      if (lsw_subtree > log_sum_weight || rng_.uniform() < std::exp(lsw_subtree - log_sum_weight)) {
        z_propose = z_propose_sub;
        h_propose = hamiltonian_of(z_propose);
      }
      log_sum_weight = logaddexp(log_sum_weight, lsw_subtree);

      for (int i = 0; i < dim_; ++i) rho[i] += rho_subtree[i];
      if (!no_uturn(sharp_minus, sharp_plus, rho)) break;
    }

    z = z_propose;
    Transition t;
    t.accept_prob = n_leapfrog > 0 ? sum_metro_prob / static_cast<double>(n_leapfrog) : 1.0;
    t.energy = h_propose;
    t.divergent = divergent;
    return t;
  }

  const BoundModel& model_;
  const SamplerConfig& cfg_;
  Rng rng_;
  int dim_;
  std::vector<double> inv_mass_;
};

} // namespace

bool leapfrog(const BoundModel& model, PhasePoint& z, double step,
              const std::vector<double>& inv_mass) {
  const double half = 0.5 * step;
  for (std::size_t i = 0; i < z.q.size(); ++i) {
    z.p[i] += half * z.grad[i];
    z.q[i] += step * inv_mass[i] * z.p[i];
  }
  GradResult g = model.logp_grad(z.q);
  if (!g.ok) {
    z.logp = kNegInf;
    return false;
  }
  z.logp = g.logp;
  z.grad = std::move(g.grad);
  for (std::size_t i = 0; i < z.q.size(); ++i) z.p[i] += half * z.grad[i];
  return true;
}

double hamiltonian(const PhasePoint& z, const std::vector<double>& inv_mass) {
  double h = -z.logp + kinetic_energy(z.p, inv_mass);
  return std::isfinite(h) ? h : kPosInf;
}

std::vector<std::vector<double>> PosteriorDraws::coord(int p) const {
  std::vector<std::vector<double>> out;
  out.reserve(chains.size());
  for (const ChainDraws& c : chains) {
    std::vector<double> col;
    col.reserve(c.draws.size());
    for (const std::vector<double>& row : c.draws) col.push_back(row[p]);
    out.push_back(std::move(col));
  }
  return out;
}

std::vector<std::vector<double>> PosteriorDraws::energies() const {
  std::vector<std::vector<double>> out;
  out.reserve(chains.size());
  for (const ChainDraws& c : chains) out.push_back(c.energy);
  return out;
}

long PosteriorDraws::total_divergences() const {
  long n = 0;
  for (const ChainDraws& c : chains)
    for (char d : c.divergent) n += d ? 1 : 0;
  return n;
}

std::vector<std::vector<double>> PosteriorDraws::flat_loglik() const {
  std::vector<std::vector<double>> out;
  for (const ChainDraws& c : chains)
    for (const std::vector<double>& row : c.pointwise_loglik) out.push_back(row);
  return out;
}

std::optional<PosteriorDraws> nuts_sample(const BoundModel& model, const SamplerConfig& config,
                                          SamplerError* err) {
  auto fail = [&](const std::string& msg) -> std::optional<PosteriorDraws> {
    if (err) {
      err->message = msg;
      err->init_failure = msg.rfind("failed to initialize", 0) == 0;
    }
    return std::nullopt;
  };
  if (config.chains < 2) return fail("sampler requires at least 2 chains");
  if (config.draws < 1 || config.tune < 1) return fail("draws and tune must be at least 1");
  if (model.dimension() < 1) return fail("model has no free parameters");

  std::vector<ChainDraws> results(config.chains);
  std::vector<std::string> errors(config.chains);
  std::vector<std::thread> threads;
  threads.reserve(config.chains);
  for (int c = 0; c < config.chains; ++c) {
    threads.emplace_back([&, c] {
      ChainRunner runner(model, config, c);
      errors[c] = runner.run(results[c]);
    });
  }
  for (std::thread& t : threads) t.join();
  for (int c = 0; c < config.chains; ++c)
    if (!errors[c].empty()) return fail(errors[c]);

  PosteriorDraws out;
  out.coord_names = model.coord_names();
  out.num_observations = model.num_observations();
  out.chains = std::move(results);
  return out;
}

} // namespace ppsynth
