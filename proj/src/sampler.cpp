#include "rmst/sampler.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <thread>

#include <Eigen/Cholesky>

#include "rmst/error.hpp"
#include "rmst/gee.hpp"
#include "rmst/seed.hpp"

namespace rmst {

void SamplerConfig::validate() const {
  if (chains < 2) throw Error(ErrorKind::InvalidSpec, "sampler: at least two chains are needed for R-hat");
  if (warmup < 1 || samples < 1) throw Error(ErrorKind::InvalidSpec, "sampler: warmup and samples must be positive");
  if (thin < 0) throw Error(ErrorKind::InvalidSpec, "sampler: thin must be non-negative");
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw Error(ErrorKind::InvalidSpec, "sampler: target_accept must lie in (0,1)");
  }
  if (!(init_scale > 0.0)) throw Error(ErrorKind::InvalidSpec, "sampler: init_scale must be positive");
}

int PosteriorDraws::index_of(const std::string& name) const {
  const std::string key = name == "delta" ? "arm" : name;
  for (std::size_t j = 0; j < parameter_names.size(); ++j) {
    if (parameter_names[j] == key) return static_cast<int>(j);
  }
  throw Error(ErrorKind::UnknownParameter, "no parameter named '" + name + "'");
}

std::vector<std::vector<double>> PosteriorDraws::per_chain(int param) const {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    out.emplace_back(c.col(param).data(), c.col(param).data() + c.rows());
  }
  return out;
}

std::vector<double> PosteriorDraws::pooled(int param) const {
  std::vector<double> out;
  for (const auto& c : chains) out.insert(out.end(), c.col(param).data(), c.col(param).data() + c.rows());
  return out;
}

namespace {

// Stan-style warmup schedule: a fast initial buffer, doubling covariance
// windows, and a terminal buffer that only tunes the step scale.
struct WindowPlan {
  int first_start = 0;
  std::vector<int> ends;
};

WindowPlan window_plan(int warmup) {
  if (warmup < 20) return {warmup, {}};
  int init = 75, term = 50, base = 25;
  if (init + base + term > warmup) {
    init = static_cast<int>(0.15 * warmup);
    term = static_cast<int>(0.1 * warmup);
    base = warmup - init - term;
  }
  const int end_adapt = warmup - term;
  WindowPlan plan{init, {}};
  int start = init, size = base;
  while (start < end_adapt) {
    int end = start + size;
    if (end + 2 * size > end_adapt) end = end_adapt;
    plan.ends.push_back(end);
    start = end;
    size *= 2;
  }
  return plan;
}

class Welford {
 public:
  explicit Welford(Eigen::Index d) : mean_(Eigen::VectorXd::Zero(d)), m2_(Eigen::MatrixXd::Zero(d, d)) {}
  void add(const Eigen::VectorXd& x) {
    ++n_;
    const Eigen::VectorXd delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_).transpose();
  }
  long count() const { return n_; }
  Eigen::MatrixXd covariance() const { return m2_ / static_cast<double>(n_ - 1); }
  void reset() {
    n_ = 0;
    mean_.setZero();
    m2_.setZero();
  }

 private:
  long n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
};

struct ChainResult {
  Eigen::MatrixXd draws;
  double acceptance = 0.0;
};

class Chain {
 public:
  Chain(const LogDensity& f, const SamplerConfig& cfg, std::uint64_t seed, const Eigen::MatrixXd& init_cov)
      : f_(f), cfg_(cfg), rng_(seed), d_(init_cov.rows()) {
    set_covariance(init_cov);
    reset_scale();
  }

  ChainResult run(const Eigen::VectorXd& center) {
    initialise(center);
    const int thin = cfg_.effective_thin(static_cast<int>(d_));
    const int warmup_steps = cfg_.warmup * thin;
    const auto plan = window_plan(warmup_steps);
    const auto& ends = plan.ends;
    std::size_t next_window = 0;
    Welford acc(d_);

    for (int it = 0; it < warmup_steps; ++it) {
      const double alpha = step();
      ++adapt_count_;
      log_scale_ += (alpha - cfg_.target_accept) / std::pow(adapt_count_ + 1.0, 0.6);
      if (next_window < ends.size() && it >= plan.first_start) {
        acc.add(x_);
        if (it + 1 == ends[next_window]) {
          const double m = static_cast<double>(acc.count());
          if (acc.count() > d_ + 1) {
            Eigen::MatrixXd c = acc.covariance() * (m / (m + 5.0));
            c.diagonal().array() += 1e-3 * (5.0 / (m + 5.0)) * acc.covariance().trace() / static_cast<double>(d_);
            set_covariance(c);
            reset_scale();
          }
          acc.reset();
          ++next_window;
        }
      }
    }

    ChainResult out;
    out.draws.resize(cfg_.samples, d_);
    long accepted = 0;
    for (int it = 0; it < cfg_.samples; ++it) {
      for (int k = 0; k < thin; ++k) {
        step();
        if (last_accepted_) ++accepted;
      }
      out.draws.row(it) = x_.transpose();
    }
    out.acceptance = static_cast<double>(accepted) / (static_cast<double>(cfg_.samples) * thin);
    return out;
  }

 private:
  void set_covariance(const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) return;
    cov_ = cov;
    chol_ = llt.matrixL();
  }

  void reset_scale() {
    const double d = static_cast<double>(d_);
    log_scale_ = cfg_.kind == SamplerKind::mala ? std::log(1.65 / std::pow(d, 1.0 / 6.0)) : std::log(2.38 / std::sqrt(d));
    adapt_count_ = 0;
  }

  Eigen::VectorXd std_normal() {
    Eigen::VectorXd z(d_);
    for (Eigen::Index j = 0; j < d_; ++j) z(j) = normal_(rng_);
    return z;
  }

  void initialise(const Eigen::VectorXd& center) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      Eigen::VectorXd x = center + cfg_.init_scale * std_normal();
      const double lp = f_(x);
      if (std::isfinite(lp)) {
        x_ = x;
        lp_ = lp;
        if (cfg_.kind == SamplerKind::mala) grad_ = gradient(x_);
        return;
      }
    }
    throw Error(ErrorKind::NonFiniteTarget, "could not find a finite starting point in 100 attempts");
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g(d_);
    Eigen::VectorXd b = x;
    for (Eigen::Index j = 0; j < d_; ++j) {
      const double h = 1e-6 * (1.0 + std::fabs(x(j)));
      b(j) = x(j) + h;
      const double up = f_(b);
      b(j) = x(j) - h;
      const double down = f_(b);
      b(j) = x(j);
      g(j) = (up - down) / (2.0 * h);
    }
    return g;
  }

  // One Metropolis-Hastings transition; returns the acceptance probability.
  double step() {
    const double eps = std::exp(log_scale_);
    last_accepted_ = false;
    Eigen::VectorXd y;
    double log_ratio = 0.0;
    Eigen::VectorXd grad_y;
    if (cfg_.kind == SamplerKind::random_walk) {
      y = x_ + eps * (chol_ * std_normal());
    } else {
      const Eigen::VectorXd mean_x = x_ + 0.5 * eps * eps * (cov_ * grad_);
      y = mean_x + eps * (chol_ * std_normal());
    }
    const double lp_y = f_(y);
    if (!std::isfinite(lp_y)) return 0.0;
    log_ratio = lp_y - lp_;
    if (cfg_.kind == SamplerKind::mala) {
      grad_y = gradient(y);
      if (!grad_y.allFinite()) return 0.0;
      auto log_q = [&](const Eigen::VectorXd& to, const Eigen::VectorXd& from, const Eigen::VectorXd& g_from) {
        const Eigen::VectorXd diff = to - from - 0.5 * eps * eps * (cov_ * g_from);
        const Eigen::VectorXd w = chol_.triangularView<Eigen::Lower>().solve(diff);
        return -w.squaredNorm() / (2.0 * eps * eps);
      };
      log_ratio += log_q(x_, y, grad_y) - log_q(y, x_, grad_);
    }
    const double alpha = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
    if (uniform_(rng_) < alpha) {
      x_ = y;
      lp_ = lp_y;
      if (cfg_.kind == SamplerKind::mala) grad_ = grad_y;
      last_accepted_ = true;
    }
    return alpha;
  }

  const LogDensity& f_;
  const SamplerConfig& cfg_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  Eigen::Index d_;
  Eigen::MatrixXd cov_, chol_;
  Eigen::VectorXd x_, grad_;
  double lp_ = 0.0;
  double log_scale_ = 0.0;
  long adapt_count_ = 0;
  bool last_accepted_ = false;
};

}  // namespace

PosteriorDraws sample_density(const LogDensity& log_density, const Eigen::VectorXd& center,
                              const Eigen::MatrixXd& init_cov, std::vector<std::string> names,
                              const SamplerConfig& config) {
  config.validate();
  const auto d = center.size();
  if (init_cov.rows() != d || init_cov.cols() != d || static_cast<Eigen::Index>(names.size()) != d) {
    throw Error(ErrorKind::DimensionMismatch, "sample_density: center, covariance and names disagree");
  }
  Eigen::LLT<Eigen::MatrixXd> check(init_cov);
  if (check.info() != Eigen::Success) {
    throw Error(ErrorKind::InvalidSpec, "sample_density: initial proposal covariance is not positive definite");
  }

  std::vector<ChainResult> results(config.chains);
  std::vector<std::exception_ptr> errors(config.chains);
  auto run_chain = [&](int c) {
    try {
      Chain chain(log_density, config, derive_seed(config.seed, static_cast<std::uint64_t>(c)), init_cov);
      results[c] = chain.run(center);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (config.parallel_chains) {
    std::vector<std::thread> workers;
    for (int c = 0; c < config.chains; ++c) workers.emplace_back(run_chain, c);
    for (auto& w : workers) w.join();
  } else {
    for (int c = 0; c < config.chains; ++c) run_chain(c);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  PosteriorDraws draws;
  draws.parameter_names = std::move(names);
  draws.acceptance_rate.resize(config.chains);
  for (int c = 0; c < config.chains; ++c) {
    draws.chains.push_back(std::move(results[c].draws));
    draws.acceptance_rate(c) = results[c].acceptance;
  }
  diagnose(draws);
  return draws;
}

PosteriorDraws sample(const GmmState& state, const DesignMatrix& design, const Eigen::VectorXd& y,
                      const SamplerConfig& config) {
  const GeeFit start = gee_fit(design, y);
  GmmTarget target(design, y, state);
  Eigen::MatrixXd init_cov = start.sandwich_cov;
  Eigen::LLT<Eigen::MatrixXd> llt(init_cov);
  if (llt.info() != Eigen::Success) {
    init_cov = Eigen::MatrixXd::Identity(design.cols(), design.cols()) * config.init_scale * config.init_scale;
  }
  LogDensity f = [&target](const Eigen::VectorXd& b) { return target(b); };
  PosteriorDraws draws = sample_density(f, start.beta_hat, init_cov, design.column_names, config);
  draws.ridge_activations = target.ridge_activations();
  return draws;
}

}  // namespace rmst
