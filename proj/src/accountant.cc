// Copyright 2026 The dpsynth Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpsynth/accountant.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>

#include "dpsynth/error.h"
#include "json.hpp"

namespace dpsynth {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Standard normal lower and upper tails.
double Phi(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double UpperPhi(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

// Phi(zb) - Phi(za) for za <= zb, evaluated on the tail side that avoids
// cancellation.
double PhiDiff(double za, double zb) {
  if (za >= 0.0) return UpperPhi(za) - UpperPhi(zb);
  if (zb <= 0.0) return Phi(zb) - Phi(za);
  return 1.0 - Phi(za) - UpperPhi(zb);
}

struct NormalMixture {
  std::vector<std::pair<double, double>> components;  // (weight, mean)
  double sigma;

  double Between(double a, double b) const {
    if (!(a < b)) return 0.0;
    double p = 0.0;
    for (auto [w, m] : components) p += w * PhiDiff((a - m) / sigma, (b - m) / sigma);
    return p;
  }
};

// log(1 - q + q e^u)
double LogMix(double u, double q) {
  if (q == 1.0) return u;
  if (u > 0.0) return u + std::log(q + (1.0 - q) * std::exp(-u));
  return std::log1p(q * std::expm1(u));
}

// Inverse of LogMix; -inf below the infimum log(1 - q).
double InverseLogMix(double v, double q) {
  if (q == 1.0) return v;
  double a = std::expm1(v) + q;
  if (a <= 0.0) return -kInf;
  return std::log(a) - std::log(q);
}

// z with P(|Z| > z) <= tail_mass.
double TailQuantile(double tail_mass) {
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (2.0 * UpperPhi(mid) > tail_mass) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

// Pessimistic discretization of L(X) where X ~ P. For the remove direction
// P = (1-q) N(0, s^2) + q N(D, s^2) and L = LogMix(u(x)); for add,
// P = N(0, s^2) and L = -LogMix(u(x)); u(x) = (2xD - D^2) / (2 s^2).
LossPmf DiscretizeSubsampledGaussian(Adjacency direction, double sigma,
                                     double sensitivity, double q,
                                     const PldGrid& grid) {
  const double h = grid.spacing;
  const double s2 = sigma * sigma;
  const double d = sensitivity;
  NormalMixture mix{{}, sigma};
  if (direction == Adjacency::kRemove) {
    if (q < 1.0) mix.components.emplace_back(1.0 - q, 0.0);
    mix.components.emplace_back(q, d);
  } else {
    mix.components.emplace_back(1.0, 0.0);
  }
  auto u_of_x = [&](double x) { return (2.0 * x * d - d * d) / (2.0 * s2); };
  auto x_of_u = [&](double u) { return u * s2 / d + d / 2.0; };
  const double sign = direction == Adjacency::kRemove ? 1.0 : -1.0;
  auto loss = [&](double x) { return sign * LogMix(u_of_x(x), q); };
  // x at which the loss crosses v (monotone, may be -inf).
  auto edge = [&](double v) { return x_of_u(InverseLogMix(sign * v, q)); };

  double z = TailQuantile(grid.tail_mass);
  double x_lo = -z * sigma;
  double x_hi = (direction == Adjacency::kRemove ? d : 0.0) + z * sigma;

  LossPmf pmf;
  pmf.direction = direction;
  pmf.spacing = h;
  if (direction == Adjacency::kRemove) {
    // Loss increases with x.
    auto i_lo = static_cast<int64_t>(std::ceil(loss(x_lo) / h));
    auto i_hi = static_cast<int64_t>(std::ceil(loss(x_hi) / h));
    i_hi = std::max(i_hi, i_lo);
    pmf.offset = i_lo;
    pmf.masses.resize(static_cast<size_t>(i_hi - i_lo + 1));
    double prev = edge(static_cast<double>(i_lo) * h);
    pmf.masses[0] = mix.Between(-kInf, prev);
    for (int64_t i = i_lo + 1; i <= i_hi; ++i) {
      double next = edge(static_cast<double>(i) * h);
      pmf.masses[static_cast<size_t>(i - i_lo)] = mix.Between(prev, next);
      prev = next;
    }
    pmf.infinity_mass = mix.Between(prev, kInf);
  } else {
    // Loss decreases with x.
    auto i_lo = static_cast<int64_t>(std::ceil(loss(x_hi) / h));
    auto i_hi = static_cast<int64_t>(std::ceil(loss(x_lo) / h));
    i_hi = std::max(i_hi, i_lo);
    pmf.offset = i_lo;
    pmf.masses.resize(static_cast<size_t>(i_hi - i_lo + 1));
    double prev = edge(static_cast<double>(i_lo) * h);
    pmf.masses[0] = mix.Between(prev, kInf);
    for (int64_t i = i_lo + 1; i <= i_hi; ++i) {
      double next = edge(static_cast<double>(i) * h);
      pmf.masses[static_cast<size_t>(i - i_lo)] = mix.Between(next, prev);
      prev = next;
    }
    pmf.infinity_mass = mix.Between(-kInf, prev);
  }
  return pmf;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

std::mutex& PlannerMutex() {
  static std::mutex m;
  return m;
}

size_t FftSize(size_t n) {
  size_t size = 1;
  while (size < n) size <<= 1;
  return size;
}

std::vector<double> FftConvolve(std::span<const double> a,
                                std::span<const double> b) {
  const size_t out_size = a.size() + b.size() - 1;
  const size_t n = FftSize(out_size);
  const size_t nc = n / 2 + 1;
  std::unique_ptr<double, FftwFree> real(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, FftwFree> fa(fftw_alloc_complex(nc));
  std::unique_ptr<fftw_complex, FftwFree> fb(fftw_alloc_complex(nc));
  fftw_plan forward_a, forward_b, backward;
  {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    forward_a = fftw_plan_dft_r2c_1d(static_cast<int>(n), real.get(), fa.get(),
                                     FFTW_ESTIMATE);
    forward_b = fftw_plan_dft_r2c_1d(static_cast<int>(n), real.get(), fb.get(),
                                     FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(static_cast<int>(n), fa.get(), real.get(),
                                    FFTW_ESTIMATE);
  }
  double* r = real.get();
  std::fill(r, r + n, 0.0);
  std::copy(a.begin(), a.end(), r);
  fftw_execute(forward_a);
  std::fill(r, r + n, 0.0);
  std::copy(b.begin(), b.end(), r);
  fftw_execute(forward_b);
  for (size_t i = 0; i < nc; ++i) {
    double re = fa.get()[i][0] * fb.get()[i][0] - fa.get()[i][1] * fb.get()[i][1];
    double im = fa.get()[i][0] * fb.get()[i][1] + fa.get()[i][1] * fb.get()[i][0];
    fa.get()[i][0] = re;
    fa.get()[i][1] = im;
  }
  fftw_execute(backward);
  std::vector<double> out(r, r + out_size);
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= scale;
  {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    fftw_destroy_plan(forward_a);
    fftw_destroy_plan(forward_b);
    fftw_destroy_plan(backward);
  }
  return out;
}

std::vector<double> DirectConvolve(std::span<const double> a,
                                   std::span<const double> b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

void TruncateTails(LossPmf& pmf, double tail_mass) {
  auto& m = pmf.masses;
  for (double& v : m) v = std::max(v, 0.0);
  size_t lo = 0;
  double cumulative = 0.0;
  while (lo + 1 < m.size() && cumulative + m[lo] <= tail_mass) {
    cumulative += m[lo];
    ++lo;
  }
  if (lo > 0) {
    m[lo] += cumulative;
    m.erase(m.begin(), m.begin() + static_cast<ptrdiff_t>(lo));
    pmf.offset += static_cast<int64_t>(lo);
  }
  size_t hi = m.size();
  cumulative = 0.0;
  while (hi > 1 && cumulative + m[hi - 1] <= tail_mass) {
    cumulative += m[hi - 1];
    --hi;
  }
  pmf.infinity_mass += cumulative;
  m.resize(hi);
}

LossPmf ComposePmf(const LossPmf& a, const LossPmf& b, double tail_mass) {
  LossPmf out;
  out.direction = a.direction;
  out.spacing = a.spacing;
  out.offset = a.offset + b.offset;
  const double work = static_cast<double>(a.masses.size()) *
                      static_cast<double>(b.masses.size());
  out.masses = work <= 4e6 ? DirectConvolve(a.masses, b.masses)
                           : FftConvolve(a.masses, b.masses);
  out.infinity_mass = a.infinity_mass + b.infinity_mass -
                      a.infinity_mass * b.infinity_mass;
  TruncateTails(out, tail_mass);
  return out;
}

void CheckError(double error_bound, const PldGrid& grid) {
  if (error_bound > grid.max_error) {
    throw Error(ErrorCode::kRefinement,
                "epsilon error bound " + std::to_string(error_bound) +
                    " exceeds tolerance " + std::to_string(grid.max_error) +
                    "; use a finer grid spacing");
  }
}

void CheckGrid(const PldGrid& grid) {
  if (!(grid.spacing > 0.0) || !(grid.tail_mass >= 0.0) ||
      !(grid.tail_mass < 1e-3)) {
    throw Error(ErrorCode::kInvalidArgument,
                "grid spacing must be > 0 and tail mass in [0, 1e-3)");
  }
  CheckError(grid.spacing, grid);
}

}  // namespace

double LossPmf::TotalMass() const {
  double total = infinity_mass;
  for (double m : masses) total += m;
  return total;
}

PrivacyLossDistribution::PrivacyLossDistribution(LossPmf remove, LossPmf add,
                                                 PldGrid grid,
                                                 double error_bound)
    : remove_(std::move(remove)), add_(std::move(add)), grid_(grid),
      error_bound_(error_bound) {}

PrivacyLossDistribution PrivacyLossDistribution::Identity(const PldGrid& grid) {
  LossPmf remove{Adjacency::kRemove, grid.spacing, 0, {1.0}, 0.0};
  LossPmf add{Adjacency::kAdd, grid.spacing, 0, {1.0}, 0.0};
  return PrivacyLossDistribution(remove, add, grid, 0.0);
}

PrivacyLossDistribution PldGaussian(double sigma, double sensitivity,
                                    const PldGrid& grid) {
  if (!(sigma > 0.0) || !(sensitivity > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "Gaussian PLD needs sigma > 0 and sensitivity > 0");
  }
  CheckGrid(grid);
  return PrivacyLossDistribution(
      DiscretizeSubsampledGaussian(Adjacency::kRemove, sigma, sensitivity, 1.0, grid),
      DiscretizeSubsampledGaussian(Adjacency::kAdd, sigma, sensitivity, 1.0, grid),
      grid, grid.spacing);
}

PrivacyLossDistribution PldSubsampledGaussian(double sigma, double q,
                                              const PldGrid& grid) {
  if (!(sigma > 0.0) || !(q > 0.0) || !(q <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "subsampled Gaussian PLD needs sigma > 0 and 0 < q <= 1");
  }
  CheckGrid(grid);
  return PrivacyLossDistribution(
      DiscretizeSubsampledGaussian(Adjacency::kRemove, sigma, 1.0, q, grid),
      DiscretizeSubsampledGaussian(Adjacency::kAdd, sigma, 1.0, q, grid), grid,
      grid.spacing);
}

PrivacyLossDistribution Compose(const PrivacyLossDistribution& a,
                                const PrivacyLossDistribution& b) {
  if (a.spacing() != b.spacing()) {
    throw Error(ErrorCode::kInvalidArgument,
                "cannot compose PLDs with different grid spacing");
  }
  PldGrid grid = a.grid();
  grid.tail_mass = std::max(a.grid().tail_mass, b.grid().tail_mass);
  grid.max_error = std::min(a.grid().max_error, b.grid().max_error);
  double error_bound = a.error_bound() + b.error_bound();
  CheckError(error_bound, grid);
  return PrivacyLossDistribution(
      ComposePmf(a.remove(), b.remove(), grid.tail_mass),
      ComposePmf(a.add(), b.add(), grid.tail_mass), grid, error_bound);
}

PrivacyLossDistribution SelfCompose(const PrivacyLossDistribution& pld,
                                    uint64_t times) {
  if (times == 0) return PrivacyLossDistribution::Identity(pld.grid());
  std::optional<PrivacyLossDistribution> result;
  PrivacyLossDistribution base = pld;
  while (times > 0) {
    if (times & 1) result = result ? Compose(*result, base) : base;
    times >>= 1;
    if (times > 0) base = Compose(base, base);
  }
  return *result;
}

PrivacyLossDistribution Compose(
    std::span<const std::pair<PrivacyLossDistribution, uint64_t>> parts) {
  if (parts.empty()) return PrivacyLossDistribution::Identity();
  std::optional<PrivacyLossDistribution> result;
  for (const auto& [pld, times] : parts) {
    PrivacyLossDistribution composed = SelfCompose(pld, times);
    result = result ? Compose(*result, composed) : composed;
  }
  return *result;
}

double DeltaForEpsilon(const LossPmf& pmf, double epsilon) {
  double delta = pmf.infinity_mass;
  for (size_t k = 0; k < pmf.masses.size(); ++k) {
    double v = pmf.loss(k);
    if (v > epsilon) delta += pmf.masses[k] * -std::expm1(epsilon - v);
  }
  return delta;
}

double EpsilonAt(const LossPmf& pmf, double delta) {
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "delta must lie in (0, 1)");
  }
  if (delta <= pmf.infinity_mass) {
    throw Error(ErrorCode::kUnboundedEpsilon,
                "delta is not above the infinite-loss mass; epsilon unbounded");
  }
  // On [v_{k-1}, v_k): delta(eps) = inf + S1 - e^eps * S2 with the sums
  // over atoms k and above. Walk down until the target is crossed.
  double s1 = 0.0, s2 = 0.0;
  for (size_t k = pmf.masses.size(); k-- > 0;) {
    double v = pmf.loss(k);
    s1 += pmf.masses[k];
    s2 += pmf.masses[k] * std::exp(-v);
    double lower = k > 0 ? pmf.loss(k - 1) : -kInf;
    double at_lower = pmf.infinity_mass + s1 - std::exp(lower) * s2;
    if (at_lower > delta) {
      double eps = std::log((pmf.infinity_mass + s1 - delta) / s2);
      return std::max(0.0, std::clamp(eps, lower, v));
    }
  }
  return 0.0;
}

double EpsilonAt(const PrivacyLossDistribution& pld, double delta) {
  return std::max(EpsilonAt(pld.remove(), delta), EpsilonAt(pld.add(), delta));
}

PrivacyLossDistribution MechanismPld(const MechanismSpec& spec,
                                     const PldGrid& grid) {
  if (spec.repetitions == 0) {
    throw Error(ErrorCode::kInvalidArgument, "repetitions must be >= 1");
  }
  PrivacyLossDistribution single = PrivacyLossDistribution::Identity(grid);
  switch (spec.kind) {
    case MechanismSpec::Kind::kGaussian:
      single = PldGaussian(spec.sigma, spec.sensitivity, grid);
      break;
    case MechanismSpec::Kind::kSubsampledGaussian:
      if (spec.q < 0.0 || spec.q > 1.0) {
        throw Error(ErrorCode::kInvalidArgument, "q must lie in [0, 1]");
      }
      if (spec.q == 0.0) return PrivacyLossDistribution::Identity(grid);
      single = PldSubsampledGaussian(spec.sigma, spec.q, grid);
      break;
  }
  return SelfCompose(single, spec.repetitions);
}

BudgetReport AccountBudget(std::span<const MechanismSpec> mechanisms,
                           double delta, const PldGrid& grid) {
  BudgetReport report;
  report.delta = delta;
  std::optional<PrivacyLossDistribution> total;
  for (const MechanismSpec& spec : mechanisms) {
    PrivacyLossDistribution pld = MechanismPld(spec, grid);
    report.breakdown.push_back({spec.label, spec, EpsilonAt(pld, delta)});
    total = total ? Compose(*total, pld) : pld;
  }
  if (!total) total = PrivacyLossDistribution::Identity(grid);
  report.epsilon = EpsilonAt(*total, delta);
  report.epsilon_error_bound = total->error_bound();
  return report;
}

std::string SerializeBudgetReport(const BudgetReport& report) {
  nlohmann::json j;
  j["epsilon"] = report.epsilon;
  j["delta"] = report.delta;
  j["epsilon_error_bound"] = report.epsilon_error_bound;
  j["mechanisms"] = nlohmann::json::array();
  for (const auto& part : report.breakdown) {
    nlohmann::json m;
    m["label"] = part.label;
    m["kind"] = part.spec.kind == MechanismSpec::Kind::kGaussian
                    ? "gaussian"
                    : "subsampled_gaussian";
    m["sigma"] = part.spec.sigma;
    if (part.spec.kind == MechanismSpec::Kind::kGaussian) {
      m["sensitivity"] = part.spec.sensitivity;
    } else {
      m["q"] = part.spec.q;
    }
    m["repetitions"] = part.spec.repetitions;
    m["epsilon"] = part.epsilon;
    j["mechanisms"].push_back(m);
  }
  return j.dump(2) + "\n";
}

uint64_t TrainingSteps(uint64_t epochs, uint64_t n, uint64_t batch_size) {
  if (batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch size 0");
  return epochs * ((n + batch_size - 1) / batch_size);
}

double CalibrateSigma(double target_epsilon, double delta, double q,
                      uint64_t steps, const CalibrationOptions& options) {
  if (!(target_epsilon > 0.0) || !(delta > 0.0) || !(delta < 1.0) ||
      !(q > 0.0) || !(q <= 1.0) || steps == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "calibration needs epsilon > 0, delta in (0,1), q in (0,1], "
                "steps >= 1");
  }
  auto epsilon_of = [&](double sigma) {
    try {
      return EpsilonAt(
          SelfCompose(PldSubsampledGaussian(sigma, q, options.grid), steps),
          delta);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kUnboundedEpsilon) return kInf;
      throw;
    }
  };
  double lo = options.sigma_lo, hi = options.sigma_hi;
  double eps_lo = epsilon_of(lo);
  while (eps_lo < target_epsilon && lo > options.sigma_min) {
    hi = lo;
    lo = std::max(options.sigma_min, lo / 2.0);
    eps_lo = epsilon_of(lo);
  }
  double eps_hi = epsilon_of(hi);
  while (eps_hi > target_epsilon && hi < options.sigma_max) {
    lo = hi;
    eps_lo = eps_hi;
    hi = std::min(options.sigma_max, hi * 2.0);
    eps_hi = epsilon_of(hi);
  }
  if (!(eps_lo >= target_epsilon && eps_hi <= target_epsilon)) {
    throw Error(ErrorCode::kCalibration,
                "cannot bracket target epsilon " + std::to_string(target_epsilon) +
                    " with sigma in [" + std::to_string(options.sigma_min) +
                    ", " + std::to_string(options.sigma_max) + "]");
  }
  const double tol = options.rel_tol * target_epsilon;
  if (std::abs(eps_lo - target_epsilon) < tol) return lo;
  if (std::abs(eps_hi - target_epsilon) < tol) return hi;
  for (size_t iter = 0; iter < options.max_iters; ++iter) {
    double mid = std::sqrt(lo * hi);
    double eps = epsilon_of(mid);
    if (std::abs(eps - target_epsilon) < tol) return mid;
    if (eps > target_epsilon) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw Error(ErrorCode::kCalibration, "calibration did not converge");
}

}  // namespace dpsynth
