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

#ifndef DPSYNTH_ACCOUNTANT_H_
#define DPSYNTH_ACCOUNTANT_H_

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dpsynth {

enum class Adjacency { kRemove, kAdd };

struct PldGrid {
  // Privacy-loss values live on multiples of `spacing`.
  double spacing = 1e-4;
  // Mass dropped from each tail: the upper tail becomes infinity mass, the
  // lower tail is folded into the lowest kept atom.
  double tail_mass = 1e-15;
  // Largest tolerated epsilon error bound; exceeding it is a kRefinement
  // error asking for a finer grid.
  double max_error = std::numeric_limits<double>::infinity();
};

// Discrete privacy-loss random variable for one adjacency direction. Atom
// k has loss (offset + k) * spacing. Rounding is always toward larger loss
// so every epsilon read from it upper-bounds the continuous mechanism's.
struct LossPmf {
  Adjacency direction = Adjacency::kRemove;
  double spacing = 1e-4;
  int64_t offset = 0;
  std::vector<double> masses;
  double infinity_mass = 0.0;

  double loss(size_t k) const { return (offset + static_cast<int64_t>(k)) * spacing; }
  double TotalMass() const;
};

class PrivacyLossDistribution {
 public:
  // Loss 0 with probability one: the neutral element of composition.
  static PrivacyLossDistribution Identity(const PldGrid& grid = {});

  PrivacyLossDistribution(LossPmf remove, LossPmf add, PldGrid grid,
                          double error_bound);

  const LossPmf& remove() const { return remove_; }
  const LossPmf& add() const { return add_; }
  const PldGrid& grid() const { return grid_; }
  double spacing() const { return grid_.spacing; }
  // Upper bound on how much discretization inflates epsilon: one grid
  // spacing per composed mechanism.
  double error_bound() const { return error_bound_; }

 private:
  LossPmf remove_;
  LossPmf add_;
  PldGrid grid_;
  double error_bound_ = 0.0;
};

// Gaussian mechanism with noise std `sigma` and L2 sensitivity.
PrivacyLossDistribution PldGaussian(double sigma, double sensitivity,
                                    const PldGrid& grid = {});

// Poisson-subsampled Gaussian (sensitivity 1) with sampling rate q in (0, 1].
PrivacyLossDistribution PldSubsampledGaussian(double sigma, double q,
                                              const PldGrid& grid = {});

// Distribution of the summed losses. Grids must share spacing.
PrivacyLossDistribution Compose(
    std::span<const std::pair<PrivacyLossDistribution, uint64_t>> parts);
PrivacyLossDistribution Compose(const PrivacyLossDistribution& a,
                                const PrivacyLossDistribution& b);
// `times`-fold self-composition by repeated squaring.
PrivacyLossDistribution SelfCompose(const PrivacyLossDistribution& pld,
                                    uint64_t times);

// Hockey-stick divergence at `epsilon` for one direction.
double DeltaForEpsilon(const LossPmf& pmf, double epsilon);
// Smallest epsilon >= 0 with delta(epsilon) <= delta, maximized over both
// directions. Throws kUnboundedEpsilon when delta <= infinity mass.
double EpsilonAt(const PrivacyLossDistribution& pld, double delta);
double EpsilonAt(const LossPmf& pmf, double delta);

struct MechanismSpec {
  enum class Kind { kGaussian, kSubsampledGaussian };
  Kind kind = Kind::kGaussian;
  double sigma = 1.0;
  double sensitivity = 1.0;  // Gaussian only
  double q = 1.0;            // subsampled only
  uint64_t repetitions = 1;
  std::string label;
};

PrivacyLossDistribution MechanismPld(const MechanismSpec& spec,
                                     const PldGrid& grid = {});

struct BudgetReport {
  double epsilon = 0.0;
  double delta = 0.0;
  double epsilon_error_bound = 0.0;
  struct Part {
    std::string label;
    MechanismSpec spec;
    double epsilon = 0.0;  // this mechanism alone at the same delta
  };
  std::vector<Part> breakdown;
};

BudgetReport AccountBudget(std::span<const MechanismSpec> mechanisms,
                           double delta, const PldGrid& grid = {});
std::string SerializeBudgetReport(const BudgetReport& report);

// Training steps for `epochs` passes over n records in batches of b.
uint64_t TrainingSteps(uint64_t epochs, uint64_t n, uint64_t batch_size);

struct CalibrationOptions {
  double sigma_lo = 0.5;
  double sigma_hi = 2.0;
  double sigma_min = 0.05;
  double sigma_max = 1e4;
  double rel_tol = 1e-3;
  size_t max_iters = 100;
  PldGrid grid;
};

// Noise multiplier of a subsampled Gaussian run (rate q, `steps` steps)
// whose epsilon at `delta` is within rel_tol of `target_epsilon`. The
// bracket is widened geometrically up to [sigma_min, sigma_max]; if that
// still fails to bracket the target, throws kCalibration.
double CalibrateSigma(double target_epsilon, double delta, double q,
                      uint64_t steps, const CalibrationOptions& options = {});

}  // namespace dpsynth

#endif  // DPSYNTH_ACCOUNTANT_H_
