#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vbphylo/branch_model.hpp"
#include "vbphylo/sbn.hpp"
#include "vbphylo/substitution.hpp"
#include "vbphylo/timetree.hpp"

namespace vbphylo {

enum class PhiEstimator { kVimco, kRws };

struct TrainConfig {
  int k = 10;
  PhiEstimator estimator = PhiEstimator::kVimco;
  long iters = 200000;
  double step_size = 0.001;
  long anneal_period = 100000;
  uint64_t seed = 0;
  bool psp = false;
  int trace_stride = 100;
  int threads = 1;
  double clip_norm = 0.0;  // 0 disables gradient clipping
};

// --- Objective pieces ---

// Stable log-mean-exp of the per-sample log importance ratios; K=1 gives the
// single-sample ELBO.
double multi_sample_elbo(std::span<const double> log_f);

// Normalized importance weights exp(log_f) / sum.
std::vector<double> normalized_importance_weights(std::span<const double> log_f);

// VIMCO per-sample coefficients (local learning signal minus weight). The
// leave-one-out surrogate is the geometric mean of the other samples,
// computed in log space. Needs K >= 2.
std::vector<double> vimco_coefficients(std::span<const double> log_f);

// min(1, 0.001 + t / period)
double anneal_beta(long t, long period);

// Runs fn(0..n-1), across `threads` workers when threads > 1. Each index
// writes only its own slot, so results are identical to the serial order.
void parallel_indexed(int n, int threads, const std::function<void(int)>& fn);

// --- Adam (ascent) ---

class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  explicit AdamOptimizer(size_t dim) : m_(dim, 0.0), v_(dim, 0.0) {}

  // Bias-corrected first/second moment update; returns the increment to add
  // to the parameters (ascent direction).
  std::vector<double> step(std::span<const double> grad, double step_size);

  long step_count() const { return t_; }

 private:
  std::vector<double> m_, v_;
  long t_ = 0;
};

// --- Model bundles ---

struct UnrootedModel {
  std::shared_ptr<const SubsplitSupport> support;
  SbnModel sbn;
  BranchModel branch;
  double branch_prior_rate = 10.0;

  UnrootedModel(std::shared_ptr<const SubsplitSupport> s, bool psp)
      : support(std::move(s)), sbn(support.get()), branch(support.get(), psp) {}
};

struct TimeTreeModel {
  std::shared_ptr<const SubsplitSupport> support;
  SbnModel sbn;
  HeightModel heights;
  CoalescentConfig coalescent;
  std::vector<double> gamma_mu, gamma_log_sigma;  // mean-field factor over gamma
  bool rate_fixed = false;
  double fixed_rate = 1.0;
  double rate_mu = std::log(1e-3);  // lognormal variational factor over the rate
  double rate_log_sigma = std::log(0.1);
  double rate_prior_mu = std::log(1e-3);  // lognormal prior on the rate
  double rate_prior_sigma = 1.5;
  SamplingTimes times;

  TimeTreeModel(std::shared_ptr<const SubsplitSupport> s, bool psp, CoalescentConfig coal,
                SamplingTimes sampling_times)
      : support(std::move(s)),
        sbn(support.get()),
        heights(support.get(), psp),
        coalescent(std::move(coal)),
        times(std::move(sampling_times)) {
    const int n_gamma = coalescent.n_gamma(support->taxa().size());
    gamma_mu.assign(n_gamma, 0.0);
    gamma_log_sigma.assign(n_gamma, std::log(0.5));
    if (coalescent.kind == CoalescentKind::kSkyride && coalescent.skyride_delta.empty()) {
      coalescent.skyride_delta.assign(n_gamma - 1, 1.0);
    }
  }
};

// --- Per-draw evaluation (shared with the estimators) ---

struct UnrootedDraw {
  UnrootedTopology tree;
  BranchModel::TreeKeys keys;
  BranchModel::Sample branches;
  double log_likelihood = 0.0;        // un-annealed
  std::vector<double> d_loglik_dq;    // by edge id
  double log_q_topology = 0.0;
  double log_prior = 0.0;             // branch prior + uniform topology prior
  double log_f = 0.0;                 // annealed importance ratio
};

// Evaluates likelihood, gradients and densities for a sampled (tree, q);
// with_gradients controls whether the branch-derivative sweep runs.
UnrootedDraw evaluate_unrooted_draw(const UnrootedModel& model, UnrootedTopology tree,
                                    BranchModel::Sample branches,
                                    const PatternTable& patterns, const SubstModel& subst,
                                    double beta, bool with_gradients);

struct TimeTreeDraw {
  RootedTopology tree;
  HeightModel::TreeKeys keys;
  HeightModel::Sample alpha;
  HeightTransformResult transform;
  std::vector<double> bounds;
  std::vector<double> gamma, gamma_eps;
  double rate = 1.0, rate_eps = 0.0;
  std::vector<double> branch_lengths;  // by child node id
  double log_likelihood = 0.0;
  std::vector<double> d_loglik_dq;  // by child node id
  double log_coalescent = 0.0;
  double log_prior_gamma = 0.0;
  double log_prior_rate = 0.0;   // 0 when fixed
  double log_q_topology = 0.0;
  double log_q_continuous = 0.0;  // alpha - jacobian + gamma + rate factors
  double log_f = 0.0;
};

TimeTreeDraw evaluate_timetree_draw(const TimeTreeModel& model, RootedTopology tree,
                                    HeightModel::Sample alpha, std::vector<double> gamma_eps,
                                    double rate_eps, const PatternTable& patterns,
                                    const SubstModel& subst, double beta, bool with_gradients);

struct TimeTreeContinuousGradient {
  HeightModel::Gradient heights;
  std::vector<double> gamma_mu, gamma_log_sigma;
  double rate_mu = 0.0, rate_log_sigma = 0.0;
};

// Pathwise d log_f / d(continuous variational parameters) for one draw,
// weighted by coeff: chain rule through the clock-scaled likelihood, the
// coalescent, the height transform and its Jacobian, plus the explicit
// entropy terms.
void add_timetree_continuous_gradient(const TimeTreeModel& model, const TimeTreeDraw& draw,
                                      double beta, double coeff,
                                      TimeTreeContinuousGradient& out);

// --- Training ---

struct TraceRow {
  long iter = 0;
  double beta = 0.0;
  double lower_bound = 0.0;
  double elapsed_s = 0.0;
};

struct TrainResult {
  std::vector<TraceRow> trace;
  long iters_run = 0;
  std::string rng_state;  // topology stream state at the end of training
};

// Algorithm: sample K (topology, continuous) draws, estimate phi gradients
// with VIMCO or RWS and continuous gradients by reparameterization, take an
// Adam ascent step; trace rows stream to trace_out when given. Aborts with a
// diagnostic if the bound turns non-finite.
TrainResult train_unrooted(UnrootedModel& model, const PatternTable& patterns,
                           const SubstModel& subst, const TrainConfig& config,
                           std::ostream* trace_out = nullptr);

TrainResult train_timetree(TimeTreeModel& model, const PatternTable& patterns,
                           const SubstModel& subst, const TrainConfig& config,
                           std::ostream* trace_out = nullptr);

}  // namespace vbphylo
