#pragma once

#include <functional>
#include <vector>

#include "sbd/operators.hpp"
#include "sbd/samplers.hpp"

namespace sbd {

enum class DesignMode { kPixelMask, kKspaceLineMask, kFreeRows };

/// Evolving measurement plan: an ordered list of selected candidate ids (mask
/// modes) or designed rows (free mode) under a selection budget.
struct SensingDesign {
  DesignMode mode = DesignMode::kKspaceLineMask;
  std::vector<int> selected;
  std::vector<Vec> rows;  // free mode
  int budget = 0;

  void add(int id);
};

/// Remaining admissible measurements. Each candidate id owns the set of
/// full-grid complex-coefficient indices it would acquire (a single index in
/// pixel mode, a full line in k-space-line mode).
struct CandidateSet {
  std::vector<int> ids;
  std::vector<std::vector<int>> coeff_groups;

  int size() const { return static_cast<int>(ids.size()); }
  void remove(int id);
};

/// Highest measurement-domain posterior variance: pushes every ensemble
/// sample through the full operator and returns the candidate with the
/// largest summed per-coordinate sample variance. Ties break to the lowest id.
int gas_select(const PosteriorEnsemble& ensemble, const LinearOperator& full_op,
               const CandidateSet& candidates);

/// Entropy of the N_s-component isotropic GMM built from the samples,
/// estimated with the pairwise-kernel approximation
///   H ~= -(1/N) sum_i log[(1/N) sum_j N(mu_i; mu_j, sigma^2 I)] + d/2,
/// which is exact for a single component and for coincident means.
double pairwise_gmm_entropy(const std::vector<Vec>& samples, double sigma);

/// Maximum-entropy selection over per-candidate measurement marginals.
int entropy_select(const PosteriorEnsemble& ensemble, const LinearOperator& full_op,
                   const CandidateSet& candidates, double sigma);

/// Free-design sensing rows: the top-r unit-norm eigenvectors of the ensemble
/// sample covariance, optionally orthogonalized against existing rows.
std::vector<Vec> adasense_free(const PosteriorEnsemble& ensemble, int r,
                               const std::vector<Vec>& existing_rows = {});

/// Constrained design: argmax over candidates of the projection energy
/// E ||A^dagger A (x - mean)||-type objective; for orthonormal-row masks this
/// is the mean squared magnitude of the candidate's centered coefficients.
int adasense_constrained(const PosteriorEnsemble& ensemble, const LinearOperator& full_op,
                         const CandidateSet& candidates);

enum class SelectionRule { kGas, kEntropy };

/// Measurement-augmentation interface for single-trajectory active sampling.
struct AdsProblem {
  int n_coeff = 0;                     // complex coefficients in the full grid
  std::vector<std::uint8_t> mask0;     // initial acquisition mask
  Vec y0;                              // measurements for mask0 (masked layout)
  LinearOperator full_op = LinearOperator::identity(0);
  std::function<LinearOperator(const std::vector<std::uint8_t>&)> make_op;
  /// Returns [re...; im...] measured values for the given coefficient indices.
  std::function<Vec(const std::vector<int>&)> acquire;
  std::shared_ptr<const ScorePrior> prior;
  CandidateSet candidates;
  double entropy_sigma = 0.1;
};

struct AdsResult {
  PosteriorEnsemble ensemble;
  SensingDesign design;
  std::vector<int> checkpoint_steps;
  int checkpoint_adjustments = 0;
};

/// K active sampling steps inside a single reverse diffusion of T steps: at
/// each checkpoint the freshly computed Tweedie ensemble picks the next
/// measurement, y and the mask are augmented, and the trajectory continues
/// without re-noising. Total prior score evaluations stay at N_s * T.
AdsResult ads_run(const AdsProblem& problem, const GuidanceConfig& guidance,
                  const TrajectoryConfig& traj, int num_chains, const NoiseSchedule& schedule,
                  int active_steps, SelectionRule rule,
                  double checkpoint_head_fraction = 0.2);

}  // namespace sbd
