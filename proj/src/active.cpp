#include "sbd/active.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace sbd {

void SensingDesign::add(int id) {
  if (std::find(selected.begin(), selected.end(), id) != selected.end())
    throw std::domain_error("SensingDesign: duplicate selection " + std::to_string(id));
  if (budget > 0 && static_cast<int>(selected.size()) >= budget)
    throw std::domain_error("SensingDesign: selection budget exhausted");
  selected.push_back(id);
}

void CandidateSet::remove(int id) {
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) {
      ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(i));
      coeff_groups.erase(coeff_groups.begin() + static_cast<std::ptrdiff_t>(i));
      return;
    }
  }
  throw std::domain_error("CandidateSet: unknown id " + std::to_string(id));
}

namespace {

bool complex_codomain(const LinearOperator& op) {
  switch (op.kind()) {
    case LinearOperator::Kind::kDft:
    case LinearOperator::Kind::kAdjointDft:
    case LinearOperator::Kind::kMaskedDft:
      return true;
    default:
      return false;
  }
}

// Maps complex-coefficient indices to stacked [Re; Im] coordinates of the
// operator codomain (or passes real coordinates through unchanged).
std::vector<int> stacked_coords(const LinearOperator& op, const std::vector<int>& group) {
  if (!complex_codomain(op)) return group;
  const int m = op.codomain_dim() / 2;
  std::vector<int> coords;
  coords.reserve(2 * group.size());
  for (int j : group) {
    coords.push_back(j);
    coords.push_back(m + j);
  }
  return coords;
}

// Candidate visit order implementing the lowest-id tie break.
std::vector<int> ascending_id_order(const CandidateSet& candidates) {
  std::vector<int> order(candidates.ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return candidates.ids[a] < candidates.ids[b]; });
  return order;
}

Mat push_samples(const PosteriorEnsemble& ensemble, const LinearOperator& full_op) {
  const int ns = ensemble.num_samples();
  Mat pushed(full_op.codomain_dim(), ns);
  for (int c = 0; c < ns; ++c) pushed.col(c) = full_op.apply(ensemble.samples.col(c));
  return pushed;
}

}  // namespace

int gas_select(const PosteriorEnsemble& ensemble, const LinearOperator& full_op,
               const CandidateSet& candidates) {
  if (candidates.size() == 0) throw std::domain_error("gas_select: empty candidate set");
  if (ensemble.num_samples() < 2) throw std::domain_error("gas_select: need at least two samples");
  const Mat pushed = push_samples(ensemble, full_op);
  const Vec mean = pushed.rowwise().mean();
  Vec var = Vec::Zero(pushed.rows());
  for (Eigen::Index c = 0; c < pushed.cols(); ++c) {
    const Vec d = pushed.col(c) - mean;
    var += d.cwiseProduct(d);
  }
  var /= static_cast<double>(pushed.cols() - 1);

  int best_id = -1;
  double best = -1.0;
  for (int k : ascending_id_order(candidates)) {
    double v = 0.0;
    for (int coord : stacked_coords(full_op, candidates.coeff_groups[k])) v += var[coord];
    if (v > best) {
      best = v;
      best_id = candidates.ids[k];
    }
  }
  return best_id;
}

double pairwise_gmm_entropy(const std::vector<Vec>& samples, double sigma) {
  if (samples.empty()) throw std::domain_error("pairwise_gmm_entropy: no samples");
  if (!(sigma > 0.0)) throw std::domain_error("pairwise_gmm_entropy: sigma must be positive");
  const int n = static_cast<int>(samples.size());
  const int d = static_cast<int>(samples[0].size());
  // Convolution kernel z_ij = N(mu_i; mu_j, 2 sigma^2 I) in log space. The
  // additive constant (d/2)(1 - ln 2) pins the single-component case to the
  // exact Gaussian entropy (d/2) log(2 pi e sigma^2); the fully separated
  // limit is then exact as well.
  const double var2 = 2.0 * sigma * sigma;
  const double log_norm = -0.5 * d * std::log(2.0 * std::numbers::pi * var2);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    Vec logk(n);
    for (int j = 0; j < n; ++j) {
      const double dist2 = (samples[i] - samples[j]).squaredNorm();
      logk[j] = log_norm - 0.5 * dist2 / var2;
      m = std::max(m, logk[j]);
    }
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += std::exp(logk[j] - m);
    acc += m + std::log(s / n);
  }
  return -acc / n + 0.5 * d * (1.0 - std::log(2.0));
}

int entropy_select(const PosteriorEnsemble& ensemble, const LinearOperator& full_op,
                   const CandidateSet& candidates, double sigma) {
  if (candidates.size() == 0) throw std::domain_error("entropy_select: empty candidate set");
  const Mat pushed = push_samples(ensemble, full_op);
  const int ns = ensemble.num_samples();

  int best_id = -1;
  double best = -std::numeric_limits<double>::infinity();
  for (int k : ascending_id_order(candidates)) {
    const std::vector<int> coords = stacked_coords(full_op, candidates.coeff_groups[k]);
    std::vector<Vec> sub(ns);
    for (int c = 0; c < ns; ++c) {
      Vec v(coords.size());
      for (size_t q = 0; q < coords.size(); ++q) v[static_cast<Eigen::Index>(q)] = pushed(coords[q], c);
      sub[c] = std::move(v);
    }
    const double h = pairwise_gmm_entropy(sub, sigma);
    if (h > best) {
      best = h;
      best_id = candidates.ids[k];
    }
  }
  return best_id;
}

std::vector<Vec> adasense_free(const PosteriorEnsemble& ensemble, int r,
                               const std::vector<Vec>& existing_rows) {
  const int ns = ensemble.num_samples();
  const int dim = static_cast<int>(ensemble.samples.rows());
  if (r < 1 || r > dim) throw std::domain_error("adasense_free: r out of range");
  if (ns <= r) throw std::domain_error("adasense_free: need more samples than rows requested");

  const Vec mean = ensemble.mean();
  Mat centered = ensemble.samples.colwise() - mean;
  const Mat cov = centered * centered.transpose() / static_cast<double>(ns - 1);
  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);

  std::vector<Vec> rows;
  for (int k = 0; k < r; ++k) {
    Vec v = eig.eigenvectors().col(dim - 1 - k);  // eigenvalues ascend in Eigen
    for (const Vec& row : existing_rows) v -= row.dot(v) * row / row.squaredNorm();
    for (const Vec& row : rows) v -= row.dot(v) * row;
    const double nrm = v.norm();
    if (nrm < 1e-12)
      throw std::domain_error("adasense_free: candidate row degenerate after orthogonalization");
    v /= nrm;
    // deterministic sign: largest-magnitude entry positive
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0.0) v = -v;
    rows.push_back(std::move(v));
  }
  return rows;
}

int adasense_constrained(const PosteriorEnsemble& ensemble, const LinearOperator& full_op,
                         const CandidateSet& candidates) {
  if (candidates.size() == 0) throw std::domain_error("adasense_constrained: empty candidate set");
  const Vec mean = ensemble.mean();
  const int ns = ensemble.num_samples();
  Mat centered(full_op.codomain_dim(), ns);
  for (int c = 0; c < ns; ++c)
    centered.col(c) = full_op.apply(Vec(ensemble.samples.col(c) - mean));

  int best_id = -1;
  double best = -1.0;
  for (int k : ascending_id_order(candidates)) {
    // Monte-Carlo projection energy: for orthonormal-row masks A^dagger A is
    // the projector onto the candidate's coefficients.
    double energy = 0.0;
    for (int coord : stacked_coords(full_op, candidates.coeff_groups[k]))
      energy += centered.row(coord).squaredNorm();
    energy /= ns;
    if (energy > best) {
      best = energy;
      best_id = candidates.ids[k];
    }
  }
  return best_id;
}

AdsResult ads_run(const AdsProblem& problem, const GuidanceConfig& guidance,
                  const TrajectoryConfig& traj, int num_chains, const NoiseSchedule& schedule,
                  int active_steps, SelectionRule rule, double checkpoint_head_fraction) {
  if (active_steps < 0 || active_steps > traj.num_steps)
    throw std::domain_error("ads_run: active_steps must lie in [0, num_steps]");
  if (active_steps > problem.candidates.size())
    throw std::domain_error("ads_run: more active steps than candidates");

  AdsResult result;
  result.design.mode = DesignMode::kKspaceLineMask;
  result.design.budget = active_steps;

  // checkpoints uniformly spaced in the last (1 - head) fraction of the grid
  std::vector<int> checkpoints;
  int prev = -1;
  for (int j = 0; j < active_steps; ++j) {
    const double raw =
        traj.num_steps * (checkpoint_head_fraction +
                          (1.0 - checkpoint_head_fraction) * (j + 0.5) / active_steps);
    int idx = std::clamp(static_cast<int>(std::llround(raw)), 0, traj.num_steps - 1);
    if (idx <= prev) {
      idx = prev + 1;
      ++result.checkpoint_adjustments;
    }
    if (idx >= traj.num_steps)
      throw std::domain_error("ads_run: checkpoint grid exhausted");
    checkpoints.push_back(idx);
    prev = idx;
  }
  result.checkpoint_steps = checkpoints;

  // observed full-grid measurement buffer (stacked complex layout)
  Vec y_full = Vec::Zero(2 * problem.n_coeff);
  std::vector<std::uint8_t> mask = problem.mask0;
  {
    int j = 0;
    const int m0 = [&] {
      int cnt = 0;
      for (auto b : mask)
        if (b) ++cnt;
      return cnt;
    }();
    for (int i = 0; i < problem.n_coeff; ++i) {
      if (!mask[i]) continue;
      y_full[i] = problem.y0[j];
      y_full[problem.n_coeff + i] = problem.y0[m0 + j];
      ++j;
    }
  }

  CandidateSet remaining = problem.candidates;
  size_t next_checkpoint = 0;

  detail::StepHook hook = [&](detail::StepContext& ctx) {
    if (next_checkpoint >= checkpoints.size() || ctx.step != checkpoints[next_checkpoint]) return;
    ++next_checkpoint;

    PosteriorEnsemble snapshot;
    snapshot.samples = ctx.x0_snapshot;
    snapshot.tau_of_snapshot = ctx.tau;
    snapshot.seed = traj.seed;

    int pick;
    if (rule == SelectionRule::kGas) {
      pick = gas_select(snapshot, problem.full_op, remaining);
    } else {
      const Mat pushed = [&] {
        Mat p(problem.full_op.codomain_dim(), snapshot.num_samples());
        for (int c = 0; c < snapshot.num_samples(); ++c)
          p.col(c) = problem.full_op.apply(snapshot.samples.col(c));
        return p;
      }();
      // sigma from the ensemble spread over candidate coordinates
      double var_acc = 0.0;
      int var_n = 0;
      const Vec mean = pushed.rowwise().mean();
      for (size_t k = 0; k < remaining.coeff_groups.size(); ++k) {
        for (int j : remaining.coeff_groups[k]) {
          for (int coord : {j, problem.n_coeff + j}) {
            double v = 0.0;
            for (Eigen::Index c = 0; c < pushed.cols(); ++c) {
              const double d = pushed(coord, c) - mean[coord];
              v += d * d;
            }
            var_acc += v / std::max(1, snapshot.num_samples() - 1);
            ++var_n;
          }
        }
      }
      const double sigma =
          std::max(problem.entropy_sigma * std::sqrt(var_acc / std::max(1, var_n)), 1e-9);
      pick = entropy_select(snapshot, problem.full_op, remaining, sigma);
    }

    // acquire the candidate's coefficients and augment mask + measurements
    const auto group_it = std::find(remaining.ids.begin(), remaining.ids.end(), pick);
    const std::vector<int> group =
        remaining.coeff_groups[static_cast<size_t>(group_it - remaining.ids.begin())];
    const Vec values = problem.acquire(group);
    for (size_t q = 0; q < group.size(); ++q) {
      y_full[group[q]] = values[static_cast<Eigen::Index>(q)];
      y_full[problem.n_coeff + group[q]] = values[static_cast<Eigen::Index>(group.size() + q)];
      mask[group[q]] = 1;
    }
    result.design.add(pick);
    remaining.remove(pick);

    ctx.model.op = problem.make_op(mask);
    ctx.y = extract_masked(y_full, mask);
  };

  MeasurementModel model(problem.make_op(mask), 0.0, true);
  result.ensemble = detail::run_dps_chains(problem.y0, model, problem.prior, guidance, traj,
                                           num_chains, schedule, schedule.horizon(),
                                           traj.num_steps, std::nullopt, 0, hook);
  return result;
}

}  // namespace sbd
