// Heavy-tailed distribution fitting: closed-form MLEs, EM mixtures, BIC
// ranking, and the empirical CCDF.
#pragma once

#include "storyq/common.hpp"

#include <string>
#include <vector>

namespace storyq {

enum class DistFamily { pareto, exponential, lognormal, halfnormal, gaussian };

struct FitResult {
  std::string family;
  std::vector<double> params;
  double nll = 0.0;  // total negative log-likelihood over the data
  int n_params = 0;
  double bic = 0.0;
  bool ok = false;
  std::string error;
  std::vector<double> nll_trace;  // per-iteration NLL for EM fits
};

struct MixtureSpec {
  enum class Kind { pareto_exponential, gaussians };
  Kind kind = Kind::gaussians;
  int n_components = 1;  // gaussians only; pareto_exponential is always 2
};

// Closed-form MLE. Pareto (x_m = 1) and log-normal are fitted on data + 1;
// the other families on the raw values. Throws FitError when a scale
// parameter degenerates to zero.
FitResult fit_mle(DistFamily family, const std::vector<double>& data);

// EM with responsibility-weighted closed-form M-steps. Component collapse
// (weight < 1e-10 or variance underflow) triggers a reseeded restart, up to
// the restart budget. Mixtures are fitted on unshifted counts.
FitResult fit_mixture_em(const MixtureSpec& spec, const std::vector<double>& data, int max_iters = 500,
                         double tol = 1e-8, uint64_t seed = 0, int restarts = 5);

// 2*nll + n_params*ln(n_obs)
double bic(double nll, int n_params, long n_obs);

// All seven fits (five MLE families plus the two mixtures), sorted by NLL
// ascending; failed families are flagged and placed last.
std::vector<FitResult> rank_fits(const std::vector<double>& data, uint64_t seed = 0);

// (value, P(X >= value)) at each distinct value, ascending.
std::vector<std::pair<double, double>> empirical_ccdf(const std::vector<double>& data);

}  // namespace storyq
