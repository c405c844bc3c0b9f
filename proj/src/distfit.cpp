#include "storyq/distfit.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace storyq {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void require_nonempty(const std::vector<double>& data, const char* op) {
  if (data.empty()) throw InputError(std::string(op) + ": empty data");
}

void require_nonnegative(const std::vector<double>& data, const char* family) {
  for (double x : data)
    if (x < 0.0) throw InputError(strfmt("%s fit requires non-negative data, found %g", family, x));
}

double gaussian_logpdf(double x, double mean, double sd) {
  double z = (x - mean) / sd;
  return -std::log(sd) - 0.5 * kLog2Pi - 0.5 * z * z;
}

}  // namespace

FitResult fit_mle(DistFamily family, const std::vector<double>& data) {
  require_nonempty(data, "fit_mle");
  const double n = static_cast<double>(data.size());
  FitResult r;
  r.ok = true;
  switch (family) {
    case DistFamily::pareto: {
      // support [1, inf) after the +1 shift, x_m = 1
      require_nonnegative(data, "pareto");
      r.family = "pareto";
      double log_sum = 0.0;
      for (double x : data) log_sum += std::log1p(x);
      if (log_sum <= 0.0) throw FitError("pareto fit degenerate: all shifted values equal x_m");
      double alpha = n / log_sum;
      r.params = {alpha};
      r.n_params = 1;
      r.nll = -n * std::log(alpha) + (alpha + 1.0) * log_sum;
      break;
    }
    case DistFamily::exponential: {
      require_nonnegative(data, "exponential");
      r.family = "exponential";
      double sum = 0.0;
      for (double x : data) sum += x;
      if (sum <= 0.0) throw FitError("exponential fit degenerate: zero mean");
      double lambda = n / sum;
      r.params = {lambda};
      r.n_params = 1;
      r.nll = -n * std::log(lambda) + lambda * sum;
      break;
    }
    case DistFamily::lognormal: {
      require_nonnegative(data, "lognormal");
      r.family = "log-normal";
      auto [lo, hi] = std::minmax_element(data.begin(), data.end());
      if (*lo == *hi) throw FitError("lognormal fit degenerate: zero variance of shifted logs");
      double mean = 0.0;
      for (double x : data) mean += std::log1p(x);
      mean /= n;
      double var = 0.0;
      for (double x : data) {
        double d = std::log1p(x) - mean;
        var += d * d;
      }
      var /= n;
      if (var <= 0.0) throw FitError("lognormal fit degenerate: zero variance of shifted logs");
      double sd = std::sqrt(var);
      r.params = {mean, sd};
      r.n_params = 2;
      double nll = 0.0;
      for (double x : data) {
        double lx = std::log1p(x);
        nll -= gaussian_logpdf(lx, mean, sd) - lx;  // density of z = x+1 is N(ln z)/z
      }
      r.nll = nll;
      break;
    }
    case DistFamily::halfnormal: {
      require_nonnegative(data, "halfnormal");
      r.family = "half-normal";
      double sq = 0.0;
      for (double x : data) sq += x * x;
      if (sq <= 0.0) throw FitError("halfnormal fit degenerate: zero scale");
      double var = sq / n;
      double sd = std::sqrt(var);
      r.params = {sd};
      r.n_params = 1;
      // ln pdf = 0.5 ln(2/pi) - ln sd - x^2/(2 var)
      r.nll = n * (std::log(sd) + 0.5 * std::log(M_PI / 2.0)) + sq / (2.0 * var);
      break;
    }
    case DistFamily::gaussian: {
      r.family = "gaussian";
      auto [lo, hi] = std::minmax_element(data.begin(), data.end());
      if (*lo == *hi) throw FitError("gaussian fit degenerate: zero variance");
      double mean = 0.0;
      for (double x : data) mean += x;
      mean /= n;
      double var = 0.0;
      for (double x : data) var += (x - mean) * (x - mean);
      var /= n;
      if (var <= 0.0) throw FitError("gaussian fit degenerate: zero variance");
      double sd = std::sqrt(var);
      r.params = {mean, sd};
      r.n_params = 2;
      double nll = 0.0;
      for (double x : data) nll -= gaussian_logpdf(x, mean, sd);
      r.nll = nll;
      break;
    }
  }
  r.bic = bic(r.nll, r.n_params, static_cast<long>(data.size()));
  return r;
}

namespace {

struct EmOutcome {
  bool collapsed = false;
  std::vector<double> params;
  double nll = 0.0;
  std::vector<double> trace;
};

// Pareto (support [1, inf)) + exponential mixture on unshifted data.
EmOutcome em_pareto_exponential(const std::vector<double>& data, int max_iters, double tol, Rng& rng,
                                bool jitter) {
  const size_t n = data.size();
  EmOutcome out;

  std::vector<double> sorted = data;
  std::sort(sorted.begin(), sorted.end());
  double med = sorted[n / 2];
  double upper_logsum = 0.0, lower_sum = 0.0;
  size_t upper_n = 0, lower_n = 0;
  for (double x : data) {
    if (x >= med && x > 1.0) {
      upper_logsum += std::log(x);
      ++upper_n;
    } else {
      lower_sum += x;
      ++lower_n;
    }
  }
  double alpha = (upper_n > 0 && upper_logsum > 0.0) ? static_cast<double>(upper_n) / upper_logsum : 1.0;
  double lambda = (lower_n > 0 && lower_sum > 0.0) ? static_cast<double>(lower_n) / lower_sum : 1.0;
  double w = 0.5;
  if (jitter) {
    alpha *= std::exp(rng.uniform(-0.5, 0.5));
    lambda *= std::exp(rng.uniform(-0.5, 0.5));
    w = rng.uniform(0.2, 0.8);
  }

  std::vector<double> gamma(n, 0.0);
  double prev_nll = 0.0;
  for (int iter = 0; iter < max_iters; ++iter) {
    double nll = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double x = data[i];
      double lp1 = x >= 1.0 ? std::log(w) + std::log(alpha) - (alpha + 1.0) * std::log(x)
                            : -std::numeric_limits<double>::infinity();
      double lp2 = std::log1p(-w) + std::log(lambda) - lambda * x;
      double m = std::max(lp1, lp2);
      if (!std::isfinite(m)) {
        out.collapsed = true;
        return out;
      }
      double denom = std::exp(lp1 - m) + std::exp(lp2 - m);
      gamma[i] = std::exp(lp1 - m) / denom;
      nll -= m + std::log(denom);
    }
    out.trace.push_back(nll);

    double sw = 0.0, s_loggamma = 0.0, s_exp_w = 0.0, s_exp_wx = 0.0;
    for (size_t i = 0; i < n; ++i) {
      sw += gamma[i];
      if (data[i] >= 1.0 && gamma[i] > 0.0) s_loggamma += gamma[i] * std::log(data[i]);
      s_exp_w += 1.0 - gamma[i];
      s_exp_wx += (1.0 - gamma[i]) * data[i];
    }
    const double floor = 1e-10 * static_cast<double>(n);
    if (sw < floor || s_exp_w < floor || s_loggamma <= 0.0 || s_exp_wx <= 0.0) {
      out.collapsed = true;
      return out;
    }
    alpha = sw / s_loggamma;
    lambda = s_exp_w / s_exp_wx;
    w = sw / static_cast<double>(n);

    if (iter > 0 && std::abs(prev_nll - nll) < tol) break;
    prev_nll = nll;
  }
  out.params = {w, alpha, lambda};
  out.nll = out.trace.back();
  return out;
}

EmOutcome em_gaussians(const std::vector<double>& data, int k, int max_iters, double tol, Rng& rng,
                       bool jitter) {
  const size_t n = data.size();
  EmOutcome out;

  // k-means-style seeding from evenly spaced quantiles
  std::vector<double> sorted = data;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> mean(static_cast<size_t>(k));
  for (int c = 0; c < k; ++c) {
    size_t pos = static_cast<size_t>((static_cast<double>(c) + 0.5) / k * static_cast<double>(n));
    mean[static_cast<size_t>(c)] = sorted[std::min(pos, n - 1)];
  }
  double total_mean = 0.0;
  for (double x : data) total_mean += x;
  total_mean /= static_cast<double>(n);
  double total_var = 0.0;
  for (double x : data) total_var += (x - total_mean) * (x - total_mean);
  total_var /= static_cast<double>(n);
  if (total_var <= 0.0) {
    out.collapsed = true;
    return out;
  }
  if (jitter)
    for (int c = 0; c < k; ++c)
      mean[static_cast<size_t>(c)] += rng.normal() * std::sqrt(total_var) * 0.5;

  // a few k-means sweeps to pull the seeds apart
  for (int sweep = 0; sweep < 10 && k > 1; ++sweep) {
    std::vector<double> sum(static_cast<size_t>(k), 0.0);
    std::vector<long> count(static_cast<size_t>(k), 0);
    for (double x : data) {
      int best = 0;
      double best_d = std::abs(x - mean[0]);
      for (int c = 1; c < k; ++c) {
        double d = std::abs(x - mean[static_cast<size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      sum[static_cast<size_t>(best)] += x;
      count[static_cast<size_t>(best)] += 1;
    }
    for (int c = 0; c < k; ++c)
      if (count[static_cast<size_t>(c)] > 0)
        mean[static_cast<size_t>(c)] = sum[static_cast<size_t>(c)] / count[static_cast<size_t>(c)];
  }

  std::vector<double> var(static_cast<size_t>(k), total_var);
  std::vector<double> weight(static_cast<size_t>(k), 1.0 / k);
  std::vector<double> resp(n * static_cast<size_t>(k));

  double prev_nll = 0.0;
  for (int iter = 0; iter < max_iters; ++iter) {
    double nll = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        double lp = std::log(weight[static_cast<size_t>(c)]) +
                    gaussian_logpdf(data[i], mean[static_cast<size_t>(c)],
                                    std::sqrt(var[static_cast<size_t>(c)]));
        resp[i * static_cast<size_t>(k) + static_cast<size_t>(c)] = lp;
        m = std::max(m, lp);
      }
      if (!std::isfinite(m)) {
        out.collapsed = true;
        return out;
      }
      double denom = 0.0;
      for (int c = 0; c < k; ++c)
        denom += std::exp(resp[i * static_cast<size_t>(k) + static_cast<size_t>(c)] - m);
      for (int c = 0; c < k; ++c)
        resp[i * static_cast<size_t>(k) + static_cast<size_t>(c)] =
            std::exp(resp[i * static_cast<size_t>(k) + static_cast<size_t>(c)] - m) / denom;
      nll -= m + std::log(denom);
    }
    out.trace.push_back(nll);

    for (int c = 0; c < k; ++c) {
      double sw = 0.0, sx = 0.0;
      for (size_t i = 0; i < n; ++i) {
        double g = resp[i * static_cast<size_t>(k) + static_cast<size_t>(c)];
        sw += g;
        sx += g * data[i];
      }
      if (sw < 1e-10 * static_cast<double>(n)) {
        out.collapsed = true;
        return out;
      }
      double mu = sx / sw;
      double sv = 0.0;
      for (size_t i = 0; i < n; ++i) {
        double g = resp[i * static_cast<size_t>(k) + static_cast<size_t>(c)];
        sv += g * (data[i] - mu) * (data[i] - mu);
      }
      double v = sv / sw;
      if (v <= 1e-12 * std::max(total_var, 1e-300)) {
        out.collapsed = true;
        return out;
      }
      mean[static_cast<size_t>(c)] = mu;
      var[static_cast<size_t>(c)] = v;
      weight[static_cast<size_t>(c)] = sw / static_cast<double>(n);
    }

    if (iter > 0 && std::abs(prev_nll - nll) < tol) break;
    prev_nll = nll;
  }
  for (int c = 0; c < k; ++c) out.params.push_back(weight[static_cast<size_t>(c)]);
  for (int c = 0; c < k; ++c) {
    out.params.push_back(mean[static_cast<size_t>(c)]);
    out.params.push_back(std::sqrt(var[static_cast<size_t>(c)]));
  }
  out.nll = out.trace.back();
  return out;
}

}  // namespace

FitResult fit_mixture_em(const MixtureSpec& spec, const std::vector<double>& data, int max_iters,
                         double tol, uint64_t seed, int restarts) {
  require_nonempty(data, "fit_mixture_em");
  if (spec.kind == MixtureSpec::Kind::gaussians && spec.n_components < 1)
    throw ConfigError("fit_mixture_em: component count must be >= 1");

  FitResult r;
  for (int attempt = 0; attempt <= restarts; ++attempt) {
    Rng rng(seed + static_cast<uint64_t>(attempt) * 0x517cc1b727220a95ull);
    EmOutcome out;
    if (spec.kind == MixtureSpec::Kind::pareto_exponential) {
      require_nonnegative(data, "pareto+exponential");
      out = em_pareto_exponential(data, max_iters, tol, rng, attempt > 0);
      r.family = "pareto+exponential";
      r.n_params = 2;  // alpha and lambda, matching the published accounting
    } else {
      out = em_gaussians(data, spec.n_components, max_iters, tol, rng, attempt > 0);
      r.family = spec.n_components == 1 ? "gaussian"
                                        : strfmt("%d-gaussian", spec.n_components);
      r.n_params = 2 * spec.n_components;  // means and sigmas
    }
    if (!out.collapsed) {
      r.ok = true;
      r.params = std::move(out.params);
      r.nll = out.nll;
      r.nll_trace = std::move(out.trace);
      r.bic = bic(r.nll, r.n_params, static_cast<long>(data.size()));
      return r;
    }
  }
  throw FitError(strfmt("fit_mixture_em: component collapse persisted through %d restarts", restarts));
}

double bic(double nll, int n_params, long n_obs) {
  if (n_obs < 1) throw InputError("bic: n_obs must be >= 1");
  return 2.0 * nll + static_cast<double>(n_params) * std::log(static_cast<double>(n_obs));
}

std::vector<FitResult> rank_fits(const std::vector<double>& data, uint64_t seed) {
  require_nonempty(data, "rank_fits");
  std::vector<FitResult> fits;
  auto attempt = [&](const std::function<FitResult()>& fit, const std::string& family, int n_params) {
    try {
      fits.push_back(fit());
    } catch (const std::exception& e) {
      FitResult failed;
      failed.family = family;
      failed.n_params = n_params;
      failed.ok = false;
      failed.error = e.what();
      fits.push_back(std::move(failed));
    }
  };
  attempt([&] { return fit_mle(DistFamily::pareto, data); }, "pareto", 1);
  attempt([&] { return fit_mle(DistFamily::lognormal, data); }, "log-normal", 2);
  attempt([&] { return fit_mle(DistFamily::exponential, data); }, "exponential", 1);
  attempt([&] { return fit_mle(DistFamily::halfnormal, data); }, "half-normal", 1);
  attempt(
      [&] {
        MixtureSpec spec;
        spec.kind = MixtureSpec::Kind::pareto_exponential;
        return fit_mixture_em(spec, data, 500, 1e-8, seed);
      },
      "pareto+exponential", 2);
  attempt([&] { return fit_mle(DistFamily::gaussian, data); }, "gaussian", 2);
  attempt(
      [&] {
        MixtureSpec spec;
        spec.kind = MixtureSpec::Kind::gaussians;
        spec.n_components = 5;
        return fit_mixture_em(spec, data, 500, 1e-8, seed);
      },
      "5-gaussian", 10);

  std::stable_sort(fits.begin(), fits.end(), [](const FitResult& a, const FitResult& b) {
    if (a.ok != b.ok) return a.ok;
    if (!a.ok) return false;
    return a.nll < b.nll;
  });
  return fits;
}

std::vector<std::pair<double, double>> empirical_ccdf(const std::vector<double>& data) {
  require_nonempty(data, "empirical_ccdf");
  std::vector<double> sorted = data;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<std::pair<double, double>> points;
  size_t i = 0;
  while (i < sorted.size()) {
    // P(X >= v) counts everything from the first occurrence of v upward
    points.emplace_back(sorted[i], static_cast<double>(sorted.size() - i) / n);
    double v = sorted[i];
    while (i < sorted.size() && sorted[i] == v) ++i;
  }
  return points;
}

}  // namespace storyq
