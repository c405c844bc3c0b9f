// Layer forward/backward passes, parameter storage with optimizer state,
// and a central-difference gradient checker.
#pragma once

#include "storyq/tensor.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace storyq {

enum class LayerKind { conv2d, maxpool2d, dense, relu, tanh_act, sigmoid, dropout, concat, hadamard };

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::string name;  // parameter prefix, used by conv2d and dense

  // conv2d
  int out_channels = 0;
  int kh = 0, kw = 0;
  int sh = 1, sw = 1;
  // maxpool2d
  int pool_h = 2, pool_w = 2;
  int pool_sh = 2, pool_sw = 2;
  // dense
  int units = 0;
  // dropout
  double rate = 0.0;
};

inline void validate_spec(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::conv2d:
      if (spec.out_channels <= 0 || spec.kh <= 0 || spec.kw <= 0 || spec.sh <= 0 || spec.sw <= 0)
        throw ConfigError("conv2d spec '" + spec.name + "': non-positive dims or strides");
      break;
    case LayerKind::maxpool2d:
      if (spec.pool_h <= 0 || spec.pool_w <= 0 || spec.pool_sh <= 0 || spec.pool_sw <= 0)
        throw ConfigError("maxpool2d spec: non-positive dims or strides");
      break;
    case LayerKind::dense:
      if (spec.units <= 0) throw ConfigError("dense spec '" + spec.name + "': non-positive units");
      break;
    case LayerKind::dropout:
      if (!(spec.rate >= 0.0 && spec.rate < 1.0)) throw ConfigError("dropout spec: rate outside [0,1)");
      break;
    default:
      break;
  }
}

template <class S>
struct Parameter {
  Tensor<S> value;
  Tensor<S> grad;
  Tensor<S> adam_m, adam_v;
  long adam_t = 0;
};

// Named parameters with matching gradient buffers; std::map keeps iteration
// order deterministic.
template <class S>
class ParameterSet {
 public:
  Parameter<S>& add(const std::string& name, std::vector<int> shape) {
    if (params_.count(name)) throw ConfigError("parameter '" + name + "' already exists");
    Parameter<S>& p = params_[name];
    p.value = Tensor<S>(shape);
    p.grad = Tensor<S>(shape);
    p.adam_m = Tensor<S>(shape);
    p.adam_v = Tensor<S>(std::move(shape));
    return p;
  }

  bool has(const std::string& name) const { return params_.count(name) != 0; }

  Parameter<S>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
  }
  const Parameter<S>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  size_t count() const { return params_.size(); }

  long total_size() const {
    long n = 0;
    for (const auto& [name, p] : params_) n += p.value.size();
    return n;
  }

  void zero_grads() {
    for (auto& [name, p] : params_) p.grad.set_zero();
  }

 private:
  std::map<std::string, Parameter<S>> params_;
};

// Centered-uniform init with scale sqrt(6 / (fan_in + fan_out)).
template <class S>
void init_glorot(Tensor<S>& t, int fan_in, int fan_out, Rng& rng) {
  double s = std::sqrt(6.0 / (static_cast<double>(fan_in) + static_cast<double>(fan_out)));
  for (long i = 0; i < t.size(); ++i) t[i] = static_cast<S>(rng.uniform(-s, s));
}

template <class S>
struct LayerCache {
  bool valid = false;
  std::vector<int> in_shape;
  std::vector<int> in2_shape;
  Tensor<S> input;           // conv2d, dense, relu, hadamard (first input)
  Tensor<S> input2;          // hadamard (second input)
  Tensor<S> output;          // tanh, sigmoid
  Tensor<S> mask;            // dropout (empty in inference mode)
  std::vector<long> argmax;  // maxpool source indices
};

namespace detail {

template <class S>
Tensor<S> conv2d_forward(const LayerSpec& spec, ParameterSet<S>& params, const Tensor<S>& in,
                         LayerCache<S>& cache) {
  if (in.rank() != 3)
    throw DimensionError("conv2d '" + spec.name + "': expected rank-3 input, got " + shape_str(in.shape()));
  const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
  if (H < spec.kh || W < spec.kw)
    throw DimensionError(strfmt("conv2d '%s': input %s smaller than %dx%d filter", spec.name.c_str(),
                                shape_str(in.shape()).c_str(), spec.kh, spec.kw));
  const int OC = spec.out_channels;
  const int OH = (H - spec.kh) / spec.sh + 1;
  const int OW = (W - spec.kw) / spec.sw + 1;
  const Tensor<S>& w = params.at(spec.name + ".w").value;
  const Tensor<S>& b = params.at(spec.name + ".b").value;
  if (w.dim(1) != C)
    throw DimensionError(strfmt("conv2d '%s': weight expects %d channels, input has %d", spec.name.c_str(),
                                w.dim(1), C));
  Tensor<S> out({OC, OH, OW});
  for (int oc = 0; oc < OC; ++oc)
    for (int oh = 0; oh < OH; ++oh)
      for (int ow = 0; ow < OW; ++ow) {
        S acc = b(oc);
        for (int c = 0; c < C; ++c)
          for (int i = 0; i < spec.kh; ++i)
            for (int j = 0; j < spec.kw; ++j)
              acc += w(oc, c, i, j) * in(c, oh * spec.sh + i, ow * spec.sw + j);
        out(oc, oh, ow) = acc;
      }
  cache.input = in;
  return out;
}

template <class S>
Tensor<S> conv2d_backward(const LayerSpec& spec, ParameterSet<S>& params, const LayerCache<S>& cache,
                          const Tensor<S>& gout) {
  const Tensor<S>& in = cache.input;
  const int C = in.dim(0);
  const int OC = gout.dim(0), OH = gout.dim(1), OW = gout.dim(2);
  const Tensor<S>& w = params.at(spec.name + ".w").value;
  Tensor<S>& gw = params.at(spec.name + ".w").grad;
  Tensor<S>& gb = params.at(spec.name + ".b").grad;
  Tensor<S> gin(in.shape());
  for (int oc = 0; oc < OC; ++oc)
    for (int oh = 0; oh < OH; ++oh)
      for (int ow = 0; ow < OW; ++ow) {
        const S g = gout(oc, oh, ow);
        gb(oc) += g;
        for (int c = 0; c < C; ++c)
          for (int i = 0; i < spec.kh; ++i)
            for (int j = 0; j < spec.kw; ++j) {
              gw(oc, c, i, j) += g * in(c, oh * spec.sh + i, ow * spec.sw + j);
              gin(c, oh * spec.sh + i, ow * spec.sw + j) += g * w(oc, c, i, j);
            }
      }
  return gin;
}

template <class S>
Tensor<S> maxpool_forward(const LayerSpec& spec, const Tensor<S>& in, LayerCache<S>& cache) {
  if (in.rank() != 3)
    throw DimensionError("maxpool2d: expected rank-3 input, got " + shape_str(in.shape()));
  const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
  if (H < spec.pool_h || W < spec.pool_w)
    throw DimensionError(strfmt("maxpool2d: input %s smaller than %dx%d window",
                                shape_str(in.shape()).c_str(), spec.pool_h, spec.pool_w));
  const int OH = (H - spec.pool_h) / spec.pool_sh + 1;
  const int OW = (W - spec.pool_w) / spec.pool_sw + 1;
  Tensor<S> out({C, OH, OW});
  cache.argmax.assign(static_cast<size_t>(out.size()), 0);
  long idx = 0;
  for (int c = 0; c < C; ++c)
    for (int oh = 0; oh < OH; ++oh)
      for (int ow = 0; ow < OW; ++ow, ++idx) {
        S best = in(c, oh * spec.pool_sh, ow * spec.pool_sw);
        long best_src = (static_cast<long>(c) * H + oh * spec.pool_sh) * W + ow * spec.pool_sw;
        for (int i = 0; i < spec.pool_h; ++i)
          for (int j = 0; j < spec.pool_w; ++j) {
            S v = in(c, oh * spec.pool_sh + i, ow * spec.pool_sw + j);
            if (v > best) {
              best = v;
              best_src = (static_cast<long>(c) * H + oh * spec.pool_sh + i) * W + ow * spec.pool_sw + j;
            }
          }
        out(c, oh, ow) = best;
        cache.argmax[static_cast<size_t>(idx)] = best_src;
      }
  return out;
}

template <class S>
Tensor<S> dense_forward(const LayerSpec& spec, ParameterSet<S>& params, const Tensor<S>& in,
                        LayerCache<S>& cache) {
  const Tensor<S>& w = params.at(spec.name + ".w").value;
  const Tensor<S>& b = params.at(spec.name + ".b").value;
  if (w.dim(1) != in.size())
    throw DimensionError(strfmt("dense '%s': weight expects %d inputs, got %s of size %ld",
                                spec.name.c_str(), w.dim(1), shape_str(in.shape()).c_str(), in.size()));
  Tensor<S> out({spec.units});
  out.vector() = w.matrix(spec.units, static_cast<int>(in.size())) * in.vector() + b.vector();
  cache.input = in;
  return out;
}

}  // namespace detail

// Forward pass for one layer; caches what the backward pass needs.
// concat and hadamard consume two inputs, all other kinds one.
template <class S>
Tensor<S> layer_forward(const LayerSpec& spec, ParameterSet<S>& params,
                        const std::vector<const Tensor<S>*>& inputs, bool training, Rng& rng,
                        LayerCache<S>& cache) {
  validate_spec(spec);
  const bool binary = spec.kind == LayerKind::concat || spec.kind == LayerKind::hadamard;
  if (inputs.size() != (binary ? 2u : 1u))
    throw DimensionError("layer_forward: wrong input count for layer kind");
  const Tensor<S>& in = *inputs[0];
  cache = LayerCache<S>{};
  cache.valid = true;
  cache.in_shape = in.shape();
  switch (spec.kind) {
    case LayerKind::conv2d:
      return detail::conv2d_forward(spec, params, in, cache);
    case LayerKind::maxpool2d:
      return detail::maxpool_forward(spec, in, cache);
    case LayerKind::dense:
      return detail::dense_forward(spec, params, in, cache);
    case LayerKind::relu: {
      Tensor<S> out(in.shape());
      out.flat() = in.flat().cwiseMax(S(0));
      cache.input = in;
      return out;
    }
    case LayerKind::tanh_act: {
      Tensor<S> out(in.shape());
      out.flat() = in.flat().array().tanh();
      cache.output = out;
      return out;
    }
    case LayerKind::sigmoid: {
      Tensor<S> out(in.shape());
      out.flat() = (S(1) / (S(1) + (-in.flat().array()).exp())).matrix();
      cache.output = out;
      return out;
    }
    case LayerKind::dropout: {
      if (!training || spec.rate == 0.0) return in;  // inference is the identity
      Tensor<S> mask(in.shape());
      const S keep_scale = static_cast<S>(1.0 / (1.0 - spec.rate));
      for (long i = 0; i < mask.size(); ++i)
        mask[i] = rng.uniform() >= spec.rate ? keep_scale : S(0);
      Tensor<S> out(in.shape());
      out.flat() = in.flat().cwiseProduct(mask.flat());
      cache.mask = mask;
      return out;
    }
    case LayerKind::concat: {
      const Tensor<S>& in2 = *inputs[1];
      cache.in2_shape = in2.shape();
      Tensor<S> out({static_cast<int>(in.size() + in2.size())});
      out.flat().head(in.size()) = in.flat();
      out.flat().tail(in2.size()) = in2.flat();
      return out;
    }
    case LayerKind::hadamard: {
      const Tensor<S>& in2 = *inputs[1];
      if (!in.same_shape(in2))
        throw DimensionError("hadamard: shape mismatch " + shape_str(in.shape()) + " vs " +
                             shape_str(in2.shape()));
      cache.in2_shape = in2.shape();
      Tensor<S> out(in.shape());
      out.flat() = in.flat().cwiseProduct(in2.flat());
      cache.input = in;
      cache.input2 = in2;
      return out;
    }
  }
  throw ConfigError("layer_forward: unknown layer kind");
}

template <class S>
Tensor<S> layer_forward(const LayerSpec& spec, ParameterSet<S>& params, const Tensor<S>& input,
                        bool training, Rng& rng, LayerCache<S>& cache) {
  return layer_forward(spec, params, std::vector<const Tensor<S>*>{&input}, training, rng, cache);
}

// Reverse-mode pass; accumulates (+=) parameter gradients and returns one
// input gradient per forward input.
template <class S>
std::vector<Tensor<S>> layer_backward(const LayerSpec& spec, ParameterSet<S>& params,
                                      const LayerCache<S>& cache, const Tensor<S>& gout) {
  if (!cache.valid) throw StateError("layer_backward called before layer_forward");
  switch (spec.kind) {
    case LayerKind::conv2d:
      return {detail::conv2d_backward(spec, params, cache, gout)};
    case LayerKind::maxpool2d: {
      Tensor<S> gin(cache.in_shape);
      for (long i = 0; i < gout.size(); ++i) gin[cache.argmax[static_cast<size_t>(i)]] += gout[i];
      return {gin};
    }
    case LayerKind::dense: {
      const Tensor<S>& w = params.at(spec.name + ".w").value;
      Tensor<S>& gw = params.at(spec.name + ".w").grad;
      Tensor<S>& gb = params.at(spec.name + ".b").grad;
      const long n = cache.input.size();
      gw.matrix(spec.units, static_cast<int>(n)).noalias() +=
          gout.vector() * cache.input.vector().transpose();
      gb.vector() += gout.vector();
      Tensor<S> gin(cache.in_shape);
      gin.vector().noalias() = w.matrix(spec.units, static_cast<int>(n)).transpose() * gout.vector();
      return {gin};
    }
    case LayerKind::relu: {
      Tensor<S> gin(cache.in_shape);
      for (long i = 0; i < gin.size(); ++i) gin[i] = cache.input[i] > S(0) ? gout[i] : S(0);
      return {gin};
    }
    case LayerKind::tanh_act: {
      Tensor<S> gin(cache.in_shape);
      gin.flat() = gout.flat().cwiseProduct(
          (S(1) - cache.output.flat().array().square()).matrix());
      return {gin};
    }
    case LayerKind::sigmoid: {
      Tensor<S> gin(cache.in_shape);
      gin.flat() = gout.flat().cwiseProduct(
          (cache.output.flat().array() * (S(1) - cache.output.flat().array())).matrix());
      return {gin};
    }
    case LayerKind::dropout: {
      if (cache.mask.size() == 0) return {gout};
      Tensor<S> gin(cache.in_shape);
      gin.flat() = gout.flat().cwiseProduct(cache.mask.flat());
      return {gin};
    }
    case LayerKind::concat: {
      Tensor<S> g1(cache.in_shape), g2(cache.in2_shape);
      g1.flat() = gout.flat().head(g1.size());
      g2.flat() = gout.flat().tail(g2.size());
      return {g1, g2};
    }
    case LayerKind::hadamard: {
      Tensor<S> g1(cache.in_shape), g2(cache.in2_shape);
      g1.flat() = gout.flat().cwiseProduct(cache.input2.flat());
      g2.flat() = gout.flat().cwiseProduct(cache.input.flat());
      return {g1, g2};
    }
  }
  throw ConfigError("layer_backward: unknown layer kind");
}

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One update over all parameters; gradient buffers are zeroed afterwards.
template <class S>
void optimizer_step(ParameterSet<S>& params, const OptimizerConfig& opt) {
  for (auto& [name, p] : params) {
    if (!p.grad.flat().allFinite()) throw NumericError("non-finite gradient for parameter '" + name + "'");
    if (opt.kind == OptimizerKind::sgd) {
      p.value.flat() -= static_cast<S>(opt.lr) * p.grad.flat();
    } else {
      p.adam_t += 1;
      const S b1 = static_cast<S>(opt.beta1), b2 = static_cast<S>(opt.beta2);
      p.adam_m.flat() = b1 * p.adam_m.flat() + (S(1) - b1) * p.grad.flat();
      p.adam_v.flat() = b2 * p.adam_v.flat() + (S(1) - b2) * p.grad.flat().cwiseProduct(p.grad.flat());
      const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(p.adam_t));
      const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(p.adam_t));
      p.value.flat().array() -=
          static_cast<S>(opt.lr) * (p.adam_m.flat().array() / static_cast<S>(bc1)) /
          ((p.adam_v.flat().array() / static_cast<S>(bc2)).sqrt() + static_cast<S>(opt.eps));
    }
    p.grad.set_zero();
  }
}

// Scales all gradients by max_norm/norm when the global L2 norm exceeds
// max_norm; returns the factor applied.
template <class S>
double clip_gradients(ParameterSet<S>& params, double max_norm) {
  double sq = 0.0;
  for (auto& [name, p] : params) sq += static_cast<double>(p.grad.flat().squaredNorm());
  double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return 1.0;
  double factor = max_norm / norm;
  for (auto& [name, p] : params) p.grad.flat() *= static_cast<S>(factor);
  return factor;
}

struct GradCheckReport {
  double max_rel_err = 0.0;
  int checked = 0;
  int skipped = 0;
};

// Compares analytic gradients against (L(t+eps)-L(t-eps))/(2 eps) on sampled
// parameter components. loss_backward must populate gradient buffers;
// loss_forward must be side-effect free. Components where both the analytic
// and numeric gradients are below skip_floor are skipped (dead units, exact
// zeros near activation kinks).
template <class S>
GradCheckReport grad_check(ParameterSet<S>& params, const std::function<double()>& loss_forward,
                           const std::function<double()>& loss_backward, double eps, int n_samples,
                           Rng& rng, double skip_floor = 1e-6) {
  params.zero_grads();
  loss_backward();
  std::vector<std::pair<std::string, long>> components;
  for (auto& [name, p] : params)
    for (long i = 0; i < p.value.size(); ++i) components.emplace_back(name, i);
  std::vector<size_t> order(components.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  const size_t n = std::min(static_cast<size_t>(n_samples), order.size());

  GradCheckReport report;
  for (size_t s = 0; s < n; ++s) {
    auto& [name, idx] = components[order[s]];
    Parameter<S>& p = params.at(name);
    const double analytic = static_cast<double>(p.grad[idx]);
    const S saved = p.value[idx];
    p.value[idx] = saved + static_cast<S>(eps);
    const double lp = loss_forward();
    p.value[idx] = saved - static_cast<S>(eps);
    const double lm = loss_forward();
    p.value[idx] = saved;
    const double numeric = (lp - lm) / (2.0 * eps);
    if (std::abs(analytic) < skip_floor && std::abs(numeric) < skip_floor) {
      ++report.skipped;
      continue;
    }
    const double rel =
        std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    report.max_rel_err = std::max(report.max_rel_err, rel);
    ++report.checked;
  }
  params.zero_grads();
  return report;
}

}  // namespace storyq
