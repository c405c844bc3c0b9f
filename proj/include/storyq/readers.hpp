// The five neural story readers (regional, sequential RNN/LSTM, holistic
// RNN/LSTM), the average-pooling recurrent baselines, and the squared-log
// loss. All backward passes are hand-derived and validated against central
// finite differences.
#pragma once

#include "storyq/corpus.hpp"
#include "storyq/features.hpp"
#include "storyq/layers.hpp"

namespace storyq {

enum class Recurrence { none, rnn, lstm };
enum class Gating { none, sequential, holistic };

struct ConvSpec {
  int out_channels = 0;
  int kh = 0, kw = 0;
  int sh = 1, sw = 1;
  bool pool = true;  // 2x2/2 max-pool after the ReLU
};

inline std::vector<ConvSpec> default_conv_stack() {
  return {{32, 3, 5, 1, 3, true}, {32, 2, 3, 1, 2, true}, {16, 1, 3, 1, 1, true}};
}

struct ReaderConfig {
  int k_reg = 10;
  int k_tok = 36;
  int embed_dim = 300;   // D
  int region_dim = 10;   // D_r; the recurrent hidden state has the same size
  int fc_width = 128;
  double dropout_rate = 0.5;
  Recurrence recurrence = Recurrence::none;
  Gating gating = Gating::none;
  bool include_question = true;
  std::vector<ConvSpec> conv_stack = default_conv_stack();
  int aux_dim = kAuxDim;
  // average-pooling baselines
  int max_words = 360;
  int baseline_hidden = 100;

  // regions the model consumes (question region first when included)
  int n_model_regions() const { return include_question ? k_reg + 1 : k_reg; }
  int doc_dim() const { return n_model_regions() * region_dim; }
};

inline void validate_reader_config(const ReaderConfig& cfg) {
  if (cfg.k_reg < 1 || cfg.k_tok < 1 || cfg.embed_dim < 1 || cfg.region_dim < 1 || cfg.fc_width < 1)
    throw ConfigError("reader config: dimensions must be positive");
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0))
    throw ConfigError("reader config: dropout rate outside [0,1)");
  if (cfg.gating != Gating::none && cfg.recurrence == Recurrence::none)
    throw ConfigError("reader config: gated readers require a recurrence");
  if (cfg.gating == Gating::none && cfg.recurrence != Recurrence::none)
    throw ConfigError("reader config: regional reader carries no recurrence");
}

// ---------------------------------------------------------------------------
// Region encoder: conv stack shared across answer regions, separate weights
// for the question region, one dense layer down to region_dim.

template <class S>
struct EncoderCache {
  std::vector<LayerCache<S>> layers;
};

template <class S>
class RegionEncoder {
 public:
  RegionEncoder() = default;

  RegionEncoder(const std::string& prefix, const std::vector<ConvSpec>& stack, int k_tok, int embed_dim,
                int region_dim) {
    int c = 1, h = k_tok, w = embed_dim;
    int li = 0;
    for (const ConvSpec& cs : stack) {
      LayerSpec conv;
      conv.kind = LayerKind::conv2d;
      conv.name = prefix + ".conv" + std::to_string(li);
      conv.out_channels = cs.out_channels;
      conv.kh = cs.kh;
      conv.kw = cs.kw;
      conv.sh = cs.sh;
      conv.sw = cs.sw;
      validate_spec(conv);
      if (h < cs.kh || w < cs.kw)
        throw ConfigError(strfmt("%s: %dx%d input too small for %dx%d filter", conv.name.c_str(), h, w,
                                 cs.kh, cs.kw));
      in_channels_.push_back(c);
      specs_.push_back(conv);
      h = (h - cs.kh) / cs.sh + 1;
      w = (w - cs.kw) / cs.sw + 1;
      c = cs.out_channels;
      LayerSpec relu;
      relu.kind = LayerKind::relu;
      specs_.push_back(relu);
      in_channels_.push_back(0);
      if (cs.pool) {
        LayerSpec pool;
        pool.kind = LayerKind::maxpool2d;
        if (h < pool.pool_h || w < pool.pool_w)
          throw ConfigError(strfmt("%s: %dx%d feature map too small for 2x2 pool", conv.name.c_str(), h, w));
        specs_.push_back(pool);
        in_channels_.push_back(0);
        h = (h - pool.pool_h) / pool.pool_sh + 1;
        w = (w - pool.pool_w) / pool.pool_sw + 1;
      }
      ++li;
    }
    flat_dim_ = c * h * w;
    LayerSpec fc;
    fc.kind = LayerKind::dense;
    fc.name = prefix + ".fc";
    fc.units = region_dim;
    specs_.push_back(fc);
    in_channels_.push_back(0);
  }

  void init_params(ParameterSet<S>& params, Rng& rng) const {
    for (size_t i = 0; i < specs_.size(); ++i) {
      const LayerSpec& spec = specs_[i];
      if (spec.kind == LayerKind::conv2d) {
        int c = in_channels_[i];
        auto& w = params.add(spec.name + ".w", {spec.out_channels, c, spec.kh, spec.kw});
        init_glorot(w.value, c * spec.kh * spec.kw, spec.out_channels * spec.kh * spec.kw, rng);
        params.add(spec.name + ".b", {spec.out_channels});
      } else if (spec.kind == LayerKind::dense) {
        auto& w = params.add(spec.name + ".w", {spec.units, flat_dim_});
        init_glorot(w.value, flat_dim_, spec.units, rng);
        params.add(spec.name + ".b", {spec.units});
      }
    }
  }

  VecX<S> forward(ParameterSet<S>& params, const Tensor<S>& region, Rng& rng,
                  EncoderCache<S>& cache) const {
    cache.layers.assign(specs_.size(), LayerCache<S>{});
    Tensor<S> x = region;
    for (size_t i = 0; i < specs_.size(); ++i) {
      if (specs_[i].kind == LayerKind::dense && x.rank() != 1)
        x = x.reshaped({static_cast<int>(x.size())});
      x = layer_forward(specs_[i], params, x, false, rng, cache.layers[i]);
    }
    return x.vector();
  }

  Tensor<S> backward(ParameterSet<S>& params, const EncoderCache<S>& cache, const VecX<S>& dout) const {
    Tensor<S> g({static_cast<int>(dout.size())});
    g.vector() = dout;
    for (size_t i = specs_.size(); i-- > 0;) {
      auto gins = layer_backward(specs_[i], params, cache.layers[i], g);
      g = std::move(gins[0]);
      if (g.shape() != cache.layers[i].in_shape) g = g.reshaped(cache.layers[i].in_shape);
    }
    return g;
  }

  int flat_dim() const { return flat_dim_; }
  const std::vector<LayerSpec>& specs() const { return specs_; }

 private:
  std::vector<LayerSpec> specs_;
  std::vector<int> in_channels_;
  int flat_dim_ = 0;
};

// ---------------------------------------------------------------------------
// Two ReLU dense layers with dropout, then a linear scalar output. Auxiliary
// features enter here, concatenated to the document embedding.

template <class S>
struct HeadCache {
  LayerCache<S> fc1, act1, drop1, fc2, act2, drop2, out;
};

template <class S>
class DenseHead {
 public:
  DenseHead() = default;

  DenseHead(const std::string& prefix, int in_dim, int width, double dropout_rate) : in_dim_(in_dim) {
    fc1_.kind = LayerKind::dense;
    fc1_.name = prefix + ".fc1";
    fc1_.units = width;
    relu_.kind = LayerKind::relu;
    drop_.kind = LayerKind::dropout;
    drop_.rate = dropout_rate;
    fc2_.kind = LayerKind::dense;
    fc2_.name = prefix + ".fc2";
    fc2_.units = width;
    out_.kind = LayerKind::dense;
    out_.name = prefix + ".out";
    out_.units = 1;
  }

  void init_params(ParameterSet<S>& params, Rng& rng) const {
    auto& w1 = params.add(fc1_.name + ".w", {fc1_.units, in_dim_});
    init_glorot(w1.value, in_dim_, fc1_.units, rng);
    params.add(fc1_.name + ".b", {fc1_.units});
    auto& w2 = params.add(fc2_.name + ".w", {fc2_.units, fc1_.units});
    init_glorot(w2.value, fc1_.units, fc2_.units, rng);
    params.add(fc2_.name + ".b", {fc2_.units});
    auto& wo = params.add(out_.name + ".w", {1, fc2_.units});
    init_glorot(wo.value, fc2_.units, 1, rng);
    params.add(out_.name + ".b", {1});
  }

  S forward(ParameterSet<S>& params, const Tensor<S>& input, bool training, Rng& rng,
            HeadCache<S>& cache) const {
    Tensor<S> x = layer_forward(fc1_, params, input, training, rng, cache.fc1);
    x = layer_forward(relu_, params, x, training, rng, cache.act1);
    x = layer_forward(drop_, params, x, training, rng, cache.drop1);
    x = layer_forward(fc2_, params, x, training, rng, cache.fc2);
    x = layer_forward(relu_, params, x, training, rng, cache.act2);
    x = layer_forward(drop_, params, x, training, rng, cache.drop2);
    x = layer_forward(out_, params, x, training, rng, cache.out);
    return x[0];
  }

  Tensor<S> backward(ParameterSet<S>& params, const HeadCache<S>& cache, S dout) const {
    Tensor<S> g({1});
    g[0] = dout;
    g = std::move(layer_backward(out_, params, cache.out, g)[0]);
    g = std::move(layer_backward(drop_, params, cache.drop2, g)[0]);
    g = std::move(layer_backward(relu_, params, cache.act2, g)[0]);
    g = std::move(layer_backward(fc2_, params, cache.fc2, g)[0]);
    g = std::move(layer_backward(drop_, params, cache.drop1, g)[0]);
    g = std::move(layer_backward(relu_, params, cache.act1, g)[0]);
    g = std::move(layer_backward(fc1_, params, cache.fc1, g)[0]);
    return g;
  }

  int in_dim() const { return in_dim_; }

 private:
  int in_dim_ = 0;
  LayerSpec fc1_, relu_, drop_, fc2_, out_;
};

// ---------------------------------------------------------------------------

template <class S>
struct ReaderCache {
  bool valid = false;
  std::vector<VecX<S>> r;       // regional embeddings after the encoders
  std::vector<VecX<S>> r_drop;  // after the post-CNN dropout
  std::vector<VecX<S>> h;       // recurrent hidden states (empty for regional)
  std::vector<VecX<S>> gate;    // alpha_t or beta_t
  std::vector<VecX<S>> s;       // gated regional representations
  std::vector<VecX<S>> lstm_i, lstm_f, lstm_o, lstm_g, lstm_c;
  std::vector<EncoderCache<S>> enc;
  std::vector<LayerCache<S>> r_dropout;
  HeadCache<S> head;
  Tensor<S> head_input;
};

template <class S>
Tensor<S> region_block(const RegionGrid& grid, int region) {
  Tensor<S> t({1, grid.k_tok(), grid.dim()});
  const int n = grid.k_tok() * grid.dim();
  const double* src = grid.regions.data() + static_cast<long>(region) * n;
  for (int i = 0; i < n; ++i) t[i] = static_cast<S>(src[i]);
  return t;
}

// One of the five reader models, selected by (gating, recurrence).
template <class S>
class GatedReader {
 public:
  GatedReader(const ReaderConfig& cfg, uint64_t seed) : cfg_(cfg) {
    validate_reader_config(cfg_);
    T_ = cfg_.n_model_regions();
    Rng rng(seed);
    enc_answer_ = RegionEncoder<S>("enc_a", cfg_.conv_stack, cfg_.k_tok, cfg_.embed_dim, cfg_.region_dim);
    enc_answer_.init_params(params_, rng);
    if (cfg_.include_question) {
      enc_question_ =
          RegionEncoder<S>("enc_q", cfg_.conv_stack, cfg_.k_tok, cfg_.embed_dim, cfg_.region_dim);
      enc_question_.init_params(params_, rng);
    }
    drop_spec_.kind = LayerKind::dropout;
    drop_spec_.rate = cfg_.dropout_rate;

    const int dr = cfg_.region_dim;
    if (cfg_.recurrence == Recurrence::rnn) {
      add_matrix("rec.W", dr, dr, rng);
      add_matrix("rec.U", dr, dr, rng);
      params_.add("rec.b", {dr});
    } else if (cfg_.recurrence == Recurrence::lstm) {
      for (const char* g : {"i", "f", "o", "g"}) {
        add_matrix(std::string("rec.W") + g, dr, dr, rng);
        add_matrix(std::string("rec.U") + g, dr, dr, rng);
        params_.add(std::string("rec.b") + g, {dr});
      }
    }
    if (cfg_.gating == Gating::sequential) {
      add_matrix("gate.W", dr, dr, rng);
      add_matrix("gate.U", dr, dr, rng);
      params_.add("gate.b", {dr});
    } else if (cfg_.gating == Gating::holistic) {
      add_matrix("gate.W", T_, T_, rng);
      add_matrix("gate.U", T_, T_, rng);
      params_.add("gate.b", {dr});
    }

    head_ = DenseHead<S>("head", cfg_.doc_dim() + cfg_.aux_dim, cfg_.fc_width, cfg_.dropout_rate);
    head_.init_params(params_, rng);
  }

  const ReaderConfig& config() const { return cfg_; }
  ParameterSet<S>& params() { return params_; }
  const ParameterSet<S>& params() const { return params_; }

  // r_0..r_{k_reg} for the default configuration; answer regions share one
  // weight set, the question region has its own.
  std::vector<VecX<S>> encode_regions(const RegionGrid& grid, Rng& rng,
                                      std::vector<EncoderCache<S>>& caches) {
    if (grid.n_regions() != cfg_.k_reg + 1 || grid.k_tok() != cfg_.k_tok || grid.dim() != cfg_.embed_dim)
      throw DimensionError(strfmt("encode_regions: grid %dx%dx%d does not match config %dx%dx%d",
                                  grid.n_regions(), grid.k_tok(), grid.dim(), cfg_.k_reg + 1, cfg_.k_tok,
                                  cfg_.embed_dim));
    caches.assign(static_cast<size_t>(T_), EncoderCache<S>{});
    std::vector<VecX<S>> r(static_cast<size_t>(T_));
    for (int t = 0; t < T_; ++t) {
      const int grid_region = cfg_.include_question ? t : t + 1;
      Tensor<S> block = region_block<S>(grid, grid_region);
      const bool question = cfg_.include_question && t == 0;
      const RegionEncoder<S>& enc = question ? enc_question_ : enc_answer_;
      r[static_cast<size_t>(t)] = enc.forward(params_, block, rng, caches[static_cast<size_t>(t)]);
    }
    return r;
  }

  double forward(const RegionGrid& grid, const Vecd& aux, bool training, Rng& rng,
                 ReaderCache<S>& cache) {
    if (aux.size() != cfg_.aux_dim)
      throw DimensionError(strfmt("reader forward: aux size %ld, expected %d",
                                  static_cast<long>(aux.size()), cfg_.aux_dim));
    cache = ReaderCache<S>{};
    cache.valid = true;
    cache.r = encode_regions(grid, rng, cache.enc);

    const int dr = cfg_.region_dim;
    cache.r_drop.resize(static_cast<size_t>(T_));
    cache.r_dropout.assign(static_cast<size_t>(T_), LayerCache<S>{});
    for (int t = 0; t < T_; ++t) {
      Tensor<S> rt({dr});
      rt.vector() = cache.r[static_cast<size_t>(t)];
      Tensor<S> dropped =
          layer_forward(drop_spec_, params_, rt, training, rng, cache.r_dropout[static_cast<size_t>(t)]);
      cache.r_drop[static_cast<size_t>(t)] = dropped.vector();
    }

    if (cfg_.recurrence != Recurrence::none) run_recurrence(cache);

    cache.s.resize(static_cast<size_t>(T_));
    if (cfg_.gating == Gating::none) {
      for (int t = 0; t < T_; ++t) cache.s[static_cast<size_t>(t)] = cache.r_drop[static_cast<size_t>(t)];
    } else if (cfg_.gating == Gating::sequential) {
      const auto Wa = mat("gate.W", dr, dr);
      const auto Ua = mat("gate.U", dr, dr);
      const auto ba = params_.at("gate.b").value.vector();
      cache.gate.resize(static_cast<size_t>(T_));
      for (int t = 0; t < T_; ++t) {
        VecX<S> h_prev = t == 0 ? VecX<S>::Zero(dr) : cache.h[static_cast<size_t>(t - 1)];
        VecX<S> pre = Wa * cache.r_drop[static_cast<size_t>(t)] + Ua * h_prev + ba;
        cache.gate[static_cast<size_t>(t)] = sigmoid(pre);
        cache.s[static_cast<size_t>(t)] =
            cache.gate[static_cast<size_t>(t)].cwiseProduct(cache.h[static_cast<size_t>(t)]);
      }
    } else {
      // holistic: every region's embedding and hidden state feeds every gate
      const auto Wb = mat("gate.W", T_, T_);
      const auto Ub = mat("gate.U", T_, T_);
      const auto bb = params_.at("gate.b").value.vector();
      MatX<S> R(T_, dr), H(T_, dr);
      for (int t = 0; t < T_; ++t) {
        R.row(t) = cache.r_drop[static_cast<size_t>(t)].transpose();
        H.row(t) = cache.h[static_cast<size_t>(t)].transpose();
      }
      MatX<S> pre = Wb * R + Ub * H;
      pre.rowwise() += bb.transpose();
      cache.gate.resize(static_cast<size_t>(T_));
      for (int t = 0; t < T_; ++t) {
        cache.gate[static_cast<size_t>(t)] = sigmoid(VecX<S>(pre.row(t).transpose()));
        cache.s[static_cast<size_t>(t)] =
            cache.gate[static_cast<size_t>(t)].cwiseProduct(cache.h[static_cast<size_t>(t)]);
      }
    }

    cache.head_input = Tensor<S>({cfg_.doc_dim() + cfg_.aux_dim});
    for (int t = 0; t < T_; ++t)
      cache.head_input.vector().segment(t * dr, dr) = cache.s[static_cast<size_t>(t)];
    for (int i = 0; i < cfg_.aux_dim; ++i)
      cache.head_input[cfg_.doc_dim() + i] = static_cast<S>(aux[i]);

    return static_cast<double>(head_.forward(params_, cache.head_input, training, rng, cache.head));
  }

  // Accumulates parameter gradients for d(loss)/d(mu_hat) = dmu.
  void backward(const ReaderCache<S>& cache, double dmu) {
    if (!cache.valid) throw StateError("reader backward called before forward");
    const int dr = cfg_.region_dim;
    Tensor<S> dinput = head_.backward(params_, cache.head, static_cast<S>(dmu));

    std::vector<VecX<S>> ds(static_cast<size_t>(T_));
    for (int t = 0; t < T_; ++t) ds[static_cast<size_t>(t)] = dinput.vector().segment(t * dr, dr);

    std::vector<VecX<S>> dr_drop(static_cast<size_t>(T_), VecX<S>::Zero(dr));
    std::vector<VecX<S>> dh(static_cast<size_t>(T_), VecX<S>::Zero(dr));

    if (cfg_.gating == Gating::none) {
      for (int t = 0; t < T_; ++t) dr_drop[static_cast<size_t>(t)] += ds[static_cast<size_t>(t)];
    } else if (cfg_.gating == Gating::holistic) {
      const auto Wb = mat("gate.W", T_, T_);
      const auto Ub = mat("gate.U", T_, T_);
      MatX<S> dS(T_, dr), B(T_, dr), H(T_, dr), R(T_, dr);
      for (int t = 0; t < T_; ++t) {
        dS.row(t) = ds[static_cast<size_t>(t)].transpose();
        B.row(t) = cache.gate[static_cast<size_t>(t)].transpose();
        H.row(t) = cache.h[static_cast<size_t>(t)].transpose();
        R.row(t) = cache.r_drop[static_cast<size_t>(t)].transpose();
      }
      MatX<S> dB = dS.cwiseProduct(H);
      MatX<S> dP = dB.cwiseProduct(B).cwiseProduct(MatX<S>::Ones(T_, dr) - B);
      grad("gate.W", T_, T_).noalias() += dP * R.transpose();
      grad("gate.U", T_, T_).noalias() += dP * H.transpose();
      params_.at("gate.b").grad.vector() += dP.colwise().sum().transpose();
      MatX<S> dR = Wb.transpose() * dP;
      MatX<S> dH = dS.cwiseProduct(B) + Ub.transpose() * dP;
      for (int t = 0; t < T_; ++t) {
        dr_drop[static_cast<size_t>(t)] += dR.row(t).transpose();
        dh[static_cast<size_t>(t)] += dH.row(t).transpose();
      }
    }
    // sequential gate gradients are interleaved with the BPTT loop below

    if (cfg_.recurrence != Recurrence::none) {
      backprop_recurrence(cache, ds, dh, dr_drop);
    }

    for (int t = 0; t < T_; ++t) {
      Tensor<S> g({dr});
      g.vector() = dr_drop[static_cast<size_t>(t)];
      Tensor<S> gr =
          std::move(layer_backward(drop_spec_, params_, cache.r_dropout[static_cast<size_t>(t)], g)[0]);
      const bool question = cfg_.include_question && t == 0;
      const RegionEncoder<S>& enc = question ? enc_question_ : enc_answer_;
      enc.backward(params_, cache.enc[static_cast<size_t>(t)], gr.vector());
    }
  }

  int n_regions() const { return T_; }

 private:
  void add_matrix(const std::string& name, int rows, int cols, Rng& rng) {
    auto& p = params_.add(name, {rows, cols});
    init_glorot(p.value, cols, rows, rng);
  }

  Eigen::Map<RowMatX<S>> mat(const std::string& name, int rows, int cols) {
    return params_.at(name).value.matrix(rows, cols);
  }
  Eigen::Map<RowMatX<S>> grad(const std::string& name, int rows, int cols) {
    return params_.at(name).grad.matrix(rows, cols);
  }

  static VecX<S> sigmoid(const VecX<S>& v) {
    return (S(1) / (S(1) + (-v.array()).exp())).matrix();
  }

  void run_recurrence(ReaderCache<S>& cache) {
    const int dr = cfg_.region_dim;
    cache.h.resize(static_cast<size_t>(T_));
    if (cfg_.recurrence == Recurrence::rnn) {
      const auto W = mat("rec.W", dr, dr);
      const auto U = mat("rec.U", dr, dr);
      const auto b = params_.at("rec.b").value.vector();
      VecX<S> h_prev = VecX<S>::Zero(dr);
      for (int t = 0; t < T_; ++t) {
        VecX<S> pre = W * cache.r_drop[static_cast<size_t>(t)] + U * h_prev + b;
        cache.h[static_cast<size_t>(t)] = pre.array().tanh();
        h_prev = cache.h[static_cast<size_t>(t)];
      }
    } else {
      cache.lstm_i.resize(static_cast<size_t>(T_));
      cache.lstm_f.resize(static_cast<size_t>(T_));
      cache.lstm_o.resize(static_cast<size_t>(T_));
      cache.lstm_g.resize(static_cast<size_t>(T_));
      cache.lstm_c.resize(static_cast<size_t>(T_));
      const auto Wi = mat("rec.Wi", dr, dr), Ui = mat("rec.Ui", dr, dr);
      const auto Wf = mat("rec.Wf", dr, dr), Uf = mat("rec.Uf", dr, dr);
      const auto Wo = mat("rec.Wo", dr, dr), Uo = mat("rec.Uo", dr, dr);
      const auto Wg = mat("rec.Wg", dr, dr), Ug = mat("rec.Ug", dr, dr);
      const auto bi = params_.at("rec.bi").value.vector();
      const auto bf = params_.at("rec.bf").value.vector();
      const auto bo = params_.at("rec.bo").value.vector();
      const auto bg = params_.at("rec.bg").value.vector();
      VecX<S> h_prev = VecX<S>::Zero(dr), c_prev = VecX<S>::Zero(dr);
      for (int t = 0; t < T_; ++t) {
        const VecX<S>& x = cache.r_drop[static_cast<size_t>(t)];
        VecX<S> i = sigmoid(Wi * x + Ui * h_prev + bi);
        VecX<S> f = sigmoid(Wf * x + Uf * h_prev + bf);
        VecX<S> o = sigmoid(Wo * x + Uo * h_prev + bo);
        VecX<S> g = (Wg * x + Ug * h_prev + bg).array().tanh();
        VecX<S> c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
        cache.lstm_i[static_cast<size_t>(t)] = i;
        cache.lstm_f[static_cast<size_t>(t)] = f;
        cache.lstm_o[static_cast<size_t>(t)] = o;
        cache.lstm_g[static_cast<size_t>(t)] = g;
        cache.lstm_c[static_cast<size_t>(t)] = c;
        cache.h[static_cast<size_t>(t)] = o.cwiseProduct(c.array().tanh().matrix());
        h_prev = cache.h[static_cast<size_t>(t)];
        c_prev = c;
      }
    }
  }

  void backprop_recurrence(const ReaderCache<S>& cache, const std::vector<VecX<S>>& ds,
                           std::vector<VecX<S>>& dh, std::vector<VecX<S>>& dr_drop) {
    const int dr = cfg_.region_dim;
    const bool seq_gate = cfg_.gating == Gating::sequential;
    VecX<S> dc_next = VecX<S>::Zero(dr);
    for (int t = T_ - 1; t >= 0; --t) {
      const size_t ut = static_cast<size_t>(t);
      VecX<S> h_prev = t == 0 ? VecX<S>::Zero(dr) : cache.h[static_cast<size_t>(t - 1)];

      if (seq_gate) {
        // s_t = alpha_t (.) h_t with alpha_t from (r_t, h_{t-1})
        dh[ut] += ds[ut].cwiseProduct(cache.gate[ut]);
        VecX<S> dalpha = ds[ut].cwiseProduct(cache.h[ut]);
        VecX<S> dpre = dalpha.cwiseProduct(cache.gate[ut])
                           .cwiseProduct((VecX<S>::Ones(dr) - cache.gate[ut]));
        grad("gate.W", dr, dr).noalias() += dpre * cache.r_drop[ut].transpose();
        grad("gate.U", dr, dr).noalias() += dpre * h_prev.transpose();
        params_.at("gate.b").grad.vector() += dpre;
        dr_drop[ut] += mat("gate.W", dr, dr).transpose() * dpre;
        if (t > 0) dh[static_cast<size_t>(t - 1)] += mat("gate.U", dr, dr).transpose() * dpre;
      }

      if (cfg_.recurrence == Recurrence::rnn) {
        VecX<S> dpre =
            dh[ut].cwiseProduct((VecX<S>::Ones(dr) - cache.h[ut].cwiseProduct(cache.h[ut])));
        grad("rec.W", dr, dr).noalias() += dpre * cache.r_drop[ut].transpose();
        grad("rec.U", dr, dr).noalias() += dpre * h_prev.transpose();
        params_.at("rec.b").grad.vector() += dpre;
        dr_drop[ut] += mat("rec.W", dr, dr).transpose() * dpre;
        if (t > 0) dh[static_cast<size_t>(t - 1)] += mat("rec.U", dr, dr).transpose() * dpre;
      } else {
        const VecX<S>& i = cache.lstm_i[ut];
        const VecX<S>& f = cache.lstm_f[ut];
        const VecX<S>& o = cache.lstm_o[ut];
        const VecX<S>& g = cache.lstm_g[ut];
        const VecX<S>& c = cache.lstm_c[ut];
        VecX<S> c_prev = t == 0 ? VecX<S>::Zero(dr) : cache.lstm_c[static_cast<size_t>(t - 1)];
        VecX<S> tanh_c = c.array().tanh();
        VecX<S> do_ = dh[ut].cwiseProduct(tanh_c);
        VecX<S> dc = dh[ut].cwiseProduct(o).cwiseProduct(
                         (VecX<S>::Ones(dr) - tanh_c.cwiseProduct(tanh_c))) +
                     dc_next;
        VecX<S> di = dc.cwiseProduct(g);
        VecX<S> dg = dc.cwiseProduct(i);
        VecX<S> df = dc.cwiseProduct(c_prev);
        dc_next = dc.cwiseProduct(f);

        VecX<S> dpre_i = di.cwiseProduct(i).cwiseProduct(VecX<S>::Ones(dr) - i);
        VecX<S> dpre_f = df.cwiseProduct(f).cwiseProduct(VecX<S>::Ones(dr) - f);
        VecX<S> dpre_o = do_.cwiseProduct(o).cwiseProduct(VecX<S>::Ones(dr) - o);
        VecX<S> dpre_g = dg.cwiseProduct(VecX<S>::Ones(dr) - g.cwiseProduct(g));

        const std::pair<const char*, VecX<S>*> gates[] = {
            {"i", &dpre_i}, {"f", &dpre_f}, {"o", &dpre_o}, {"g", &dpre_g}};
        for (auto& [suffix, dpre] : gates) {
          grad(std::string("rec.W") + suffix, dr, dr).noalias() += *dpre * cache.r_drop[ut].transpose();
          grad(std::string("rec.U") + suffix, dr, dr).noalias() += *dpre * h_prev.transpose();
          params_.at(std::string("rec.b") + suffix).grad.vector() += *dpre;
          dr_drop[ut] += mat(std::string("rec.W") + suffix, dr, dr).transpose() * *dpre;
          if (t > 0)
            dh[static_cast<size_t>(t - 1)] +=
                mat(std::string("rec.U") + suffix, dr, dr).transpose() * *dpre;
        }
      }
    }
  }

  ReaderConfig cfg_;
  int T_ = 0;
  RegionEncoder<S> enc_answer_, enc_question_;
  LayerSpec drop_spec_;
  DenseHead<S> head_;
  ParameterSet<S> params_;
};

// ---------------------------------------------------------------------------
// RNN-A / LSTM-A: plain recurrence over the first max_words token embeddings,
// average pooling over all hidden states, then the dense head.

template <class S>
struct BaselineCache {
  bool valid = false;
  MatX<S> x;  // max_words x D inputs
  std::vector<VecX<S>> h;
  std::vector<VecX<S>> lstm_i, lstm_f, lstm_o, lstm_g, lstm_c;
  HeadCache<S> head;
  Tensor<S> head_input;
};

template <class S>
class RecurrentBaseline {
 public:
  RecurrentBaseline(const ReaderConfig& cfg, Recurrence cell, uint64_t seed) : cfg_(cfg), cell_(cell) {
    if (cell != Recurrence::rnn && cell != Recurrence::lstm)
      throw ConfigError("recurrent baseline needs rnn or lstm cell");
    Rng rng(seed);
    const int hd = cfg_.baseline_hidden, d = cfg_.embed_dim;
    if (cell_ == Recurrence::rnn) {
      add_matrix("rec.W", hd, d, rng);
      add_matrix("rec.U", hd, hd, rng);
      params_.add("rec.b", {hd});
    } else {
      for (const char* g : {"i", "f", "o", "g"}) {
        add_matrix(std::string("rec.W") + g, hd, d, rng);
        add_matrix(std::string("rec.U") + g, hd, hd, rng);
        params_.add(std::string("rec.b") + g, {hd});
      }
    }
    head_ = DenseHead<S>("head", hd + cfg_.aux_dim, cfg_.fc_width, cfg_.dropout_rate);
    head_.init_params(params_, rng);
  }

  ParameterSet<S>& params() { return params_; }
  const ReaderConfig& config() const { return cfg_; }
  Recurrence cell() const { return cell_; }

  // token_embeds: max_words x D, zero-padded
  double forward(const Matd& token_embeds, const Vecd& aux, bool training, Rng& rng,
                 BaselineCache<S>& cache) {
    const int m = cfg_.max_words, d = cfg_.embed_dim, hd = cfg_.baseline_hidden;
    if (token_embeds.rows() != m || token_embeds.cols() != d)
      throw DimensionError(strfmt("baseline forward: inputs %ldx%ld, expected %dx%d",
                                  static_cast<long>(token_embeds.rows()),
                                  static_cast<long>(token_embeds.cols()), m, d));
    cache = BaselineCache<S>{};
    cache.valid = true;
    cache.x = token_embeds.cast<S>();
    cache.h.resize(static_cast<size_t>(m));
    VecX<S> h_prev = VecX<S>::Zero(hd), c_prev = VecX<S>::Zero(hd);
    if (cell_ == Recurrence::rnn) {
      const auto W = mat("rec.W", hd, d);
      const auto U = mat("rec.U", hd, hd);
      const auto b = params_.at("rec.b").value.vector();
      for (int t = 0; t < m; ++t) {
        VecX<S> pre = W * cache.x.row(t).transpose() + U * h_prev + b;
        cache.h[static_cast<size_t>(t)] = pre.array().tanh();
        h_prev = cache.h[static_cast<size_t>(t)];
      }
    } else {
      cache.lstm_i.resize(static_cast<size_t>(m));
      cache.lstm_f.resize(static_cast<size_t>(m));
      cache.lstm_o.resize(static_cast<size_t>(m));
      cache.lstm_g.resize(static_cast<size_t>(m));
      cache.lstm_c.resize(static_cast<size_t>(m));
      const auto Wi = mat("rec.Wi", hd, d), Ui = mat("rec.Ui", hd, hd);
      const auto Wf = mat("rec.Wf", hd, d), Uf = mat("rec.Uf", hd, hd);
      const auto Wo = mat("rec.Wo", hd, d), Uo = mat("rec.Uo", hd, hd);
      const auto Wg = mat("rec.Wg", hd, d), Ug = mat("rec.Ug", hd, hd);
      const auto bi = params_.at("rec.bi").value.vector();
      const auto bf = params_.at("rec.bf").value.vector();
      const auto bo = params_.at("rec.bo").value.vector();
      const auto bg = params_.at("rec.bg").value.vector();
      for (int t = 0; t < m; ++t) {
        VecX<S> x = cache.x.row(t).transpose();
        VecX<S> i = sigmoid(Wi * x + Ui * h_prev + bi);
        VecX<S> f = sigmoid(Wf * x + Uf * h_prev + bf);
        VecX<S> o = sigmoid(Wo * x + Uo * h_prev + bo);
        VecX<S> g = (Wg * x + Ug * h_prev + bg).array().tanh();
        VecX<S> c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
        cache.lstm_i[static_cast<size_t>(t)] = i;
        cache.lstm_f[static_cast<size_t>(t)] = f;
        cache.lstm_o[static_cast<size_t>(t)] = o;
        cache.lstm_g[static_cast<size_t>(t)] = g;
        cache.lstm_c[static_cast<size_t>(t)] = c;
        cache.h[static_cast<size_t>(t)] = o.cwiseProduct(c.array().tanh().matrix());
        h_prev = cache.h[static_cast<size_t>(t)];
        c_prev = c;
      }
    }

    VecX<S> pooled = VecX<S>::Zero(hd);
    for (const auto& h : cache.h) pooled += h;
    pooled /= static_cast<S>(m);

    cache.head_input = Tensor<S>({hd + cfg_.aux_dim});
    cache.head_input.vector().head(hd) = pooled;
    for (int i = 0; i < cfg_.aux_dim; ++i) cache.head_input[hd + i] = static_cast<S>(aux[i]);
    return static_cast<double>(head_.forward(params_, cache.head_input, training, rng, cache.head));
  }

  void backward(const BaselineCache<S>& cache, double dmu) {
    if (!cache.valid) throw StateError("baseline backward called before forward");
    const int m = cfg_.max_words, d = cfg_.embed_dim, hd = cfg_.baseline_hidden;
    Tensor<S> dinput = head_.backward(params_, cache.head, static_cast<S>(dmu));
    VecX<S> dpooled = dinput.vector().head(hd);
    VecX<S> per_step = dpooled / static_cast<S>(m);

    VecX<S> dh_next = VecX<S>::Zero(hd), dc_next = VecX<S>::Zero(hd);
    for (int t = m - 1; t >= 0; --t) {
      const size_t ut = static_cast<size_t>(t);
      VecX<S> h_prev = t == 0 ? VecX<S>::Zero(hd) : cache.h[static_cast<size_t>(t - 1)];
      VecX<S> dh = per_step + dh_next;
      dh_next = VecX<S>::Zero(hd);
      if (cell_ == Recurrence::rnn) {
        VecX<S> dpre = dh.cwiseProduct(VecX<S>::Ones(hd) - cache.h[ut].cwiseProduct(cache.h[ut]));
        grad("rec.W", hd, d).noalias() += dpre * cache.x.row(t);
        grad("rec.U", hd, hd).noalias() += dpre * h_prev.transpose();
        params_.at("rec.b").grad.vector() += dpre;
        if (t > 0) dh_next += mat("rec.U", hd, hd).transpose() * dpre;
      } else {
        const VecX<S>& i = cache.lstm_i[ut];
        const VecX<S>& f = cache.lstm_f[ut];
        const VecX<S>& o = cache.lstm_o[ut];
        const VecX<S>& g = cache.lstm_g[ut];
        const VecX<S>& c = cache.lstm_c[ut];
        VecX<S> c_prev = t == 0 ? VecX<S>::Zero(hd) : cache.lstm_c[static_cast<size_t>(t - 1)];
        VecX<S> tanh_c = c.array().tanh();
        VecX<S> do_ = dh.cwiseProduct(tanh_c);
        VecX<S> dc =
            dh.cwiseProduct(o).cwiseProduct(VecX<S>::Ones(hd) - tanh_c.cwiseProduct(tanh_c)) + dc_next;
        VecX<S> di = dc.cwiseProduct(g);
        VecX<S> dg = dc.cwiseProduct(i);
        VecX<S> df = dc.cwiseProduct(c_prev);
        dc_next = dc.cwiseProduct(f);
        VecX<S> dpre_i = di.cwiseProduct(i).cwiseProduct(VecX<S>::Ones(hd) - i);
        VecX<S> dpre_f = df.cwiseProduct(f).cwiseProduct(VecX<S>::Ones(hd) - f);
        VecX<S> dpre_o = do_.cwiseProduct(o).cwiseProduct(VecX<S>::Ones(hd) - o);
        VecX<S> dpre_g = dg.cwiseProduct(VecX<S>::Ones(hd) - g.cwiseProduct(g));
        const std::pair<const char*, VecX<S>*> gates[] = {
            {"i", &dpre_i}, {"f", &dpre_f}, {"o", &dpre_o}, {"g", &dpre_g}};
        for (auto& [suffix, dpre] : gates) {
          grad(std::string("rec.W") + suffix, hd, d).noalias() += *dpre * cache.x.row(t);
          grad(std::string("rec.U") + suffix, hd, hd).noalias() += *dpre * h_prev.transpose();
          params_.at(std::string("rec.b") + suffix).grad.vector() += *dpre;
          if (t > 0)
            dh_next += mat(std::string("rec.U") + suffix, hd, hd).transpose() * *dpre;
        }
      }
    }
  }

 private:
  void add_matrix(const std::string& name, int rows, int cols, Rng& rng) {
    auto& p = params_.add(name, {rows, cols});
    init_glorot(p.value, cols, rows, rng);
  }
  Eigen::Map<RowMatX<S>> mat(const std::string& name, int rows, int cols) {
    return params_.at(name).value.matrix(rows, cols);
  }
  Eigen::Map<RowMatX<S>> grad(const std::string& name, int rows, int cols) {
    return params_.at(name).grad.matrix(rows, cols);
  }
  static VecX<S> sigmoid(const VecX<S>& v) { return (S(1) / (S(1) + (-v.array()).exp())).matrix(); }

  ReaderConfig cfg_;
  Recurrence cell_;
  DenseHead<S> head_;
  ParameterSet<S> params_;
};

// ---------------------------------------------------------------------------

// Sum over the batch of (ln(y_i + 1) - mu_hat_i)^2.
inline double log_square_loss(const std::vector<double>& mu_hat, const std::vector<double>& upvotes) {
  if (mu_hat.size() != upvotes.size())
    throw DimensionError("log_square_loss: prediction/target size mismatch");
  double loss = 0.0;
  for (size_t i = 0; i < mu_hat.size(); ++i) {
    if (!std::isfinite(mu_hat[i]))
      throw NumericError(strfmt("log_square_loss: non-finite prediction at index %zu", i));
    if (upvotes[i] < 0) throw InputError("log_square_loss: negative upvote count");
    double d = std::log1p(upvotes[i]) - mu_hat[i];
    loss += d * d;
  }
  return loss;
}

inline double log_square_loss_grad(double mu_hat, double upvotes) {
  return 2.0 * (mu_hat - std::log1p(upvotes));
}

}  // namespace storyq
