#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "storyq/readers.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace storyq;

namespace {

// shape-valid conv stack for 6x8 region blocks
std::vector<ConvSpec> tiny_stack() {
  return {{4, 3, 3, 1, 1, true}, {3, 2, 2, 1, 1, false}};
}

ReaderConfig tiny_config(Gating gating, Recurrence recurrence) {
  ReaderConfig cfg;
  cfg.k_reg = 3;
  cfg.k_tok = 6;
  cfg.embed_dim = 8;
  cfg.region_dim = 4;
  cfg.fc_width = 16;
  cfg.dropout_rate = 0.5;
  cfg.gating = gating;
  cfg.recurrence = recurrence;
  cfg.conv_stack = tiny_stack();
  cfg.max_words = 12;
  cfg.baseline_hidden = 5;
  return cfg;
}

RegionGrid random_grid(const ReaderConfig& cfg, Rng& rng, int pad_from = -1) {
  RegionGrid grid;
  grid.regions = Tensord({cfg.k_reg + 1, cfg.k_tok, cfg.embed_dim});
  grid.mask.assign(static_cast<size_t>(cfg.k_reg + 1) * static_cast<size_t>(cfg.k_tok), 1);
  for (int r = 0; r <= cfg.k_reg; ++r)
    for (int t = 0; t < cfg.k_tok; ++t) {
      bool padded = pad_from >= 0 && t >= pad_from;
      for (int d = 0; d < cfg.embed_dim; ++d)
        grid.regions(r, t, d) = padded ? 0.0 : rng.uniform(-1.0, 1.0);
      if (padded)
        grid.mask[static_cast<size_t>(r) * static_cast<size_t>(cfg.k_tok) + static_cast<size_t>(t)] = 0;
    }
  return grid;
}

Vecd random_aux(Rng& rng) {
  Vecd aux(kAuxDim);
  for (int i = 0; i < kAuxDim; ++i) aux[i] = rng.uniform(-1.0, 1.0);
  return aux;
}

template <class Model>
void zero_all_params(Model& model) {
  for (auto& [name, p] : model.params()) p.value.set_zero();
}

double model_fd_error(GatedReader<double>& model, const RegionGrid& grid, const Vecd& aux,
                      uint64_t seed) {
  Rng fwd_rng(seed);
  ReaderCache<double> cache;
  const double target = 2.5;
  auto forward = [&]() -> double {
    double mu = model.forward(grid, aux, false, fwd_rng, cache);
    return log_square_loss({mu}, {target});
  };
  auto backward = [&]() -> double {
    double mu = model.forward(grid, aux, false, fwd_rng, cache);
    model.backward(cache, log_square_loss_grad(mu, target));
    return log_square_loss({mu}, {target});
  };
  Rng sample_rng(seed ^ 0xF00D);
  return grad_check(model.params(), forward, backward, 1e-5, 200, sample_rng).max_rel_err;
}

}  // namespace

TEST_CASE("encode_regions: zero regions, weight sharing, and region count") {
  ReaderConfig cfg = tiny_config(Gating::none, Recurrence::none);
  GatedReader<double> model(cfg, 7);
  Rng rng(3);

  SUBCASE("all-zero region with zero biases encodes to zero") {
    for (auto& [name, p] : model.params())
      if (name.size() > 2 && name.substr(name.size() - 2) == ".b") p.value.set_zero();
    RegionGrid grid;
    grid.regions = Tensord({cfg.k_reg + 1, cfg.k_tok, cfg.embed_dim});
    grid.mask.assign(static_cast<size_t>(cfg.k_reg + 1) * static_cast<size_t>(cfg.k_tok), 0);
    std::vector<EncoderCache<double>> caches;
    auto r = model.encode_regions(grid, rng, caches);
    REQUIRE(r.size() == static_cast<size_t>(cfg.k_reg + 1));
    for (const Vecd& v : r) CHECK(v.norm() == 0.0);
  }
  SUBCASE("identical answer regions share weights, so embeddings match") {
    RegionGrid grid = random_grid(cfg, rng);
    for (int t = 0; t < cfg.k_tok; ++t)
      for (int d = 0; d < cfg.embed_dim; ++d) grid.regions(2, t, d) = grid.regions(1, t, d);
    std::vector<EncoderCache<double>> caches;
    auto r = model.encode_regions(grid, rng, caches);
    CHECK((r[1] - r[2]).norm() == 0.0);
    // question weights are disjoint: region 0 equal in content differs in embedding
    for (int t = 0; t < cfg.k_tok; ++t)
      for (int d = 0; d < cfg.embed_dim; ++d) grid.regions(0, t, d) = grid.regions(1, t, d);
    r = model.encode_regions(grid, rng, caches);
    CHECK((r[0] - r[1]).norm() > 1e-8);
  }
}

TEST_CASE("regional reader: bias path and position sensitivity") {
  ReaderConfig cfg = tiny_config(Gating::none, Recurrence::none);
  Rng rng(11);

  SUBCASE("all-zero weights with output bias b predicts b") {
    GatedReader<double> model(cfg, 7);
    zero_all_params(model);
    model.params().at("head.out.b").value[0] = 1.25;
    ReaderCache<double> cache;
    RegionGrid grid = random_grid(cfg, rng);
    double mu = model.forward(grid, Vecd::Zero(kAuxDim), false, rng, cache);
    CHECK(mu == doctest::Approx(1.25));
  }
  SUBCASE("swapping two answer regions changes the prediction") {
    GatedReader<double> model(cfg, 8);
    RegionGrid grid = random_grid(cfg, rng);
    ReaderCache<double> cache;
    double mu1 = model.forward(grid, Vecd::Zero(kAuxDim), false, rng, cache);
    for (int t = 0; t < cfg.k_tok; ++t)
      for (int d = 0; d < cfg.embed_dim; ++d)
        std::swap(grid.regions(1, t, d), grid.regions(3, t, d));
    double mu2 = model.forward(grid, Vecd::Zero(kAuxDim), false, rng, cache);
    CHECK(std::abs(mu1 - mu2) > 1e-9);
  }
}

TEST_CASE("sequential reader analytic cases") {
  SUBCASE("all recurrence and gate parameters zero") {
    ReaderConfig cfg = tiny_config(Gating::sequential, Recurrence::rnn);
    GatedReader<double> model(cfg, 9);
    zero_all_params(model);
    model.params().at("head.out.b").value[0] = -0.5;
    Rng rng(12);
    RegionGrid grid = random_grid(cfg, rng);
    ReaderCache<double> cache;
    double mu = model.forward(grid, Vecd::Zero(kAuxDim), false, rng, cache);
    CHECK(mu == doctest::Approx(-0.5));
    for (const Vecd& h : cache.h) CHECK(h.norm() == 0.0);
    for (const Vecd& a : cache.gate)
      for (long i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(0.5));
    for (const Vecd& s : cache.s) CHECK(s.norm() == 0.0);
  }
  SUBCASE("single region with b = arctanh(0.5) gives s = 0.25") {
    ReaderConfig cfg = tiny_config(Gating::sequential, Recurrence::rnn);
    cfg.k_reg = 1;
    cfg.include_question = false;
    GatedReader<double> model(cfg, 10);
    zero_all_params(model);
    model.params().at("rec.b").value.flat().setConstant(std::atanh(0.5));
    Rng rng(13);
    RegionGrid grid = random_grid(cfg, rng);
    ReaderCache<double> cache;
    model.forward(grid, Vecd::Zero(kAuxDim), false, rng, cache);
    REQUIRE(cache.s.size() == 1);
    for (long i = 0; i < cache.s[0].size(); ++i) CHECK(cache.s[0][i] == doctest::Approx(0.25));
  }
}

TEST_CASE("holistic reader analytic cases") {
  ReaderConfig cfg = tiny_config(Gating::holistic, Recurrence::rnn);
  Rng rng(14);

  SUBCASE("all parameters zero: gates at 0.5, bias path") {
    GatedReader<double> model(cfg, 15);
    zero_all_params(model);
    model.params().at("head.out.b").value[0] = 0.75;
    RegionGrid grid = random_grid(cfg, rng);
    ReaderCache<double> cache;
    double mu = model.forward(grid, Vecd::Zero(kAuxDim), false, rng, cache);
    CHECK(mu == doctest::Approx(0.75));
    for (const Vecd& b : cache.gate)
      for (long i = 0; i < b.size(); ++i) CHECK(b[i] == doctest::Approx(0.5));
  }
  SUBCASE("zero w and u make all gates equal to sigmoid(bias)") {
    GatedReader<double> model(cfg, 16);
    model.params().at("gate.W").value.set_zero();
    model.params().at("gate.U").value.set_zero();
    Rng brng(77);
    for (long i = 0; i < model.params().at("gate.b").value.size(); ++i)
      model.params().at("gate.b").value[i] = brng.uniform(-1.0, 1.0);
    RegionGrid grid = random_grid(cfg, rng);
    ReaderCache<double> cache;
    model.forward(grid, Vecd::Zero(kAuxDim), false, rng, cache);
    for (size_t t = 1; t < cache.gate.size(); ++t) CHECK((cache.gate[t] - cache.gate[0]).norm() == 0.0);
  }
  SUBCASE("perturbing one region moves gates of other regions") {
    GatedReader<double> model(cfg, 17);
    RegionGrid grid = random_grid(cfg, rng);
    ReaderCache<double> cache1, cache2;
    model.forward(grid, Vecd::Zero(kAuxDim), false, rng, cache1);
    const int j = 3;  // last answer region
    for (int t = 0; t < cfg.k_tok; ++t)
      for (int d = 0; d < cfg.embed_dim; ++d) grid.regions(j, t, d) += 0.2;
    model.forward(grid, Vecd::Zero(kAuxDim), false, rng, cache2);
    for (int t = 0; t < j; ++t) CHECK((cache1.gate[static_cast<size_t>(t)] -
                                       cache2.gate[static_cast<size_t>(t)]).norm() > 1e-10);
  }
}

TEST_CASE("causality: sequential past is blind to the future, holistic is not") {
  Rng rng(21);
  ReaderConfig seq_cfg = tiny_config(Gating::sequential, Recurrence::rnn);
  GatedReader<double> seq(seq_cfg, 22);
  RegionGrid grid = random_grid(seq_cfg, rng);
  ReaderCache<double> before, after;
  seq.forward(grid, Vecd::Zero(kAuxDim), false, rng, before);

  RegionGrid bumped = grid;
  const int j = 3;
  for (int t = 0; t < seq_cfg.k_tok; ++t)
    for (int d = 0; d < seq_cfg.embed_dim; ++d) bumped.regions(j, t, d) += 0.3;
  seq.forward(bumped, Vecd::Zero(kAuxDim), false, rng, after);
  for (int t = 0; t < j; ++t)
    CHECK((before.s[static_cast<size_t>(t)] - after.s[static_cast<size_t>(t)]).norm() == 0.0);
  CHECK((before.s[j] - after.s[j]).norm() > 1e-12);

  ReaderConfig hol_cfg = tiny_config(Gating::holistic, Recurrence::rnn);
  GatedReader<double> hol(hol_cfg, 23);
  ReaderCache<double> hbefore, hafter;
  hol.forward(grid, Vecd::Zero(kAuxDim), false, rng, hbefore);
  hol.forward(bumped, Vecd::Zero(kAuxDim), false, rng, hafter);
  bool any_past_changed = false;
  for (int t = 0; t < j; ++t)
    if ((hbefore.s[static_cast<size_t>(t)] - hafter.s[static_cast<size_t>(t)]).norm() > 1e-12)
      any_past_changed = true;
  CHECK(any_past_changed);
}

TEST_CASE("gate outputs stay strictly inside (0,1)") {
  Rng rng(31);
  for (uint64_t seed : {41u, 42u}) {
    for (Gating gating : {Gating::sequential, Gating::holistic}) {
      ReaderConfig cfg = tiny_config(gating, Recurrence::lstm);
      GatedReader<double> model(cfg, seed);
      RegionGrid grid = random_grid(cfg, rng);
      ReaderCache<double> cache;
      model.forward(grid, random_aux(rng), false, rng, cache);
      for (const Vecd& g : cache.gate)
        for (long i = 0; i < g.size(); ++i) {
          CHECK(g[i] > 0.0);
          CHECK(g[i] < 1.0);
        }
    }
  }
}

TEST_CASE("all five reader models match finite differences below 1e-4") {
  Rng rng(51);
  const std::pair<Gating, Recurrence> kinds[] = {
      {Gating::none, Recurrence::none},
      {Gating::sequential, Recurrence::rnn},
      {Gating::sequential, Recurrence::lstm},
      {Gating::holistic, Recurrence::rnn},
      {Gating::holistic, Recurrence::lstm},
  };
  int i = 0;
  for (auto [gating, recurrence] : kinds) {
    ReaderConfig cfg = tiny_config(gating, recurrence);
    GatedReader<double> model(cfg, 60 + static_cast<uint64_t>(i));
    RegionGrid grid = random_grid(cfg, rng, /*pad_from=*/4);
    Vecd aux = random_aux(rng);
    double err = model_fd_error(model, grid, aux, 70 + static_cast<uint64_t>(i));
    INFO("model ", i);
    CHECK(err < 1e-4);
    ++i;
  }
}

TEST_CASE("recurrent baselines: analytic cases and gradients") {
  ReaderConfig cfg = tiny_config(Gating::none, Recurrence::none);
  Rng rng(81);

  SUBCASE("all-zero parameters pool to zero and predict the bias") {
    RecurrentBaseline<double> model(cfg, Recurrence::rnn, 82);
    zero_all_params(model);
    model.params().at("head.out.b").value[0] = 3.0;
    Matd x = Matd::Zero(cfg.max_words, cfg.embed_dim);
    BaselineCache<double> cache;
    double mu = model.forward(x, Vecd::Zero(kAuxDim), false, rng, cache);
    CHECK(mu == doctest::Approx(3.0));
    for (const auto& h : cache.h) CHECK(h.norm() == 0.0);
  }
  SUBCASE("constant hidden states pool to the same constant") {
    RecurrentBaseline<double> model(cfg, Recurrence::rnn, 83);
    zero_all_params(model);
    model.params().at("rec.b").value.flat().setConstant(std::atanh(0.25));
    Matd x = Matd::Zero(cfg.max_words, cfg.embed_dim);
    BaselineCache<double> cache;
    model.forward(x, Vecd::Zero(kAuxDim), false, rng, cache);
    for (int i = 0; i < cfg.baseline_hidden; ++i)
      CHECK(cache.head_input[i] == doctest::Approx(0.25));
  }
  SUBCASE("rnn and lstm cells pass the finite-difference check") {
    for (Recurrence cell : {Recurrence::rnn, Recurrence::lstm}) {
      RecurrentBaseline<double> model(cfg, cell, 84);
      Matd x(cfg.max_words, cfg.embed_dim);
      for (long i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
      Vecd aux = random_aux(rng);
      BaselineCache<double> cache;
      const double target = 1.5;
      Rng fwd_rng(85);
      auto forward = [&]() -> double {
        double mu = model.forward(x, aux, false, fwd_rng, cache);
        return log_square_loss({mu}, {target});
      };
      auto backward = [&]() -> double {
        double mu = model.forward(x, aux, false, fwd_rng, cache);
        model.backward(cache, log_square_loss_grad(mu, target));
        return log_square_loss({mu}, {target});
      };
      Rng sample_rng(86);
      double err = grad_check(model.params(), forward, backward, 1e-5, 150, sample_rng).max_rel_err;
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("log_square_loss definition and optimum") {
  CHECK(log_square_loss({0.0}, {0.0}) == 0.0);
  CHECK(log_square_loss({0.0}, {std::exp(1.0) - 1.0}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(log_square_loss({std::nan("")}, {1.0}), NumericError);
  CHECK_THROWS_AS(log_square_loss({0.0}, {-1.0}), InputError);

  SUBCASE("optimal constant predictor is the mean of ln(y+1)") {
    Rng rng(91);
    std::vector<double> ys;
    double mean = 0.0;
    for (int i = 0; i < 200; ++i) {
      ys.push_back(std::floor(rng.uniform(0.0, 2000.0)));
      mean += std::log1p(ys.back());
    }
    mean /= static_cast<double>(ys.size());

    auto loss_at = [&](double c) {
      std::vector<double> mu(ys.size(), c);
      return log_square_loss(mu, ys);
    };
    // quadratic: one exact Newton step with wide finite differences
    const double delta = 1.0;
    double l0 = loss_at(0.0), lp = loss_at(delta), lm = loss_at(-delta);
    double c_star = -(lp - lm) / (2.0 * (lp - 2.0 * l0 + lm)) * delta;
    CHECK(std::abs(c_star - mean) < 1e-9);
  }
}

TEST_CASE("forward passes are deterministic with dropout disabled") {
  ReaderConfig cfg = tiny_config(Gating::holistic, Recurrence::lstm);
  GatedReader<double> a(cfg, 99), b(cfg, 99);
  Rng rng(100);
  RegionGrid grid = random_grid(cfg, rng);
  Vecd aux = random_aux(rng);
  ReaderCache<double> ca, cb;
  Rng r1(1), r2(2);  // different rng streams must not matter in eval mode
  double mu_a = a.forward(grid, aux, false, r1, ca);
  double mu_b = b.forward(grid, aux, false, r2, cb);
  CHECK(mu_a == mu_b);
}
