#include <doctest.h>

#include <chrono>
#include <cmath>
#include <vector>

#include "snnkit/bench.hpp"
#include "snnkit/fastpath.hpp"
#include "snnkit/network.hpp"
#include "snnkit/ops.hpp"
#include "snnkit/rng.hpp"
#include "snnkit/seq_sim.hpp"

using namespace snnkit;
using doctest::Approx;

namespace {

template <class S>
Tensor<S> random_spikes(Rng& r, index_t b, index_t n, index_t t, double p) {
  Tensor<S> s({b, n, t});
  for (index_t i = 0; i < s.numel(); ++i) s(i) = r.bernoulli(p) ? S(1) : S(0);
  return s;
}

template <class S>
double max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (index_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a(i)) - static_cast<double>(b(i))));
  return m;
}

template <class S>
double dot(const Tensor<S>& a, const Tensor<S>& b) {
  double s = 0.0;
  for (index_t i = 0; i < a.numel(); ++i)
    s += static_cast<double>(a(i)) * static_cast<double>(b(i));
  return s;
}

// Independent time-stepped oracle for the reset-free recurrence.
template <class S>
Tensor<S> no_reset_recurrence(const Tensor<S>& current, const Tensor<S>& beta,
                              const Tensor<S>& v0) {
  Tensor<S> out(current.shape());
  const index_t B = current.dim(0), N = current.dim(1), T = current.dim(2);
  for (index_t b = 0; b < B; ++b)
    for (index_t n = 0; n < N; ++n) {
      double v = static_cast<double>(v0(n));
      const double bn = static_cast<double>(beta(n));
      for (index_t t = 0; t < T; ++t) {
        v = bn * v + (1.0 - bn) * static_cast<double>(current(b, n, t));
        out(b, n, t) = static_cast<S>(v);
      }
    }
  return out;
}

template <class S>
LayerParams<S> random_layer(Rng& r, index_t n_out, index_t n_in, double w_scale) {
  LayerParams<S> p(n_out, n_in);
  for (index_t i = 0; i < p.w.numel(); ++i)
    p.w(i) = static_cast<S>(r.uniform(-w_scale, w_scale));
  for (index_t i = 0; i < n_out; ++i) p.beta(i) = static_cast<S>(r.uniform01());
  for (index_t i = 0; i < n_out; ++i) p.bias(i) = static_cast<S>(r.uniform(-0.2, 0.2));
  return p;
}

}  // namespace

TEST_SUITE("fastpath") {

TEST_CASE("no-reset potentials: closed forms") {
  TensorD zero_c({1, 1, 4}), beta({1}), v0({1});
  beta(0) = 0.5;
  auto z = no_reset_potentials(zero_c, beta, v0);
  for (index_t i = 0; i < z.numel(); ++i) CHECK(z(i) == 0.0);

  // beta = 0.5, constant unit current, v0 = 0: 1 - 0.5^(t+1)
  auto ones = TensorD::full({1, 1, 3}, 1.0);
  auto v = no_reset_potentials(ones, beta, v0);
  CHECK(v(0, 0, 0) == Approx(0.5).epsilon(1e-14));
  CHECK(v(0, 0, 1) == Approx(0.75).epsilon(1e-14));
  CHECK(v(0, 0, 2) == Approx(0.875).epsilon(1e-14));

  // nonzero start decays in on top: + beta^(t+1) * v0
  v0(0) = 2.0;
  auto vs = no_reset_potentials(ones, beta, v0);
  CHECK(vs(0, 0, 0) == Approx(1.5).epsilon(1e-14));
  CHECK(vs(0, 0, 1) == Approx(1.25).epsilon(1e-14));
  CHECK(vs(0, 0, 2) == Approx(1.125).epsilon(1e-14));
}

TEST_CASE("no-reset potentials equal the reset-free recurrence") {
  Rng r(61);
  for (int inst = 0; inst < 20; ++inst) {
    const index_t B = 1 + static_cast<index_t>(r.uint_below(3));
    const index_t N = 1 + static_cast<index_t>(r.uint_below(5));
    const index_t T = 2 + static_cast<index_t>(r.uint_below(120));
    TensorD cur({B, N, T}), beta({N}), v0({N});
    for (index_t i = 0; i < cur.numel(); ++i) cur(i) = r.uniform(-2.0, 2.0);
    for (index_t i = 0; i < N; ++i) {
      // hit the endpoints sometimes
      const double u = r.uniform01();
      beta(i) = u < 0.1 ? 0.0 : (u > 0.9 ? 1.0 : r.uniform01());
      v0(i) = r.uniform(-1.0, 1.0);
    }
    auto want = no_reset_recurrence(cur, beta, v0);
    for (ConvBackend be : {ConvBackend::Direct, ConvBackend::Fft, ConvBackend::Auto}) {
      auto got = no_reset_potentials(cur, beta, v0, be);
      CHECK(max_abs_diff(got, want) < 1e-10);
    }
  }
}

TEST_CASE("no-reset backward matches finite differences through affine and decay") {
  Rng r(71);
  const index_t B = 2, NI = 3, N = 2, T = 8;
  TensorD in({B, NI, T});
  for (index_t i = 0; i < in.numel(); ++i) in(i) = r.bernoulli(0.4) ? 1.0 : 0.0;
  TensorD w({N, NI}), bias({N}), beta({N}), v0({N}), c({B, N, T});
  for (index_t i = 0; i < w.numel(); ++i) w(i) = r.uniform(-0.3, 0.3);
  for (index_t i = 0; i < N; ++i) {
    bias(i) = r.uniform(-0.1, 0.1);
    beta(i) = r.uniform(0.3, 0.95);
    v0(i) = r.uniform(-0.5, 0.5);
  }
  for (index_t i = 0; i < c.numel(); ++i) c(i) = r.uniform(-1.0, 1.0);

  auto loss = [&](const TensorD& w_, const TensorD& b_, const TensorD& beta_) {
    auto cur = affine_forward(in, w_, b_);
    return dot(c, no_reset_potentials(cur, beta_, v0));
  };

  for (ConvBackend be : {ConvBackend::Direct, ConvBackend::Fft}) {
    CAPTURE(static_cast<int>(be));
    auto cur = affine_forward(in, w, bias);
    TensorD g_cur({B, N, T}), g_beta({N});
    no_reset_backward(c, cur, beta, v0, g_cur, g_beta, be);
    TensorD g_in({B, NI, T}), g_w({N, NI}), g_b({N});
    affine_backward(g_cur, in, w, &g_in, g_w, g_b);

    {
      std::vector<double> pt(w.data(), w.data() + w.numel());
      std::vector<double> an(g_w.data(), g_w.data() + g_w.numel());
      auto fn = [&](const std::vector<double>& p) {
        TensorD ww = w;
        for (index_t i = 0; i < ww.numel(); ++i) ww(i) = p[static_cast<std::size_t>(i)];
        return loss(ww, bias, beta);
      };
      CHECK(finite_diff_check(fn, pt, an) < 1e-6);
    }
    {
      std::vector<double> pt(beta.data(), beta.data() + beta.numel());
      std::vector<double> an(g_beta.data(), g_beta.data() + g_beta.numel());
      auto fn = [&](const std::vector<double>& p) {
        TensorD bb = beta;
        for (index_t i = 0; i < bb.numel(); ++i) bb(i) = p[static_cast<std::size_t>(i)];
        return loss(w, bias, bb);
      };
      CHECK(finite_diff_check(fn, pt, an) < 1e-6);
    }
    {
      std::vector<double> pt(bias.data(), bias.data() + bias.numel());
      std::vector<double> an(g_b.data(), g_b.data() + g_b.numel());
      auto fn = [&](const std::vector<double>& p) {
        TensorD bb = bias;
        for (index_t i = 0; i < bb.numel(); ++i) bb(i) = p[static_cast<std::size_t>(i)];
        return loss(w, bb, beta);
      };
      CHECK(finite_diff_check(fn, pt, an) < 1e-6);
    }
  }
}

TEST_CASE("ordering transform: fixed vectors") {
  TensorD z4({1, 1, 4});
  auto out0 = phi(z4);
  for (index_t i = 0; i < 4; ++i) CHECK(out0(i) == 0.0);

  TensorD s3({1, 1, 3});
  s3(0, 0, 0) = 1.0;
  auto out1 = phi(s3);
  CHECK(out1(0, 0, 0) == 1.0);
  CHECK(out1(0, 0, 1) == 2.0);
  CHECK(out1(0, 0, 2) == 3.0);

  TensorD s4({1, 1, 4});
  s4(0, 0, 1) = 1.0;
  s4(0, 0, 2) = 1.0;
  auto out2 = phi(s4);
  CHECK(out2(0, 0, 0) == 0.0);
  CHECK(out2(0, 0, 1) == 1.0);
  CHECK(out2(0, 0, 2) == 3.0);
  CHECK(out2(0, 0, 3) == 5.0);

  TensorD bad = TensorD::full({1, 1, 4}, 0.5);
  CHECK_THROWS_AS(phi(bad), EncodingError);
}

TEST_CASE("first-spike extraction on latent values") {
  TensorD z({1, 1, 4});
  z(0, 0, 1) = 1.0;
  z(0, 0, 2) = 3.0;
  z(0, 0, 3) = 5.0;
  auto g = extract_first_spike(z);
  CHECK(g(0, 0, 0) == 0.0);
  CHECK(g(0, 0, 1) == 1.0);
  CHECK(g(0, 0, 2) == 0.0);
  CHECK(g(0, 0, 3) == 0.0);

  TensorD zero({1, 1, 3});
  auto gz = extract_first_spike(zero);
  for (index_t i = 0; i < 3; ++i) CHECK(gz(i) == 0.0);

  TensorD ramp({1, 1, 3});
  ramp(0, 0, 0) = 1.0;
  ramp(0, 0, 1) = 2.0;
  ramp(0, 0, 2) = 3.0;
  auto gr = extract_first_spike(ramp);
  CHECK(gr(0, 0, 0) == 1.0);
  CHECK(gr(0, 0, 1) == 0.0);
  CHECK(gr(0, 0, 2) == 0.0);
}

TEST_CASE("every 12-step binary train: unique marker at the first spike") {
  const index_t T = 12;
  const index_t n_vec = index_t{1} << T;
  TensorD all({n_vec, 1, T});
  for (index_t m = 0; m < n_vec; ++m)
    for (index_t t = 0; t < T; ++t) all(m, 0, t) = (m >> t) & 1 ? 1.0 : 0.0;

  for (ConvBackend be : {ConvBackend::Auto, ConvBackend::Fft}) {
    CAPTURE(static_cast<int>(be));
    auto z = phi(all, be);
    auto g = extract_first_spike(z);
    for (index_t m = 0; m < n_vec; ++m) {
      index_t first = T;
      for (index_t t = 0; t < T; ++t)
        if (all(m, 0, t) == 1.0 && first == T) first = t;
      index_t ones = 0;
      for (index_t t = 0; t < T; ++t) {
        if (z(m, 0, t) == 1.0) ++ones;
        // keep-first oracle
        const double want = (t == first) ? 1.0 : 0.0;
        if (g(m, 0, t) != want) {
          CAPTURE(m);
          CAPTURE(t);
          REQUIRE(g(m, 0, t) == want);
        }
      }
      REQUIRE(ones == (first < T ? 1 : 0));
      if (first < T) {
        REQUIRE(z(m, 0, first) == 1.0);
        for (index_t t = first + 1; t < T; ++t) REQUIRE(z(m, 0, t) > z(m, 0, t - 1));
      }
    }
  }
}

TEST_CASE("layer forward: trivial and hand-traced cases") {
  FastCfg cfg;
  LayerParams<double> zero(2, 3);
  zero.beta.fill(0.9);
  TensorD in({1, 3, 5});
  in(0, 0, 0) = 1.0;
  FastLayerTrace<double> trace;
  fast_layer_forward(in, zero, cfg, trace);
  for (index_t i = 0; i < trace.out_spikes.numel(); ++i) CHECK(trace.out_spikes(i) == 0.0);

  // strong constant drive via bias: crossing of 2(1 - 0.9^(t+1)) happens at t = 6
  LayerParams<double> drive(1, 1);
  drive.bias(0) = 2.0;
  drive.beta(0) = 0.9;
  TensorD quiet({1, 1, 20});
  FastLayerTrace<double> dt;
  fast_layer_forward(quiet, drive, cfg, dt);
  double total = 0.0;
  for (index_t t = 0; t < 20; ++t) total += dt.out_spikes(0, 0, t);
  CHECK(total == 1.0);
  CHECK(dt.out_spikes(0, 0, 6) == 1.0);
}

TEST_CASE("trace invariants and aux retention") {
  Rng r(83);
  FastCfg cfg;
  cfg.retain_aux = true;
  auto p = random_layer<double>(r, 6, 4, 3.0);
  auto in = random_spikes<double>(r, 3, 4, 30, 0.3);
  FastLayerTrace<double> trace;
  fast_layer_forward(in, p, cfg, trace);
  CHECK(trace.valid);
  CHECK(trace.aux_retained);

  for (index_t b = 0; b < 3; ++b)
    for (index_t n = 0; n < 6; ++n) {
      double s = 0.0;
      bool seen_raw = false;
      for (index_t t = 0; t < 30; ++t) {
        const double o = trace.out_spikes(b, n, t);
        s += o;
        // integer-valued latent
        CHECK(trace.latent(b, n, t) == std::floor(trace.latent(b, n, t)));
        // output spike only at the first raw spike
        if (o == 1.0) {
          CHECK(trace.raw_spikes(b, n, t) == 1.0);
          CHECK(!seen_raw);
          CHECK(trace.latent(b, n, t) == 1.0);
        } else {
          CHECK(trace.latent(b, n, t) != 1.0);
        }
        seen_raw |= (trace.raw_spikes(b, n, t) == 1.0);
      }
      CHECK(s <= 1.0);
    }

  FastCfg lean;
  FastLayerTrace<double> lean_trace;
  fast_layer_forward(in, p, lean, lean_trace);
  CHECK(!lean_trace.aux_retained);
  CHECK(lean_trace.raw_spikes.numel() == 0);
  CHECK(lean_trace.latent.numel() == 0);
}

TEST_CASE("input validation is optional") {
  FastCfg cfg;
  LayerParams<double> p(1, 2);
  p.beta.fill(0.5);
  TensorD bad = TensorD::full({1, 2, 4}, 0.5);
  FastLayerTrace<double> trace;
  CHECK_THROWS_AS(fast_layer_forward(bad, p, cfg, trace), EncodingError);
  cfg.validate_input = false;
  CHECK_NOTHROW(fast_layer_forward(bad, p, cfg, trace));
}

TEST_CASE("bit-identical to the stepped single-spike simulator") {
  Rng r(91);
  int checked = 0;
  for (int inst = 0; inst < 30; ++inst) {
    const index_t B = 1 + static_cast<index_t>(r.uint_below(4));
    const index_t NI = 1 + static_cast<index_t>(r.uint_below(32));
    const index_t NO = 1 + static_cast<index_t>(r.uint_below(32));
    const index_t T = 2 + static_cast<index_t>(r.uint_below(63));
    const double w_scale = r.uniform(0.5, 6.0);
    const double density = r.uniform(0.05, 0.6);

    if (inst % 2 == 0) {
      auto p = random_layer<float>(r, NO, NI, w_scale);
      auto in = random_spikes<float>(r, B, NI, T, density);
      SeqTrace<float> st;
      seq_forward({p}, in, SpikeMode::Single, st);
      for (ConvBackend be : {ConvBackend::Auto, ConvBackend::Fft}) {
        FastCfg cfg;
        cfg.backend = be;
        FastLayerTrace<float> ft;
        fast_layer_forward(in, p, cfg, ft);
        REQUIRE(ft.out_spikes == st.layers[0].out_spikes);
      }
    } else {
      auto p = random_layer<double>(r, NO, NI, w_scale);
      auto in = random_spikes<double>(r, B, NI, T, density);
      SeqTrace<double> st;
      seq_forward({p}, in, SpikeMode::Single, st);
      for (ConvBackend be : {ConvBackend::Auto, ConvBackend::Fft}) {
        FastCfg cfg;
        cfg.backend = be;
        FastLayerTrace<double> ft;
        fast_layer_forward(in, p, cfg, ft);
        REQUIRE(ft.out_spikes == st.layers[0].out_spikes);
      }
    }
    ++checked;
  }
  CHECK(checked == 30);
}

TEST_CASE("layer backward: hand-derived chain on a one-neuron instance") {
  // current [4,0,0], beta 0.5: no-reset v = [2, 1, 0.5], raw spikes [1,0,0]
  const double beta = 0.5, slope = 10.0;
  LayerParams<double> p(1, 1);
  p.w(0, 0) = 4.0;
  p.beta(0) = beta;
  TensorD in({1, 1, 3});
  in(0, 0, 0) = 1.0;

  TensorD g({1, 1, 3});
  g(0, 0, 0) = 1.0;
  g(0, 0, 1) = 0.5;
  g(0, 0, 2) = -0.25;

  // straight-through, then ramp correlation
  const double graw0 = 1.0 * 1 + 0.5 * 2 + (-0.25) * 3;
  const double graw1 = 0.5 * 1 + (-0.25) * 2;
  const double graw2 = -0.25 * 1;
  // surrogate at the no-reset potentials
  auto sg = [&](double v) {
    const double d = slope * std::abs(v - 1.0) + 1.0;
    return 1.0 / (d * d);
  };
  const double gv0 = graw0 * sg(2.0), gv1 = graw1 * sg(1.0), gv2 = graw2 * sg(0.5);
  // decay-kernel correlation, K = (1-b)*b^j
  const double K0 = 0.5, K1 = 0.25, K2 = 0.125;
  const double gc0 = gv0 * K0 + gv1 * K1 + gv2 * K2;
  const double gc1 = gv1 * K0 + gv2 * K1;
  const double gc2 = gv2 * K0;
  const double want_gw = gc0 * 1.0;
  const double want_gbias = gc0 + gc1 + gc2;
  // dK/dbeta = -b^j + (1-b)*j*b^(j-1); current only at t=0, so gK[j] = gv[j]*I[0]
  const double dK0 = -1.0, dK1 = -beta + (1.0 - beta), dK2 = -beta * beta + (1.0 - beta) * 2 * beta;
  const double want_gbeta = 4.0 * (gv0 * dK0 + gv1 * dK1 + gv2 * dK2);

  for (ConvBackend be : {ConvBackend::Direct, ConvBackend::Fft}) {
    CAPTURE(static_cast<int>(be));
    FastCfg cfg;
    cfg.backend = be;
    cfg.surrogate.slope = slope;
    FastLayerTrace<double> trace;
    fast_layer_forward(in, p, cfg, trace);
    REQUIRE(trace.out_spikes(0, 0, 0) == 1.0);
    REQUIRE(trace.out_spikes(0, 0, 1) == 0.0);

    LayerGrads<double> grads(1, 1);
    TensorD gi({1, 1, 3});
    fast_layer_backward(trace, in, p, g, cfg, grads, &gi);
    CHECK(grads.w(0, 0) == Approx(want_gw).epsilon(1e-9));
    CHECK(grads.bias(0) == Approx(want_gbias).epsilon(1e-9));
    CHECK(grads.beta(0) == Approx(want_gbeta).epsilon(1e-9));
    CHECK(gi(0, 0, 0) == Approx(4.0 * gc0).epsilon(1e-9));
    CHECK(gi(0, 0, 1) == Approx(4.0 * gc1).epsilon(1e-9));
    CHECK(gi(0, 0, 2) == Approx(4.0 * gc2).epsilon(1e-9));
  }
}

TEST_CASE("layer backward: zero gradient in, zero gradients out") {
  Rng r(95);
  auto p = random_layer<double>(r, 4, 3, 3.0);
  auto in = random_spikes<double>(r, 2, 3, 16, 0.3);
  FastCfg cfg;
  FastLayerTrace<double> trace;
  fast_layer_forward(in, p, cfg, trace);
  TensorD g({2, 4, 16});
  LayerGrads<double> grads(4, 3);
  fast_layer_backward(trace, in, p, g, cfg, grads);
  for (index_t i = 0; i < grads.w.numel(); ++i) CHECK(grads.w(i) == 0.0);
  for (index_t i = 0; i < grads.bias.numel(); ++i) CHECK(grads.bias(i) == 0.0);
  for (index_t i = 0; i < grads.beta.numel(); ++i) CHECK(grads.beta(i) == 0.0);
}

TEST_CASE("layer backward: backends agree") {
  Rng r(97);
  auto p = random_layer<double>(r, 5, 4, 3.0);
  auto in = random_spikes<double>(r, 2, 4, 100, 0.25);
  TensorD g({2, 5, 100});
  for (index_t i = 0; i < g.numel(); ++i) g(i) = r.uniform(-1.0, 1.0);

  LayerGrads<double> gd(5, 4), gf(5, 4);
  TensorD gid({2, 4, 100}), gif({2, 4, 100});
  for (auto [be, grads, gi] :
       {std::tuple{ConvBackend::Direct, &gd, &gid}, std::tuple{ConvBackend::Fft, &gf, &gif}}) {
    FastCfg cfg;
    cfg.backend = be;
    FastLayerTrace<double> trace;
    fast_layer_forward(in, p, cfg, trace);
    fast_layer_backward(trace, in, p, g, cfg, *grads, gi);
  }
  CHECK(max_abs_diff(gd.w, gf.w) < 1e-8);
  CHECK(max_abs_diff(gd.bias, gf.bias) < 1e-8);
  CHECK(max_abs_diff(gd.beta, gf.beta) < 1e-8);
  CHECK(max_abs_diff(gid, gif) < 1e-8);
}

TEST_CASE("layer backward: frozen beta and missing trace") {
  Rng r(103);
  auto p = random_layer<double>(r, 3, 2, 3.0);
  auto in = random_spikes<double>(r, 1, 2, 10, 0.4);
  FastCfg cfg;
  cfg.trainable_beta = false;
  FastLayerTrace<double> trace;
  fast_layer_forward(in, p, cfg, trace);
  TensorD g = TensorD::full({1, 3, 10}, 0.5);
  LayerGrads<double> grads(3, 2);
  fast_layer_backward(trace, in, p, g, cfg, grads);
  for (index_t i = 0; i < grads.beta.numel(); ++i) CHECK(grads.beta(i) == 0.0);

  FastLayerTrace<double> stale;
  CHECK_THROWS_AS(fast_layer_backward(stale, in, p, g, cfg, grads), StateError);
}

TEST_CASE("parallel path outgrows the stepped simulator as T doubles") {
  auto make_cfg = [](ModelVariant v, index_t T) {
    NetworkConfig cfg;
    cfg.sizes = {64, 64, 10};
    cfg.variant = v;
    cfg.T = T;
    cfg.seed = 5;
    return cfg;
  };
  Rng r(11);
  auto timed = [&](ModelVariant v, index_t T) {
    auto net = init_network<float>(make_cfg(v, T));
    auto in = random_spikes<float>(r, 32, 64, T, 0.1);
    return time_pass(net, in, 3, 1).total_ms;
  };
  const double fast_small = timed(ModelVariant::FastSingle, 256);
  const double fast_big = timed(ModelVariant::FastSingle, 2048);
  const double seq_small = timed(ModelVariant::SeqSingle, 256);
  const double seq_big = timed(ModelVariant::SeqSingle, 2048);
  CAPTURE(fast_small);
  CAPTURE(fast_big);
  CAPTURE(seq_small);
  CAPTURE(seq_big);
  // growing T widens the gap: the parallel model's growth factor stays below
  // the stepped model's
  CHECK(fast_big / fast_small < seq_big / seq_small);
}

}  // TEST_SUITE("fastpath")
