// Hot paths: Grassmann products and Berezin integrals, the fermionic Fourier
// transform, site-factor assembly, superintegration, and one cluster term.

#include "susy/randschro.hpp"
#include "susy/replica.hpp"

#include <benchmark/benchmark.h>

using namespace susy;
using grassmann::cplx;
using grassmann::Site;
namespace rs = susy::randschro;

namespace {

grassmann::ContextPtr psi_chain(int nsites) {
  std::vector<grassmann::GeneratorIndex> g;
  for (int i = 0; i < nsites; ++i)
    for (auto c : {grassmann::Charge::plus, grassmann::Charge::minus})
      g.push_back(grassmann::gen(grassmann::Family::psi, Site{i, 0, 0}, 0, c));
  return grassmann::Context::make(g);
}

grassmann::Element dense_element(const grassmann::ContextPtr& ctx, int terms) {
  rng::Stream st(5, 0);
  grassmann::Element e(ctx);
  for (int t = 0; t < terms; ++t)
    e += grassmann::Element::monomial(ctx, st.next_u64() & ctx->full_mask(),
                                      cplx(st.uniform(-1, 1), st.uniform(-1, 1)));
  return e;
}

void bm_product(benchmark::State& state) {
  auto ctx = psi_chain(static_cast<int>(state.range(0)));
  auto a = dense_element(ctx, 32), b = dense_element(ctx, 32);
  for (auto _ : state) benchmark::DoNotOptimize(a * b);
}
BENCHMARK(bm_product)->Arg(3)->Arg(5)->Arg(8);

void bm_berezin(benchmark::State& state) {
  auto ctx = psi_chain(static_cast<int>(state.range(0)));
  auto e = dense_element(ctx, 64);
  for (auto _ : state)
    benchmark::DoNotOptimize(grassmann::berezin_family(e, grassmann::Family::psi));
}
BENCHMARK(bm_berezin)->Arg(4)->Arg(8);

void bm_fourier(benchmark::State& state) {
  auto ctx = psi_chain(static_cast<int>(state.range(0)));
  auto e = dense_element(ctx, 32);
  for (auto _ : state) benchmark::DoNotOptimize(grassmann::fourier(e));
}
BENCHMARK(bm_fourier)->Arg(2)->Arg(4);

void bm_exp_even(benchmark::State& state) {
  auto ctx = psi_chain(4);
  grassmann::Element v(ctx);
  rng::Stream st(7, 0);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      auto p = grassmann::Element::generator(
          ctx, grassmann::gen(grassmann::Family::psi, Site{i, 0, 0}, 0, grassmann::Charge::plus));
      auto q = grassmann::Element::generator(
          ctx, grassmann::gen(grassmann::Family::psi, Site{j, 0, 0}, 0, grassmann::Charge::minus));
      v += p * q * cplx(st.uniform(-1, 1), st.uniform(-1, 1));
    }
  for (auto _ : state) benchmark::DoNotOptimize(grassmann::exp_even(v));
}
BENCHMARK(bm_exp_even);

void bm_site_factor(benchmark::State& state) {
  auto d = disorder::gaussian(1.0);
  auto f = disorder::f_profile(d, cplx(0.1, 0.2), 2.0);
  superfn::BosonicLayout layout({superfn::SiteColour{{0, 0, 0}, 0}, {{1, 0, 0}, 0}});
  auto ctx = layout.context();
  superfn::BosonicPoint p{{cplx(0.4, -0.1), cplx(-0.2, 0.7)}};
  for (auto _ : state)
    benchmark::DoNotOptimize(
        rs::f_site_element(f, p, layout, ctx, Site{0, 0, 0}, 1));
}
BENCHMARK(bm_site_factor);

void bm_replica_inverse(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  replica::Matrix A = replica::Matrix::Identity(n, n) * 2.5;
  rng::Stream st(11, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) += cplx(st.uniform(-1, 1), st.uniform(-1, 1));
  superfn::Integrator how;
  how.nodes = 48;
  for (auto _ : state) benchmark::DoNotOptimize(replica::replica_inverse(A, 0, n - 1, how));
}
BENCHMARK(bm_replica_inverse)->Arg(2)->Arg(4);

void bm_mc_green(benchmark::State& state) {
  rs::LatticeModel m;
  m.D = 1;
  m.box = {6, 1, 1};
  m.gamma = 2.0;
  auto d = disorder::gaussian(1.0);
  rs::SpectralPoint pt{0.3, 0.2, 0.0, +1};
  for (auto _ : state)
    benchmark::DoNotOptimize(rs::mc_green(m, d, pt, m.site(0), m.site(1), 2000, 1));
}
BENCHMARK(bm_mc_green);

void bm_direct_term(benchmark::State& state) {
  rs::LatticeModel m;
  m.D = 1;
  m.box = {4, 1, 1};
  m.gamma = 8.0;
  auto d = disorder::gaussian(1.0);
  rs::SpectralPoint pt{0.0, 0.5, 0.0, +1};
  rs::ClusterOptions opt;
  opt.boson_nodes = 12;
  opt.max_planes_tensor = 2;
  opt.mc_samples = 2000;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        rs::direct_cluster_term(m, d, pt, m.site(0), m.site(1), 1, opt));
}
BENCHMARK(bm_direct_term);

void bm_dual_profile(benchmark::State& state) {
  auto d = disorder::gaussian(1.0);
  auto f = disorder::f_profile(d, cplx(-0.5, 0.0) / 0.05, 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(rs::DualProfile(f, 2, 20.0, 200));
}
BENCHMARK(bm_dual_profile);

}  // namespace

BENCHMARK_MAIN();
