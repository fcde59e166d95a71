// Throughput comparison of the serial reference kernels against the OpenMP
// versions used by the model.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "segkit/kernels.hpp"

namespace {

struct LinearFixture {
  std::int64_t rows;
  int n, m;
  std::vector<float> in, w, b, out;
  LinearFixture(std::int64_t rows_, int n_, int m_) : rows(rows_), n(n_), m(m_) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    auto fill = [&](std::vector<float>& v, std::size_t size) {
      v.resize(size);
      for (auto& x : v) x = u(rng);
    };
    fill(in, static_cast<std::size_t>(rows) * n);
    fill(w, static_cast<std::size_t>(m) * n);
    fill(b, static_cast<std::size_t>(m));
    out.assign(static_cast<std::size_t>(rows) * m, 0.0f);
  }
};

void bm_linear_ref(benchmark::State& state) {
  LinearFixture fx(state.range(0), 256, 256);
  for (auto _ : state) {
    segkit::ref::linear_forward(fx.in.data(), fx.w.data(), fx.b.data(), fx.out.data(), fx.rows,
                                fx.n, fx.m);
    benchmark::ClobberMemory();
  }
}

void bm_linear_omp(benchmark::State& state) {
  LinearFixture fx(state.range(0), 256, 256);
  for (auto _ : state) {
    segkit::par::linear_forward(fx.in.data(), fx.w.data(), fx.b.data(), fx.out.data(), fx.rows,
                                fx.n, fx.m);
    benchmark::ClobberMemory();
  }
}

void bm_conv_ref(benchmark::State& state) {
  LinearFixture fx(state.range(0), 256, 256);
  std::vector<float> w(256 * 256 * 3, 0.01f);
  for (auto _ : state) {
    segkit::ref::conv1d_forward(fx.in.data(), w.data(), fx.b.data(), fx.out.data(), fx.rows,
                                256, 256, 3, 2);
    benchmark::ClobberMemory();
  }
}

void bm_conv_omp(benchmark::State& state) {
  LinearFixture fx(state.range(0), 256, 256);
  std::vector<float> w(256 * 256 * 3, 0.01f);
  for (auto _ : state) {
    segkit::par::conv1d_forward(fx.in.data(), w.data(), fx.b.data(), fx.out.data(), fx.rows,
                                256, 256, 3, 2);
    benchmark::ClobberMemory();
  }
}

void bm_layernorm_ref(benchmark::State& state) {
  LinearFixture fx(state.range(0), 256, 256);
  std::vector<float> g(256, 1.0f), b(256, 0.0f), mean(static_cast<std::size_t>(fx.rows)),
      rstd(static_cast<std::size_t>(fx.rows));
  for (auto _ : state) {
    segkit::ref::layernorm_forward(fx.in.data(), g.data(), b.data(), fx.out.data(), mean.data(),
                                   rstd.data(), fx.rows, 256);
    benchmark::ClobberMemory();
  }
}

void bm_layernorm_omp(benchmark::State& state) {
  LinearFixture fx(state.range(0), 256, 256);
  std::vector<float> g(256, 1.0f), b(256, 0.0f), mean(static_cast<std::size_t>(fx.rows)),
      rstd(static_cast<std::size_t>(fx.rows));
  for (auto _ : state) {
    segkit::par::layernorm_forward(fx.in.data(), g.data(), b.data(), fx.out.data(), mean.data(),
                                   rstd.data(), fx.rows, 256);
    benchmark::ClobberMemory();
  }
}

}  // namespace

BENCHMARK(bm_linear_ref)->Arg(128)->Arg(512);
BENCHMARK(bm_linear_omp)->Arg(128)->Arg(512);
BENCHMARK(bm_conv_ref)->Arg(128)->Arg(512);
BENCHMARK(bm_conv_omp)->Arg(128)->Arg(512);
BENCHMARK(bm_layernorm_ref)->Arg(128)->Arg(512);
BENCHMARK(bm_layernorm_omp)->Arg(128)->Arg(512);

BENCHMARK_MAIN();
