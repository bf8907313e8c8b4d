// Copyright 2026 The NQES Authors
// SPDX-License-Identifier: Apache-2.0

// Heap accounting around the matrix-free covariance product. malloc and
// friends are interposed (glibc) so Eigen and operator new are both counted.

#include "doctest.h"

#include "nqes/sr.hpp"

#include <malloc.h>

#include <atomic>
#include <cstdlib>
#include <random>

extern "C" {
void* __libc_malloc(size_t);
void* __libc_calloc(size_t, size_t);
void* __libc_realloc(void*, size_t);
void __libc_free(void*);
void* __libc_memalign(size_t, size_t);
}

namespace {

std::atomic<long long> g_live{0};
std::atomic<long long> g_peak{0};

void note_alloc(void* p) {
  if (!p) return;
  const long long now = g_live += static_cast<long long>(malloc_usable_size(p));
  long long peak = g_peak.load();
  while (now > peak && !g_peak.compare_exchange_weak(peak, now)) {
  }
}

void note_free(void* p) {
  if (p) g_live -= static_cast<long long>(malloc_usable_size(p));
}

// Peak heap growth above the level at construction.
class HeapWatch {
 public:
  HeapWatch() : base_(g_live.load()) { g_peak = base_; }
  long long peak_growth() const { return g_peak.load() - base_; }

 private:
  long long base_;
};

}  // namespace

extern "C" {
void* malloc(size_t n) {
  void* p = __libc_malloc(n);
  note_alloc(p);
  return p;
}
void* calloc(size_t a, size_t b) {
  void* p = __libc_calloc(a, b);
  note_alloc(p);
  return p;
}
void* realloc(void* q, size_t n) {
  note_free(q);
  void* p = __libc_realloc(q, n);
  note_alloc(p);
  return p;
}
void free(void* p) {
  note_free(p);
  __libc_free(p);
}
void* memalign(size_t a, size_t n) {
  void* p = __libc_memalign(a, n);
  note_alloc(p);
  return p;
}
void* aligned_alloc(size_t a, size_t n) { return memalign(a, n); }
int posix_memalign(void** out, size_t a, size_t n) {
  *out = memalign(a, n);
  return *out ? 0 : 12;
}
}

using namespace nqes;

TEST_CASE("the interposer sees Eigen allocations") {
  HeapWatch w;
  {
    ComplexVector v(1000);
    v.setZero();
    CHECK(w.peak_growth() >= static_cast<long long>(1000 * sizeof(Complex)));
  }
}

TEST_CASE("covariance products at L = 1e5 use O(L) memory") {
  const int P = 64;
  const Eigen::Index L = 100000;
  std::mt19937_64 rng(1);
  std::normal_distribution<Real> g(0.0, 1.0);
  SampleBatch b;
  b.k = 1;
  b.count = P;
  b.derivs.resize(P, L);
  for (Eigen::Index j = 0; j < L; ++j) {
    for (int s = 0; s < P; ++s) b.derivs(s, j) = Complex(g(rng), g(rng));
  }
  for (int s = 0; s < P; ++s) b.e_loc.push_back(ComplexMatrix::Constant(1, 1, Complex(g(rng), 0.0)));
  ComplexVector v(L);
  for (auto& x : v) x = Complex(g(rng), g(rng));
  const Real lambda = 0.01;

  SrWorkspace ws;
  prepare_workspace(b, ws);
  ComplexVector out(L), t(P);
  {
    HeapWatch w;
    cov_matvec(b, ws, v, lambda, out, t);
    // Pre-sized outputs: nothing beyond a handful of L-vectors may appear.
    CHECK(w.peak_growth() <= static_cast<long long>(2 * L * sizeof(Complex)));
  }

  // Definition, one sample at a time: sum_s w_s conj(d_s - m) ((d_s - m) . v) + lambda v.
  ComplexVector mean = ComplexVector::Zero(L);
  for (int s = 0; s < P; ++s) mean += b.derivs.row(s).transpose() / static_cast<Real>(P);
  ComplexVector ref = lambda * v;
  for (int s = 0; s < P; ++s) {
    const ComplexVector d = b.derivs.row(s).transpose() - mean;
    ref += (d.transpose() * v).value() / static_cast<Real>(P) * d.conjugate();
  }
  CHECK((out - ref).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + ref.cwiseAbs().maxCoeff()));

  // A whole SR solve keeps a bounded number of L-vectors (Krylov recurrences).
  SrConfig cfg;
  cfg.krylov_max_iter = 20;
  {
    HeapWatch w;
    SrStepInfo info;
    const ComplexVector u = sr_update(b, cfg, 0, ws, info);
    CHECK(u.size() == L);
    CHECK(w.peak_growth() <= static_cast<long long>(40 * L * sizeof(Complex)));
    // The dense metric alone would need L^2 entries.
    CHECK(w.peak_growth() < static_cast<long long>(L) * L * static_cast<long long>(sizeof(Complex)) / 1000);
  }
}
