#include "floodtile/blas.hpp"

#include <cstdlib>
#include <mutex>
#include <vector>

#if defined(__unix__) || defined(__APPLE__)
#include <dlfcn.h>
#define FLOODTILE_HAS_DLOPEN 1
#endif

namespace floodtile::blas {
namespace {

enum CblasOrder { RowMajor = 101 };
enum CblasTranspose { NoTrans = 111, Trans = 112 };

using sgemm_fn = void (*)(int, int, int, int, int, int, float, const float*, int, const float*,
                          int, float, float*, int);
using dgemm_fn = void (*)(int, int, int, int, int, int, double, const double*, int, const double*,
                          int, double, double*, int);

sgemm_fn ext_sgemm = nullptr;
dgemm_fn ext_dgemm = nullptr;
std::once_flag init_flag;

void init() {
#ifdef FLOODTILE_HAS_DLOPEN
  // OpenBLAS picks its kernel set from the environment when the library
  // is first loaded, and its runtime detection can fall back to a
  // pre-AVX target inside VMs that mask the CPU model. Loading lazily
  // lets us pin the proper kernels and a single thread before that
  // happens. Single-threaded BLAS keeps results bit-reproducible.
#if defined(__x86_64__)
  if (__builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512dq") &&
      __builtin_cpu_supports("avx512bw") && __builtin_cpu_supports("avx512vl"))
    setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 0);
  else if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    setenv("OPENBLAS_CORETYPE", "HASWELL", 0);
#endif
  setenv("OPENBLAS_NUM_THREADS", "1", 0);

  for (const char* name : {"libopenblas.so.0", "libopenblas.so", "libopenblas.dylib"}) {
    if (void* h = dlopen(name, RTLD_NOW | RTLD_LOCAL)) {
      ext_sgemm = reinterpret_cast<sgemm_fn>(dlsym(h, "cblas_sgemm"));
      ext_dgemm = reinterpret_cast<dgemm_fn>(dlsym(h, "cblas_dgemm"));
      if (auto set_threads = reinterpret_cast<void (*)(int)>(dlsym(h, "openblas_set_num_threads")))
        set_threads(1);
      if (ext_sgemm && ext_dgemm) return;
      ext_sgemm = nullptr;
      ext_dgemm = nullptr;
    }
  }
#endif
}

// Portable fallback: blocked i-k-j loops, fixed accumulation order.
template <typename T>
void gemm_ref(bool ta, bool tb, int m, int n, int k, T alpha, const T* a, int lda, const T* b,
              int ldb, T beta, T* c, int ldc) {
  auto A = [&](int i, int p) { return ta ? a[size_t(p) * lda + i] : a[size_t(i) * lda + p]; };
  auto B = [&](int p, int j) { return tb ? b[size_t(j) * ldb + p] : b[size_t(p) * ldb + j]; };
  for (int i = 0; i < m; ++i) {
    T* crow = c + size_t(i) * ldc;
    if (beta == T(0)) {
      for (int j = 0; j < n; ++j) crow[j] = T(0);
    } else if (beta != T(1)) {
      for (int j = 0; j < n; ++j) crow[j] *= beta;
    }
    for (int p = 0; p < k; ++p) {
      T av = alpha * A(i, p);
      if (av == T(0)) continue;
      if (!tb) {
        const T* brow = b + size_t(p) * ldb;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        for (int j = 0; j < n; ++j) crow[j] += av * B(p, j);
      }
    }
  }
}

}  // namespace

void gemm_f32(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
              const float* b, int ldb, float beta, float* c, int ldc) {
  std::call_once(init_flag, init);
  if (ext_sgemm)
    ext_sgemm(RowMajor, ta ? Trans : NoTrans, tb ? Trans : NoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
  else
    gemm_ref(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm_f64(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
              const double* b, int ldb, double beta, double* c, int ldc) {
  std::call_once(init_flag, init);
  if (ext_dgemm)
    ext_dgemm(RowMajor, ta ? Trans : NoTrans, tb ? Trans : NoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
  else
    gemm_ref(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

bool using_external_blas() {
  std::call_once(init_flag, init);
  return ext_sgemm != nullptr;
}

}  // namespace floodtile::blas
