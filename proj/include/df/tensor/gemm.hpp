#pragma once

#include <cstddef>
#include <vector>

#include "df/threading.hpp"

namespace df::tensor {

// Matrix kernels behind matmul/conv. All three accumulate into C and visit
// the K terms of every output element in ascending k order, so results are
// bit-identical run to run and independent of the worker count (rows of C
// are distributed, never split). The inner loops carry no cross-iteration
// dependency and vectorize without relaxed float semantics.

// C[M,N] += A[M,K] B[K,N]
template <class T>
void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C) {
  parallel_for(static_cast<std::size_t>(M), [&](std::size_t i) {
    T* c = C + i * static_cast<std::size_t>(N);
    const T* a = A + i * static_cast<std::size_t>(K);
    for (int k = 0; k < K; ++k) {
      const T av = a[k];
      const T* b = B + static_cast<std::size_t>(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  });
}

// C[M,N] += A[M,K] B[N,K]^T. Transposes B into scratch so the product runs
// through the same axpy loop as gemm_nn; the O(KN) copy is negligible next to
// the O(MNK) product and keeps the inner loop dependency-free.
template <class T>
void gemm_nt(int M, int N, int K, const T* A, const T* B, T* C) {
  std::vector<T> Bt(static_cast<std::size_t>(K) * N);
  for (int j = 0; j < N; ++j)
    for (int k = 0; k < K; ++k)
      Bt[static_cast<std::size_t>(k) * N + j] = B[static_cast<std::size_t>(j) * K + k];
  gemm_nn(M, N, K, A, Bt.data(), C);
}

// C[M,N] += A[K,M]^T B[K,N]
template <class T>
void gemm_tn(int M, int N, int K, const T* A, const T* B, T* C) {
  parallel_for(static_cast<std::size_t>(M), [&](std::size_t i) {
    T* c = C + i * static_cast<std::size_t>(N);
    for (int k = 0; k < K; ++k) {
      const T av = A[static_cast<std::size_t>(k) * M + i];
      const T* b = B + static_cast<std::size_t>(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  });
}

}  // namespace df::tensor
