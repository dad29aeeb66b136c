#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "tad/autodiff.hpp"

namespace tad::ssm {

// A scan order is a set of token sequences over the rows of a [R, C] token
// matrix. Every row belongs to exactly one sequence; each sequence is scanned
// independently, in the listed order, starting from a zero state.
using ScanOrder = std::vector<std::vector<std::size_t>>;

void validate_order(const ScanOrder& order, std::size_t rows);

// Discretized selective recurrence, per channel c and state n:
//   abar = exp(delta[t,c] * A[c,n])
//   h[t,c,n] = abar * h[t-1,c,n] + delta[t,c] * B[t,n] * u[t,c]
//   y[t,c] = sum_n Cm[t,n] * h[t,c,n] + D[c] * u[t,c]
// u, delta: [R, C]; A: [C, N]; B, Cm: [R, N]; D: [C].
Var selective_scan_core(const Var& u, const Var& delta, const Var& A, const Var& B, const Var& Cm,
                        const Var& D, const ScanOrder& order);

// Forward-only version on plain tensors (no state retained).
Tensor selective_scan_forward(const Tensor& u, const Tensor& delta, const Tensor& A,
                              const Tensor& B, const Tensor& Cm, const Tensor& D,
                              const ScanOrder& order);

// Parameter bundle of one scan direction. A is stored as log(-A) so that
// A = -exp(a_log) stays strictly negative.
struct ScanWeights {
  Var a_log;  // [C, N]
  Var w_b;    // [C, N]
  Var w_c;    // [C, N]
  Var w_dt;   // [C, C]
  Var b_dt;   // [C]
  Var d;      // [C]
};

// Registers `<prefix>.{a_log,w_b,w_c,w_dt,b_dt,d}` and returns the index of
// the first one; the six are contiguous in the set.
std::size_t add_scan_params(ParameterSet& params, const std::string& prefix, std::size_t channels,
                            std::size_t state_dim, std::mt19937_64& rng);
ScanWeights bind_scan(const std::vector<Var>& bound, std::size_t first);

// Input-dependent scan: delta = softplus(u W_dt + b_dt), B = u W_B,
// Cm = u W_C, then selective_scan_core. u: [R, C].
Var selective_scan(const Var& u, const ScanWeights& w, const ScanOrder& order);

// One sequence 0..len-1 (or reversed).
ScanOrder linear_order(std::size_t len, bool reverse = false);

}  // namespace tad::ssm
