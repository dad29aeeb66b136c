#include "tad/ssm.hpp"

#include <cmath>
#include <stdexcept>

#include "tad/nn.hpp"
#include "tad/ops.hpp"

namespace tad::ssm {

void validate_order(const ScanOrder& order, std::size_t rows) {
  std::vector<char> seen(rows, 0);
  std::size_t count = 0;
  for (const auto& seq : order) {
    for (std::size_t r : seq) {
      if (r >= rows) throw std::out_of_range("scan order index out of range");
      if (seen[r]) throw std::invalid_argument("scan order visits a row twice");
      seen[r] = 1;
      ++count;
    }
  }
  if (count != rows) throw std::invalid_argument("scan order does not cover every row");
}

namespace {

struct Dims {
  std::size_t rows, channels, state;
};

Dims check_shapes(const Tensor& u, const Tensor& delta, const Tensor& A, const Tensor& B,
                  const Tensor& Cm, const Tensor& D) {
  if (u.rank() != 2) throw ShapeError("selective_scan: u must be [R, C]");
  const std::size_t r = u.dim(0), c = u.dim(1);
  if (A.rank() != 2 || A.dim(0) != c) throw ShapeError("selective_scan: A must be [C, N]");
  const std::size_t n = A.dim(1);
  if (delta.shape() != u.shape()) throw ShapeError("selective_scan: delta must match u");
  if (B.shape() != Shape{r, n} || Cm.shape() != Shape{r, n}) {
    throw ShapeError("selective_scan: B and C must be [R, N]");
  }
  if (D.shape() != Shape{c}) throw ShapeError("selective_scan: D must be [C]");
  return {r, c, n};
}

// Runs the recurrence; when `states` is non-null it receives h for every row
// as [R, C, N].
Tensor run_forward(const Tensor& u, const Tensor& delta, const Tensor& A, const Tensor& B,
                   const Tensor& Cm, const Tensor& D, const ScanOrder& order, Dims dims,
                   std::vector<double>* states) {
  const auto [rows, nc, ns] = dims;
  Tensor y(Shape{rows, nc});
  std::vector<double> h(nc * ns);
  const double* ua = u.data().data();
  const double* da = delta.data().data();
  const double* aa = A.data().data();
  const double* ba = B.data().data();
  const double* ca = Cm.data().data();
  const double* dd = D.data().data();
  if (states) states->assign(rows * nc * ns, 0.0);
  for (const auto& seq : order) {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t r : seq) {
      const double* urow = ua + r * nc;
      const double* drow = da + r * nc;
      const double* brow = ba + r * ns;
      const double* crow = ca + r * ns;
      double* yrow = y.data().data() + r * nc;
      for (std::size_t c = 0; c < nc; ++c) {
        const double dt = drow[c];
        const double x = dt * urow[c];
        const double* arow = aa + c * ns;
        double* hc = h.data() + c * ns;
        double acc = 0.0;
        for (std::size_t k = 0; k < ns; ++k) {
          hc[k] = std::exp(dt * arow[k]) * hc[k] + x * brow[k];
          acc += crow[k] * hc[k];
        }
        yrow[c] = acc + dd[c] * urow[c];
      }
      if (states) std::copy(h.begin(), h.end(), states->begin() + r * nc * ns);
    }
  }
  if (!all_finite(y.data())) throw NonFiniteError("selective_scan: non-finite output");
  return y;
}

}  // namespace

Tensor selective_scan_forward(const Tensor& u, const Tensor& delta, const Tensor& A,
                              const Tensor& B, const Tensor& Cm, const Tensor& D,
                              const ScanOrder& order) {
  const Dims dims = check_shapes(u, delta, A, B, Cm, D);
  validate_order(order, dims.rows);
  return run_forward(u, delta, A, B, Cm, D, order, dims, nullptr);
}

Var selective_scan_core(const Var& u, const Var& delta, const Var& A, const Var& B, const Var& Cm,
                        const Var& D, const ScanOrder& order) {
  const Dims dims = check_shapes(u.value(), delta.value(), A.value(), B.value(), Cm.value(),
                                 D.value());
  validate_order(order, dims.rows);
  const bool need_grad = u.requires_grad() || delta.requires_grad() || A.requires_grad() ||
                         B.requires_grad() || Cm.requires_grad() || D.requires_grad();
  auto states = std::make_shared<std::vector<double>>();
  Tensor y = run_forward(u.value(), delta.value(), A.value(), B.value(), Cm.value(), D.value(),
                         order, dims, need_grad ? states.get() : nullptr);

  return GradTape::record(
      "selective_scan", std::move(y), {u, delta, A, B, Cm, D},
      [u, delta, A, B, Cm, D, order, dims, states](const Tensor& gy, std::vector<Tensor*>& gi) {
        const auto [rows, nc, ns] = dims;
        (void)rows;
        const double* ua = u.value().data().data();
        const double* da = delta.value().data().data();
        const double* aa = A.value().data().data();
        const double* ba = B.value().data().data();
        const double* ca = Cm.value().data().data();
        const double* dd = D.value().data().data();
        const double* hs = states->data();

        // Scratch buffers so the inner loop never branches on gi[k].
        std::vector<double> gu(u.value().size()), gdelta(delta.value().size());
        std::vector<double> gA(A.value().size()), gB(B.value().size()), gC(Cm.value().size());
        std::vector<double> gD(D.value().size());
        std::vector<double> gh(nc * ns);

        for (const auto& seq : order) {
          std::fill(gh.begin(), gh.end(), 0.0);
          for (std::size_t pos = seq.size(); pos-- > 0;) {
            const std::size_t r = seq[pos];
            const double* hprev = pos > 0 ? hs + seq[pos - 1] * nc * ns : nullptr;
            const double* hcur = hs + r * nc * ns;
            const double* urow = ua + r * nc;
            const double* drow = da + r * nc;
            const double* brow = ba + r * ns;
            const double* crow = ca + r * ns;
            const double* gyrow = gy.data().data() + r * nc;
            double* gbrow = gB.data() + r * ns;
            double* gcrow = gC.data() + r * ns;
            for (std::size_t c = 0; c < nc; ++c) {
              const double g = gyrow[c];
              const double uc = urow[c];
              const double dt = drow[c];
              const double* arow = aa + c * ns;
              double* gac = gA.data() + c * ns;
              double* ghc = gh.data() + c * ns;
              const double* hc = hcur + c * ns;
              gD[c] += g * uc;
              double gu_c = g * dd[c];
              double gdt = 0.0;
              for (std::size_t k = 0; k < ns; ++k) {
                gcrow[k] += g * hc[k];
                const double ghk = ghc[k] + g * crow[k];
                const double abar = std::exp(dt * arow[k]);
                if (hprev) {
                  const double gabar = ghk * hprev[c * ns + k] * abar;
                  gdt += gabar * arow[k];
                  gac[k] += gabar * dt;
                }
                gdt += ghk * brow[k] * uc;
                gbrow[k] += ghk * dt * uc;
                gu_c += ghk * dt * brow[k];
                ghc[k] = ghk * abar;
              }
              gu[r * nc + c] += gu_c;
              gdelta[r * nc + c] += gdt;
            }
          }
        }
        const std::vector<double>* scratch[] = {&gu, &gdelta, &gA, &gB, &gC, &gD};
        for (std::size_t i = 0; i < 6; ++i) {
          if (!gi[i]) continue;
          for (std::size_t k = 0; k < gi[i]->size(); ++k) (*gi[i])[k] += (*scratch[i])[k];
        }
      });
}

std::size_t add_scan_params(ParameterSet& params, const std::string& prefix, std::size_t channels,
                            std::size_t state_dim, std::mt19937_64& rng) {
  const std::size_t first = params.size();
  Tensor a_log(Shape{channels, state_dim});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t n = 0; n < state_dim; ++n) a_log.at(c, n) = std::log(static_cast<double>(n + 1));
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  const double proj_std = 1.0 / std::sqrt(static_cast<double>(channels));
  auto random = [&](Shape shape, double stddev) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = stddev * normal(rng);
    return t;
  };
  // Step sizes start log-uniform in [1e-3, 1e-1].
  std::uniform_real_distribution<double> uni(std::log(1e-3), std::log(1e-1));
  Tensor b_dt(Shape{channels});
  for (double& v : b_dt.data()) {
    const double dt = std::exp(uni(rng));
    v = dt + std::log(-std::expm1(-dt));  // inverse softplus
  }
  params.add(prefix + ".a_log", std::move(a_log));
  params.add(prefix + ".w_b", random({channels, state_dim}, proj_std));
  params.add(prefix + ".w_c", random({channels, state_dim}, proj_std));
  params.add(prefix + ".w_dt", random({channels, channels}, 0.1 * proj_std));
  params.add(prefix + ".b_dt", std::move(b_dt));
  params.add(prefix + ".d", Tensor(Shape{channels}, 1.0));
  return first;
}

ScanWeights bind_scan(const std::vector<Var>& bound, std::size_t first) {
  return ScanWeights{bound.at(first),     bound.at(first + 1), bound.at(first + 2),
                     bound.at(first + 3), bound.at(first + 4), bound.at(first + 5)};
}

Var selective_scan(const Var& u, const ScanWeights& w, const ScanOrder& order) {
  Var delta = ops::softplus(ops::add_bias(ops::matmul(u, w.w_dt), w.b_dt));
  Var b = ops::matmul(u, w.w_b);
  Var c = ops::matmul(u, w.w_c);
  Var a = ops::neg(ops::exp(w.a_log));
  return selective_scan_core(u, delta, a, b, c, w.d, order);
}

ScanOrder linear_order(std::size_t len, bool reverse) {
  std::vector<std::size_t> seq(len);
  for (std::size_t i = 0; i < len; ++i) seq[i] = reverse ? len - 1 - i : i;
  return {seq};
}

}  // namespace tad::ssm
