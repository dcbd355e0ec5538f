#include "deco/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "deco/errors.hpp"
#include "deco/simd/kernels.hpp"

namespace deco {

namespace {

void expect_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " +
                         std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

void expect_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// Valid output range [t0, t1) for a tap shifted by `shift` samples.
struct TapRange {
  std::size_t t0;
  std::size_t len;
};

inline TapRange tap_range(long shift, long length) {
  long lo = std::max(0L, -shift);
  long hi = std::min(length, length - shift);
  if (hi <= lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo)};
}

}  // namespace

BatchNormState BatchNormState::fresh(std::size_t channels) {
  return BatchNormState{std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
}

// ---------------------------------------------------------------------------
// conv1d

Var conv1d(Graph& g, Var input, Var kernel, std::optional<Var> bias, int dilation, int groups) {
  const Tensor& x = g.value(input);
  const Tensor& w = g.value(kernel);
  expect_rank(x, 3, "conv1d", "input");
  expect_rank(w, 3, "conv1d", "kernel");
  if (dilation < 1 || groups < 1) throw ConfigError("conv1d: dilation and groups must be >= 1");

  const std::size_t batch = x.dim(0), cin = x.dim(1), length = x.dim(2);
  const std::size_t cout = w.dim(0), cin_per_group = w.dim(1), taps = w.dim(2);
  const auto ug = static_cast<std::size_t>(groups);
  if (cin % ug != 0 || cout % ug != 0 || cin_per_group != cin / ug) {
    throw DimensionError("conv1d: channels " + std::to_string(cin) + " -> " +
                         std::to_string(cout) + " incompatible with groups=" +
                         std::to_string(groups) + " and kernel " + shape_str(w.shape()));
  }
  if (bias) {
    const Tensor& b = g.value(*bias);
    if (b.rank() != 1 || b.dim(0) != cout) {
      throw DimensionError("conv1d: bias must be [" + std::to_string(cout) + "]");
    }
  }
  require_finite(x, "conv1d input");

  const long span = static_cast<long>(taps - 1) * dilation;
  const long pad_left = span / 2;
  const long len = static_cast<long>(length);
  const std::size_t cout_per_group = cout / ug;
  const auto& k = simd::active();

  Tensor out(Shape{batch, cout, length}, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* out_row = &out.at(b, co, 0);
      if (bias) std::fill(out_row, out_row + length, g.value(*bias)[co]);
      const std::size_t c_base = (co / cout_per_group) * cin_per_group;
      for (std::size_t ci = 0; ci < cin_per_group; ++ci) {
        const double* x_row = &x.at(b, c_base + ci, 0);
        const double* w_row = &w.at(co, ci, 0);
        for (std::size_t tap = 0; tap < taps; ++tap) {
          const long shift = static_cast<long>(tap) * dilation - pad_left;
          const TapRange r = tap_range(shift, len);
          if (r.len == 0) continue;
          k.axpy(w_row[tap], x_row + static_cast<long>(r.t0) + shift, out_row + r.t0, r.len);
        }
      }
    }
  }

  std::vector<Var> inputs{input, kernel};
  if (bias) inputs.push_back(*bias);
  return g.record(
      OpKind::Conv1d, std::move(inputs), std::move(out),
      [input, kernel, bias, dilation, pad_left, cout_per_group](Graph& gr, Var self) {
        const Tensor& xv = gr.value(input);
        const Tensor& wv = gr.value(kernel);
        const std::size_t nb = xv.dim(0), ci_total = xv.dim(1), nt = xv.dim(2);
        const std::size_t nco = wv.dim(0), cpg = wv.dim(1), nk = wv.dim(2);
        const long lt = static_cast<long>(nt);
        auto dout = gr.grad(self);
        const bool want_x = gr.requires_grad(input);
        const bool want_w = gr.requires_grad(kernel);
        const auto& kern = simd::active();
        std::span<double> dx = want_x ? gr.grad_buffer(input) : std::span<double>{};
        std::span<double> dw = want_w ? gr.grad_buffer(kernel) : std::span<double>{};

        for (std::size_t b = 0; b < nb; ++b) {
          for (std::size_t co = 0; co < nco; ++co) {
            const double* dout_row = dout.data() + (b * nco + co) * nt;
            const std::size_t c_base = (co / cout_per_group) * cpg;
            for (std::size_t ci = 0; ci < cpg; ++ci) {
              const std::size_t x_off = (b * ci_total + c_base + ci) * nt;
              const double* w_row = &wv.at(co, ci, 0);
              for (std::size_t tap = 0; tap < nk; ++tap) {
                const long shift = static_cast<long>(tap) * dilation - pad_left;
                const TapRange r = tap_range(shift, lt);
                if (r.len == 0) continue;
                const long src = static_cast<long>(x_off + r.t0) + shift;
                if (want_x) kern.axpy(w_row[tap], dout_row + r.t0, dx.data() + src, r.len);
                if (want_w) {
                  dw[(co * cpg + ci) * nk + tap] +=
                      kern.dot(dout_row + r.t0, xv.data().data() + src, r.len);
                }
              }
            }
          }
        }
        if (bias && gr.requires_grad(*bias)) {
          auto db = gr.grad_buffer(*bias);
          for (std::size_t b = 0; b < nb; ++b) {
            for (std::size_t co = 0; co < nco; ++co) {
              db[co] += kern.sum(dout.data() + (b * nco + co) * nt, nt);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// batch_norm_1d

Var batch_norm_1d(Graph& g, Var input, Var gamma, Var beta, BatchNormState& state, BnMode mode,
                  double momentum, double epsilon) {
  const Tensor& x = g.value(input);
  expect_rank(x, 3, "batch_norm_1d", "input");
  const std::size_t batch = x.dim(0), channels = x.dim(1), length = x.dim(2);
  const Tensor& gm = g.value(gamma);
  const Tensor& bt = g.value(beta);
  if (gm.numel() != channels || bt.numel() != channels) {
    throw DimensionError("batch_norm_1d: gamma/beta must have " + std::to_string(channels) +
                         " entries");
  }
  if (!(epsilon > 0.0)) throw ConfigError("batch_norm_1d: epsilon must be > 0");
  const auto& k = simd::active();
  Tensor out(x.shape(), 0.0);

  if (mode == BnMode::Eval) {
    if (!state.initialized(channels)) {
      throw StateError("batch_norm_1d: eval mode without running statistics");
    }
    std::vector<double> inv_std(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + epsilon);
      const double s = gm[c] * inv_std[c];
      const double shift = bt[c] - s * state.running_mean[c];
      for (std::size_t b = 0; b < batch; ++b) {
        k.affine(&x.at(b, c, 0), s, shift, &out.at(b, c, 0), length);
      }
    }
    std::vector<double> running_mean = state.running_mean;
    return g.record(
        OpKind::BatchNorm, {input, gamma, beta}, std::move(out),
        [input, gamma, beta, inv_std, running_mean](Graph& gr, Var self) {
          const Tensor& xv = gr.value(input);
          const Tensor& gv = gr.value(gamma);
          const std::size_t nb = xv.dim(0), nc = xv.dim(1), nt = xv.dim(2);
          auto dy = gr.grad(self);
          for (std::size_t c = 0; c < nc; ++c) {
            double dg = 0.0, dbeta = 0.0;
            for (std::size_t b = 0; b < nb; ++b) {
              const std::size_t off = (b * nc + c) * nt;
              for (std::size_t t = 0; t < nt; ++t) {
                const double d = dy[off + t];
                dbeta += d;
                dg += d * (xv[off + t] - running_mean[c]) * inv_std[c];
              }
              if (gr.requires_grad(input)) {
                auto dx = gr.grad_buffer(input);
                simd::active().axpy(gv[c] * inv_std[c], dy.data() + off, dx.data() + off, nt);
              }
            }
            if (gr.requires_grad(gamma)) gr.grad_buffer(gamma)[c] += dg;
            if (gr.requires_grad(beta)) gr.grad_buffer(beta)[c] += dbeta;
          }
        });
  }

  const double count = static_cast<double>(batch * length);
  Tensor xhat(x.shape(), 0.0);
  std::vector<double> inv_std(channels);
  if (!state.initialized(channels)) state = BatchNormState::fresh(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) total += k.sum(&x.at(b, c, 0), length);
    const double mean = total / count;
    double sq = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      double* centred = &xhat.at(b, c, 0);
      k.affine(&x.at(b, c, 0), 1.0, -mean, centred, length);
      sq += k.dot(centred, centred, length);
    }
    const double var = sq / count;
    inv_std[c] = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t b = 0; b < batch; ++b) {
      double* xh = &xhat.at(b, c, 0);
      k.affine(xh, inv_std[c], 0.0, xh, length);
      k.affine(xh, gm[c], bt[c], &out.at(b, c, 0), length);
    }
    const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
    state.running_mean[c] = momentum * state.running_mean[c] + (1.0 - momentum) * mean;
    state.running_var[c] = momentum * state.running_var[c] + (1.0 - momentum) * unbiased;
  }

  return g.record(
      OpKind::BatchNorm, {input, gamma, beta}, std::move(out),
      [input, gamma, beta, xhat = std::move(xhat), inv_std](Graph& gr, Var self) {
        const Tensor& gv = gr.value(gamma);
        const std::size_t nb = xhat.dim(0), nc = xhat.dim(1), nt = xhat.dim(2);
        const double m = static_cast<double>(nb * nt);
        auto dy = gr.grad(self);
        const auto& kern = simd::active();
        for (std::size_t c = 0; c < nc; ++c) {
          double dg = 0.0, dbeta = 0.0;
          for (std::size_t b = 0; b < nb; ++b) {
            const std::size_t off = (b * nc + c) * nt;
            dbeta += kern.sum(dy.data() + off, nt);
            dg += kern.dot(dy.data() + off, xhat.data().data() + off, nt);
          }
          if (gr.requires_grad(input)) {
            // dx = g*inv/M * (M*dy - sum(dy) - xhat*sum(dy*xhat))
            auto dx = gr.grad_buffer(input);
            const double a = gv[c] * inv_std[c];
            const double shift = -a * dbeta / m;
            const double xh_coef = -a * dg / m;
            for (std::size_t b = 0; b < nb; ++b) {
              const std::size_t off = (b * nc + c) * nt;
              for (std::size_t t = 0; t < nt; ++t) {
                dx[off + t] += a * dy[off + t] + shift + xh_coef * xhat[off + t];
              }
            }
          }
          if (gr.requires_grad(gamma)) gr.grad_buffer(gamma)[c] += dg;
          if (gr.requires_grad(beta)) gr.grad_buffer(beta)[c] += dbeta;
        }
      });
}

// ---------------------------------------------------------------------------
// elementwise and reductions

Var relu(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  Tensor out(xv.shape(), 0.0);
  for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return g.record(OpKind::Relu, {x}, std::move(out), [x](Graph& gr, Var self) {
    const Tensor& in = gr.value(x);
    auto dy = gr.grad(self);
    auto dx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (in[i] > 0.0) dx[i] += dy[i];
    }
  });
}

Var global_avg_pool(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  expect_rank(xv, 3, "global_avg_pool", "input");
  const std::size_t batch = xv.dim(0), channels = xv.dim(1), length = xv.dim(2);
  Tensor out(Shape{batch, channels}, 0.0);
  const auto& k = simd::active();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      out.at(b, c) = k.sum(&xv.at(b, c, 0), length) / static_cast<double>(length);
    }
  }
  return g.record(OpKind::GlobalAvgPool, {x}, std::move(out), [x](Graph& gr, Var self) {
    const Tensor& in = gr.value(x);
    const std::size_t nt = in.dim(2);
    const double inv = 1.0 / static_cast<double>(nt);
    auto dy = gr.grad(self);
    auto dx = gr.grad_buffer(x);
    for (std::size_t row = 0; row < dy.size(); ++row) {
      const double d = dy[row] * inv;
      for (std::size_t t = 0; t < nt; ++t) dx[row * nt + t] += d;
    }
  });
}

Var dense(Graph& g, Var x, Var weight, Var bias) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(weight);
  const Tensor& bv = g.value(bias);
  expect_rank(xv, 2, "dense", "input");
  expect_rank(wv, 2, "dense", "weight");
  const std::size_t batch = xv.dim(0), in = xv.dim(1), classes = wv.dim(0);
  if (wv.dim(1) != in || bv.numel() != classes) {
    throw DimensionError("dense: input " + shape_str(xv.shape()) + ", weight " +
                         shape_str(wv.shape()) + ", bias " + shape_str(bv.shape()));
  }
  const auto& k = simd::active();
  Tensor out(Shape{batch, classes}, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < classes; ++c) {
      out.at(b, c) = bv[c] + k.dot(&xv.at(b, 0), &wv.at(c, 0), in);
    }
  }
  return g.record(OpKind::Dense, {x, weight, bias}, std::move(out),
                  [x, weight, bias](Graph& gr, Var self) {
                    const Tensor& xi = gr.value(x);
                    const Tensor& wi = gr.value(weight);
                    const std::size_t nb = xi.dim(0), nin = xi.dim(1), ncls = wi.dim(0);
                    auto dy = gr.grad(self);
                    const auto& kern = simd::active();
                    for (std::size_t b = 0; b < nb; ++b) {
                      for (std::size_t c = 0; c < ncls; ++c) {
                        const double d = dy[b * ncls + c];
                        if (gr.requires_grad(x)) {
                          kern.axpy(d, &wi.at(c, 0), gr.grad_buffer(x).data() + b * nin, nin);
                        }
                        if (gr.requires_grad(weight)) {
                          kern.axpy(d, &xi.at(b, 0), gr.grad_buffer(weight).data() + c * nin,
                                    nin);
                        }
                        if (gr.requires_grad(bias)) gr.grad_buffer(bias)[c] += d;
                      }
                    }
                  });
}

Var softmax_cross_entropy(Graph& g, Var logits, const Tensor& targets) {
  const Tensor& z = g.value(logits);
  expect_rank(z, 2, "softmax_cross_entropy", "logits");
  expect_same_shape(z, targets, "softmax_cross_entropy");
  const std::size_t batch = z.dim(0), classes = z.dim(1);
  std::vector<std::size_t> truth(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t ones = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double t = targets.at(b, c);
      if (t == 1.0) {
        ++ones;
        truth[b] = c;
      } else if (t != 0.0) {
        ones = 2;
      }
    }
    if (ones != 1) throw InputError("softmax_cross_entropy: target row " + std::to_string(b) +
                                    " is not one-hot");
  }
  Tensor probs = softmax_rows(z);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    double top = z.at(b, 0);
    for (std::size_t c = 1; c < classes; ++c) top = std::max(top, z.at(b, c));
    double acc = 0.0;
    for (std::size_t c = 0; c < classes; ++c) acc += std::exp(z.at(b, c) - top);
    loss += std::log(acc) + top - z.at(b, truth[b]);
  }
  loss /= static_cast<double>(batch);
  return g.record(OpKind::SoftmaxCrossEntropy, {logits}, Tensor::scalar(loss),
                  [logits, probs = std::move(probs), truth](Graph& gr, Var self) {
                    const double d = gr.grad(self)[0];
                    const std::size_t nb = probs.dim(0), ncls = probs.dim(1);
                    auto dz = gr.grad_buffer(logits);
                    const double inv = d / static_cast<double>(nb);
                    for (std::size_t b = 0; b < nb; ++b) {
                      for (std::size_t c = 0; c < ncls; ++c) {
                        double p = probs.at(b, c) - (c == truth[b] ? 1.0 : 0.0);
                        dz[b * ncls + c] += p * inv;
                      }
                    }
                  });
}

Tensor softmax_rows(const Tensor& logits) {
  expect_rank(logits, 2, "softmax_rows", "logits");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  Tensor out(logits.shape(), 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    double top = logits.at(b, 0);
    for (std::size_t c = 1; c < classes; ++c) top = std::max(top, logits.at(b, c));
    double acc = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      out.at(b, c) = std::exp(logits.at(b, c) - top);
      acc += out.at(b, c);
    }
    for (std::size_t c = 0; c < classes; ++c) out.at(b, c) /= acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// cosine similarity

Var cosine_similarity_matrix(Graph& g, Var a, Var b, double epsilon) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  expect_same_shape(av, bv, "cosine_similarity_matrix");
  if (av.rank() != 2 && av.rank() != 3) {
    throw DimensionError("cosine_similarity_matrix: expected [C,T] or [B,C,T], got " +
                         shape_str(av.shape()));
  }
  if (!(epsilon > 0.0)) throw ConfigError("cosine_similarity_matrix: epsilon must be > 0");
  const bool batched = av.rank() == 3;
  const std::size_t batch = batched ? av.dim(0) : 1;
  const std::size_t rows = batched ? av.dim(1) : av.dim(0);
  const std::size_t length = batched ? av.dim(2) : av.dim(1);
  const auto& k = simd::active();

  std::vector<double> norm_a(batch * rows), norm_b(batch * rows), dots(batch * rows * rows);
  Tensor out(batched ? Shape{batch, rows, rows} : Shape{rows, rows}, 0.0);
  const double* pa = av.data().data();
  const double* pb = bv.data().data();
  for (std::size_t s = 0; s < batch; ++s) {
    for (std::size_t i = 0; i < rows; ++i) {
      const double* ai = pa + (s * rows + i) * length;
      const double* bi = pb + (s * rows + i) * length;
      norm_a[s * rows + i] = std::sqrt(k.dot(ai, ai, length));
      norm_b[s * rows + i] = std::sqrt(k.dot(bi, bi, length));
    }
    for (std::size_t i = 0; i < rows; ++i) {
      const double* ai = pa + (s * rows + i) * length;
      for (std::size_t j = 0; j < rows; ++j) {
        const double* bj = pb + (s * rows + j) * length;
        const std::size_t idx = (s * rows + i) * rows + j;
        dots[idx] = k.dot(ai, bj, length);
        out[idx] = dots[idx] / (norm_a[s * rows + i] * norm_b[s * rows + j] + epsilon);
      }
    }
  }

  return g.record(
      OpKind::CosineSimilarity, {a, b}, std::move(out),
      [a, b, epsilon, batch, rows, length, norm_a = std::move(norm_a), norm_b = std::move(norm_b),
       dots = std::move(dots)](Graph& gr, Var self) {
        auto ds = gr.grad(self);
        const double* pa_ = gr.value(a).data().data();
        const double* pb_ = gr.value(b).data().data();
        const bool want_a = gr.requires_grad(a);
        const bool want_b = gr.requires_grad(b);
        std::span<double> da = want_a ? gr.grad_buffer(a) : std::span<double>{};
        std::span<double> db = want_b ? gr.grad_buffer(b) : std::span<double>{};
        const auto& kern = simd::active();
        for (std::size_t s = 0; s < batch; ++s) {
          for (std::size_t i = 0; i < rows; ++i) {
            const double na = norm_a[s * rows + i];
            const double* ai = pa_ + (s * rows + i) * length;
            double self_coef_a = 0.0;
            for (std::size_t j = 0; j < rows; ++j) {
              const std::size_t idx = (s * rows + i) * rows + j;
              const double gs = ds[idx];
              if (gs == 0.0) continue;
              const double nb = norm_b[s * rows + j];
              const double den = na * nb + epsilon;
              const double d = dots[idx];
              const double* bj = pb_ + (s * rows + j) * length;
              // d/da_i = b_j / den - d * nb * a_i / (na * den^2)
              if (want_a) {
                kern.axpy(gs / den, bj, da.data() + (s * rows + i) * length, length);
                if (na > 0.0) self_coef_a -= gs * d * nb / (na * den * den);
              }
              if (want_b) {
                double* dbj = db.data() + (s * rows + j) * length;
                kern.axpy(gs / den, ai, dbj, length);
                if (nb > 0.0) kern.axpy(-gs * d * na / (nb * den * den), bj, dbj, length);
              }
            }
            if (want_a && self_coef_a != 0.0) {
              kern.axpy(self_coef_a, ai, da.data() + (s * rows + i) * length, length);
            }
          }
        }
      });
}

Var abs(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  Tensor out(xv.shape(), 0.0);
  for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = std::fabs(xv[i]);
  return g.record(OpKind::Abs, {x}, std::move(out), [x](Graph& gr, Var self) {
    const Tensor& in = gr.value(x);
    auto dy = gr.grad(self);
    auto dx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (in[i] > 0.0) {
        dx[i] += dy[i];
      } else if (in[i] < 0.0) {
        dx[i] -= dy[i];
      }
    }
  });
}

Var sum_offdiagonal(Graph& g, Var x, bool include_diagonal) {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 2 && xv.rank() != 3) {
    throw DimensionError("sum_offdiagonal: expected [C,C] or [B,C,C], got " +
                         shape_str(xv.shape()));
  }
  const std::size_t n = xv.shape().back();
  if (xv.shape()[xv.rank() - 2] != n) {
    throw DimensionError("sum_offdiagonal: matrix not square " + shape_str(xv.shape()));
  }
  const std::size_t mats = xv.rank() == 3 ? xv.dim(0) : 1;
  double total = 0.0;
  for (std::size_t s = 0; s < mats; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j || include_diagonal) total += xv[(s * n + i) * n + j];
      }
    }
  }
  return g.record(OpKind::SumOffDiagonal, {x}, Tensor::scalar(total),
                  [x, include_diagonal, mats, n](Graph& gr, Var self) {
                    const double d = gr.grad(self)[0];
                    auto dx = gr.grad_buffer(x);
                    for (std::size_t s = 0; s < mats; ++s) {
                      for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = 0; j < n; ++j) {
                          if (i != j || include_diagonal) dx[(s * n + i) * n + j] += d;
                        }
                      }
                    }
                  });
}

Var sum(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  double total = 0.0;
  for (double v : xv.data()) total += v;
  return g.record(OpKind::Sum, {x}, Tensor::scalar(total), [x](Graph& gr, Var self) {
    const double d = gr.grad(self)[0];
    for (double& v : gr.grad_buffer(x)) v += d;
  });
}

Var scale(Graph& g, Var x, double factor) {
  const Tensor& xv = g.value(x);
  Tensor out(xv.shape(), 0.0);
  for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = factor * xv[i];
  return g.record(OpKind::Scale, {x}, std::move(out), [x, factor](Graph& gr, Var self) {
    auto dy = gr.grad(self);
    auto dx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += factor * dy[i];
  });
}

Var add(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  expect_same_shape(av, bv, "add");
  Tensor out(av.shape(), 0.0);
  for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] + bv[i];
  return g.record(OpKind::Add, {a, b}, std::move(out), [a, b](Graph& gr, Var self) {
    auto dy = gr.grad(self);
    for (Var v : {a, b}) {
      if (!gr.requires_grad(v)) continue;
      auto dx = gr.grad_buffer(v);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
    }
  });
}

Var mul(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  expect_same_shape(av, bv, "mul");
  Tensor out(av.shape(), 0.0);
  for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] * bv[i];
  return g.record(OpKind::Mul, {a, b}, std::move(out), [a, b](Graph& gr, Var self) {
    auto dy = gr.grad(self);
    const Tensor& va = gr.value(a);
    const Tensor& vb = gr.value(b);
    if (gr.requires_grad(a)) {
      auto da = gr.grad_buffer(a);
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += dy[i] * vb[i];
    }
    if (gr.requires_grad(b)) {
      auto db = gr.grad_buffer(b);
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += dy[i] * va[i];
    }
  });
}

Var concat_channels(Graph& g, std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat_channels: nothing to concatenate");
  const Tensor& first = g.value(parts[0]);
  expect_rank(first, 3, "concat_channels", "part");
  const std::size_t batch = first.dim(0), length = first.dim(2);
  std::size_t channels = 0;
  for (Var p : parts) {
    const Tensor& t = g.value(p);
    expect_rank(t, 3, "concat_channels", "part");
    if (t.dim(0) != batch || t.dim(2) != length) {
      throw DimensionError("concat_channels: batch/length mismatch " + shape_str(t.shape()));
    }
    channels += t.dim(1);
  }
  Tensor out(Shape{batch, channels, length}, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t c0 = 0;
    for (Var p : parts) {
      const Tensor& t = g.value(p);
      const std::size_t n = t.dim(1) * length;
      std::copy_n(&t.at(b, 0, 0), n, &out.at(b, c0, 0));
      c0 += t.dim(1);
    }
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.record(OpKind::ConcatChannels, inputs, std::move(out),
                  [inputs, batch, channels, length](Graph& gr, Var self) {
                    auto dy = gr.grad(self);
                    std::size_t c0 = 0;
                    for (Var p : inputs) {
                      const std::size_t pc = gr.value(p).dim(1);
                      if (gr.requires_grad(p)) {
                        auto dx = gr.grad_buffer(p);
                        for (std::size_t b = 0; b < batch; ++b) {
                          const double* src = dy.data() + (b * channels + c0) * length;
                          double* dst = dx.data() + b * pc * length;
                          for (std::size_t i = 0; i < pc * length; ++i) dst[i] += src[i];
                        }
                      }
                      c0 += pc;
                    }
                  });
}

}  // namespace deco
