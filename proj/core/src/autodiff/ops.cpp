#include "tasktcn/autodiff/ops.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace tasktcn::autodiff {

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace testing {
std::string& flipped_backward_op() {
  thread_local std::string op;
  return op;
}
}  // namespace testing

namespace {

template <typename T>
void require_same_tape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw ContractViolation(std::string(op) + ": operands must live on the same tape");
  }
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  require_same_tape(a, b, op);
  if (a.shape() != b.shape()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                            " vs " + shape_to_string(b.shape()));
  }
}

template <typename T>
bool wants_grad(Tape<T>& tape, std::size_t id) {
  return tape.requires_grad(id);
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  const auto bv = b.value().values();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("add", std::move(out), {ia, ib}, [ia, ib](Tape<T>& tape, std::size_t self) {
    for (std::size_t in : {ia, ib}) {
      if (!wants_grad(tape, in)) continue;
      auto& g = tape.grad_buffer(in);
      const auto& up = tape.grad_buffer(self);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += up[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out = a.value();
  const auto bv = b.value().values();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("sub", std::move(out), {ia, ib}, [ia, ib](Tape<T>& tape, std::size_t self) {
    const auto& up = tape.grad_buffer(self);
    if (wants_grad(tape, ia)) {
      auto& g = tape.grad_buffer(ia);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += up[i];
    }
    if (wants_grad(tape, ib)) {
      auto& g = tape.grad_buffer(ib);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] -= up[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out = a.value();
  const auto bv = b.value().values();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("mul", std::move(out), {ia, ib}, [ia, ib](Tape<T>& tape, std::size_t self) {
    const auto& up = tape.grad_buffer(self);
    if (wants_grad(tape, ia)) {
      auto& g = tape.grad_buffer(ia);
      const auto& bv = tape.value(ib);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += up[i] * bv[i];
    }
    if (wants_grad(tape, ib)) {
      auto& g = tape.grad_buffer(ib);
      const auto& av = tape.value(ia);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += up[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out = a.value();
  for (T& v : out.values()) v *= factor;
  const std::size_t ia = a.id();
  return a.tape().record("scale", std::move(out), {ia}, [ia, factor](Tape<T>& tape, std::size_t self) {
    auto& g = tape.grad_buffer(ia);
    const auto& up = tape.grad_buffer(self);
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += factor * up[i];
  });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T total{0};
  for (T v : a.value().values()) total += v;
  const std::size_t ia = a.id();
  return a.tape().record("sum", Tensor<T>::scalar(total), {ia}, [ia](Tape<T>& tape, std::size_t self) {
    const T up = tape.grad_buffer(self)[0];
    for (T& g : tape.grad_buffer(ia).values()) g += up;
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  const std::size_t n = a.value().numel();
  if (n == 0) throw ContractViolation("mean of empty tensor");
  T total{0};
  for (T v : a.value().values()) total += v;
  const std::size_t ia = a.id();
  return a.tape().record("mean", Tensor<T>::scalar(total / static_cast<T>(n)), {ia},
                         [ia, n](Tape<T>& tape, std::size_t self) {
                           const T up = tape.grad_buffer(self)[0] / static_cast<T>(n);
                           for (T& g : tape.grad_buffer(ia).values()) g += up;
                         });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  Tensor<T> out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return a.tape().record("reshape", std::move(out), {ia}, [ia](Tape<T>& tape, std::size_t self) {
    auto& g = tape.grad_buffer(ia);
    const auto& up = tape.grad_buffer(self);
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += up[i];
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (T& v : out.values()) v = v > T{0} ? v : T{0};
  const std::size_t ix = x.id();
  return x.tape().record("relu", std::move(out), {ix}, [ix](Tape<T>& tape, std::size_t self) {
    auto& g = tape.grad_buffer(ix);
    const auto& up = tape.grad_buffer(self);
    const auto& xv = tape.value(ix);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      if (xv[i] > T{0}) g[i] += up[i];
    }
  });
}

template <typename T>
Var<T> softplus(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (T& v : out.values()) v = v > T{20} ? v : std::log1p(std::exp(v));
  const std::size_t ix = x.id();
  return x.tape().record("softplus", std::move(out), {ix}, [ix](Tape<T>& tape, std::size_t self) {
    auto& g = tape.grad_buffer(ix);
    const auto& up = tape.grad_buffer(self);
    const auto& xv = tape.value(ix);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const T s = xv[i] > T{20} ? T{1} : T{1} / (T{1} + std::exp(-xv[i]));
      g[i] += up[i] * s;
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  require_same_tape(x, weight, "linear");
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1]) {
    throw ContractViolation("linear: incompatible shapes x" + shape_to_string(xs) + " W" +
                            shape_to_string(ws));
  }
  const std::size_t n = xs[0], fin = xs[1], fout = ws[0];
  const bool has_bias = bias.valid();
  if (has_bias) {
    require_same_tape(x, bias, "linear");
    if (bias.shape() != Shape{fout}) {
      throw ContractViolation("linear: bias shape " + shape_to_string(bias.shape()));
    }
  }
  Tensor<T> out({n, fout});
  const T* xv = x.value().data();
  const T* wv = weight.value().data();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t o = 0; o < fout; ++o) {
      T acc = has_bias ? bias.value()[o] : T{0};
      const T* xr = xv + r * fin;
      const T* wr = wv + o * fin;
      for (std::size_t i = 0; i < fin; ++i) acc += xr[i] * wr[i];
      out[r * fout + o] = acc;
    }
  }
  std::vector<std::size_t> inputs{x.id(), weight.id()};
  if (has_bias) inputs.push_back(bias.id());
  const std::size_t ix = x.id(), iw = weight.id(), ib = has_bias ? bias.id() : 0;
  return x.tape().record(
      "linear", std::move(out), std::move(inputs),
      [=](Tape<T>& tape, std::size_t self) {
        const T* up = tape.grad_buffer(self).data();
        const T* xd = tape.value(ix).data();
        const T* wd = tape.value(iw).data();
        if (wants_grad(tape, ix)) {
          T* gx = tape.grad_buffer(ix).data();
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t o = 0; o < fout; ++o) {
              const T u = up[r * fout + o];
              const T* wr = wd + o * fin;
              T* gr = gx + r * fin;
              for (std::size_t i = 0; i < fin; ++i) gr[i] += u * wr[i];
            }
          }
        }
        if (wants_grad(tape, iw)) {
          T* gw = tape.grad_buffer(iw).data();
          for (std::size_t r = 0; r < n; ++r) {
            const T* xr = xd + r * fin;
            for (std::size_t o = 0; o < fout; ++o) {
              const T u = up[r * fout + o];
              T* gr = gw + o * fin;
              for (std::size_t i = 0; i < fin; ++i) gr[i] += u * xr[i];
            }
          }
        }
        if (has_bias && wants_grad(tape, ib)) {
          T* gb = tape.grad_buffer(ib).data();
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t o = 0; o < fout; ++o) gb[o] += up[r * fout + o];
          }
        }
      });
}

template <typename T>
Var<T> conv1d_causal(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
                     std::size_t dilation) {
  require_same_tape(x, weight, "conv1d_causal");
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (xs.size() != 3 || ws.size() != 3) {
    throw ContractViolation("conv1d_causal: expected x[N,C,T] and w[O,C,K], got " +
                            shape_to_string(xs) + " and " + shape_to_string(ws));
  }
  if (xs[1] != ws[1]) {
    throw ContractViolation("conv1d_causal: channel mismatch, input has " +
                            std::to_string(xs[1]) + ", weight expects " + std::to_string(ws[1]));
  }
  if (xs[2] == 0) throw ContractViolation("conv1d_causal: empty time axis");
  if (ws[2] == 0 || dilation == 0) {
    throw ContractViolation("conv1d_causal: kernel size and dilation must be >= 1");
  }
  const std::size_t n = xs[0], cin = xs[1], len = xs[2], cout = ws[0], ksize = ws[2];
  const bool has_bias = bias.valid();
  if (has_bias) {
    require_same_tape(x, bias, "conv1d_causal");
    if (bias.shape() != Shape{cout}) {
      throw ContractViolation("conv1d_causal: bias shape " + shape_to_string(bias.shape()));
    }
  }

  Tensor<T> out({n, cout, len});
  const T* xv = x.value().data();
  const T* wv = weight.value().data();
  T* ov = out.data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t o = 0; o < cout; ++o) {
      T* orow = ov + (b * cout + o) * len;
      const T init = has_bias ? bias.value()[o] : T{0};
      for (std::size_t t = 0; t < len; ++t) orow[t] = init;
      for (std::size_t c = 0; c < cin; ++c) {
        const T* xrow = xv + (b * cin + c) * len;
        for (std::size_t k = 0; k < ksize; ++k) {
          const std::size_t shift = (ksize - 1 - k) * dilation;
          if (shift >= len) continue;
          const T wk = wv[(o * cin + c) * ksize + k];
          for (std::size_t t = shift; t < len; ++t) orow[t] += wk * xrow[t - shift];
        }
      }
    }
  }

  std::vector<std::size_t> inputs{x.id(), weight.id()};
  if (has_bias) inputs.push_back(bias.id());
  const std::size_t ix = x.id(), iw = weight.id(), ib = has_bias ? bias.id() : 0;
  return x.tape().record(
      "conv1d_causal", std::move(out), std::move(inputs),
      [=](Tape<T>& tape, std::size_t self) {
        const T* up = tape.grad_buffer(self).data();
        const T* xd = tape.value(ix).data();
        const T* wd = tape.value(iw).data();
        const bool gx_needed = wants_grad(tape, ix);
        const bool gw_needed = wants_grad(tape, iw);
        T* gx = gx_needed ? tape.grad_buffer(ix).data() : nullptr;
        T* gw = gw_needed ? tape.grad_buffer(iw).data() : nullptr;
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t o = 0; o < cout; ++o) {
            const T* urow = up + (b * cout + o) * len;
            for (std::size_t c = 0; c < cin; ++c) {
              const T* xrow = xd + (b * cin + c) * len;
              T* gxrow = gx_needed ? gx + (b * cin + c) * len : nullptr;
              for (std::size_t k = 0; k < ksize; ++k) {
                const std::size_t shift = (ksize - 1 - k) * dilation;
                if (shift >= len) continue;
                const std::size_t widx = (o * cin + c) * ksize + k;
                if (gx_needed) {
                  const T wk = wd[widx];
                  for (std::size_t t = shift; t < len; ++t) gxrow[t - shift] += wk * urow[t];
                }
                if (gw_needed) {
                  T acc{0};
                  for (std::size_t t = shift; t < len; ++t) acc += urow[t] * xrow[t - shift];
                  gw[widx] += acc;
                }
              }
            }
          }
        }
        if (has_bias && wants_grad(tape, ib)) {
          T* gb = tape.grad_buffer(ib).data();
          for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t o = 0; o < cout; ++o) {
              const T* urow = up + (b * cout + o) * len;
              T acc{0};
              for (std::size_t t = 0; t < len; ++t) acc += urow[t];
              gb[o] += acc;
            }
          }
        }
      });
}

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  RunningStats<T>* stats, Phase phase, T momentum, T eps) {
  require_same_tape(x, gamma, "batch_norm");
  require_same_tape(x, beta, "batch_norm");
  const Shape& xs = x.shape();
  if (xs.size() != 2 && xs.size() != 3) {
    throw ContractViolation("batch_norm: expected [N,C] or [N,C,T], got " + shape_to_string(xs));
  }
  const std::size_t n = xs[0], channels = xs[1], len = xs.size() == 3 ? xs[2] : 1;
  if (gamma.shape() != Shape{channels} || beta.shape() != Shape{channels}) {
    throw ContractViolation("batch_norm: affine parameters must have shape [" +
                            std::to_string(channels) + "]");
  }
  const std::size_t count = n * len;
  if (phase == Phase::eval && stats == nullptr) {
    throw ContractViolation("batch_norm: eval mode requires running statistics");
  }
  if (stats != nullptr &&
      (stats->mean.shape() != Shape{channels} || stats->var.shape() != Shape{channels})) {
    throw ContractViolation("batch_norm: running statistics have wrong shape");
  }
  if (phase == Phase::train && n < 2 && len < 2) {
    throw ContractViolation("batch_norm: train mode needs at least two values per channel");
  }

  const T* xv = x.value().data();
  const T* gv = gamma.value().data();
  const T* bv = beta.value().data();
  std::vector<T> mu(channels), inv_std(channels);
  if (phase == Phase::train) {
    for (std::size_t c = 0; c < channels; ++c) {
      T s{0};
      for (std::size_t b = 0; b < n; ++b) {
        const T* row = xv + (b * channels + c) * len;
        for (std::size_t t = 0; t < len; ++t) s += row[t];
      }
      const T m = s / static_cast<T>(count);
      T ss{0};
      for (std::size_t b = 0; b < n; ++b) {
        const T* row = xv + (b * channels + c) * len;
        for (std::size_t t = 0; t < len; ++t) ss += (row[t] - m) * (row[t] - m);
      }
      const T var = ss / static_cast<T>(count);
      mu[c] = m;
      inv_std[c] = T{1} / std::sqrt(var + eps);
      if (stats != nullptr) {
        const T unbiased = ss / static_cast<T>(count - 1);
        stats->mean[c] = (T{1} - momentum) * stats->mean[c] + momentum * m;
        stats->var[c] = (T{1} - momentum) * stats->var[c] + momentum * unbiased;
      }
    }
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      mu[c] = stats->mean[c];
      inv_std[c] = T{1} / std::sqrt(stats->var[c] + eps);
    }
  }

  Tensor<T> xhat(xs);
  Tensor<T> out(xs);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (b * channels + c) * len;
      for (std::size_t t = 0; t < len; ++t) {
        const T h = (xv[base + t] - mu[c]) * inv_std[c];
        xhat[base + t] = h;
        out[base + t] = gv[c] * h + bv[c];
      }
    }
  }

  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  const bool train = phase == Phase::train;
  return x.tape().record(
      "batch_norm", std::move(out), {ix, ig, ib},
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& tape, std::size_t self) {
        const T* up = tape.grad_buffer(self).data();
        const T* gd = tape.value(ig).data();
        if (wants_grad(tape, ig) || wants_grad(tape, ib)) {
          std::vector<T> dgamma(channels, T{0}), dbeta(channels, T{0});
          for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t c = 0; c < channels; ++c) {
              const std::size_t base = (b * channels + c) * len;
              for (std::size_t t = 0; t < len; ++t) {
                dgamma[c] += up[base + t] * xhat[base + t];
                dbeta[c] += up[base + t];
              }
            }
          }
          if (wants_grad(tape, ig)) {
            auto& g = tape.grad_buffer(ig);
            for (std::size_t c = 0; c < channels; ++c) g[c] += dgamma[c];
          }
          if (wants_grad(tape, ib)) {
            auto& g = tape.grad_buffer(ib);
            for (std::size_t c = 0; c < channels; ++c) g[c] += dbeta[c];
          }
        }
        if (!wants_grad(tape, ix)) return;
        T* gx = tape.grad_buffer(ix).data();
        if (!train) {
          for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t c = 0; c < channels; ++c) {
              const std::size_t base = (b * channels + c) * len;
              const T f = gd[c] * inv_std[c];
              for (std::size_t t = 0; t < len; ++t) gx[base + t] += f * up[base + t];
            }
          }
          return;
        }
        const T cnt = static_cast<T>(count);
        for (std::size_t c = 0; c < channels; ++c) {
          T sum_g{0}, sum_gh{0};
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t base = (b * channels + c) * len;
            for (std::size_t t = 0; t < len; ++t) {
              const T gh = up[base + t] * gd[c];
              sum_g += gh;
              sum_gh += gh * xhat[base + t];
            }
          }
          const T f = inv_std[c] / cnt;
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t base = (b * channels + c) * len;
            for (std::size_t t = 0; t < len; ++t) {
              const T gh = up[base + t] * gd[c];
              gx[base + t] += f * (cnt * gh - sum_g - xhat[base + t] * sum_gh);
            }
          }
        }
      });
}

template <typename T>
Var<T> weight_norm(const Var<T>& direction, const Var<T>& gain) {
  require_same_tape(direction, gain, "weight_norm");
  const Shape& vs = direction.shape();
  if (vs.empty() || gain.shape() != Shape{vs[0]}) {
    throw ContractViolation("weight_norm: gain must have one entry per output channel");
  }
  const std::size_t rows = vs[0];
  const std::size_t width = direction.value().numel() / rows;
  const T* v = direction.value().data();
  const T* g = gain.value().data();
  std::vector<T> norms(rows);
  Tensor<T> out(vs);
  for (std::size_t r = 0; r < rows; ++r) {
    T ss{0};
    for (std::size_t i = 0; i < width; ++i) ss += v[r * width + i] * v[r * width + i];
    if (!(ss > T{0})) {
      throw ContractViolation("weight_norm: zero-norm direction in output channel " +
                              std::to_string(r));
    }
    norms[r] = std::sqrt(ss);
    for (std::size_t i = 0; i < width; ++i) out[r * width + i] = g[r] * v[r * width + i] / norms[r];
  }
  const std::size_t iv = direction.id(), ig = gain.id();
  return direction.tape().record(
      "weight_norm", std::move(out), {iv, ig},
      [=, norms = std::move(norms)](Tape<T>& tape, std::size_t self) {
        const T* up = tape.grad_buffer(self).data();
        const T* vd = tape.value(iv).data();
        const T* gd = tape.value(ig).data();
        for (std::size_t r = 0; r < rows; ++r) {
          T dot{0};
          for (std::size_t i = 0; i < width; ++i) dot += up[r * width + i] * vd[r * width + i];
          dot /= norms[r];
          if (wants_grad(tape, ig)) tape.grad_buffer(ig)[r] += dot;
          if (wants_grad(tape, iv)) {
            T* gv = tape.grad_buffer(iv).data();
            const T f = gd[r] / norms[r];
            for (std::size_t i = 0; i < width; ++i) {
              const T u = vd[r * width + i] / norms[r];
              gv[r * width + i] += f * (up[r * width + i] - u * dot);
            }
          }
        }
      });
}

template <typename T>
Var<T> dropout(const Var<T>& x, T p, Phase phase, Rng& rng) {
  if (!(p >= T{0}) || p >= T{1}) {
    throw ContractViolation("dropout: probability must lie in [0, 1)");
  }
  if (phase == Phase::eval || p == T{0}) return x;
  const T keep_scale = T{1} / (T{1} - p);
  Tensor<T> mask(x.shape());
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < out.numel(); ++i) {
    mask[i] = uniform01(rng) >= static_cast<double>(p) ? keep_scale : T{0};
    out[i] *= mask[i];
  }
  const std::size_t ix = x.id();
  return x.tape().record("dropout", std::move(out), {ix},
                         [ix, mask = std::move(mask)](Tape<T>& tape, std::size_t self) {
                           auto& g = tape.grad_buffer(ix);
                           const auto& up = tape.grad_buffer(self);
                           for (std::size_t i = 0; i < g.numel(); ++i) g[i] += up[i] * mask[i];
                         });
}

template <typename T>
Var<T> gather_rows(const Var<T>& table, std::span<const std::size_t> rows) {
  const Shape& ts = table.shape();
  if (ts.size() != 2) throw ContractViolation("gather_rows: table must be 2-D");
  const std::size_t m = ts[0], d = ts[1];
  Tensor<T> out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m) {
      throw ContractViolation("gather_rows: row " + std::to_string(rows[i]) + " out of range");
    }
    std::copy_n(table.value().data() + rows[i] * d, d, out.data() + i * d);
  }
  const std::size_t it = table.id();
  return table.tape().record(
      "gather_rows", std::move(out), {it},
      [it, d, idx = std::vector<std::size_t>(rows.begin(), rows.end())](Tape<T>& tape,
                                                                        std::size_t self) {
        T* g = tape.grad_buffer(it).data();
        const T* up = tape.grad_buffer(self).data();
        for (std::size_t i = 0; i < idx.size(); ++i) {
          for (std::size_t j = 0; j < d; ++j) g[idx[i] * d + j] += up[i * d + j];
        }
      });
}

template <typename T>
Var<T> concat_features(const Var<T>& a, const Var<T>& b) {
  require_same_tape(a, b, "concat_features");
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() != 2 || bs.size() != 2 || as[0] != bs[0]) {
    throw ContractViolation("concat_features: expected [N,A] and [N,B], got " +
                            shape_to_string(as) + " and " + shape_to_string(bs));
  }
  const std::size_t n = as[0], wa = as[1], wb = bs[1], w = wa + wb;
  Tensor<T> out({n, w});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(a.value().data() + r * wa, wa, out.data() + r * w);
    std::copy_n(b.value().data() + r * wb, wb, out.data() + r * w + wa);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("concat_features", std::move(out), {ia, ib},
                         [=](Tape<T>& tape, std::size_t self) {
                           const T* up = tape.grad_buffer(self).data();
                           if (wants_grad(tape, ia)) {
                             T* g = tape.grad_buffer(ia).data();
                             for (std::size_t r = 0; r < n; ++r)
                               for (std::size_t j = 0; j < wa; ++j) g[r * wa + j] += up[r * w + j];
                           }
                           if (wants_grad(tape, ib)) {
                             T* g = tape.grad_buffer(ib).data();
                             for (std::size_t r = 0; r < n; ++r)
                               for (std::size_t j = 0; j < wb; ++j)
                                 g[r * wb + j] += up[r * w + wa + j];
                           }
                         });
}

template <typename T>
Var<T> repeat_time(const Var<T>& a, std::size_t steps) {
  const Shape& as = a.shape();
  if (as.size() != 2 || steps == 0) {
    throw ContractViolation("repeat_time: expected [N,D] and steps >= 1");
  }
  const std::size_t n = as[0], d = as[1];
  Tensor<T> out({n, d, steps});
  for (std::size_t i = 0; i < n * d; ++i) {
    std::fill_n(out.data() + i * steps, steps, a.value()[i]);
  }
  const std::size_t ia = a.id();
  return a.tape().record("repeat_time", std::move(out), {ia},
                         [=](Tape<T>& tape, std::size_t self) {
                           T* g = tape.grad_buffer(ia).data();
                           const T* up = tape.grad_buffer(self).data();
                           for (std::size_t i = 0; i < n * d; ++i) {
                             T acc{0};
                             for (std::size_t t = 0; t < steps; ++t) acc += up[i * steps + t];
                             g[i] += acc;
                           }
                         });
}

template <typename T>
Var<T> mse_loss(const Var<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ContractViolation("mse_loss: shape mismatch " + shape_to_string(pred.shape()) + " vs " +
                            shape_to_string(target.shape()));
  }
  const std::size_t n = target.numel();
  if (n == 0) throw ContractViolation("mse_loss: empty input");
  T total{0};
  for (std::size_t i = 0; i < n; ++i) {
    const T diff = pred.value()[i] - target[i];
    total += diff * diff;
  }
  const std::size_t ip = pred.id();
  return pred.tape().record(
      "mse_loss", Tensor<T>::scalar(total / static_cast<T>(n)), {ip},
      [ip, n, target](Tape<T>& tape, std::size_t self) {
        const T up = tape.grad_buffer(self)[0];
        auto& g = tape.grad_buffer(ip);
        const auto& pv = tape.value(ip);
        const T f = T{2} * up / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) g[i] += f * (pv[i] - target[i]);
      });
}

template <typename T>
Var<T> kld_std_normal(const Var<T>& mu, const Var<T>& sigma) {
  require_same_shape(mu, sigma, "kld_std_normal");
  T total{0};
  for (std::size_t i = 0; i < mu.value().numel(); ++i) {
    const T m = mu.value()[i];
    const T s = sigma.value()[i];
    if (!(s > T{0})) throw ContractViolation("kld_std_normal: sigma must be strictly positive");
    total += m * m + s * s - T{1} - std::log(s * s);
  }
  const std::size_t im = mu.id(), is = sigma.id();
  return mu.tape().record("kld_std_normal", Tensor<T>::scalar(T(0.5) * total), {im, is},
                          [im, is](Tape<T>& tape, std::size_t self) {
                            const T up = tape.grad_buffer(self)[0];
                            if (wants_grad(tape, im)) {
                              auto& g = tape.grad_buffer(im);
                              const auto& mv = tape.value(im);
                              for (std::size_t i = 0; i < g.numel(); ++i) g[i] += up * mv[i];
                            }
                            if (wants_grad(tape, is)) {
                              auto& g = tape.grad_buffer(is);
                              const auto& sv = tape.value(is);
                              for (std::size_t i = 0; i < g.numel(); ++i)
                                g[i] += up * (sv[i] - T{1} / sv[i]);
                            }
                          });
}

#define TASKTCN_INSTANTIATE_OPS(T)                                                          \
  template Var<T> add(const Var<T>&, const Var<T>&);                                        \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                        \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                        \
  template Var<T> scale(const Var<T>&, T);                                                  \
  template Var<T> sum(const Var<T>&);                                                       \
  template Var<T> mean(const Var<T>&);                                                      \
  template Var<T> reshape(const Var<T>&, Shape);                                            \
  template Var<T> relu(const Var<T>&);                                                      \
  template Var<T> softplus(const Var<T>&);                                                  \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                      \
  template Var<T> conv1d_causal(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t);  \
  template Var<T> batch_norm(const Var<T>&, const Var<T>&, const Var<T>&, RunningStats<T>*, \
                             Phase, T, T);                                                  \
  template Var<T> weight_norm(const Var<T>&, const Var<T>&);                                \
  template Var<T> dropout(const Var<T>&, T, Phase, Rng&);                                   \
  template Var<T> gather_rows(const Var<T>&, std::span<const std::size_t>);                 \
  template Var<T> concat_features(const Var<T>&, const Var<T>&);                            \
  template Var<T> repeat_time(const Var<T>&, std::size_t);                                  \
  template Var<T> mse_loss(const Var<T>&, const Tensor<T>&);                                \
  template Var<T> kld_std_normal(const Var<T>&, const Var<T>&);

TASKTCN_INSTANTIATE_OPS(float)
TASKTCN_INSTANTIATE_OPS(double)

#undef TASKTCN_INSTANTIATE_OPS

}  // namespace tasktcn::autodiff
