#include "ota/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ota {

namespace {

bool any_grad(const Tensor& a) { return a.requires_grad(); }
bool any_grad(const Tensor& a, const Tensor& b) {
  return a.requires_grad() || b.requires_grad();
}

Tensor make_out(std::vector<int> shape, bool needs_grad) {
  Tensor t(std::move(shape));
  t.set_requires_grad(needs_grad);
  return t;
}

// out[m,n] += a[m,k] * b[k,n], plain ikj loop
void gemm_acc(const double* a, const double* b, double* out, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<int64_t>(i) * k;
    double* orow = out + static_cast<int64_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// out[m,n] += a[k,m]^T * b[k,n]
void gemm_at_b_acc(const double* a, const double* b, double* out, int k, int m, int n) {
  for (int p = 0; p < k; ++p) {
    const double* arow = a + static_cast<int64_t>(p) * m;
    const double* brow = b + static_cast<int64_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = out + static_cast<int64_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// out[m,k] += a[m,n] * b[k,n]^T
void gemm_a_bt_acc(const double* a, const double* b, double* out, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<int64_t>(i) * n;
    double* orow = out + static_cast<int64_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double* brow = b + static_cast<int64_t>(p) * n;
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += arow[j] * brow[j];
      orow[p] += s;
    }
  }
}

}  // namespace

bool Tensor::all_finite() const {
  for (double v : values())
    if (!std::isfinite(v)) return false;
  return true;
}

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b, GradTape* tape) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows())
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  const int m = a.rows(), k = a.cols(), n = b.cols();
  const bool ng = tape && any_grad(a, b);
  Tensor out = make_out({m, n}, ng);
  gemm_acc(a.values().data(), b.values().data(), out.values().data(), m, k, n);
  if (ng) {
    tape->record([a, b, out, m, k, n]() {
      const double* g = out.grad().data();
      if (a.requires_grad())
        gemm_a_bt_acc(g, b.values().data(), const_cast<Tensor&>(a).grad().data(), m, n, k);
      if (b.requires_grad())
        gemm_at_b_acc(a.values().data(), g, const_cast<Tensor&>(b).grad().data(), m, k, n);
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b, GradTape* tape) {
  if (a.shape() != b.shape())
    throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const bool ng = tape && any_grad(a, b);
  Tensor out = make_out(a.shape(), ng);
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  if (ng) {
    tape->record([a, b, out]() {
      const auto& g = out.grad();
      if (a.requires_grad()) {
        auto& ga = const_cast<Tensor&>(a).grad();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto& gb = const_cast<Tensor&>(b).grad();
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

Tensor add_rowvec(const Tensor& x, const Tensor& b, GradTape* tape) {
  if (b.ndim() != 1 || x.cols() != b.dim(0))
    throw ShapeError("add_rowvec: width mismatch " + shape_str(x.shape()) + " vs " +
                     shape_str(b.shape()));
  const int64_t rows = x.size() / x.cols();
  const int d = x.cols();
  const bool ng = tape && any_grad(x, b);
  Tensor out = make_out(x.shape(), ng);
  for (int64_t r = 0; r < rows; ++r)
    for (int j = 0; j < d; ++j) out[r * d + j] = x[r * d + j] + b[j];
  if (ng) {
    tape->record([x, b, out, rows, d]() {
      const auto& g = out.grad();
      if (x.requires_grad()) {
        auto& gx = const_cast<Tensor&>(x).grad();
        for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (b.requires_grad()) {
        auto& gb = const_cast<Tensor&>(b).grad();
        for (int64_t r = 0; r < rows; ++r)
          for (int j = 0; j < d; ++j) gb[static_cast<size_t>(j)] += g[static_cast<size_t>(r * d + j)];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double c, GradTape* tape) {
  const bool ng = tape && x.requires_grad();
  Tensor out = make_out(x.shape(), ng);
  for (int64_t i = 0; i < x.size(); ++i) out[i] = x[i] * c;
  if (ng) {
    tape->record([x, out, c]() {
      const auto& g = out.grad();
      auto& gx = const_cast<Tensor&>(x).grad();
      for (size_t i = 0; i < g.size(); ++i) gx[i] += c * g[i];
    });
  }
  return out;
}

Tensor relu(const Tensor& x, GradTape* tape) {
  const bool ng = tape && x.requires_grad();
  Tensor out = make_out(x.shape(), ng);
  for (int64_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  if (ng) {
    tape->record([x, out]() {
      const auto& g = out.grad();
      auto& gx = const_cast<Tensor&>(x).grad();
      for (int64_t i = 0; i < x.size(); ++i)
        if (x[i] > 0.0) gx[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
    });
  }
  return out;
}

Tensor softmax_rows(const Tensor& x, GradTape* tape) {
  const int d = x.cols();
  const int64_t rows = x.size() / d;
  const bool ng = tape && x.requires_grad();
  Tensor out = make_out(x.shape(), ng);
  for (int64_t r = 0; r < rows; ++r) {
    const double* xi = x.values().data() + r * d;
    double* yi = out.values().data() + r * d;
    double mx = xi[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, xi[j]);
    double sum = 0.0;
    for (int j = 0; j < d; ++j) {
      yi[j] = std::exp(xi[j] - mx);
      sum += yi[j];
    }
    for (int j = 0; j < d; ++j) yi[j] /= sum;
  }
  if (ng) {
    tape->record([x, out, rows, d]() {
      const auto& g = out.grad();
      auto& gx = const_cast<Tensor&>(x).grad();
      for (int64_t r = 0; r < rows; ++r) {
        const double* y = out.values().data() + r * d;
        const double* gy = g.data() + r * d;
        double dot = 0.0;
        for (int j = 0; j < d; ++j) dot += gy[j] * y[j];
        for (int j = 0; j < d; ++j) gx[static_cast<size_t>(r * d + j)] += y[j] * (gy[j] - dot);
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                  GradTape* tape) {
  const int d = x.cols();
  if (gamma.size() != d || beta.size() != d)
    throw ShapeError("layer_norm: affine width mismatch, x " + shape_str(x.shape()) +
                     " gamma " + shape_str(gamma.shape()));
  if (eps <= 0.0) throw ValueError("layer_norm: eps must be positive");
  const int64_t rows = x.size() / d;
  const bool ng = tape && (x.requires_grad() || gamma.requires_grad() || beta.requires_grad());
  Tensor out = make_out(x.shape(), ng);
  // keep normalized values and inverse std for the backward pass
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (int64_t r = 0; r < rows; ++r) {
    const double* xi = x.values().data() + r * d;
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += xi[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<size_t>(r)] = is;
    for (int j = 0; j < d; ++j) {
      const double h = (xi[j] - mean) * is;
      (*xhat)[static_cast<size_t>(r * d + j)] = h;
      out[r * d + j] = gamma[j] * h + beta[j];
    }
  }
  if (ng) {
    tape->record([x, gamma, beta, out, xhat, inv_std, rows, d]() {
      const auto& g = out.grad();
      for (int64_t r = 0; r < rows; ++r) {
        const double* gy = g.data() + r * d;
        const double* h = xhat->data() + r * d;
        if (gamma.requires_grad()) {
          auto& gg = const_cast<Tensor&>(gamma).grad();
          for (int j = 0; j < d; ++j) gg[static_cast<size_t>(j)] += gy[j] * h[j];
        }
        if (beta.requires_grad()) {
          auto& gb = const_cast<Tensor&>(beta).grad();
          for (int j = 0; j < d; ++j) gb[static_cast<size_t>(j)] += gy[j];
        }
        if (x.requires_grad()) {
          auto& gx = const_cast<Tensor&>(x).grad();
          const double is = (*inv_std)[static_cast<size_t>(r)];
          double m1 = 0.0, m2 = 0.0;  // mean(dxhat), mean(dxhat*xhat)
          for (int j = 0; j < d; ++j) {
            const double dh = gy[j] * gamma[j];
            m1 += dh;
            m2 += dh * h[j];
          }
          m1 /= d;
          m2 /= d;
          for (int j = 0; j < d; ++j) {
            const double dh = gy[j] * gamma[j];
            gx[static_cast<size_t>(r * d + j)] += is * (dh - m1 - h[j] * m2);
          }
        }
      }
    });
  }
  return out;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, Mode mode, double eps, double momentum,
                  GradTape* tape) {
  if (x.ndim() != 2) throw ShapeError("batch_norm: expects [B,d] input");
  const int b = x.rows(), d = x.cols();
  if (gamma.size() != d || beta.size() != d)
    throw ShapeError("batch_norm: affine width mismatch");
  if (!state.initialized) {
    state.running_mean.assign(static_cast<size_t>(d), 0.0);
    state.running_var.assign(static_cast<size_t>(d), 1.0);
    state.initialized = true;
  }
  const bool ng = tape && (x.requires_grad() || gamma.requires_grad() || beta.requires_grad());
  Tensor out = make_out(x.shape(), ng);

  if (mode == Mode::Eval) {
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < d; ++j) {
        const double h = (x.at(i, j) - state.running_mean[static_cast<size_t>(j)]) /
                         std::sqrt(state.running_var[static_cast<size_t>(j)] + eps);
        out.at(i, j) = gamma[j] * h + beta[j];
      }
    if (ng) {
      auto mean = std::make_shared<std::vector<double>>(state.running_mean);
      auto var = std::make_shared<std::vector<double>>(state.running_var);
      tape->record([x, gamma, beta, out, mean, var, b, d, eps]() {
        const auto& g = out.grad();
        for (int i = 0; i < b; ++i)
          for (int j = 0; j < d; ++j) {
            const double gy = g[static_cast<size_t>(i) * d + j];
            const double is = 1.0 / std::sqrt((*var)[static_cast<size_t>(j)] + eps);
            const double h = (x.at(i, j) - (*mean)[static_cast<size_t>(j)]) * is;
            if (gamma.requires_grad())
              const_cast<Tensor&>(gamma).grad()[static_cast<size_t>(j)] += gy * h;
            if (beta.requires_grad())
              const_cast<Tensor&>(beta).grad()[static_cast<size_t>(j)] += gy;
            if (x.requires_grad())
              const_cast<Tensor&>(x).grad()[static_cast<size_t>(i) * d + j] += gy * gamma[j] * is;
          }
      });
    }
    return out;
  }

  if (b < 2) throw ValueError("batch_norm: degenerate batch of size 1 in train mode");

  auto mean = std::make_shared<std::vector<double>>(static_cast<size_t>(d), 0.0);
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(d), 0.0);
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  for (int j = 0; j < d; ++j) {
    double m = 0.0;
    for (int i = 0; i < b; ++i) m += x.at(i, j);
    m /= b;
    double v = 0.0;
    for (int i = 0; i < b; ++i) v += (x.at(i, j) - m) * (x.at(i, j) - m);
    v /= b;
    (*mean)[static_cast<size_t>(j)] = m;
    (*inv_std)[static_cast<size_t>(j)] = 1.0 / std::sqrt(v + eps);
    state.running_mean[static_cast<size_t>(j)] =
        (1.0 - momentum) * state.running_mean[static_cast<size_t>(j)] + momentum * m;
    state.running_var[static_cast<size_t>(j)] =
        (1.0 - momentum) * state.running_var[static_cast<size_t>(j)] + momentum * v;
  }
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < d; ++j) {
      const double h = (x.at(i, j) - (*mean)[static_cast<size_t>(j)]) *
                       (*inv_std)[static_cast<size_t>(j)];
      (*xhat)[static_cast<size_t>(i) * d + j] = h;
      out.at(i, j) = gamma[j] * h + beta[j];
    }
  if (ng) {
    tape->record([x, gamma, beta, out, xhat, inv_std, b, d]() {
      const auto& g = out.grad();
      for (int j = 0; j < d; ++j) {
        double m1 = 0.0, m2 = 0.0;
        for (int i = 0; i < b; ++i) {
          const double dh = g[static_cast<size_t>(i) * d + j] * gamma[j];
          m1 += dh;
          m2 += dh * (*xhat)[static_cast<size_t>(i) * d + j];
        }
        m1 /= b;
        m2 /= b;
        for (int i = 0; i < b; ++i) {
          const double gy = g[static_cast<size_t>(i) * d + j];
          const double h = (*xhat)[static_cast<size_t>(i) * d + j];
          if (gamma.requires_grad())
            const_cast<Tensor&>(gamma).grad()[static_cast<size_t>(j)] += gy * h;
          if (beta.requires_grad())
            const_cast<Tensor&>(beta).grad()[static_cast<size_t>(j)] += gy;
          if (x.requires_grad()) {
            const double dh = gy * gamma[j];
            const_cast<Tensor&>(x).grad()[static_cast<size_t>(i) * d + j] +=
                (*inv_std)[static_cast<size_t>(j)] * (dh - m1 - h * m2);
          }
        }
      }
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double rate, RngStream& rng, Mode mode, GradTape* tape) {
  if (rate < 0.0 || rate >= 1.0) throw ValueError("dropout: rate must be in [0,1)");
  if (mode == Mode::Eval || rate == 0.0) {
    // identity; gradient passes straight through
    const bool ng = tape && x.requires_grad();
    Tensor out = make_out(x.shape(), ng);
    out.values() = x.values();
    if (ng) {
      tape->record([x, out]() {
        const auto& g = out.grad();
        auto& gx = const_cast<Tensor&>(x).grad();
        for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      });
    }
    return out;
  }
  const double keep = 1.0 - rate;
  const double inv_keep = 1.0 / keep;
  auto mask = std::make_shared<std::vector<uint8_t>>(x.size());
  for (int64_t i = 0; i < x.size(); ++i)
    (*mask)[static_cast<size_t>(i)] = rng.uniform() >= rate ? 1 : 0;
  const bool ng = tape && x.requires_grad();
  Tensor out = make_out(x.shape(), ng);
  for (int64_t i = 0; i < x.size(); ++i)
    out[i] = (*mask)[static_cast<size_t>(i)] ? x[i] * inv_keep : 0.0;
  if (ng) {
    tape->record([x, out, mask, inv_keep]() {
      const auto& g = out.grad();
      auto& gx = const_cast<Tensor&>(x).grad();
      for (size_t i = 0; i < g.size(); ++i)
        if ((*mask)[i]) gx[i] += g[i] * inv_keep;
    });
  }
  return out;
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids, int batch,
                        int len, GradTape* tape) {
  if (table.ndim() != 2) throw ShapeError("embedding_lookup: table must be [V,d]");
  if (static_cast<int64_t>(ids.size()) != static_cast<int64_t>(batch) * len)
    throw ShapeError("embedding_lookup: id count mismatch");
  const int v = table.rows(), d = table.cols();
  for (int id : ids)
    if (id < 0 || id >= v)
      throw ValueError("embedding_lookup: id " + std::to_string(id) + " outside table of " +
                       std::to_string(v));
  const bool ng = tape && table.requires_grad();
  Tensor out = make_out({batch * len, d}, ng);
  for (size_t i = 0; i < ids.size(); ++i) {
    const double* src = table.values().data() + static_cast<int64_t>(ids[i]) * d;
    double* dst = out.values().data() + static_cast<int64_t>(i) * d;
    std::copy(src, src + d, dst);
  }
  if (ng) {
    auto ids_copy = std::make_shared<std::vector<int>>(ids);
    tape->record([table, out, ids_copy, d]() {
      const auto& g = out.grad();
      auto& gt = const_cast<Tensor&>(table).grad();
      for (size_t i = 0; i < ids_copy->size(); ++i) {
        double* dst = gt.data() + static_cast<int64_t>((*ids_copy)[i]) * d;
        const double* src = g.data() + static_cast<int64_t>(i) * d;
        for (int j = 0; j < d; ++j) dst[j] += src[j];
      }
    });
  }
  return out;
}

Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        const std::vector<uint8_t>& mask, int batch, int len, int heads,
                        GradTape* tape) {
  const int d = q.cols();
  if (q.shape() != k.shape() || q.shape() != v.shape())
    throw ShapeError("masked_attention: q/k/v shape mismatch");
  if (q.size() != static_cast<int64_t>(batch) * len * d)
    throw ShapeError("masked_attention: batch*len mismatch with tensor size");
  if (static_cast<int64_t>(mask.size()) != static_cast<int64_t>(batch) * len)
    throw ShapeError("masked_attention: mask length mismatch");
  if (heads < 1 || d % heads != 0)
    throw ShapeError("masked_attention: head count must divide feature width");
  const int dh = d / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const bool ng = tape && (q.requires_grad() || k.requires_grad() || v.requires_grad());
  Tensor out = make_out(q.shape(), ng);
  // attention weights kept for the adjoint: [batch, heads, len, len]
  auto attn = std::make_shared<std::vector<double>>(
      static_cast<size_t>(batch) * heads * len * len, 0.0);

  for (int b = 0; b < batch; ++b) {
    const uint8_t* m = mask.data() + static_cast<size_t>(b) * len;
    bool any = false;
    for (int j = 0; j < len; ++j) any = any || m[j];
    if (!any) continue;  // fully padded sample: zero output by definition
    for (int h = 0; h < heads; ++h) {
      const int off = h * dh;
      double* a_bh = attn->data() +
                     ((static_cast<size_t>(b) * heads + h) * len) * len;
      for (int i = 0; i < len; ++i) {
        const double* qi = q.values().data() + (static_cast<int64_t>(b) * len + i) * d + off;
        double* arow = a_bh + static_cast<size_t>(i) * len;
        double mx = -1e300;
        for (int j = 0; j < len; ++j) {
          if (!m[j]) {
            arow[j] = -1e300;
            continue;
          }
          const double* kj = k.values().data() + (static_cast<int64_t>(b) * len + j) * d + off;
          double s = 0.0;
          for (int t = 0; t < dh; ++t) s += qi[t] * kj[t];
          s *= inv_scale;
          arow[j] = s;
          mx = std::max(mx, s);
        }
        double sum = 0.0;
        for (int j = 0; j < len; ++j) {
          arow[j] = m[j] ? std::exp(arow[j] - mx) : 0.0;
          sum += arow[j];
        }
        for (int j = 0; j < len; ++j) arow[j] /= sum;
        double* oi = out.values().data() + (static_cast<int64_t>(b) * len + i) * d + off;
        for (int j = 0; j < len; ++j) {
          if (arow[j] == 0.0) continue;
          const double* vj = v.values().data() + (static_cast<int64_t>(b) * len + j) * d + off;
          for (int t = 0; t < dh; ++t) oi[t] += arow[j] * vj[t];
        }
      }
    }
  }
  if (ng) {
    auto mask_copy = std::make_shared<std::vector<uint8_t>>(mask);
    tape->record([q, k, v, out, attn, mask_copy, batch, len, heads, d, dh, inv_scale]() {
      std::vector<double> ds(static_cast<size_t>(len) * len);
      for (int b = 0; b < batch; ++b) {
        const uint8_t* m = mask_copy->data() + static_cast<size_t>(b) * len;
        bool any = false;
        for (int j = 0; j < len; ++j) any = any || m[j];
        if (!any) continue;
        for (int h = 0; h < heads; ++h) {
          const int off = h * dh;
          const double* a_bh = attn->data() +
                               ((static_cast<size_t>(b) * heads + h) * len) * len;
          // dV = A^T dO ; dA = dO V^T ; dS = A*(dA - rowsum(dA*A)) ; scaled
          for (int i = 0; i < len; ++i) {
            const double* go = out.grad().data() + (static_cast<int64_t>(b) * len + i) * d + off;
            const double* arow = a_bh + static_cast<size_t>(i) * len;
            double* dsrow = ds.data() + static_cast<size_t>(i) * len;
            double dot = 0.0;
            for (int j = 0; j < len; ++j) {
              double da = 0.0;
              if (arow[j] != 0.0) {
                const double* vj =
                    v.values().data() + (static_cast<int64_t>(b) * len + j) * d + off;
                for (int t = 0; t < dh; ++t) da += go[t] * vj[t];
              }
              dsrow[j] = da;
              dot += da * arow[j];
            }
            for (int j = 0; j < len; ++j) dsrow[j] = arow[j] * (dsrow[j] - dot) * inv_scale;
            if (v.requires_grad()) {
              auto& gv = const_cast<Tensor&>(v).grad();
              for (int j = 0; j < len; ++j) {
                if (arow[j] == 0.0) continue;
                double* gvj = gv.data() + (static_cast<int64_t>(b) * len + j) * d + off;
                for (int t = 0; t < dh; ++t) gvj[t] += arow[j] * go[t];
              }
            }
          }
          if (q.requires_grad()) {
            auto& gq = const_cast<Tensor&>(q).grad();
            for (int i = 0; i < len; ++i) {
              double* gqi = gq.data() + (static_cast<int64_t>(b) * len + i) * d + off;
              const double* dsrow = ds.data() + static_cast<size_t>(i) * len;
              for (int j = 0; j < len; ++j) {
                if (dsrow[j] == 0.0) continue;
                const double* kj =
                    k.values().data() + (static_cast<int64_t>(b) * len + j) * d + off;
                for (int t = 0; t < dh; ++t) gqi[t] += dsrow[j] * kj[t];
              }
            }
          }
          if (k.requires_grad()) {
            auto& gk = const_cast<Tensor&>(k).grad();
            for (int i = 0; i < len; ++i) {
              const double* qi =
                  q.values().data() + (static_cast<int64_t>(b) * len + i) * d + off;
              const double* dsrow = ds.data() + static_cast<size_t>(i) * len;
              for (int j = 0; j < len; ++j) {
                if (dsrow[j] == 0.0) continue;
                double* gkj = gk.data() + (static_cast<int64_t>(b) * len + j) * d + off;
                for (int t = 0; t < dh; ++t) gkj[t] += dsrow[j] * qi[t];
              }
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor masked_mean_pool(const Tensor& h, const std::vector<uint8_t>& mask, int batch,
                        int len, GradTape* tape) {
  const int d = h.cols();
  if (h.size() != static_cast<int64_t>(batch) * len * d)
    throw ShapeError("masked_mean_pool: batch*len mismatch");
  if (static_cast<int64_t>(mask.size()) != static_cast<int64_t>(batch) * len)
    throw ShapeError("masked_mean_pool: mask length mismatch");
  auto counts = std::make_shared<std::vector<int>>(static_cast<size_t>(batch), 0);
  for (int b = 0; b < batch; ++b) {
    int c = 0;
    for (int j = 0; j < len; ++j) c += mask[static_cast<size_t>(b) * len + j] ? 1 : 0;
    if (c == 0) throw ValueError("masked_mean_pool: sample " + std::to_string(b) +
                                 " has zero unmasked positions");
    (*counts)[static_cast<size_t>(b)] = c;
  }
  const bool ng = tape && h.requires_grad();
  Tensor out = make_out({batch, d}, ng);
  for (int b = 0; b < batch; ++b) {
    double* o = out.values().data() + static_cast<int64_t>(b) * d;
    for (int j = 0; j < len; ++j) {
      if (!mask[static_cast<size_t>(b) * len + j]) continue;
      const double* row = h.values().data() + (static_cast<int64_t>(b) * len + j) * d;
      for (int t = 0; t < d; ++t) o[t] += row[t];
    }
    const double inv = 1.0 / (*counts)[static_cast<size_t>(b)];
    for (int t = 0; t < d; ++t) o[t] *= inv;
  }
  if (ng) {
    auto mask_copy = std::make_shared<std::vector<uint8_t>>(mask);
    tape->record([h, out, mask_copy, counts, batch, len, d]() {
      auto& gh = const_cast<Tensor&>(h).grad();
      const auto& g = out.grad();
      for (int b = 0; b < batch; ++b) {
        const double inv = 1.0 / (*counts)[static_cast<size_t>(b)];
        for (int j = 0; j < len; ++j) {
          if (!(*mask_copy)[static_cast<size_t>(b) * len + j]) continue;
          double* dst = gh.data() + (static_cast<int64_t>(b) * len + j) * d;
          const double* src = g.data() + static_cast<int64_t>(b) * d;
          for (int t = 0; t < d; ++t) dst[t] += src[t] * inv;
        }
      }
    });
  }
  return out;
}

Tensor col_mean(const Tensor& x, GradTape* tape) {
  if (x.ndim() != 2) throw ShapeError("col_mean: expects [n,d]");
  const int n = x.rows(), d = x.cols();
  const bool ng = tape && x.requires_grad();
  Tensor out = make_out({d}, ng);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out[j] += x.at(i, j);
  for (int j = 0; j < d; ++j) out[j] /= n;
  if (ng) {
    tape->record([x, out, n, d]() {
      auto& gx = const_cast<Tensor&>(x).grad();
      const auto& g = out.grad();
      const double inv = 1.0 / n;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) gx[static_cast<size_t>(i) * d + j] += g[static_cast<size_t>(j)] * inv;
    });
  }
  return out;
}

Tensor concat_broadcast(const Tensor& rows, const Tensor& vec, GradTape* tape) {
  if (rows.ndim() != 2 || vec.ndim() != 1)
    throw ShapeError("concat_broadcast: expects [B,d1] and [d2]");
  const int b = rows.rows(), d1 = rows.cols(), d2 = vec.dim(0);
  const bool ng = tape && (rows.requires_grad() || vec.requires_grad());
  Tensor out = make_out({b, d1 + d2}, ng);
  for (int i = 0; i < b; ++i) {
    double* o = out.values().data() + static_cast<int64_t>(i) * (d1 + d2);
    const double* r = rows.values().data() + static_cast<int64_t>(i) * d1;
    std::copy(r, r + d1, o);
    std::copy(vec.values().begin(), vec.values().end(), o + d1);
  }
  if (ng) {
    tape->record([rows, vec, out, b, d1, d2]() {
      const auto& g = out.grad();
      for (int i = 0; i < b; ++i) {
        const double* go = g.data() + static_cast<int64_t>(i) * (d1 + d2);
        if (rows.requires_grad()) {
          double* gr = const_cast<Tensor&>(rows).grad().data() + static_cast<int64_t>(i) * d1;
          for (int j = 0; j < d1; ++j) gr[j] += go[j];
        }
        if (vec.requires_grad()) {
          auto& gv = const_cast<Tensor&>(vec).grad();
          for (int j = 0; j < d2; ++j) gv[static_cast<size_t>(j)] += go[d1 + j];
        }
      }
    });
  }
  return out;
}

Tensor smoothed_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                              double alpha, GradTape* tape) {
  if (logits.ndim() != 2) throw ShapeError("smoothed_cross_entropy: logits must be [B,C]");
  const int b = logits.rows(), c = logits.cols();
  if (static_cast<int>(labels.size()) != b)
    throw ShapeError("smoothed_cross_entropy: label count mismatch");
  if (alpha < 0.0 || alpha >= 1.0)
    throw ValueError("smoothed_cross_entropy: alpha must be in [0,1)");
  for (int lb : labels)
    if (lb < 0 || lb >= c)
      throw ValueError("smoothed_cross_entropy: label " + std::to_string(lb) +
                       " outside [0," + std::to_string(c) + ")");
  auto probs = std::make_shared<std::vector<double>>(logits.size());
  double loss = 0.0;
  const double off_target = alpha / c;
  for (int i = 0; i < b; ++i) {
    const double* z = logits.values().data() + static_cast<int64_t>(i) * c;
    double mx = z[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, z[j]);
    double sum = 0.0;
    for (int j = 0; j < c; ++j) sum += std::exp(z[j] - mx);
    const double log_sum = std::log(sum) + mx;
    for (int j = 0; j < c; ++j) {
      const double logp = z[j] - log_sum;
      (*probs)[static_cast<size_t>(i) * c + j] = std::exp(logp);
      const double target = off_target + (j == labels[static_cast<size_t>(i)] ? 1.0 - alpha : 0.0);
      loss -= target * logp;
    }
  }
  loss /= b;
  if (!std::isfinite(loss)) throw ValueError("smoothed_cross_entropy: non-finite loss");
  const bool ng = tape && logits.requires_grad();
  Tensor out = make_out({1}, ng);
  out[0] = loss;
  if (ng) {
    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    tape->record([logits, out, probs, labels_copy, b, c, alpha, off_target]() {
      const double g = out.grad()[0] / b;
      auto& gl = const_cast<Tensor&>(logits).grad();
      for (int i = 0; i < b; ++i)
        for (int j = 0; j < c; ++j) {
          const double target =
              off_target + (j == (*labels_copy)[static_cast<size_t>(i)] ? 1.0 - alpha : 0.0);
          gl[static_cast<size_t>(i) * c + j] +=
              g * ((*probs)[static_cast<size_t>(i) * c + j] - target);
        }
    });
  }
  return out;
}

}  // namespace ota
