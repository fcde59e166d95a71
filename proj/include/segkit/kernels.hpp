#pragma once

#include <cmath>
#include <cstdint>

// Dense kernels used by the detector. segkit::ref holds the serial reference
// implementations; segkit::par holds the OpenMP versions. Both parallelize only
// over independent output elements, so for identical inputs they produce
// bit-identical results regardless of thread count.

namespace segkit::ref {

// out[t,m] = b[m] + sum_n in[t,n] * w[m,n]; row-major, w is [m x n].
template <typename T>
void linear_forward(const T* in, const T* w, const T* b, T* out, std::int64_t n_rows, int n,
                    int m) {
  for (std::int64_t t = 0; t < n_rows; ++t) {
    const T* x = in + t * n;
    T* y = out + t * m;
    for (int j = 0; j < m; ++j) {
      T acc = b ? b[j] : T(0);
      const T* wj = w + static_cast<std::int64_t>(j) * n;
      for (int i = 0; i < n; ++i) acc += wj[i] * x[i];
      y[j] = acc;
    }
  }
}

// Accumulates din += dout * w, dw += dout^T * in, db += column sums of dout.
template <typename T>
void linear_backward(const T* in, const T* w, const T* dout, T* din, T* dw, T* db,
                     std::int64_t n_rows, int n, int m) {
  if (din) {
    for (std::int64_t t = 0; t < n_rows; ++t) {
      const T* dy = dout + t * m;
      T* dx = din + t * n;
      for (int j = 0; j < m; ++j) {
        const T* wj = w + static_cast<std::int64_t>(j) * n;
        const T d = dy[j];
        for (int i = 0; i < n; ++i) dx[i] += d * wj[i];
      }
    }
  }
  if (dw) {
    for (int j = 0; j < m; ++j) {
      T* dwj = dw + static_cast<std::int64_t>(j) * n;
      for (std::int64_t t = 0; t < n_rows; ++t) {
        const T d = dout[t * m + j];
        const T* x = in + t * n;
        for (int i = 0; i < n; ++i) dwj[i] += d * x[i];
      }
    }
  }
  if (db) {
    for (int j = 0; j < m; ++j) {
      T acc = T(0);
      for (std::int64_t t = 0; t < n_rows; ++t) acc += dout[t * m + j];
      db[j] += acc;
    }
  }
}

// Same-length dilated convolution with zero padding; w is [c_out x c_in x k],
// tap k reads input at t + (k - (kernel-1)/2) * dilation.
template <typename T>
void conv1d_forward(const T* in, const T* w, const T* b, T* out, std::int64_t n_rows, int c_in,
                    int c_out, int kernel, int dilation) {
  const int center = (kernel - 1) / 2;
  for (std::int64_t t = 0; t < n_rows; ++t) {
    T* y = out + t * c_out;
    for (int o = 0; o < c_out; ++o) {
      T acc = b ? b[o] : T(0);
      const T* wo = w + (static_cast<std::int64_t>(o) * c_in) * kernel;
      for (int k = 0; k < kernel; ++k) {
        const std::int64_t s = t + static_cast<std::int64_t>(k - center) * dilation;
        if (s < 0 || s >= n_rows) continue;
        const T* x = in + s * c_in;
        for (int i = 0; i < c_in; ++i) acc += wo[static_cast<std::int64_t>(i) * kernel + k] * x[i];
      }
      y[o] = acc;
    }
  }
}

template <typename T>
void conv1d_backward(const T* in, const T* w, const T* dout, T* din, T* dw, T* db,
                     std::int64_t n_rows, int c_in, int c_out, int kernel, int dilation) {
  const int center = (kernel - 1) / 2;
  if (din) {
    for (std::int64_t s = 0; s < n_rows; ++s) {
      T* dx = din + s * c_in;
      for (int k = 0; k < kernel; ++k) {
        const std::int64_t t = s - static_cast<std::int64_t>(k - center) * dilation;
        if (t < 0 || t >= n_rows) continue;
        const T* dy = dout + t * c_out;
        for (int o = 0; o < c_out; ++o) {
          const T* wo = w + (static_cast<std::int64_t>(o) * c_in) * kernel;
          const T d = dy[o];
          for (int i = 0; i < c_in; ++i) dx[i] += d * wo[static_cast<std::int64_t>(i) * kernel + k];
        }
      }
    }
  }
  if (dw) {
    for (int o = 0; o < c_out; ++o) {
      T* dwo = dw + (static_cast<std::int64_t>(o) * c_in) * kernel;
      for (std::int64_t t = 0; t < n_rows; ++t) {
        const T d = dout[t * c_out + o];
        for (int k = 0; k < kernel; ++k) {
          const std::int64_t s = t + static_cast<std::int64_t>(k - center) * dilation;
          if (s < 0 || s >= n_rows) continue;
          const T* x = in + s * c_in;
          for (int i = 0; i < c_in; ++i) dwo[static_cast<std::int64_t>(i) * kernel + k] += d * x[i];
        }
      }
    }
  }
  if (db) {
    for (int o = 0; o < c_out; ++o) {
      T acc = T(0);
      for (std::int64_t t = 0; t < n_rows; ++t) acc += dout[t * c_out + o];
      db[o] += acc;
    }
  }
}

// Per-row layer normalization over channels; saves mean and 1/std for backward.
template <typename T>
void layernorm_forward(const T* in, const T* gain, const T* bias, T* out, T* mean, T* rstd,
                       std::int64_t n_rows, int c, T eps = T(1e-5)) {
  for (std::int64_t t = 0; t < n_rows; ++t) {
    const T* x = in + t * c;
    T mu = T(0);
    for (int i = 0; i < c; ++i) mu += x[i];
    mu /= T(c);
    T var = T(0);
    for (int i = 0; i < c; ++i) var += (x[i] - mu) * (x[i] - mu);
    var /= T(c);
    const T rs = T(1) / std::sqrt(var + eps);
    mean[t] = mu;
    rstd[t] = rs;
    T* y = out + t * c;
    for (int i = 0; i < c; ++i) y[i] = gain[i] * (x[i] - mu) * rs + bias[i];
  }
}

template <typename T>
void layernorm_backward(const T* in, const T* gain, const T* mean, const T* rstd, const T* dout,
                        T* din, T* dgain, T* dbias, std::int64_t n_rows, int c) {
  for (std::int64_t t = 0; t < n_rows; ++t) {
    const T* x = in + t * c;
    const T* dy = dout + t * c;
    T* dx = din + t * c;
    const T mu = mean[t], rs = rstd[t];
    T sum_dhat = T(0), sum_dhat_norm = T(0);
    for (int i = 0; i < c; ++i) {
      const T norm = (x[i] - mu) * rs;
      const T dhat = dy[i] * gain[i];
      sum_dhat += dhat;
      sum_dhat_norm += dhat * norm;
    }
    const T inv_c = T(1) / T(c);
    for (int i = 0; i < c; ++i) {
      const T norm = (x[i] - mu) * rs;
      const T dhat = dy[i] * gain[i];
      dx[i] += rs * (dhat - sum_dhat * inv_c - norm * sum_dhat_norm * inv_c);
    }
  }
  for (int i = 0; i < c; ++i) {
    T dg = T(0), db = T(0);
    for (std::int64_t t = 0; t < n_rows; ++t) {
      const T norm = (in[t * c + i] - mean[t]) * rstd[t];
      dg += dout[t * c + i] * norm;
      db += dout[t * c + i];
    }
    dgain[i] += dg;
    dbias[i] += db;
  }
}

}  // namespace segkit::ref

namespace segkit::par {

template <typename T>
void linear_forward(const T* in, const T* w, const T* b, T* out, std::int64_t n_rows, int n,
                    int m) {
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < n_rows; ++t)
    segkit::ref::linear_forward(in + t * n, w, b, out + t * m, 1, n, m);
}

template <typename T>
void linear_backward(const T* in, const T* w, const T* dout, T* din, T* dw, T* db,
                     std::int64_t n_rows, int n, int m) {
  if (din) {
#pragma omp parallel for schedule(static)
    for (std::int64_t t = 0; t < n_rows; ++t)
      segkit::ref::linear_backward(in + t * n, w, dout + t * m, din + t * n,
                                   static_cast<T*>(nullptr), static_cast<T*>(nullptr), 1, n, m);
  }
  if (dw) {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < m; ++j) {
      T* dwj = dw + static_cast<std::int64_t>(j) * n;
      for (std::int64_t t = 0; t < n_rows; ++t) {
        const T d = dout[t * m + j];
        const T* x = in + t * n;
        for (int i = 0; i < n; ++i) dwj[i] += d * x[i];
      }
    }
  }
  if (db) {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < m; ++j) {
      T acc = T(0);
      for (std::int64_t t = 0; t < n_rows; ++t) acc += dout[t * m + j];
      db[j] += acc;
    }
  }
}

template <typename T>
void conv1d_forward(const T* in, const T* w, const T* b, T* out, std::int64_t n_rows, int c_in,
                    int c_out, int kernel, int dilation) {
  const int center = (kernel - 1) / 2;
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < n_rows; ++t) {
    T* y = out + t * c_out;
    for (int o = 0; o < c_out; ++o) {
      T acc = b ? b[o] : T(0);
      const T* wo = w + (static_cast<std::int64_t>(o) * c_in) * kernel;
      for (int k = 0; k < kernel; ++k) {
        const std::int64_t s = t + static_cast<std::int64_t>(k - center) * dilation;
        if (s < 0 || s >= n_rows) continue;
        const T* x = in + s * c_in;
        for (int i = 0; i < c_in; ++i) acc += wo[static_cast<std::int64_t>(i) * kernel + k] * x[i];
      }
      y[o] = acc;
    }
  }
}

template <typename T>
void conv1d_backward(const T* in, const T* w, const T* dout, T* din, T* dw, T* db,
                     std::int64_t n_rows, int c_in, int c_out, int kernel, int dilation) {
  const int center = (kernel - 1) / 2;
  if (din) {
#pragma omp parallel for schedule(static)
    for (std::int64_t s = 0; s < n_rows; ++s) {
      T* dx = din + s * c_in;
      for (int k = 0; k < kernel; ++k) {
        const std::int64_t t = s - static_cast<std::int64_t>(k - center) * dilation;
        if (t < 0 || t >= n_rows) continue;
        const T* dy = dout + t * c_out;
        for (int o = 0; o < c_out; ++o) {
          const T* wo = w + (static_cast<std::int64_t>(o) * c_in) * kernel;
          const T d = dy[o];
          for (int i = 0; i < c_in; ++i) dx[i] += d * wo[static_cast<std::int64_t>(i) * kernel + k];
        }
      }
    }
  }
  if (dw || db) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < c_out; ++o) {
      if (dw) {
        T* dwo = dw + (static_cast<std::int64_t>(o) * c_in) * kernel;
        for (std::int64_t t = 0; t < n_rows; ++t) {
          const T d = dout[t * c_out + o];
          for (int k = 0; k < kernel; ++k) {
            const std::int64_t s = t + static_cast<std::int64_t>(k - center) * dilation;
            if (s < 0 || s >= n_rows) continue;
            const T* x = in + s * c_in;
            for (int i = 0; i < c_in; ++i)
              dwo[static_cast<std::int64_t>(i) * kernel + k] += d * x[i];
          }
        }
      }
      if (db) {
        T acc = T(0);
        for (std::int64_t t = 0; t < n_rows; ++t) acc += dout[t * c_out + o];
        db[o] += acc;
      }
    }
  }
}

template <typename T>
void layernorm_forward(const T* in, const T* gain, const T* bias, T* out, T* mean, T* rstd,
                       std::int64_t n_rows, int c, T eps = T(1e-5)) {
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < n_rows; ++t)
    segkit::ref::layernorm_forward(in + t * c, gain, bias, out + t * c, mean + t, rstd + t, 1, c,
                                   eps);
}

template <typename T>
void layernorm_backward(const T* in, const T* gain, const T* mean, const T* rstd, const T* dout,
                        T* din, T* dgain, T* dbias, std::int64_t n_rows, int c) {
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < n_rows; ++t) {
    const T* x = in + t * c;
    const T* dy = dout + t * c;
    T* dx = din + t * c;
    const T mu = mean[t], rs = rstd[t];
    T sum_dhat = T(0), sum_dhat_norm = T(0);
    for (int i = 0; i < c; ++i) {
      const T norm = (x[i] - mu) * rs;
      const T dhat = dy[i] * gain[i];
      sum_dhat += dhat;
      sum_dhat_norm += dhat * norm;
    }
    const T inv_c = T(1) / T(c);
    for (int i = 0; i < c; ++i) {
      const T norm = (x[i] - mu) * rs;
      const T dhat = dy[i] * gain[i];
      dx[i] += rs * (dhat - sum_dhat * inv_c - norm * sum_dhat_norm * inv_c);
    }
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < c; ++i) {
    T dg = T(0), db = T(0);
    for (std::int64_t t = 0; t < n_rows; ++t) {
      const T norm = (in[t * c + i] - mean[t]) * rstd[t];
      dg += dout[t * c + i] * norm;
      db += dout[t * c + i];
    }
    dgain[i] += dg;
    dbias[i] += db;
  }
}

}  // namespace segkit::par
