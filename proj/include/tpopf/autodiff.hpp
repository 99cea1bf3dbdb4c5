#pragma once

#include <array>
#include <cmath>

namespace tpopf {

/// Forward-mode number carrying value, gradient and Hessian with respect to
/// N local inputs. Used to differentiate the small element functions that make
/// up the OPF constraints (at most six inputs each).
template <int N>
struct Dual2 {
  double v = 0.0;
  std::array<double, N> g{};
  std::array<double, N * N> h{};

  Dual2() = default;
  Dual2(double value) : v(value) {}  // NOLINT: constants convert implicitly

  static Dual2 variable(double value, int k) {
    Dual2 d(value);
    d.g[k] = 1.0;
    return d;
  }

  double hess(int i, int j) const { return h[i * N + j]; }
};

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual2<N>& x) {
  return x.v;
}

namespace detail {

// Chain rule for a scalar function with derivatives d1, d2 at a.v.
template <int N>
Dual2<N> chain(const Dual2<N>& a, double f, double d1, double d2) {
  Dual2<N> r(f);
  for (int i = 0; i < N; ++i) r.g[i] = d1 * a.g[i];
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      r.h[i * N + j] = d1 * a.h[i * N + j] + d2 * a.g[i] * a.g[j];
  return r;
}

}  // namespace detail

template <int N>
Dual2<N> operator+(const Dual2<N>& a, const Dual2<N>& b) {
  Dual2<N> r(a.v + b.v);
  for (int i = 0; i < N; ++i) r.g[i] = a.g[i] + b.g[i];
  for (int i = 0; i < N * N; ++i) r.h[i] = a.h[i] + b.h[i];
  return r;
}

template <int N>
Dual2<N> operator-(const Dual2<N>& a) {
  Dual2<N> r(-a.v);
  for (int i = 0; i < N; ++i) r.g[i] = -a.g[i];
  for (int i = 0; i < N * N; ++i) r.h[i] = -a.h[i];
  return r;
}

template <int N>
Dual2<N> operator-(const Dual2<N>& a, const Dual2<N>& b) {
  return a + (-b);
}

template <int N>
Dual2<N> operator*(const Dual2<N>& a, const Dual2<N>& b) {
  Dual2<N> r(a.v * b.v);
  for (int i = 0; i < N; ++i) r.g[i] = a.v * b.g[i] + b.v * a.g[i];
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      r.h[i * N + j] = a.v * b.h[i * N + j] + b.v * a.h[i * N + j] + a.g[i] * b.g[j] +
                       b.g[i] * a.g[j];
  return r;
}

template <int N>
Dual2<N> operator*(double s, const Dual2<N>& a) {
  Dual2<N> r(s * a.v);
  for (int i = 0; i < N; ++i) r.g[i] = s * a.g[i];
  for (int i = 0; i < N * N; ++i) r.h[i] = s * a.h[i];
  return r;
}

template <int N>
Dual2<N> operator*(const Dual2<N>& a, double s) {
  return s * a;
}

template <int N>
Dual2<N> operator+(const Dual2<N>& a, double s) {
  Dual2<N> r = a;
  r.v += s;
  return r;
}

template <int N>
Dual2<N> operator+(double s, const Dual2<N>& a) {
  return a + s;
}

template <int N>
Dual2<N> operator-(const Dual2<N>& a, double s) {
  return a + (-s);
}

template <int N>
Dual2<N> operator-(double s, const Dual2<N>& a) {
  return (-a) + s;
}

template <int N>
Dual2<N> inverse(const Dual2<N>& a) {
  const double x = a.v;
  return detail::chain(a, 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x));
}

template <int N>
Dual2<N> operator/(const Dual2<N>& a, const Dual2<N>& b) {
  return a * inverse(b);
}

template <int N>
Dual2<N> operator/(const Dual2<N>& a, double s) {
  return (1.0 / s) * a;
}

template <int N>
Dual2<N> operator/(double s, const Dual2<N>& a) {
  return s * inverse(a);
}

template <int N>
Dual2<N> sin(const Dual2<N>& a) {
  const double s = std::sin(a.v);
  return detail::chain(a, s, std::cos(a.v), -s);
}

template <int N>
Dual2<N> cos(const Dual2<N>& a) {
  const double c = std::cos(a.v);
  return detail::chain(a, c, -std::sin(a.v), -c);
}

template <int N>
Dual2<N> sqrt(const Dual2<N>& a) {
  const double s = std::sqrt(a.v);
  return detail::chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

}  // namespace tpopf
