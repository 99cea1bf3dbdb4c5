#pragma once

#include <cmath>

#include "tpopf/network.hpp"

namespace tpopf {

/// Base voltage (pu) a load's polynomial is referenced to: 1 for wye loads,
/// sqrt(3) for delta loads, which see line-to-line magnitudes.
inline double load_base_voltage(const ZipLoad& load) {
  return load.configuration == LoadConfig::Delta ? std::sqrt(3.0) : 1.0;
}

template <class T>
T zip_polynomial(double constant, double current, double impedance, const T& ratio) {
  return constant + current * ratio + impedance * ratio * ratio;
}

template <class T>
struct LoadPower {
  T p, q;
};

/// Power drawn by a wye-connected polynomial load at voltage magnitude v.
template <class T>
LoadPower<T> wye_load_power(const ZipCoefficients& c, const T& v) {
  return {zip_polynomial(c.p_p, c.p_i, c.p_z, v), zip_polynomial(c.q_p, c.q_i, c.q_z, v)};
}

/// Per-phase demand of a delta load connected between phases p and q.
template <class T>
struct DeltaSplit {
  LoadPower<T> first, second;
};

/// The polynomial is evaluated on |V_p - V_q| / sqrt(3) and the resulting
/// branch power S is drawn as S V_p / V_pq on p and -S V_q / V_pq on q, i.e.
/// the delta branch current leaves phase p and returns on phase q.
template <class T>
DeltaSplit<T> delta_load_split(const ZipCoefficients& c, const T& vp, const T& tp, const T& vq, const T& tq) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const T pr = vp * cos(tp), pi = vp * sin(tp);
  const T qr = vq * cos(tq), qi = vq * sin(tq);
  const T xr = pr - qr, xi = pi - qi;
  const T m2 = xr * xr + xi * xi;
  const T ratio = sqrt(m2) / std::sqrt(3.0);
  const T P = zip_polynomial(c.p_p, c.p_i, c.p_z, ratio);
  const T Q = zip_polynomial(c.q_p, c.q_i, c.q_z, ratio);
  // A = V_p conj(V_pq), B = V_q conj(V_pq)
  const T ar = pr * xr + pi * xi, ai = pi * xr - pr * xi;
  const T br = qr * xr + qi * xi, bi = qi * xr - qr * xi;
  DeltaSplit<T> out;
  out.first.p = (P * ar - Q * ai) / m2;
  out.first.q = (P * ai + Q * ar) / m2;
  out.second.p = -(P * br - Q * bi) / m2;
  out.second.q = -(P * bi + Q * br) / m2;
  return out;
}

}  // namespace tpopf
