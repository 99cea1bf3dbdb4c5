#include "tpopf/opf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tpopf/autodiff.hpp"
#include "tpopf/loads.hpp"

namespace tpopf {

using detail::Element;
using detail::ElementKind;
using detail::Input;

std::string_view problem_code(ProblemKind k) {
  switch (k) {
    case ProblemKind::P1_Loss: return "P1";
    case ProblemKind::P2_VUF: return "P2";
    case ProblemKind::P3_LVUR: return "P3";
    case ProblemKind::P4_PVUR: return "P4";
    case ProblemKind::P5_LossVU: return "P5";
  }
  return "?";
}

std::string_view problem_label(ProblemKind k) {
  switch (k) {
    case ProblemKind::P1_Loss: return "P1-Loss";
    case ProblemKind::P2_VUF: return "P2-VUF";
    case ProblemKind::P3_LVUR: return "P3-LVUR";
    case ProblemKind::P4_PVUR: return "P4-PVUR";
    case ProblemKind::P5_LossVU: return "P5-Loss_VU";
  }
  return "?";
}

std::optional<ProblemKind> problem_from_code(std::string_view code) {
  for (ProblemKind k : kAllProblems)
    if (code == problem_code(k) || code == problem_label(k)) return k;
  return std::nullopt;
}

std::pair<double, double> inverter_q_bounds(double s_rating, double p_output) {
  if (s_rating < 0.0 || p_output < 0.0) throw std::invalid_argument("inverter ratings must be non-negative");
  if (p_output > s_rating) throw std::invalid_argument("inverter active output exceeds its apparent power rating");
  const double q = std::sqrt(s_rating * s_rating - p_output * p_output);
  return {-q, q};
}

namespace {

constexpr double kLineToLineFloor = 1e-4;
constexpr int kMaxInputs = 6;
using D6 = Dual2<kMaxInputs>;

template <class T>
T element_value(const Element& e, const std::array<T, kMaxInputs>& x) {
  using std::cos;
  using std::sin;
  T r(0.0);
  switch (e.kind) {
    case ElementKind::Linear:
      for (int k = 0; k < e.count; ++k) r = r + e.c[k] * x[k];
      break;
    case ElementKind::FlowP:
      if (e.count == 1)
        r = e.c[0] * x[0] * x[0];
      else
        r = x[0] * x[2] * (e.c[0] * cos(x[1] - x[3]) + e.c[1] * sin(x[1] - x[3]));
      break;
    case ElementKind::FlowQ:
      if (e.count == 1)
        r = -e.c[1] * x[0] * x[0];
      else
        r = x[0] * x[2] * (e.c[0] * sin(x[1] - x[3]) - e.c[1] * cos(x[1] - x[3]));
      break;
    case ElementKind::WyeLoadP:
      r = zip_polynomial(e.zip.p_p, e.zip.p_i, e.zip.p_z, x[0]);
      break;
    case ElementKind::WyeLoadQ:
      r = zip_polynomial(e.zip.q_p, e.zip.q_i, e.zip.q_z, x[0]);
      break;
    case ElementKind::DeltaLoad: {
      const auto s = delta_load_split<T>(e.zip, x[0], x[1], x[2], x[3]);
      const T* out[4] = {&s.first.p, &s.first.q, &s.second.p, &s.second.q};
      r = *out[e.output];
      break;
    }
    case ElementKind::SequenceRatio:
    case ElementKind::VufLimit: {
      const auto s = vuf_sequence_decomposition<T>(x[0], x[1], x[2], x[3], x[4], x[5]);
      const T vp2 = s[0] * s[0] + s[1] * s[1];
      const T vn2 = s[2] * s[2] + s[3] * s[3];
      r = e.kind == ElementKind::SequenceRatio ? vn2 / vp2 : vn2 - e.c[0] * vp2;
      break;
    }
    case ElementKind::LineToLine:
      r = x[0] * x[0] - (x[1] * x[1] + x[2] * x[2] - 2.0 * x[1] * x[2] * cos(x[3] - x[4]));
      break;
    case ElementKind::DeviationRatio:
      r = x[0] * (x[2] + x[3] + x[4]) * (1.0 / 3.0) - x[1];
      break;
  }
  return e.scale * r;
}

double element_double(const Element& e, const Eigen::VectorXd& x) {
  std::array<double, kMaxInputs> in{};
  for (int k = 0; k < e.count; ++k) in[k] = e.in[k].var >= 0 ? x(e.in[k].var) : e.in[k].value;
  return element_value<double>(e, in);
}

D6 element_dual(const Element& e, const Eigen::VectorXd& x) {
  std::array<D6, kMaxInputs> in{};
  for (int k = 0; k < e.count; ++k)
    in[k] = e.in[k].var >= 0 ? D6::variable(x(e.in[k].var), k) : D6(e.in[k].value);
  return element_value<D6>(e, in);
}

bool has_variable(const Element& e) {
  for (int k = 0; k < e.count; ++k)
    if (e.in[k].var >= 0) return true;
  return false;
}

Element make(ElementKind kind, int row, std::initializer_list<Input> inputs, double scale = 1.0) {
  Element e;
  e.kind = kind;
  e.row = row;
  e.scale = scale;
  for (const Input& in : inputs) e.in[e.count++] = in;
  return e;
}

}  // namespace

OptimizationProblem::OptimizationProblem(const Network& net, ProblemKind kind, const UnbalanceLimits& limits)
    : net_(net), sys_(assemble_ybus(net)), kind_(kind), limits_(limits) {
  const int slack = net_.slack_index();
  if (slack < 0) throw std::invalid_argument("network has no slack bus");
  for (int b = 0; b < net_.n_b(); ++b)
    if (net_.buses[b].phases.is_three_phase()) three_phase_.push_back(b);
  const bool unbalance_kind = kind != ProblemKind::P1_Loss;
  if (unbalance_kind && three_phase_.empty()) throw std::invalid_argument("no three-phase bus");
  if (limits.u_vuf <= 0.0 || limits.u_pvur <= 0.0 || limits.u_lvur <= 0.0)
    throw std::invalid_argument("unbalance limits must be positive");

  // Variable layout.
  const int nodes = sys_.node_count();
  std::vector<double> lo, hi;
  auto add_var = [&](double l, double h) {
    lo.push_back(l);
    hi.push_back(h);
    return layout_.size++;
  };
  layout_.theta.assign(nodes, -1);
  layout_.vmag.assign(nodes, -1);
  for (int n = 0; n < nodes; ++n)
    if (sys_.index.bus(n) != slack) layout_.theta[n] = add_var(-kInf, kInf);
  for (int n = 0; n < nodes; ++n) {
    const int b = sys_.index.bus(n);
    if (b == slack) continue;
    const int p = static_cast<int>(sys_.index.phase(n));
    layout_.vmag[n] = add_var(net_.buses[b].v_min[p], net_.buses[b].v_max[p]);
  }
  const SubstationLimits& sl = net_.substation_limits;
  for (int p = 0; p < 3; ++p) layout_.p_sub[p] = add_var(sl.p_min[p], sl.p_max[p]);
  for (int p = 0; p < 3; ++p) layout_.q_sub[p] = add_var(sl.q_min[p], sl.q_max[p]);
  for (const Inverter& inv : net_.inverters) {
    const auto [ql, qh] = inverter_q_bounds(inv);
    layout_.q_inv.push_back(add_var(ql, qh));
  }
  const bool want_pvur = kind == ProblemKind::P4_PVUR || kind == ProblemKind::P5_LossVU;
  const bool want_lvur = kind == ProblemKind::P3_LVUR || kind == ProblemKind::P5_LossVU;
  const bool capped = kind == ProblemKind::P5_LossVU;
  const int first_aux = layout_.size;
  for (int b : three_phase_) {
    BusAuxiliaries a;
    a.bus = b;
    if (want_pvur) {
      for (int p = 0; p < 3; ++p) a.z1p[p] = add_var(0.0, kInf);
      a.z2p = add_var(0.0, capped ? limits.u_pvur : kInf);
      if (capped) ++families_.pvur_limit;
    }
    if (want_lvur) {
      for (int p = 0; p < 3; ++p) a.vll[p] = add_var(kLineToLineFloor, kInf);
      for (int p = 0; p < 3; ++p) a.z1l[p] = add_var(0.0, kInf);
      a.z2l = add_var(0.0, capped ? limits.u_lvur : kInf);
      if (capped) ++families_.lvur_limit;
    }
    if (want_pvur || want_lvur) layout_.aux.push_back(a);
  }
  layout_.auxiliary_count = layout_.size - first_aux;
  x_l_ = Eigen::Map<Eigen::VectorXd>(lo.data(), static_cast<int>(lo.size()));
  x_u_ = Eigen::Map<Eigen::VectorXd>(hi.data(), static_cast<int>(hi.size()));

  add_power_balance();

  // Objective.
  if (kind == ProblemKind::P1_Loss || kind == ProblemKind::P5_LossVU) {
    for (int m = 0; m < sys_.y_bus.outerSize(); ++m)
      for (Eigen::SparseMatrix<Complex>::InnerIterator it(sys_.y_bus, m); it; ++it) {
        const int n = static_cast<int>(it.row());
        Element e = n == m ? make(ElementKind::FlowP, -1, {node_vmag(n)})
                           : make(ElementKind::FlowP, -1, {node_vmag(n), node_theta(n), node_vmag(m), node_theta(m)});
        e.c[0] = it.value().real();
        e.c[1] = it.value().imag();
        elements_.push_back(e);
      }
  }
  if (kind == ProblemKind::P2_VUF)
    for (int b : three_phase_) add_sequence_terms(b, true);
  if (kind == ProblemKind::P5_LossVU)
    for (int b : three_phase_) add_sequence_terms(b, false);
  for (BusAuxiliaries& a : layout_.aux) {
    if (want_pvur) add_pvur(a.bus, a);
    if (want_lvur) add_lvur(a.bus, a);
    if (kind == ProblemKind::P3_LVUR) {
      Element e = make(ElementKind::Linear, -1, {Input{a.z2l, 0.0}});
      e.c[0] = 1.0;
      elements_.push_back(e);
    }
    if (kind == ProblemKind::P4_PVUR) {
      Element e = make(ElementKind::Linear, -1, {Input{a.z2p, 0.0}});
      e.c[0] = 1.0;
      elements_.push_back(e);
    }
  }

  // Objective terms without any decision variable are folded into a constant
  // so the reported objective is the true loss.
  for (const Element& e : elements_)
    if (e.row < 0 && !has_variable(e)) objective_offset_ += element_double(e, Eigen::VectorXd());
  elements_.erase(std::remove_if(elements_.begin(), elements_.end(),
                                 [](const Element& e) { return e.row < 0 && !has_variable(e); }),
                  elements_.end());
}

int OptimizationProblem::add_row(std::string name, double lo, double hi) {
  g_l_.push_back(lo);
  g_u_.push_back(hi);
  row_const_.push_back(0.0);
  row_names_.push_back(std::move(name));
  return static_cast<int>(g_l_.size()) - 1;
}

Input OptimizationProblem::node_theta(int node) const {
  if (layout_.theta[node] >= 0) return {layout_.theta[node], 0.0};
  return {-1, nominal_angle(sys_.index.phase(node))};
}

Input OptimizationProblem::node_vmag(int node) const {
  if (layout_.vmag[node] >= 0) return {layout_.vmag[node], 0.0};
  return {-1, 1.0};
}

void OptimizationProblem::add_power_balance() {
  const int nodes = sys_.node_count();
  const int slack = net_.slack_index();
  std::vector<int> prow(nodes), qrow(nodes);
  for (int n = 0; n < nodes; ++n) {
    const std::string tag = net_.buses[sys_.index.bus(n)].id + "." + phase_char(sys_.index.phase(n));
    prow[n] = add_row("balance.p." + tag, 0.0, 0.0);
    qrow[n] = add_row("balance.q." + tag, 0.0, 0.0);
    families_.power_balance += 2;
    if (sys_.index.bus(n) == slack) {
      const int p = static_cast<int>(sys_.index.phase(n));
      Element ep = make(ElementKind::Linear, prow[n], {Input{layout_.p_sub[p], 0.0}});
      ep.c[0] = 1.0;
      elements_.push_back(ep);
      Element eq = make(ElementKind::Linear, qrow[n], {Input{layout_.q_sub[p], 0.0}});
      eq.c[0] = 1.0;
      elements_.push_back(eq);
    }
  }
  for (std::size_t i = 0; i < net_.inverters.size(); ++i) {
    const Inverter& inv = net_.inverters[i];
    const int n = sys_.index.node(net_.bus_index(inv.bus), inv.phase);
    row_const_[prow[n]] += inv.p_output;
    Element e = make(ElementKind::Linear, qrow[n], {Input{layout_.q_inv[i], 0.0}});
    e.c[0] = 1.0;
    elements_.push_back(e);
  }
  for (const ZipLoad& l : net_.loads) {
    const int bus = net_.bus_index(l.bus);
    const int p = sys_.index.node(bus, l.phase);
    if (l.configuration == LoadConfig::Wye) {
      Element ep = make(ElementKind::WyeLoadP, prow[p], {node_vmag(p)}, -1.0);
      ep.zip = l.coefficients;
      elements_.push_back(ep);
      Element eq = ep;
      eq.kind = ElementKind::WyeLoadQ;
      eq.row = qrow[p];
      elements_.push_back(eq);
    } else {
      const int q = sys_.index.node(bus, l.phase2);
      const int rows[4] = {prow[p], qrow[p], prow[q], qrow[q]};
      for (int o = 0; o < 4; ++o) {
        Element e = make(ElementKind::DeltaLoad, rows[o], {node_vmag(p), node_theta(p), node_vmag(q), node_theta(q)},
                         -1.0);
        e.zip = l.coefficients;
        e.output = o;
        elements_.push_back(e);
      }
    }
  }
  for (int m = 0; m < sys_.y_bus.outerSize(); ++m)
    for (Eigen::SparseMatrix<Complex>::InnerIterator it(sys_.y_bus, m); it; ++it) {
      const int n = static_cast<int>(it.row());
      for (ElementKind kind : {ElementKind::FlowP, ElementKind::FlowQ}) {
        const int row = kind == ElementKind::FlowP ? prow[n] : qrow[n];
        Element e = n == m ? make(kind, row, {node_vmag(n)}, -1.0)
                           : make(kind, row, {node_vmag(n), node_theta(n), node_vmag(m), node_theta(m)}, -1.0);
        e.c[0] = it.value().real();
        e.c[1] = it.value().imag();
        elements_.push_back(e);
      }
    }
}

void OptimizationProblem::add_sequence_terms(int bus, bool as_objective) {
  std::array<int, 3> nd{};
  for (int p = 0; p < 3; ++p) nd[p] = sys_.index.node(bus, static_cast<Phase>(p));
  const std::initializer_list<Input> in = {node_vmag(nd[0]),  node_vmag(nd[1]),  node_vmag(nd[2]),
                                           node_theta(nd[0]), node_theta(nd[1]), node_theta(nd[2])};
  if (as_objective) {
    elements_.push_back(make(ElementKind::SequenceRatio, -1, in));
  } else {
    const int row = add_row("vuf." + net_.buses[bus].id, -kInf, 0.0);
    ++families_.vuf;
    Element e = make(ElementKind::VufLimit, row, in);
    e.c[0] = limits_.u_vuf * limits_.u_vuf;
    elements_.push_back(e);
  }
}

namespace {

// Rows z1_k - (x_k - avg) >= 0 and z1_k + (x_k - avg) >= 0 as linear
// elements over (z1_k, x_a, x_b, x_c).
void deviation_rows(std::vector<Element>& out, int row_minus, int row_plus, Input z1, const std::array<Input, 3>& x,
                    int k) {
  for (int sign : {-1, 1}) {
    Element e;
    e.kind = ElementKind::Linear;
    e.row = sign < 0 ? row_minus : row_plus;
    e.in[0] = z1;
    e.c[0] = 1.0;
    for (int j = 0; j < 3; ++j) {
      e.in[1 + j] = x[j];
      e.c[1 + j] = sign * ((j == k ? 1.0 : 0.0) - 1.0 / 3.0);
    }
    e.count = 4;
    out.push_back(e);
  }
}

}  // namespace

void OptimizationProblem::add_pvur(int bus, BusAuxiliaries& aux) {
  const std::string& id = net_.buses[bus].id;
  std::array<Input, 3> v{};
  for (int p = 0; p < 3; ++p) v[p] = node_vmag(sys_.index.node(bus, static_cast<Phase>(p)));
  for (int k = 0; k < 3; ++k) {
    const std::string tag = id + "." + phase_char(static_cast<Phase>(k));
    const int rm = add_row("pvur.dev-." + tag, 0.0, kInf);
    const int rp = add_row("pvur.dev+." + tag, 0.0, kInf);
    families_.pvur_deviation += 2;
    deviation_rows(elements_, rm, rp, Input{aux.z1p[k], 0.0}, v, k);
  }
  for (int k = 0; k < 3; ++k) {
    const int r = add_row("pvur.ratio." + id + "." + phase_char(static_cast<Phase>(k)), 0.0, kInf);
    ++families_.pvur_ratio;
    elements_.push_back(
        make(ElementKind::DeviationRatio, r, {Input{aux.z2p, 0.0}, Input{aux.z1p[k], 0.0}, v[0], v[1], v[2]}));
  }
}

void OptimizationProblem::add_lvur(int bus, BusAuxiliaries& aux) {
  static constexpr const char* kPairs[3] = {"ab", "bc", "ca"};
  const std::string& id = net_.buses[bus].id;
  std::array<int, 3> nd{};
  for (int p = 0; p < 3; ++p) nd[p] = sys_.index.node(bus, static_cast<Phase>(p));
  std::array<Input, 3> vll{};
  for (int k = 0; k < 3; ++k) {
    vll[k] = Input{aux.vll[k], 0.0};
    const int m = (k + 1) % 3;
    const int r = add_row(std::string("lvur.ll.") + id + "." + kPairs[k], 0.0, 0.0);
    ++families_.line_to_line;
    elements_.push_back(make(ElementKind::LineToLine, r,
                             {vll[k], node_vmag(nd[k]), node_vmag(nd[m]), node_theta(nd[k]), node_theta(nd[m])}));
  }
  for (int k = 0; k < 3; ++k) {
    const int rm = add_row(std::string("lvur.dev-.") + id + "." + kPairs[k], 0.0, kInf);
    const int rp = add_row(std::string("lvur.dev+.") + id + "." + kPairs[k], 0.0, kInf);
    families_.lvur_deviation += 2;
    deviation_rows(elements_, rm, rp, Input{aux.z1l[k], 0.0}, vll, k);
  }
  for (int k = 0; k < 3; ++k) {
    const int r = add_row(std::string("lvur.ratio.") + id + "." + kPairs[k], 0.0, kInf);
    ++families_.lvur_ratio;
    elements_.push_back(make(ElementKind::DeviationRatio, r,
                             {Input{aux.z2l, 0.0}, Input{aux.z1l[k], 0.0}, vll[0], vll[1], vll[2]}));
  }
}

void OptimizationProblem::bounds(Eigen::VectorXd& x_l, Eigen::VectorXd& x_u, Eigen::VectorXd& g_l,
                                 Eigen::VectorXd& g_u) const {
  x_l = x_l_;
  x_u = x_u_;
  g_l = Eigen::Map<const Eigen::VectorXd>(g_l_.data(), static_cast<int>(g_l_.size()));
  g_u = Eigen::Map<const Eigen::VectorXd>(g_u_.data(), static_cast<int>(g_u_.size()));
}

double OptimizationProblem::objective(const Eigen::VectorXd& x) const {
  double f = objective_offset_;
  for (const Element& e : elements_)
    if (e.row < 0) f += element_double(e, x);
  return f;
}

void OptimizationProblem::gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
  grad = Eigen::VectorXd::Zero(layout_.size);
  for (const Element& e : elements_) {
    if (e.row >= 0) continue;
    const D6 d = element_dual(e, x);
    for (int k = 0; k < e.count; ++k)
      if (e.in[k].var >= 0) grad(e.in[k].var) += d.g[k];
  }
}

void OptimizationProblem::constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
  g = Eigen::Map<const Eigen::VectorXd>(row_const_.data(), static_cast<int>(row_const_.size()));
  for (const Element& e : elements_)
    if (e.row >= 0) g(e.row) += element_double(e, x);
}

void OptimizationProblem::jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
  jac = Eigen::MatrixXd::Zero(num_constraints(), layout_.size);
  for (const Element& e : elements_) {
    if (e.row < 0) continue;
    if (e.kind == ElementKind::Linear) {
      for (int k = 0; k < e.count; ++k)
        if (e.in[k].var >= 0) jac(e.row, e.in[k].var) += e.scale * e.c[k];
      continue;
    }
    const D6 d = element_dual(e, x);
    for (int k = 0; k < e.count; ++k)
      if (e.in[k].var >= 0) jac(e.row, e.in[k].var) += d.g[k];
  }
}

void OptimizationProblem::hessian(const Eigen::VectorXd& x, double sigma, const Eigen::VectorXd& lambda,
                                  Eigen::MatrixXd& hess) const {
  hess = Eigen::MatrixXd::Zero(layout_.size, layout_.size);
  for (const Element& e : elements_) {
    if (e.kind == ElementKind::Linear) continue;
    const double w = e.row < 0 ? sigma : lambda(e.row);
    if (w == 0.0) continue;
    const D6 d = element_dual(e, x);
    for (int i = 0; i < e.count; ++i) {
      const int vi = e.in[i].var;
      if (vi < 0) continue;
      for (int j = 0; j < e.count; ++j) {
        const int vj = e.in[j].var;
        if (vj >= 0) hess(vi, vj) += w * d.hess(i, j);
      }
    }
  }
}

VoltageState OptimizationProblem::unpack_state(const Eigen::VectorXd& x) const {
  VoltageState s = VoltageState::flat(sys_.index);
  for (int n = 0; n < sys_.node_count(); ++n) {
    if (layout_.theta[n] >= 0) s.angle[n] = x(layout_.theta[n]);
    if (layout_.vmag[n] >= 0) s.magnitude[n] = x(layout_.vmag[n]);
  }
  return s;
}

void OptimizationProblem::tighten_auxiliaries(Eigen::VectorXd& x) const {
  const VoltageState s = unpack_state(x);
  auto epigraph = [&](const std::array<double, 3>& v, const std::array<int, 3>& z1, int z2) {
    const double avg = (v[0] + v[1] + v[2]) / 3.0;
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double dev = std::abs(v[k] - avg);
      x(z1[k]) = dev;
      worst = std::max(worst, dev);
    }
    x(z2) = worst / avg;
  };
  for (const BusAuxiliaries& a : layout_.aux) {
    std::array<double, 3> v{}, th{};
    for (int p = 0; p < 3; ++p) {
      const int n = sys_.index.node(a.bus, static_cast<Phase>(p));
      v[p] = s.magnitude[n];
      th[p] = s.angle[n];
    }
    if (a.z2p >= 0) epigraph(v, a.z1p, a.z2p);
    if (a.z2l >= 0) {
      const auto ll = metrics::line_to_line_magnitudes(v, th);
      std::array<double, 3> llc{};
      for (int k = 0; k < 3; ++k) {
        llc[k] = std::max(ll[k], kLineToLineFloor);
        x(a.vll[k]) = llc[k];
      }
      epigraph(llc, a.z1l, a.z2l);
    }
  }
}

Eigen::VectorXd OptimizationProblem::pack(const VoltageState& state, const std::array<double, 3>& p_sub,
                                          const std::array<double, 3>& q_sub,
                                          const std::vector<double>& q_inv) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout_.size);
  for (int n = 0; n < sys_.node_count(); ++n) {
    if (layout_.theta[n] >= 0) x(layout_.theta[n]) = state.angle[n];
    if (layout_.vmag[n] >= 0) x(layout_.vmag[n]) = state.magnitude[n];
  }
  for (int p = 0; p < 3; ++p) {
    x(layout_.p_sub[p]) = p_sub[p];
    x(layout_.q_sub[p]) = q_sub[p];
  }
  for (std::size_t i = 0; i < layout_.q_inv.size(); ++i) x(layout_.q_inv[i]) = i < q_inv.size() ? q_inv[i] : 0.0;
  tighten_auxiliaries(x);
  return x;
}

OptimizationProblem build_problem(const Network& net, ProblemKind kind, const UnbalanceLimits& limits) {
  return OptimizationProblem(net, kind, limits);
}

Solution solve(const OptimizationProblem& prob, const SolveOptions& opts) {
  const Network& net = prob.network();
  const SystemAdmittance& sys = prob.admittance();
  const InjectionSet base = inverter_injections(net, sys);
  VoltageState start = VoltageState::flat(sys.index);
  if (opts.start == StartPoint::PowerFlow) {
    try {
      start = solve_powerflow(net, sys, base).state;
    } catch (const PowerFlowError&) {
      // keep the flat start
    }
  }
  const auto slack_power = slack_generation(net, sys, start, base);
  std::array<double, 3> p0{}, q0{};
  for (int p = 0; p < 3; ++p) {
    p0[p] = slack_power[p].real();
    q0[p] = slack_power[p].imag();
  }
  const Eigen::VectorXd x0 = prob.pack(start, p0, q0, std::vector<double>(net.inverters.size(), 0.0));

  nlp::Options o;
  o.feas_tol = opts.feas_tol;
  o.kkt_tol = opts.kkt_tol;
  o.max_iter = opts.max_iter;
  o.method = opts.method;
  o.verbose = opts.verbose;
  const nlp::Result r = nlp::solve(prob, x0, o);

  Solution sol;
  sol.kind = prob.kind();
  sol.status = r.status;
  sol.x = r.x;
  prob.tighten_auxiliaries(sol.x);
  sol.state = prob.unpack_state(sol.x);
  const VariableLayout& L = prob.layout();
  for (int p = 0; p < 3; ++p) {
    sol.p_sub[p] = sol.x(L.p_sub[p]);
    sol.q_sub[p] = sol.x(L.q_sub[p]);
  }
  for (int idx : L.q_inv) sol.q_inv.push_back(sol.x(idx));
  sol.objective = prob.objective(sol.x);
  sol.stationarity = r.stationarity;
  sol.primal_infeasibility = r.primal_infeasibility;
  sol.complementarity = r.complementarity;
  sol.kkt_error = r.kkt_error;
  sol.iterations = r.iterations;
  return sol;
}

double objective_value(const OptimizationProblem& prob, const VoltageState& state) {
  const Eigen::VectorXd x =
      prob.pack(state, {}, {}, std::vector<double>(prob.network().inverters.size(), 0.0));
  return prob.objective(x);
}

InjectionSet solution_injections(const Network& net, const SystemAdmittance& sys, const Solution& sol) {
  return inverter_injections(net, sys, sol.q_inv);
}

ReportRow evaluate_state(const Network& net, const SystemAdmittance& sys, const VoltageState& state,
                         const std::vector<double>& q_inv, std::string problem, std::string status) {
  ReportRow row;
  row.problem = std::move(problem);
  row.status = std::move(status);
  row.loss_kw = metrics::network_losses(sys, state, net.s_base_kva);
  const InjectionSet inj = inverter_injections(net, sys, q_inv);
  const auto sub = slack_generation(net, sys, state, inj);
  std::array<double, 3> p{}, q{};
  for (int k = 0; k < 3; ++k) {
    p[k] = sub[k].real();
    q[k] = sub[k].imag();
  }
  try {
    row.power_factor = metrics::substation_power_factor(p, q);
  } catch (const metrics::UndefinedMetric&) {
    row.power_factor = 0.0;
  }
  if (!q_inv.empty())
    row.q_avg_kvar = std::accumulate(q_inv.begin(), q_inv.end(), 0.0) / static_cast<double>(q_inv.size()) *
                     net.s_base_kva;
  try {
    row.unbalance = metrics::feeder_unbalance_summary(net, sys, state);
  } catch (const metrics::UndefinedMetric&) {
    row.unbalance = {};
  }
  return row;
}

ReportRow evaluate_solution(const Network& net, const SystemAdmittance& sys, const Solution& sol) {
  return evaluate_state(net, sys, sol.state, sol.q_inv, std::string(problem_label(sol.kind)),
                        nlp::status_name(sol.status));
}

}  // namespace tpopf
