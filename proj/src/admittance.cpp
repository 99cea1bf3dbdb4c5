#include "tpopf/admittance.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace tpopf {

namespace {

const Complex kJ(0.0, 1.0);

Matrix3c y_one(Complex y_t) { return Matrix3c::Identity() * y_t; }

Matrix3c y_two(Complex y_t) {
  Matrix3c m;
  m << 2, -1, -1, -1, 2, -1, -1, -1, 2;
  return m * (y_t / 3.0);
}

Matrix3c y_three(Complex y_t) {
  Matrix3c m;
  m << -1, 1, 0, 0, -1, 1, 1, 0, -1;
  return m * (y_t / std::sqrt(3.0));
}

}  // namespace

BranchAdmittance line_branch_admittance(const Branch& branch, PhaseSet from_phases, PhaseSet to_phases) {
  const int n = branch.phases.size();
  if (branch.z_series.rows() != n || branch.z_series.cols() != n)
    throw std::invalid_argument("impedance matrix does not match branch phases");
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(branch.z_series);
  lu.setThreshold(1e-12);
  if (lu.rank() < n) throw std::invalid_argument("singular impedance matrix on branch '" + branch.id + "'");
  const Eigen::MatrixXcd y = lu.inverse();

  BranchAdmittance out;
  out.y_series = Eigen::MatrixXcd::Zero(from_phases.size(), to_phases.size());
  out.y_shunt_from = Eigen::MatrixXcd::Zero(from_phases.size(), from_phases.size());
  out.y_shunt_to = Eigen::MatrixXcd::Zero(to_phases.size(), to_phases.size());
  const auto ph = branch.phases.phases();
  for (int r = 0; r < n; ++r) {
    const int fr = from_phases.position(ph[r]);
    const int tr = to_phases.position(ph[r]);
    if (fr < 0 || tr < 0) throw std::invalid_argument("branch phase missing at an endpoint");
    for (int c = 0; c < n; ++c) out.y_series(fr, to_phases.position(ph[c])) = y(r, c);
    const double b = branch.b_shunt.size() == n ? branch.b_shunt(r) : 0.0;
    out.y_shunt_from(fr, fr) = kJ * b;
    out.y_shunt_to(tr, tr) = kJ * b;
  }
  return out;
}

TransformerBlocks transformer_submatrices(Connection connection, Complex y_t) {
  const Matrix3c yi = y_one(y_t), yii = y_two(y_t), yiii = y_three(y_t);
  switch (connection) {
    case Connection::YNyn0: return {yi, yi, -yi, -yi};
    case Connection::Yy0: return {yii, yii, -yii, -yii};
    case Connection::YNd1: return {yi, yii, yiii, yiii.transpose()};
    case Connection::Yd1: return {yii, yii, yiii, yiii.transpose()};
    case Connection::Dyn1: return {yii, yi, yiii, yiii.transpose()};
    case Connection::Dyn11: return {yii, yi, yiii.transpose(), yiii};
  }
  throw std::invalid_argument("unknown transformer connection");
}

TransformerBlocks transformer_submatrices(std::string_view connection, Complex y_t) {
  const auto c = connection_from_name(connection);
  if (!c) throw std::invalid_argument("unknown transformer connection '" + std::string(connection) + "'");
  return transformer_submatrices(*c, y_t);
}

TransformerBlocks regulator_admittance(const Regulator& reg) {
  for (double t : reg.taps)
    if (!(t > 0.0)) throw std::invalid_argument("regulator taps must be positive");
  TransformerBlocks b = transformer_submatrices(Connection::YNyn0, reg.y_t);
  for (int k = 0; k < 3; ++k) {
    const double t = reg.taps[k];
    b.y_ii(k, k) *= t * t;
    b.y_ij(k, k) = -t * reg.y_t;
    b.y_ji(k, k) = -t * reg.y_t;
  }
  return b;
}

NodeIndex::NodeIndex(const Network& net) {
  table_.assign(net.buses.size(), {-1, -1, -1});
  nodes_of_bus_.resize(net.buses.size());
  for (int i = 0; i < net.n_b(); ++i) {
    for (Phase p : net.buses[i].phases.phases()) {
      const int k = static_cast<int>(bus_of_.size());
      table_[i][static_cast<int>(p)] = k;
      bus_of_.push_back(i);
      phase_of_.push_back(p);
      nodes_of_bus_[i].push_back(k);
    }
  }
}

SystemAdmittance assemble_ybus(const Network& net) {
  SystemAdmittance sys;
  sys.index = NodeIndex(net);
  const NodeIndex& idx = sys.index;

  auto nodes_for = [&](int bus, PhaseSet ph) {
    std::vector<int> out;
    for (Phase p : ph.phases()) out.push_back(idx.node(bus, p));
    return out;
  };

  for (const auto& br : net.branches) {
    const int f = net.bus_index(br.from_bus), t = net.bus_index(br.to_bus);
    const BranchAdmittance ba = line_branch_admittance(br, net.buses[f].phases, net.buses[t].phases);
    TwoPort d;
    d.kind = DeviceKind::Line;
    d.name = br.id;
    d.from_bus = f;
    d.to_bus = t;
    d.from_nodes = nodes_for(f, br.phases);
    d.to_nodes = nodes_for(t, br.phases);
    const int n = br.phases.size();
    Eigen::MatrixXcd y(n, n), sh = Eigen::MatrixXcd::Zero(n, n);
    const auto ph = br.phases.phases();
    const PhaseSet pf = net.buses[f].phases, pt = net.buses[t].phases;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) y(r, c) = ba.y_series(pf.position(ph[r]), pt.position(ph[c]));
      sh(r, r) = ba.y_shunt_from(pf.position(ph[r]), pf.position(ph[r]));
    }
    d.y_series = y;
    d.y_ff = y + sh;
    d.y_tt = y + sh;
    d.y_ft = -y;
    d.y_tf = -y;
    sys.devices.push_back(std::move(d));
  }

  auto add_three_phase = [&](DeviceKind kind, const std::string& name, const std::string& from,
                             const std::string& to, const TransformerBlocks& b) {
    TwoPort d;
    d.kind = kind;
    d.name = name;
    d.from_bus = net.bus_index(from);
    d.to_bus = net.bus_index(to);
    d.from_nodes = nodes_for(d.from_bus, PhaseSet::abc());
    d.to_nodes = nodes_for(d.to_bus, PhaseSet::abc());
    d.y_ff = b.y_ii;
    d.y_tt = b.y_jj;
    d.y_ft = b.y_ij;
    d.y_tf = b.y_ji;
    sys.devices.push_back(std::move(d));
  };
  for (const auto& t : net.transformers)
    add_three_phase(DeviceKind::Transformer, t.id, t.from_bus, t.to_bus,
                    transformer_submatrices(t.connection, t.y_t));
  for (const auto& r : net.regulators)
    add_three_phase(DeviceKind::Regulator, r.id, r.from_bus, r.to_bus, regulator_admittance(r));

  auto block = [&](int bi, int bj) -> Eigen::MatrixXcd& {
    auto it = sys.blocks.find({bi, bj});
    if (it == sys.blocks.end())
      it = sys.blocks
               .emplace(std::pair{bi, bj}, Eigen::MatrixXcd::Zero(net.buses[bi].phases.size(),
                                                                  net.buses[bj].phases.size()))
               .first;
    return it->second;
  };
  auto scatter = [&](int bi, const std::vector<int>& rows, int bj, const std::vector<int>& cols,
                     const Eigen::MatrixXcd& m) {
    Eigen::MatrixXcd& blk = block(bi, bj);
    const PhaseSet pi = net.buses[bi].phases, pj = net.buses[bj].phases;
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < cols.size(); ++c)
        blk(pi.position(idx.phase(rows[r])), pj.position(idx.phase(cols[c]))) += m(r, c);
  };
  for (const auto& d : sys.devices) {
    scatter(d.from_bus, d.from_nodes, d.from_bus, d.from_nodes, d.y_ff);
    scatter(d.from_bus, d.from_nodes, d.to_bus, d.to_nodes, d.y_ft);
    scatter(d.to_bus, d.to_nodes, d.from_bus, d.from_nodes, d.y_tf);
    scatter(d.to_bus, d.to_nodes, d.to_bus, d.to_nodes, d.y_tt);
  }

  std::vector<Eigen::Triplet<Complex>> trip;
  for (const auto& [key, blk] : sys.blocks) {
    const auto& rows = idx.nodes_of_bus(key.first);
    const auto& cols = idx.nodes_of_bus(key.second);
    for (int r = 0; r < blk.rows(); ++r)
      for (int c = 0; c < blk.cols(); ++c)
        if (blk(r, c) != Complex(0.0, 0.0)) trip.emplace_back(rows[r], cols[c], blk(r, c));
  }
  sys.y_bus.resize(idx.size(), idx.size());
  sys.y_bus.setFromTriplets(trip.begin(), trip.end());
  sys.y_bus.makeCompressed();
  return sys;
}

void write_ybus_coo(const SystemAdmittance& sys, std::ostream& out) {
  out.precision(17);
  for (int k = 0; k < sys.y_bus.outerSize(); ++k)
    for (Eigen::SparseMatrix<Complex>::InnerIterator it(sys.y_bus, k); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << it.value().real() << ' ' << it.value().imag() << '\n';
}

}  // namespace tpopf
