#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "tpopf/network.hpp"

namespace tpopf {

using Matrix3c = Eigen::Matrix3cd;

/// Pi-model admittance of a line embedded in the endpoint phase patterns.
struct BranchAdmittance {
  Eigen::MatrixXcd y_series;      // n_from_phases x n_to_phases
  Eigen::MatrixXcd y_shunt_from;  // diagonal, n_from_phases
  Eigen::MatrixXcd y_shunt_to;    // diagonal, n_to_phases
};

/// The four blocks of a two-winding device's 6x6 primitive admittance.
struct TransformerBlocks {
  Matrix3c y_ii, y_jj, y_ij, y_ji;
};

/// Throws std::invalid_argument when z_series is singular.
BranchAdmittance line_branch_admittance(const Branch& branch, PhaseSet from_phases, PhaseSet to_phases);

TransformerBlocks transformer_submatrices(Connection connection, Complex y_t);
/// Throws std::invalid_argument for an unrecognised connection name.
TransformerBlocks transformer_submatrices(std::string_view connection, Complex y_t);

/// Throws std::invalid_argument for non-positive taps.
TransformerBlocks regulator_admittance(const Regulator& reg);

enum class DeviceKind { Line, Transformer, Regulator };

/// Two-terminal device expressed over global node indices. Terminal currents
/// are I_from = y_ff V_from + y_ft V_to and I_to = y_tf V_from + y_tt V_to.
struct TwoPort {
  DeviceKind kind = DeviceKind::Line;
  std::string name;
  int from_bus = -1, to_bus = -1;
  std::vector<int> from_nodes, to_nodes;
  Eigen::MatrixXcd y_ff, y_ft, y_tf, y_tt;
  /// Series admittance over the device phases (lines only; used for losses).
  Eigen::MatrixXcd y_series;
};

/// Maps each existing (bus, phase) pair to a contiguous node index, ordered
/// by bus and then phase a < b < c.
class NodeIndex {
 public:
  NodeIndex() = default;
  explicit NodeIndex(const Network& net);

  int size() const { return static_cast<int>(bus_of_.size()); }
  /// Node of (bus, phase), or -1 if the phase is absent at that bus.
  int node(int bus, Phase p) const { return table_[bus][static_cast<int>(p)]; }
  int bus(int node) const { return bus_of_[node]; }
  Phase phase(int node) const { return phase_of_[node]; }
  const std::vector<int>& nodes_of_bus(int bus) const { return nodes_of_bus_[bus]; }

 private:
  std::vector<std::array<int, 3>> table_;
  std::vector<int> bus_of_;
  std::vector<Phase> phase_of_;
  std::vector<std::vector<int>> nodes_of_bus_;
};

/// System bus admittance: block-sparse by bus pair plus a flat sparse view.
struct SystemAdmittance {
  NodeIndex index;
  /// Dense block for each coupled bus pair (i, j), sized |phases(i)| x |phases(j)|.
  std::map<std::pair<int, int>, Eigen::MatrixXcd> blocks;
  Eigen::SparseMatrix<Complex> y_bus;
  std::vector<TwoPort> devices;

  Eigen::SparseMatrix<double> conductance() const { return y_bus.real(); }
  Eigen::SparseMatrix<double> susceptance() const { return y_bus.imag(); }
  int node_count() const { return index.size(); }
};

SystemAdmittance assemble_ybus(const Network& net);

/// Writes "row col re im" lines (0-based) for every stored nonzero.
void write_ybus_coo(const SystemAdmittance& sys, std::ostream& out);

}  // namespace tpopf
