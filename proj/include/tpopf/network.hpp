#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace tpopf {

using Complex = std::complex<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Phase : std::uint8_t { A = 0, B = 1, C = 2 };

char phase_char(Phase p);
Phase phase_from_char(char c);

/// Non-empty subset of {a, b, c}. Iteration order is always a < b < c.
class PhaseSet {
 public:
  PhaseSet() = default;
  explicit PhaseSet(std::uint8_t bits) : bits_(bits & 0x7u) {}

  static PhaseSet abc() { return PhaseSet(0x7u); }
  static PhaseSet of(Phase p) { return PhaseSet(static_cast<std::uint8_t>(1u << static_cast<int>(p))); }
  /// Parses strings like "abc", "bc", "a". Throws std::invalid_argument.
  static PhaseSet parse(std::string_view s);

  bool has(Phase p) const { return (bits_ >> static_cast<int>(p)) & 1u; }
  int size() const { return __builtin_popcount(bits_); }
  bool empty() const { return bits_ == 0; }
  bool is_three_phase() const { return bits_ == 0x7u; }
  bool subset_of(PhaseSet other) const { return (bits_ & ~other.bits_) == 0; }
  std::uint8_t bits() const { return bits_; }

  std::vector<Phase> phases() const;
  /// Position of p within this set (0-based), or -1 when absent.
  int position(Phase p) const;
  std::string str() const;

  friend bool operator==(PhaseSet, PhaseSet) = default;

 private:
  std::uint8_t bits_ = 0;
};

enum class BusKind { Slack, Load };

struct Bus {
  std::string id;
  PhaseSet phases;
  BusKind kind = BusKind::Load;
  std::array<double, 3> v_min{0.9, 0.9, 0.9};
  std::array<double, 3> v_max{1.1, 1.1, 1.1};
  double base_kv = 0.0;  // line-to-ground

  bool operator==(const Bus&) const = default;
};

struct Branch {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  PhaseSet phases;
  Eigen::MatrixXcd z_series;  // |phases| x |phases|, pu
  Eigen::VectorXd b_shunt;    // per phase, placed at each end, pu

  bool operator==(const Branch& o) const;
};

enum class Connection { YNyn0, Yy0, YNd1, Yd1, Dyn1, Dyn11 };

std::string_view connection_name(Connection c);
std::optional<Connection> connection_from_name(std::string_view s);

struct Transformer {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  Connection connection = Connection::YNyn0;
  Complex y_t;

  bool operator==(const Transformer&) const = default;
};

/// Fixed-tap step regulator, modelled as a YNyn0 bank with per-phase ratios.
struct Regulator {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  std::array<double, 3> taps{1.0, 1.0, 1.0};
  Complex y_t;

  bool operator==(const Regulator&) const = default;
};

enum class LoadConfig { Wye, Delta };

/// Polynomial load coefficients at base voltage, pu on the system base.
struct ZipCoefficients {
  double p_p = 0.0, p_i = 0.0, p_z = 0.0;
  double q_p = 0.0, q_i = 0.0, q_z = 0.0;

  bool operator==(const ZipCoefficients&) const = default;
};

struct ZipLoad {
  std::string id;
  std::string bus;
  LoadConfig configuration = LoadConfig::Wye;
  /// Wye: the single phase in `phase`. Delta: the pair (phase, phase2),
  /// one of ab, bc, ca.
  Phase phase = Phase::A;
  Phase phase2 = Phase::B;
  ZipCoefficients coefficients;

  bool operator==(const ZipLoad&) const = default;
};

struct Inverter {
  std::string id;
  std::string bus;
  Phase phase = Phase::A;
  double s_rating = 0.0;  // pu
  double p_output = 0.0;  // pu

  bool operator==(const Inverter&) const = default;
};

struct SubstationLimits {
  std::array<double, 3> p_min{-kInf, -kInf, -kInf};
  std::array<double, 3> p_max{kInf, kInf, kInf};
  std::array<double, 3> q_min{-kInf, -kInf, -kInf};
  std::array<double, 3> q_max{kInf, kInf, kInf};

  bool operator==(const SubstationLimits&) const = default;
};

/// Immutable feeder description. All electrical quantities are per unit on
/// the per-phase power base `s_base_kva` and each bus's line-to-ground kV.
struct Network {
  std::string name;
  double s_base_kva = 0.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Transformer> transformers;
  std::vector<Regulator> regulators;
  std::vector<ZipLoad> loads;
  std::vector<Inverter> inverters;
  SubstationLimits substation_limits;

  int n_b() const { return static_cast<int>(buses.size()); }
  int n_br() const { return static_cast<int>(branches.size()); }
  int n_g() const { return static_cast<int>(inverters.size()); }
  int n_l() const { return static_cast<int>(loads.size()); }

  /// Index of bus `id`, or -1.
  int bus_index(std::string_view id) const;
  /// Index of the (first) slack bus, or -1.
  int slack_index() const;

  bool operator==(const Network&) const = default;
};

struct Violation {
  std::string code;     // machine-readable, e.g. "multiple-slack"
  std::string path;     // e.g. "branches[2].to_bus"
  std::string message;
};

/// Returns one entry per broken invariant; empty when the network is valid.
std::vector<Violation> validate(const Network& net);

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string path, std::string code, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)), code_(std::move(code)) {}

  const std::string& path() const { return path_; }
  const std::string& code() const { return code_; }

 private:
  std::string path_;
  std::string code_;
};

/// Parses and validates a JSON case document, converting all physical
/// quantities to per unit.
Network load_case(std::string_view text);
Network load_case_file(const std::string& path);

/// Serializes with every quantity tagged "pu"; load_case(save_case(n)) == n.
std::string save_case(const Network& net);

}  // namespace tpopf
