// SPDX-License-Identifier: Apache-2.0
//
// Exact one- and two-qubit quantum mechanics: pure states, density matrices,
// Bloch-plane observables, Bell states, the Born rule and the channels used
// on the links from the senders to the relay.
//
// Conventions:
//   * basis order for two qubits is |00>, |01>, |10>, |11>; the first factor
//     is the sender-A qubit.
//   * an Observable of angle t is cos(t) Z + sin(t) X. Its +1 eigenstate is
//     (cos(t/2), sin(t/2)) and its -1 eigenstate is (-sin(t/2), cos(t/2)).
//   * bit 0 is the +1 eigenvalue, bit 1 the -1 eigenvalue.
#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qkdsim/rng.hpp"

namespace qkdsim {

using Complex = std::complex<double>;
using Matrix2 = Eigen::Matrix2cd;
using Matrix4 = Eigen::Matrix4cd;

inline constexpr double kAlgebraTolerance = 1e-12;
inline constexpr double kProbabilityTolerance = 1e-9;

class QubitState {
 public:
  /// Throws InvalidArgument unless finite and normalized within 1e-12.
  QubitState(Complex a0, Complex a1);

  static QubitState zero() { return {1.0, 0.0}; }
  static QubitState one() { return {0.0, 1.0}; }

  const Eigen::Vector2cd& amplitudes() const noexcept { return amp_; }
  Complex operator[](std::size_t i) const { return amp_(static_cast<Eigen::Index>(i)); }

 private:
  Eigen::Vector2cd amp_;
};

class TwoQubitState {
 public:
  explicit TwoQubitState(const Eigen::Vector4cd& amplitudes);

  const Eigen::Vector4cd& amplitudes() const noexcept { return amp_; }
  Complex operator[](std::size_t i) const { return amp_(static_cast<Eigen::Index>(i)); }

 private:
  Eigen::Vector4cd amp_;
};

/// Hermitian, unit-trace, positive semidefinite d x d matrix (d = 2 or 4).
template <int D>
class DensityMatrix {
 public:
  using MatrixType = Eigen::Matrix<Complex, D, D>;

  /// Validates every invariant (Hermitian and trace within 1e-12,
  /// eigenvalues >= -1e-10). Throws InvalidArgument otherwise.
  static DensityMatrix from_matrix(const MatrixType& m);

  static DensityMatrix maximally_mixed() {
    return DensityMatrix(MatrixType::Identity() / static_cast<double>(D));
  }

  const MatrixType& matrix() const noexcept { return m_; }
  Complex operator()(int r, int c) const { return m_(r, c); }

 private:
  explicit DensityMatrix(const MatrixType& m) : m_(m) {}

  // Operations known to preserve the invariants construct directly.
  friend DensityMatrix<2> density(const QubitState&);
  friend DensityMatrix<4> density(const TwoQubitState&);
  friend DensityMatrix<4> tensor(const DensityMatrix<2>&, const DensityMatrix<2>&);
  friend class Channel;

  MatrixType m_;
};

using DensityMatrix2 = DensityMatrix<2>;
using DensityMatrix4 = DensityMatrix<4>;

DensityMatrix2 density(const QubitState& psi);
DensityMatrix4 density(const TwoQubitState& psi);

/// cos(t) Z + sin(t) X, restricted to the real Z-X Bloch plane.
class Observable {
 public:
  double angle() const noexcept { return angle_; }
  Matrix2 matrix() const;

 private:
  explicit Observable(double angle) : angle_(angle) {}
  friend Observable observable_from_angle(double);

  double angle_;
};

/// Throws InvalidArgument for a non-finite angle.
Observable observable_from_angle(double theta);

struct Eigenstates {
  QubitState plus;
  QubitState minus;
};

Eigenstates eigenstates(const Observable& obs);

/// Eigenstate of obs for a bit value (0 -> +1, 1 -> -1).
QubitState eigenstate_for_bit(const Observable& obs, int bit);

TwoQubitState tensor(const QubitState& a, const QubitState& b);
DensityMatrix4 tensor(const DensityMatrix2& a, const DensityMatrix2& b);

enum class BellKind { psi_plus, psi_minus, phi_plus, phi_minus };

inline constexpr std::array<BellKind, 4> kAllBellKinds = {
    BellKind::psi_plus, BellKind::psi_minus, BellKind::phi_plus, BellKind::phi_minus};

TwoQubitState bell_state(BellKind kind);

/// <proj|rho|proj>. Dimensions are enforced by the overload set.
double born_probability(const QubitState& projector, const QubitState& input);
double born_probability(const QubitState& projector, const DensityMatrix2& input);
double born_probability(const TwoQubitState& projector, const TwoQubitState& input);
double born_probability(const TwoQubitState& projector, const DensityMatrix4& input);

/// Born probabilities of the four Bell projectors, in kAllBellKinds order.
std::array<double, 4> bell_probabilities(const DensityMatrix4& input);

/// Single-qubit link model.
class Channel {
 public:
  enum class Kind { identity, depolarizing, misalignment, loss };

  static Channel identity() { return Channel(Kind::identity, 0.0); }
  /// rho -> (1-p) rho + p I/2. Throws InvalidArgument unless p in [0,1].
  static Channel depolarizing(double p);
  /// rho -> U rho U^T with U the real rotation by delta (Bloch angle +2 delta).
  static Channel misalignment(double delta);
  /// Photon survives with probability eta, else the round carries no photon.
  static Channel loss(double eta);

  Kind kind() const noexcept { return kind_; }
  double parameter() const noexcept { return parameter_; }

  /// Deterministic part of the channel: the state map, with loss acting as
  /// identity on surviving photons.
  DensityMatrix2 evolve(const DensityMatrix2& rho) const;

  bool operator==(const Channel&) const = default;

 private:
  Channel(Kind kind, double parameter) : kind_(kind), parameter_(parameter) {}

  Kind kind_;
  double parameter_;
};

/// A state on a link, or nothing when the photon was lost.
using Photon = std::optional<DensityMatrix2>;

/// Applies ch to rho. Loss consumes one uniform draw from rng; the other
/// kinds consume none.
Photon apply_channel(const Channel& ch, const DensityMatrix2& rho, RandomStream& rng);

/// Applies a chain of channels in order. Stops at the first lost photon.
Photon apply_channels(std::span<const Channel> chain, const DensityMatrix2& rho,
                      RandomStream& rng);

/// Samples index i with probability probabilities[i] (renormalized). Entries
/// must be non-negative and sum to 1 within 1e-9. Consumes one draw.
std::size_t sample_outcome(std::span<const double> probabilities, RandomStream& rng);

}  // namespace qkdsim
