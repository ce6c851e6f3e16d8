// SPDX-License-Identifier: Apache-2.0
#include "qkdsim/quantum.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "qkdsim/errors.hpp"

namespace qkdsim {

namespace {

bool all_finite(const auto& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const Complex z = m.data()[i];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

void require_unit_norm(double norm2, const char* what) {
  if (!std::isfinite(norm2) || std::abs(norm2 - 1.0) > kAlgebraTolerance) {
    throw InvalidArgument(fmt::format("{} is not normalized (norm^2 = {:.17g})", what, norm2));
  }
}

}  // namespace

QubitState::QubitState(Complex a0, Complex a1) : amp_(a0, a1) {
  if (!all_finite(amp_)) throw InvalidArgument("qubit amplitudes must be finite");
  require_unit_norm(amp_.squaredNorm(), "qubit state");
}

TwoQubitState::TwoQubitState(const Eigen::Vector4cd& amplitudes) : amp_(amplitudes) {
  if (!all_finite(amp_)) throw InvalidArgument("two-qubit amplitudes must be finite");
  require_unit_norm(amp_.squaredNorm(), "two-qubit state");
}

template <int D>
DensityMatrix<D> DensityMatrix<D>::from_matrix(const MatrixType& m) {
  if (!all_finite(m)) throw InvalidArgument("density matrix entries must be finite");
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > kAlgebraTolerance) {
    throw InvalidArgument("density matrix is not Hermitian");
  }
  const Complex tr = m.trace();
  if (std::abs(tr.real() - 1.0) > kAlgebraTolerance || std::abs(tr.imag()) > kAlgebraTolerance) {
    throw InvalidArgument(fmt::format("density matrix trace is {:.17g}, expected 1", tr.real()));
  }
  Eigen::SelfAdjointEigenSolver<MatrixType> solver(m, Eigen::EigenvaluesOnly);
  if (solver.eigenvalues().minCoeff() < -1e-10) {
    throw InvalidArgument("density matrix has a negative eigenvalue");
  }
  return DensityMatrix(m);
}

template class DensityMatrix<2>;
template class DensityMatrix<4>;

DensityMatrix2 density(const QubitState& psi) {
  const auto& v = psi.amplitudes();
  return DensityMatrix2(v * v.adjoint());
}

DensityMatrix4 density(const TwoQubitState& psi) {
  const auto& v = psi.amplitudes();
  return DensityMatrix4(v * v.adjoint());
}

Matrix2 Observable::matrix() const {
  const double c = std::cos(angle_);
  const double s = std::sin(angle_);
  Matrix2 m;
  m << c, s, s, -c;
  return m;
}

Observable observable_from_angle(double theta) {
  if (!std::isfinite(theta)) throw InvalidArgument("observable angle must be finite");
  return Observable(theta);
}

Eigenstates eigenstates(const Observable& obs) {
  const double c = std::cos(obs.angle() / 2);
  const double s = std::sin(obs.angle() / 2);
  return {QubitState(c, s), QubitState(-s, c)};
}

QubitState eigenstate_for_bit(const Observable& obs, int bit) {
  if (bit != 0 && bit != 1) throw InvalidArgument(fmt::format("bit must be 0 or 1, got {}", bit));
  auto states = eigenstates(obs);
  return bit == 0 ? states.plus : states.minus;
}

TwoQubitState tensor(const QubitState& a, const QubitState& b) {
  Eigen::Vector4cd v;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) v(2 * i + j) = a[i] * b[j];
  }
  return TwoQubitState(v);
}

DensityMatrix4 tensor(const DensityMatrix2& a, const DensityMatrix2& b) {
  Matrix4 m;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      m.block<2, 2>(2 * i, 2 * j) = a(i, j) * b.matrix();
    }
  }
  return DensityMatrix4(m);
}

TwoQubitState bell_state(BellKind kind) {
  const double r = std::numbers::sqrt2 / 2;
  Eigen::Vector4cd v = Eigen::Vector4cd::Zero();
  switch (kind) {
    case BellKind::psi_plus: v(1) = r; v(2) = r; break;
    case BellKind::psi_minus: v(1) = r; v(2) = -r; break;
    case BellKind::phi_plus: v(0) = r; v(3) = r; break;
    case BellKind::phi_minus: v(0) = r; v(3) = -r; break;
  }
  return TwoQubitState(v);
}

double born_probability(const QubitState& projector, const QubitState& input) {
  return std::norm(projector.amplitudes().dot(input.amplitudes()));
}

double born_probability(const QubitState& projector, const DensityMatrix2& input) {
  const auto& p = projector.amplitudes();
  return (p.adjoint() * input.matrix() * p)(0, 0).real();
}

double born_probability(const TwoQubitState& projector, const TwoQubitState& input) {
  return std::norm(projector.amplitudes().dot(input.amplitudes()));
}

double born_probability(const TwoQubitState& projector, const DensityMatrix4& input) {
  const auto& p = projector.amplitudes();
  return (p.adjoint() * input.matrix() * p)(0, 0).real();
}

std::array<double, 4> bell_probabilities(const DensityMatrix4& input) {
  // Closed forms of <B|rho|B> for the four Bell vectors.
  const auto& m = input.matrix();
  const double psi_sum = 0.5 * (m(1, 1).real() + m(2, 2).real());
  const double psi_cross = m(1, 2).real();
  const double phi_sum = 0.5 * (m(0, 0).real() + m(3, 3).real());
  const double phi_cross = m(0, 3).real();
  return {psi_sum + psi_cross, psi_sum - psi_cross, phi_sum + phi_cross, phi_sum - phi_cross};
}

Channel Channel::depolarizing(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidArgument(fmt::format("depolarizing probability {} outside [0,1]", p));
  }
  return Channel(Kind::depolarizing, p);
}

Channel Channel::misalignment(double delta) {
  if (!std::isfinite(delta)) throw InvalidArgument("misalignment angle must be finite");
  return Channel(Kind::misalignment, delta);
}

Channel Channel::loss(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw InvalidArgument(fmt::format("transmission {} outside [0,1]", eta));
  }
  return Channel(Kind::loss, eta);
}

DensityMatrix2 Channel::evolve(const DensityMatrix2& rho) const {
  switch (kind_) {
    case Kind::identity:
    case Kind::loss:
      return rho;
    case Kind::depolarizing:
      return DensityMatrix2((1.0 - parameter_) * rho.matrix() +
                            parameter_ * 0.5 * Matrix2::Identity());
    case Kind::misalignment: {
      const double c = std::cos(parameter_);
      const double s = std::sin(parameter_);
      Matrix2 u;
      u << c, -s, s, c;
      return DensityMatrix2(u * rho.matrix() * u.adjoint());
    }
  }
  return rho;
}

Photon apply_channel(const Channel& ch, const DensityMatrix2& rho, RandomStream& rng) {
  if (ch.kind() == Channel::Kind::loss && rng.uniform() >= ch.parameter()) {
    return std::nullopt;
  }
  return ch.evolve(rho);
}

Photon apply_channels(std::span<const Channel> chain, const DensityMatrix2& rho,
                      RandomStream& rng) {
  Photon photon = rho;
  for (const auto& ch : chain) {
    photon = apply_channel(ch, *photon, rng);
    if (!photon) break;
  }
  return photon;
}

std::size_t sample_outcome(std::span<const double> probabilities, RandomStream& rng) {
  if (probabilities.empty()) throw InvalidArgument("no outcomes to sample from");
  double total = 0.0;
  for (double p : probabilities) {
    if (!std::isfinite(p) || p < -kProbabilityTolerance) {
      throw InvalidArgument(fmt::format("invalid outcome probability {}", p));
    }
    total += std::max(p, 0.0);
  }
  if (total <= 0.0 || std::abs(total - 1.0) > kProbabilityTolerance) {
    throw InvalidArgument(fmt::format("outcome probabilities sum to {:.17g}", total));
  }
  const double u = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::max(probabilities[i], 0.0);
    if (p > 0.0) last_positive = i;
    acc += p;
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace qkdsim
