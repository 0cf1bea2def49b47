#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fock.hpp"

// Qubit-qumode gate constructors as explicit matrices on truncated spaces,
// plus the compiled multi-qubit circuits built from them. Composite spaces
// are ordered qubit (x) mode unless stated otherwise, and circuits are lists
// applied first-to-last (the rightmost factor of a written product acts
// first). Constructors take the Fock cutoff from the caller and never
// auto-extend it; truncation error at the cutoff is the caller's concern.

namespace bosonq::gates {

namespace detail {
inline const Complex kI{0.0, 1.0};
}

/// exp[-i (theta/2) (cos(phi) X + sin(phi) Y)]
inline ComplexMatrix rotation(double theta, double phi) {
  ComplexMatrix r(2, 2);
  const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
  r(0, 0) = c;
  r(0, 1) = -detail::kI * std::exp(-detail::kI * phi) * s;
  r(1, 0) = -detail::kI * std::exp(detail::kI * phi) * s;
  r(1, 1) = c;
  return r;
}

/// exp(beta b^dag - conj(beta) b) on the truncated space.
inline ComplexMatrix displacement(Complex beta, int cutoff) {
  const ComplexMatrix bdag = fock::boson_create(cutoff);
  return fock::matexp(beta * bdag - std::conj(beta) * bdag.adjoint());
}

/// |0><0| (x) D(beta) + |1><1| (x) D(-beta)
inline ComplexMatrix conditional_displacement(Complex beta, int cutoff) {
  ComplexMatrix cd = ComplexMatrix::Zero(2 * cutoff, 2 * cutoff);
  cd.topLeftCorner(cutoff, cutoff) = displacement(beta, cutoff);
  cd.bottomRightCorner(cutoff, cutoff) = displacement(-beta, cutoff);
  return cd;
}

/// |1><0| (x) D(beta/2) + |0><1| (x) D(-beta/2); equals (X (x) I) CD(beta/2).
inline ComplexMatrix ecd(Complex beta, int cutoff) {
  ComplexMatrix e = ComplexMatrix::Zero(2 * cutoff, 2 * cutoff);
  e.bottomLeftCorner(cutoff, cutoff) = displacement(0.5 * beta, cutoff);
  e.topRightCorner(cutoff, cutoff) = displacement(-0.5 * beta, cutoff);
  return e;
}

/// ECD(beta) [R(theta, phi) (x) I]: one universal qubit-qumode block.
inline ComplexMatrix ecd_rotation(Complex beta, double theta, double phi, int cutoff) {
  return ecd(beta, cutoff) * fock::kron(rotation(theta, phi), fock::identity(cutoff));
}

/// diag(e^{i theta_0}, ..., e^{i theta_{L-1}})
inline ComplexMatrix snap(const std::vector<double>& thetas, int cutoff) {
  if (int(thetas.size()) != cutoff)
    throw std::invalid_argument("snap: phase vector length must equal the cutoff");
  ComplexMatrix s = ComplexMatrix::Zero(cutoff, cutoff);
  for (int n = 0; n < cutoff; ++n) s(n, n) = std::exp(detail::kI * thetas[size_t(n)]);
  return s;
}

/// Dispersive-ancilla form: |0><0| (x) S(theta) + |1><1| (x) I.
inline ComplexMatrix snap_qubit_form(const std::vector<double>& thetas, int cutoff) {
  ComplexMatrix s = ComplexMatrix::Zero(2 * cutoff, 2 * cutoff);
  s.topLeftCorner(cutoff, cutoff) = snap(thetas, cutoff);
  s.bottomRightCorner(cutoff, cutoff) = fock::identity(cutoff);
  return s;
}

/// exp[i (beta/2) (e^{i phi} b1^dag b2 + h.c.)] on the L1*L2 product space.
inline ComplexMatrix beam_splitter(double beta, double phi, int cutoff1, int cutoff2) {
  if (cutoff1 < 1 || cutoff2 < 1)
    throw std::invalid_argument("beam_splitter: cutoffs must be >= 1");
  const ComplexMatrix hop = fock::kron(fock::boson_create(cutoff1), fock::boson_annihilate(cutoff2));
  const ComplexMatrix gen = std::exp(detail::kI * phi) * hop +
                            std::exp(-detail::kI * phi) * hop.adjoint();
  return fock::matexp(detail::kI * (beta / 2.0) * gen);
}

/// |0><0| (x) I + |1><1| (x) U
inline ComplexMatrix controlled_embed(const ComplexMatrix& u) {
  if (u.rows() != u.cols()) throw std::invalid_argument("controlled_embed: U must be square");
  const Eigen::Index d = u.rows();
  ComplexMatrix c = ComplexMatrix::Zero(2 * d, 2 * d);
  c.topLeftCorner(d, d).setIdentity();
  c.bottomRightCorner(d, d) = u;
  return c;
}

// ---------------------------------------------------------------------------
// Circuit descriptions (serialized gate lists)
// ---------------------------------------------------------------------------

enum class GateKind {
  Rotation,
  Displacement,
  CondDisp,
  Ecd,
  Snap,
  BeamSplitter,
  ControlledWrap,  // controlled-X between two qubit wires
};

inline std::string gate_kind_name(GateKind k) {
  switch (k) {
    case GateKind::Rotation: return "rotation";
    case GateKind::Displacement: return "displacement";
    case GateKind::CondDisp: return "conditional_displacement";
    case GateKind::Ecd: return "ecd";
    case GateKind::Snap: return "snap";
    case GateKind::BeamSplitter: return "beam_splitter";
    case GateKind::ControlledWrap: return "controlled_x";
  }
  return "unknown";
}

struct GateParams {
  GateKind kind = GateKind::Rotation;
  Complex beta{0.0, 0.0};
  double theta = 0.0;
  double phi = 0.0;
  std::vector<double> theta_vector;  // SNAP phases, length = cutoff
  std::vector<int> targets;          // wire indices, role documented per kind
};

struct Circuit {
  // gates[0] acts first
  std::vector<GateParams> gates;
};

inline nlohmann::json circuit_to_json(const Circuit& c) {
  nlohmann::json gates = nlohmann::json::array();
  int step = 0;
  for (const auto& g : c.gates) {
    nlohmann::json jg;
    jg["kind"] = gate_kind_name(g.kind);
    jg["order"] = step++;
    jg["targets"] = g.targets;
    nlohmann::json params;
    params["beta"] = {g.beta.real(), g.beta.imag()};
    params["theta"] = g.theta;
    params["phi"] = g.phi;
    if (!g.theta_vector.empty()) params["theta_vector"] = g.theta_vector;
    jg["params"] = params;
    gates.push_back(jg);
  }
  return nlohmann::json{{"application_order", "ascending"}, {"gates", gates}};
}

// ---------------------------------------------------------------------------
// Compiled controlled gates
// ---------------------------------------------------------------------------

struct CompiledCircuit {
  Circuit circuit;
  ComplexMatrix matrix;  // product of the emitted gates
};

/// Controlled-ECD on (qubit a, qubit b, mode): CD_b(beta/4), then c_a X_b,
/// then CD_b(-beta/4). The product equals controlled_embed(ecd(beta)).
inline CompiledCircuit compile_controlled_ecd(Complex beta, int cutoff) {
  CompiledCircuit out;
  GateParams cd1{GateKind::CondDisp, beta / 4.0, 0.0, 0.0, {}, {1, 2}};
  GateParams cx{GateKind::ControlledWrap, 0.0, 0.0, 0.0, {}, {0, 1}};
  GateParams cd2{GateKind::CondDisp, -beta / 4.0, 0.0, 0.0, {}, {1, 2}};
  out.circuit.gates = {cd1, cx, cd2};

  const ComplexMatrix eye_a = fock::identity(2);
  const ComplexMatrix cd_quarter = fock::kron(eye_a, conditional_displacement(beta / 4.0, cutoff));
  const ComplexMatrix cd_neg = fock::kron(eye_a, conditional_displacement(-beta / 4.0, cutoff));
  ComplexMatrix cnot = ComplexMatrix::Zero(4, 4);
  cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1.0;
  const ComplexMatrix cx_full = fock::kron(cnot, fock::identity(cutoff));
  out.matrix = cd_neg * cx_full * cd_quarter;
  return out;
}

/// Controlled-SNAP on (control qubit, ancilla qubit, mode): a CNOT sandwich
/// around the dispersive SNAP with the phases applied on the ancilla-|1>
/// branch, so the ancilla-|0> restriction equals controlled_embed(snap).
/// The ancilla enters and leaves in |0>.
inline CompiledCircuit controlled_snap_circuit(const std::vector<double>& thetas, int cutoff) {
  CompiledCircuit out;
  GateParams cx1{GateKind::ControlledWrap, 0.0, 0.0, 0.0, {}, {0, 1}};
  GateParams sn{GateKind::Snap, 0.0, 0.0, 0.0, thetas, {1, 2}};
  GateParams cx2{GateKind::ControlledWrap, 0.0, 0.0, 0.0, {}, {0, 1}};
  out.circuit.gates = {cx1, sn, cx2};

  ComplexMatrix cnot = ComplexMatrix::Zero(4, 4);
  cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1.0;
  const ComplexMatrix cx_full = fock::kron(cnot, fock::identity(cutoff));
  // qubit form with the roles of the ancilla levels exchanged
  ComplexMatrix s_on_excited = ComplexMatrix::Zero(2 * cutoff, 2 * cutoff);
  s_on_excited.topLeftCorner(cutoff, cutoff).setIdentity();
  s_on_excited.bottomRightCorner(cutoff, cutoff) = snap(thetas, cutoff);
  const ComplexMatrix mid = fock::kron(fock::identity(2), s_on_excited);
  out.matrix = cx_full * mid * cx_full;
  return out;
}

/// <0_ancilla| U |0_ancilla> block of a (control, ancilla, mode) operator,
/// acting on (control, mode).
inline ComplexMatrix restrict_ancilla_zero(const ComplexMatrix& u, int cutoff) {
  const int d = cutoff;
  ComplexMatrix r(2 * d, 2 * d);
  // basis order: control (x) ancilla (x) mode
  r.topLeftCorner(d, d) = u.block(0, 0, d, d);
  r.topRightCorner(d, d) = u.block(0, 2 * d, d, d);
  r.bottomLeftCorner(d, d) = u.block(2 * d, 0, d, d);
  r.bottomRightCorner(d, d) = u.block(2 * d, 2 * d, d, d);
  return r;
}

}  // namespace bosonq::gates
