"""Energy function, Hamiltonian field and geodesic flow on the cotangent chart.

The flow field is defined by its component equations

    dq_i/dt = sum_j p_j * g^{ji}
    dp_i/dt = -1/2 sum_{k,j} (-1)^{|q_i||q_k|} p_k * d_{q_i}(g^{kj}) * p_j

with H = 1/2 sum_{i,j} p_i * g^{ij} * p_j, all factor orders exactly as
written.  No graded differential forms are represented; these equations are
the definition used here.  The partials of the inverse metric come from
differentiating sum_k g^{ik} g_{kj} = delta_ij pointwise.

Musical maps: `flat` lowers a velocity to momenta (p_j = sum_i v_i * g_ij),
`sharp` raises momenta to a velocity (v_i = sum_j p_j * g^{ji}); they are
mutually inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import MismatchedGeneratorCount, ParityViolation, SignatureMismatch
from .geodesics import InitialCondition, _check_domain, _grid, \
    integrate_geodesic
from .geometry import MetricChart, SuperPoint, _Kernel
from .grassmann import GrassmannElement, Parity, batched_mul, mask_parity


# ---------------------------------------------------------------------------
# phase-space data


class PhasePoint:
    """A point of the cotangent chart: position plus momenta p_i with
    parity |p_i| = |q_i|."""

    __slots__ = ("position", "momenta", "L")

    def __init__(self, position: SuperPoint,
                 momenta: Mapping[str, GrassmannElement]):
        sig = position.sig
        mom: dict[str, GrassmannElement] = {}
        for name in sig.names:
            p = momenta.get(name, GrassmannElement.zero(position.L))
            if p.L != position.L:
                raise MismatchedGeneratorCount(f"momentum {name}: L={p.L}")
            want = Parity.EVEN if sig.parity_of(name) == 0 else Parity.ODD
            if not p.has_parity(want):
                raise ParityViolation(
                    f"momentum of {name} must be {want.name.lower()}")
            mom[name] = p
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "momenta", mom)
        object.__setattr__(self, "L", position.L)

    def __setattr__(self, name, value):
        raise AttributeError("PhasePoint is immutable")

    def momentum_array(self) -> np.ndarray:
        sig = self.position.sig
        return np.stack([self.momenta[name].coeffs for name in sig.names])


@dataclass
class FlowState:
    """Trajectory of the geodesic flow on the cotangent chart."""

    sig: object
    L: int
    ts: np.ndarray
    positions: np.ndarray  # (T, n, 2^L)
    momenta: np.ndarray    # (T, n, 2^L)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.ts)

    def phase_at(self, idx: int) -> PhasePoint:
        pos = SuperPoint.from_array(self.sig, self.L, self.positions[idx])
        mom = {name: GrassmannElement(self.L, self.momenta[idx, i])
               for i, name in enumerate(self.sig.names)}
        return PhasePoint(pos, mom)

    @property
    def dt(self) -> float:
        return float(self.metadata.get("dt", self.ts[1] - self.ts[0]))


# ---------------------------------------------------------------------------
# energy and Hamiltonian field


def _energy(kern: _Kernel, pos: np.ndarray, mom: np.ndarray) -> np.ndarray:
    ginv = kern.metric_inverse(kern.env(pos))
    t1 = batched_mul(mom[:, None, :], ginv, kern.L)       # [i,j] = p_i g^{ij}
    t2 = batched_mul(t1, mom[None, :, :], kern.L)         # [i,j] = p_i g^{ij} p_j
    return 0.5 * t2.sum(axis=(0, 1))


def energy_at(chart: MetricChart, s: PhasePoint) -> GrassmannElement:
    """H = 1/2 sum_{i,j} p_i * g^{ij} * p_j (an even element)."""
    chart.check_point(s.position)
    kern = chart.kernel(s.L)
    return GrassmannElement(
        s.L, _energy(kern, s.position.as_array(), s.momentum_array()))


def _xh(kern: _Kernel, pos: np.ndarray, mom: np.ndarray):
    """Component equations of the Hamiltonian field at a phase point."""
    env = kern.env(pos)
    ginv = kern.metric_inverse(env)
    # dq_i = sum_j p_j * g^{ji}
    tq = batched_mul(mom[:, None, :], ginv, kern.L)  # [j,i] = p_j g^{ji}
    qdot = tq.sum(axis=0)
    if kern.is_flat:
        return qdot, np.zeros_like(mom)
    dginv = kern.dginv(env, ginv)  # [a,k,j] = d_a g^{kj}
    # dp_i = -1/2 sum_{k,j} (-1)^{|q_i||q_k|} p_k * d_i(g^{kj}) * p_j
    u = batched_mul(mom[None, :, None, :], dginv, kern.L)   # [i,k,j] = p_k d_i g^{kj}
    u = batched_mul(u, mom[None, None, :, :], kern.L)       # [i,k,j] *= p_j
    u = kern.s1[:, :, None, None] * u                       # (-1)^{|i||k|}
    pdot = -0.5 * u.sum(axis=(1, 2))
    return qdot, pdot


def xh_at(chart: MetricChart, s: PhasePoint):
    """(dq_i/dt, dp_i/dt) of the geodesic flow field at a phase point."""
    chart.check_point(s.position)
    kern = chart.kernel(s.L)
    qdot, pdot = _xh(kern, s.position.as_array(), s.momentum_array())
    names = chart.sig.names
    return ({name: GrassmannElement(s.L, qdot[i]) for i, name in enumerate(names)},
            {name: GrassmannElement(s.L, pdot[i]) for i, name in enumerate(names)})


# ---------------------------------------------------------------------------
# flow integration


def integrate_flow(chart: MetricChart, I: PhasePoint,
                   t_end: float, dt: float) -> FlowState:
    """Fixed-step RK4 for the Hamiltonian flow; deterministic output."""
    if I.position.sig != chart.sig:
        raise SignatureMismatch("initial condition lives on a different chart")
    steps, h = _grid(t_end, dt)
    kern = chart.kernel(I.L)
    n, D = kern.n, kern.D
    pos = I.position.as_array().astype(float)
    mom = I.momentum_array().astype(float)
    _check_domain(chart, pos, 0.0)

    ts = np.arange(steps + 1) * h
    positions = np.empty((steps + 1, n, D))
    momenta = np.empty((steps + 1, n, D))
    positions[0], momenta[0] = pos, mom

    for s in range(steps):
        k1q, k1p = _xh(kern, pos, mom)
        k2q, k2p = _xh(kern, pos + 0.5 * h * k1q, mom + 0.5 * h * k1p)
        k3q, k3p = _xh(kern, pos + 0.5 * h * k2q, mom + 0.5 * h * k2p)
        k4q, k4p = _xh(kern, pos + h * k3q, mom + h * k3p)
        pos = pos + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        mom = mom + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        _check_domain(chart, pos, ts[s + 1])
        positions[s + 1], momenta[s + 1] = pos, mom

    return FlowState(chart.sig, I.L, ts, positions, momenta,
                     metadata={"dt": h, "requested_dt": dt, "t_end": t_end,
                               "metric": chart.name})


def energy_series(chart: MetricChart, flow: FlowState) -> np.ndarray:
    """H at every sample of a flow, shape (n_samples, 2^L)."""
    kern = chart.kernel(flow.L)
    out = np.empty((len(flow), kern.D))
    for s in range(len(flow)):
        out[s] = _energy(kern, flow.positions[s], flow.momenta[s])
    return out


def parity_violation_max(flow: FlowState) -> float:
    """Largest coefficient sitting on a wrong-parity mask (should be 0.0)."""
    par = flow.sig.parity_vector()
    mpar = mask_parity(flow.L)
    worst = 0.0
    for arr in (flow.positions, flow.momenta):
        for i in range(arr.shape[1]):
            wrong = mpar != par[i]
            if wrong.any():
                worst = max(worst, float(np.max(np.abs(arr[:, i, wrong]))))
    return worst


# ---------------------------------------------------------------------------
# musical isomorphisms


def _flat_arrays(kern: _Kernel, pos: np.ndarray, vel: np.ndarray) -> np.ndarray:
    G = kern.eval_metric(kern.env(pos))
    t = batched_mul(vel[:, None, :], G, kern.L)  # [i,j] = v_i g_ij
    return t.sum(axis=0)


def _sharp_arrays(kern: _Kernel, pos: np.ndarray, mom: np.ndarray) -> np.ndarray:
    ginv = kern.metric_inverse(kern.env(pos))
    t = batched_mul(mom[:, None, :], ginv, kern.L)  # [j,i] = p_j g^{ji}
    return t.sum(axis=0)


def flat(chart: MetricChart, pos: SuperPoint,
         velocity: Mapping[str, GrassmannElement]) -> dict[str, GrassmannElement]:
    """Lower a velocity to momenta: p_j = sum_i v_i * g_ij at the position."""
    chart.check_point(pos)
    kern = chart.kernel(pos.L)
    varr = np.stack([velocity[name].coeffs for name in chart.sig.names])
    p = _flat_arrays(kern, pos.as_array(), varr)
    return {name: GrassmannElement(pos.L, p[i])
            for i, name in enumerate(chart.sig.names)}


def sharp(chart: MetricChart, pos: SuperPoint,
          momenta: Mapping[str, GrassmannElement]) -> dict[str, GrassmannElement]:
    """Raise momenta to a velocity: v_i = sum_j p_j * g^{ji} at the position."""
    chart.check_point(pos)
    kern = chart.kernel(pos.L)
    parr = np.stack([momenta[name].coeffs for name in chart.sig.names])
    v = _sharp_arrays(kern, pos.as_array(), parr)
    return {name: GrassmannElement(pos.L, v[i])
            for i, name in enumerate(chart.sig.names)}


def phase_from_ic(chart: MetricChart, ic: InitialCondition) -> PhasePoint:
    """The flat-mapped phase point of a tangent initial condition."""
    return PhasePoint(ic.position, flat(chart, ic.position, ic.velocity))


# ---------------------------------------------------------------------------
# the geodesic / flow round trip


@dataclass
class RoundtripReport:
    """Agreement between geodesic integration and the projected flow."""

    flow_to_geodesic_dev: float   # positions of the flow vs the geodesic
    geodesic_to_flow_dev: float   # lowered geodesic velocity vs flow momenta
    initial_velocity_dev: float   # sharp(flat(v0)) vs v0 at t=0
    tolerance: float

    @property
    def max_dev(self) -> float:
        return max(self.flow_to_geodesic_dev, self.geodesic_to_flow_dev)

    @property
    def passed(self) -> bool:
        return self.max_dev <= self.tolerance


def roundtrip_check(chart: MetricChart, ic: InitialCondition,
                    t_end: float, dt: float,
                    tolerance: float = 1e-6) -> RoundtripReport:
    """Both directions of the geodesic / integral-curve correspondence.

    (a) integrate the flow from the lowered initial condition and compare its
    projected positions with the integrated geodesic; (b) lower the geodesic
    velocity along the curve and compare with the flow momenta.
    """
    traj = integrate_geodesic(chart, ic, t_end, dt)
    kern = chart.kernel(ic.L)
    I = phase_from_ic(chart, ic)
    flow = integrate_flow(chart, I, t_end, dt)

    dev_a = float(np.max(np.abs(flow.positions - traj.positions)))

    dev_b = 0.0
    for s in range(len(traj)):
        p_s = _flat_arrays(kern, traj.positions[s], traj.velocities[s])
        dev_b = max(dev_b, float(np.max(np.abs(p_s - flow.momenta[s]))))

    v_back = _sharp_arrays(kern, traj.positions[0], flow.momenta[0])
    dev_init = float(np.max(np.abs(v_back - traj.velocities[0])))

    return RoundtripReport(dev_a, dev_b, dev_init, tolerance)
