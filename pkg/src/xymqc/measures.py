"""Bipartite and tripartite correlation measures for three-qubit states.

The four tripartite measures are the geometric mean of one-vs-two
negativities (n3), the negativity monogamy residual (t3), and upper/lower
bounds on the residual of squared entanglement of formation (tau_ub via the
PPT exact entanglement cost, tau_lb via the trace-norm/realignment lower
bound on entanglement of formation).
"""

from dataclasses import dataclass

import numpy as np

from .linalg import partial_trace, partial_transpose, realignment, trace_norm

SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
SPIN_FLIP = np.kron(SIGMA_Y, SIGMA_Y)

NEG_ZERO_TOL = 1e-9  # negativities below this are treated as exactly zero


@dataclass
class CenterReport:
    """Per-center ingredients of the residual measures."""

    center: int
    negativity: float          # N(x|yz)
    e_ppt: float | None        # E_PPT(x|yz), None if the SDP was not run
    ef_lb: float               # Chen lower bound on E_f(x|yz)
    ef_pair: tuple[float, float]   # E_f(xy), E_f(xz)
    neg_pair: tuple[float, float]  # N(xy), N(xz)
    tau_ub: float | None
    tau_lb: float
    t3: float


@dataclass
class MqcRecord:
    n3: float
    t3: float
    tau_ub: float | None
    tau_lb: float
    centers: list[CenterReport]
    sdp_status: str = "ok"

    @property
    def bipartite_negativities(self):
        return tuple(c.negativity for c in self.centers)


def binary_entropy(x):
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return float(-x * np.log2(x) - (1.0 - x) * np.log2(1.0 - x))


def negativity(rho, dims, part):
    """||rho^{T_part}||_1 - 1, clamped at zero for float dust."""
    val = trace_norm(partial_transpose(rho, dims, part)) - 1.0
    return max(val, 0.0)


def log_negativity(rho, dims, part):
    return float(np.log2(negativity(rho, dims, part) + 1.0))


def concurrence(rho):
    """Wootters concurrence of a two-qubit state."""
    rho = np.asarray(rho, dtype=complex)
    tilde = SPIN_FLIP @ rho.conj() @ SPIN_FLIP
    vals = np.linalg.eigvals(rho @ tilde).real
    vals[(vals < 0) & (vals > -1e-12)] = 0.0
    vals = np.sqrt(np.clip(vals, 0.0, None))
    vals.sort()
    return float(max(0.0, vals[-1] - vals[-2] - vals[-3] - vals[-4]))


def eof_two_qubit(rho):
    """Entanglement of formation of a two-qubit state (Wootters formula)."""
    return eof_from_concurrence(concurrence(rho))


def eof_from_concurrence(c):
    return binary_entropy(0.5 * (1.0 + np.sqrt(max(0.0, 1.0 - c * c))))


def ef_lower_bound(rho, dims, part):
    """Analytic lower bound on E_f across the cut part | rest.

    Uses the larger of the partial-transpose and realignment trace norms.
    """
    dims = tuple(dims)
    pt_norm = trace_norm(partial_transpose(rho, dims, part))
    rest = int(np.prod(dims) // dims[part])
    perm = _permute_to_front(rho, dims, part)
    re_norm = trace_norm(realignment(perm, (dims[part], rest)))
    lam = max(pt_norm, re_norm)
    if lam > 2.0 + 1e-9:
        raise ValueError(f"trace-norm bound {lam:.6f} outside [1, 2]")
    lam = min(lam, 2.0)
    if lam <= 1.0:
        return 0.0
    gamma = 1.0 - (lam - 1.0) ** 2
    return binary_entropy(0.5 * (1.0 + np.sqrt(max(0.0, gamma))))


def _permute_to_front(rho, dims, part):
    """Reorder subsystems so `part` comes first; returns the permuted matrix."""
    n = len(dims)
    order = [part] + [i for i in range(n) if i != part]
    t = np.asarray(rho).reshape(tuple(dims) + tuple(dims))
    t = np.transpose(t, order + [o + n for o in order])
    d = int(np.prod(dims))
    return t.reshape(d, d)


def _pair_indices(center):
    others = [i for i in range(3) if i != center]
    return others


def n3(rho, dims=(2, 2, 2)):
    """Geometric mean of the three one-vs-two negativities."""
    negs = [negativity(rho, dims, part) for part in range(3)]
    negs = [0.0 if v < NEG_ZERO_TOL else v for v in negs]
    return float(np.cbrt(negs[0] * negs[1] * negs[2]))


def t3(rho, dims=(2, 2, 2)):
    """Negativity monogamy residual averaged over centers, clamped at 0."""
    total = 0.0
    for center in range(3):
        total += _t3_center(rho, dims, center)
    return max(total / 3.0, 0.0)


def _t3_center(rho, dims, center):
    n_cut = negativity(rho, dims, center)
    vals = []
    for other in _pair_indices(center):
        pair, pdims = partial_trace(rho, dims, keep=[center, other])
        vals.append(negativity(pair, pdims, 0))
    return n_cut**2 - vals[0] ** 2 - vals[1] ** 2


def tau_ub(rho, e_ppt_values, dims=(2, 2, 2)):
    """Mean residual of squared PPT entanglement cost; not clamped at zero."""
    total = 0.0
    for center in range(3):
        ef = _pair_eofs(rho, dims, center)
        total += e_ppt_values[center] ** 2 - ef[0] ** 2 - ef[1] ** 2
    return total / 3.0


def tau_lb(rho, dims=(2, 2, 2)):
    """Mean residual of the squared E_f lower bound, clamped at zero."""
    total = 0.0
    for center in range(3):
        lb = ef_lower_bound(rho, dims, center)
        ef = _pair_eofs(rho, dims, center)
        total += lb**2 - ef[0] ** 2 - ef[1] ** 2
    return max(total / 3.0, 0.0)


def _pair_eofs(rho, dims, center):
    out = []
    for other in _pair_indices(center):
        pair, _ = partial_trace(rho, dims, keep=[center, other])
        out.append(eof_two_qubit(pair))
    return out


def evaluate(rho, dims=(2, 2, 2), solve_ppt=None):
    """Full MqcRecord for a three-qubit state.

    `solve_ppt` is a callable (rho, dims, center) -> (e_ppt, status);
    if None the SDP-backed tau_ub is skipped and reported as None.
    """
    centers = []
    statuses = []
    for center in range(3):
        neg = negativity(rho, dims, center)
        lb = ef_lower_bound(rho, dims, center)
        ef = tuple(_pair_eofs(rho, dims, center))
        npair = []
        for other in _pair_indices(center):
            pair, pdims = partial_trace(rho, dims, keep=[center, other])
            npair.append(negativity(pair, pdims, 0))
        t3c = neg**2 - npair[0] ** 2 - npair[1] ** 2
        if solve_ppt is not None:
            e_ppt, status = solve_ppt(rho, dims, center)
            statuses.append(status)
            tau_ub_c = e_ppt**2 - ef[0] ** 2 - ef[1] ** 2
        else:
            e_ppt, tau_ub_c = None, None
        tau_lb_c = lb**2 - ef[0] ** 2 - ef[1] ** 2
        centers.append(
            CenterReport(
                center=center,
                negativity=neg,
                e_ppt=e_ppt,
                ef_lb=lb,
                ef_pair=ef,
                neg_pair=tuple(npair),
                tau_ub=tau_ub_c,
                tau_lb=tau_lb_c,
                t3=t3c,
            )
        )
    negs = [0.0 if c.negativity < NEG_ZERO_TOL else c.negativity for c in centers]
    record = MqcRecord(
        n3=float(np.cbrt(negs[0] * negs[1] * negs[2])),
        t3=max(sum(c.t3 for c in centers) / 3.0, 0.0),
        tau_ub=(
            sum(c.tau_ub for c in centers) / 3.0 if solve_ppt is not None else None
        ),
        tau_lb=max(sum(c.tau_lb for c in centers) / 3.0, 0.0),
        centers=centers,
        sdp_status=(
            "ok"
            if not statuses or all(s == "converged" for s in statuses)
            else ";".join(statuses)
        ),
    )
    return record
