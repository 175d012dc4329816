"""Analytic nonlinearities as finitely supported power series in the spinor
components, their field evaluation, the integral-remainder difference
expansion, and the coefficient-growth audit with the smallness threshold.

A nonlinearity is a map F: C^{d0} -> C^{d0} of the form
F(psi) = sum_p c_p psi^p with multi-indices p over the components (monomials
only, no conjugates).  Only finitely many coefficients are stored; truncated
families standing for an infinite series may declare a geometric tail ratio,
which is what the growth audit judges.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .clifford import GammaSet
from .spectral import FrequencyLattice, SpinorField, forward_fourier, inverse_fourier


@dataclass
class PowerSeriesNonlinearity:
    """Finitely supported power series with coefficient vectors in C^{d0}."""

    d0: int
    terms: dict  # multi-index tuple -> ndarray (d0,)
    vanishes_at_zero: bool = True
    tail_ratio: float | None = None

    def __post_init__(self):
        clean = {}
        for p, c in self.terms.items():
            p = tuple(int(x) for x in p)
            if len(p) != self.d0 or any(x < 0 for x in p):
                raise ValueError(f"bad multi-index {p} for d0={self.d0}")
            c = np.asarray(c, dtype=np.complex128)
            if c.shape != (self.d0,):
                raise ValueError(f"coefficient for {p} must be a C^{self.d0} vector")
            if np.any(c != 0):
                clean[p] = c
        self.terms = clean
        if self.vanishes_at_zero and (0,) * self.d0 in self.terms:
            raise ValueError("constant term present but the series must vanish at 0")

    @property
    def max_degree(self) -> int:
        return max((sum(p) for p in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def scaled(self, factor: complex) -> "PowerSeriesNonlinearity":
        return PowerSeriesNonlinearity(
            self.d0,
            {p: factor * c for p, c in self.terms.items()},
            self.vanishes_at_zero,
            self.tail_ratio,
        )

    def to_json_obj(self):
        terms = [
            {"p": list(p), "c": [[z.real, z.imag] for z in c]}
            for p, c in sorted(self.terms.items())
        ]
        if self.tail_ratio is None:
            return terms
        return {"terms": terms, "tail_ratio": self.tail_ratio}


def load_nonlinearity(obj) -> PowerSeriesNonlinearity:
    """Parse the JSON form: either a plain list of {p, c} records or an
    object {"terms": [...], "tail_ratio": r} for declared-tail families."""
    tail = None
    if isinstance(obj, dict):
        tail = obj.get("tail_ratio")
        records = obj["terms"]
    else:
        records = obj
    if not isinstance(records, list) or not records:
        raise ValueError("nonlinearity file must contain a nonempty term list")
    d0 = len(records[0]["p"])
    terms = {}
    for rec in records:
        p = tuple(int(x) for x in rec["p"])
        c = np.array([complex(re, im) for re, im in rec["c"]])
        terms[p] = terms.get(p, np.zeros(d0, dtype=np.complex128)) + c
    return PowerSeriesNonlinearity(d0, terms, tail_ratio=tail)


def load_nonlinearity_file(path: str) -> PowerSeriesNonlinearity:
    with open(path) as fh:
        return load_nonlinearity(json.load(fh))


def save_nonlinearity_file(F: PowerSeriesNonlinearity, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(F.to_json_obj(), fh, indent=2, sort_keys=True)


# bundled families used by the command-line scenarios and the audit tests


def bundled_cubic(d0: int = 2, amplitude: float = 1.0) -> PowerSeriesNonlinearity:
    """Componentwise cubic F_k(psi) = amplitude * psi_k^3."""
    terms = {}
    for k in range(d0):
        p = [0] * d0
        p[k] = 3
        c = np.zeros(d0, dtype=np.complex128)
        c[k] = amplitude
        terms[tuple(p)] = c
    return PowerSeriesNonlinearity(d0, terms)


def bundled_geometric(
    d0: int = 2, ratio: float = 1.0, degree: int = 30
) -> PowerSeriesNonlinearity:
    """Dense truncation of the geometric family c_p = ratio^{|p|} e_1.

    Carries its tail ratio, declaring that the truncation stands for the
    full infinite series.
    """
    e1 = np.zeros(d0, dtype=np.complex128)
    e1[0] = 1.0
    terms = {}
    for p in _indices_up_to(d0, degree):
        if sum(p) >= 1:
            terms[p] = ratio ** sum(p) * e1
    return PowerSeriesNonlinearity(d0, terms, tail_ratio=ratio)


def _indices_up_to(d0: int, degree: int):
    if d0 == 1:
        for n in range(degree + 1):
            yield (n,)
        return
    for head in range(degree + 1):
        for rest in _indices_up_to(d0 - 1, degree - head):
            yield (head,) + rest


BUNDLED = {"cubic": bundled_cubic, "geometric": bundled_geometric}


# ---------------------------------------------------------------------------
# evaluation


def _power_table(values: np.ndarray, max_exponents) -> list:
    """values[..., k] raised to 0..max_exponents[k], cached per component."""
    tables = []
    for k, top in enumerate(max_exponents):
        col = values[..., k]
        powers = [np.ones_like(col)]
        for _ in range(top):
            powers.append(powers[-1] * col)
        tables.append(powers)
    return tables


def evaluate(F: PowerSeriesNonlinearity, psi) -> np.ndarray:
    """F at one or many spinor values; trailing axis is the component axis.

    Uses cached component powers (each power computed once and reused across
    monomials) rather than re-expanding every monomial from scratch.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.shape[-1] != F.d0:
        raise ValueError("value has the wrong number of spinor components")
    out = np.zeros(psi.shape, dtype=np.complex128)
    if F.is_zero():
        return out
    tops = [0] * F.d0
    for p in F.terms:
        for k in range(F.d0):
            tops[k] = max(tops[k], p[k])
    tables = _power_table(psi, tops)
    for p, c in F.terms.items():
        mono = None
        for k, e in enumerate(p):
            if e == 0:
                continue
            mono = tables[k][e] if mono is None else mono * tables[k][e]
        if mono is None:  # constant term (only without the vanishing flag)
            out += c
        else:
            out += mono[..., None] * c
    return out


def jacobian(F: PowerSeriesNonlinearity, psi) -> np.ndarray:
    """Jacobian dF_a/dpsi_b at one or many values, shape (..., d0, d0)."""
    psi = np.asarray(psi, dtype=np.complex128)
    out = np.zeros(psi.shape + (F.d0,), dtype=np.complex128)
    if F.is_zero():
        return out
    tops = [0] * F.d0
    for p in F.terms:
        for k in range(F.d0):
            tops[k] = max(tops[k], p[k])
    tables = _power_table(psi, tops)
    for p, c in F.terms.items():
        for b in range(F.d0):
            if p[b] == 0:
                continue
            mono = np.full(psi.shape[:-1], float(p[b]), dtype=np.complex128)
            for k, e in enumerate(p):
                ee = e - 1 if k == b else e
                if ee:
                    mono = mono * tables[k][ee]
            out[..., b] += mono[..., None] * c
    return out


def padded_grid_size(lattice: FrequencyLattice, degree: int) -> int:
    """Alias-free grid for evaluating a degree-``degree`` monomial map: the
    product spectrum reaches degree*N per axis, so M > (degree+1)*N."""
    return (max(degree, 1) + 1) * lattice.radius + 1


def evaluate_on_field(F: PowerSeriesNonlinearity, f: SpinorField) -> SpinorField:
    """Pointwise F on a padded physical grid, transformed back and truncated.

    The padding rule makes the truncated coefficients exact: no aliased copy
    of the degree-|p| product spectrum can reach the lattice.
    """
    if F.d0 != f.d0:
        raise ValueError("nonlinearity and field spinor dimensions differ")
    if F.is_zero():
        return SpinorField.zeros(f.lattice, f.d0)
    grid = padded_grid_size(f.lattice, F.max_degree)
    values = inverse_fourier(f, grid)
    return forward_fourier(evaluate(F, values), f.lattice)


# ---------------------------------------------------------------------------
# combinatorics


def multinomial_split(p) -> dict:
    """Splitting coefficients of (u + v)^p: map (m, n) with m+n=p to the
    product of binomials; they sum to 2^{|p|}."""
    p = tuple(int(x) for x in p)
    out = {}
    for m in _splits(p):
        n = tuple(pk - mk for pk, mk in zip(p, m))
        out[(m, n)] = _binom_product(p, m)
    return out


def _splits(p):
    if len(p) == 1:
        for m in range(p[0] + 1):
            yield (m,)
        return
    for m0 in range(p[0] + 1):
        for rest in _splits(p[1:]):
            yield (m0,) + rest


def _binom_product(p, m) -> int:
    out = 1
    for pk, mk in zip(p, m):
        out *= math.comb(pk, mk)
    return out


def decrement_index(p, i: int):
    """(p - e_i)^+ with 1-based component i: clamps the i-th entry at 0."""
    p = tuple(int(x) for x in p)
    if not (1 <= i <= len(p)):
        raise ValueError(f"component {i} out of range 1..{len(p)}")
    out = list(p)
    out[i - 1] = max(out[i - 1] - 1, 0)
    return tuple(out)


def difference_expansion(F: PowerSeriesNonlinearity, u1, u2) -> np.ndarray:
    """F(u1) - F(u2) via the integral-remainder closed form.

    Expands the line integral of the Jacobian along u2 + s (u1 - u2) into
    monomials in (u1 - u2) and u2 with weights c_p p_i E_{mn}/(|m|+1);
    algebraically identical to the direct difference.
    """
    u1 = np.asarray(u1, dtype=np.complex128)
    u2 = np.asarray(u2, dtype=np.complex128)
    diff = u1 - u2
    out = np.zeros(u1.shape, dtype=np.complex128)
    for p, c in F.terms.items():
        for i in range(1, F.d0 + 1):
            if p[i - 1] == 0:
                continue
            q = decrement_index(p, i)
            for (m, n), coeff in multinomial_split(q).items():
                mono = np.ones(u1.shape[:-1], dtype=np.complex128)
                for k in range(F.d0):
                    if m[k]:
                        mono = mono * diff[..., k] ** m[k]
                    if n[k]:
                        mono = mono * u2[..., k] ** n[k]
                w = p[i - 1] * coeff / (sum(m) + 1)
                out += (w * mono * diff[..., i - 1])[..., None] * c
    return out


# ---------------------------------------------------------------------------
# growth audit


@dataclass
class GrowthAuditReport:
    """Per-degree growth quantities of a power series against the smallness
    threshold required by the global small-data theory.

    ``direct`` collects the degree-r quantities from the self-mapping
    estimate, ``difference`` those from the contraction estimate; the proxy
    is the limsup surrogate of their r-th roots.  A finite series with no
    declared tail has vanishing tail quantities, so its proxy is 0 and it
    passes for every positive threshold; a declared geometric tail is judged
    by the represented degrees (a lower bound for the infinite family).
    """

    d: int
    d0: int
    constant: float
    threshold: float
    direct: dict = field(default_factory=dict)  # r -> B_r
    difference: dict = field(default_factory=dict)  # r -> A_r
    roots: dict = field(default_factory=dict)  # r -> max(B_r, A_r)^(1/r)
    tail_ratio: float | None = None
    proxy: float = 0.0
    passed: bool = True

    def to_json_dict(self) -> dict:
        return {
            "d": self.d,
            "d0": self.d0,
            "constant": self.constant,
            "threshold": self.threshold,
            "direct": {str(r): v for r, v in sorted(self.direct.items())},
            "difference": {str(r): v for r, v in sorted(self.difference.items())},
            "roots": {str(r): v for r, v in sorted(self.roots.items())},
            "tail_ratio": self.tail_ratio,
            "proxy": self.proxy,
            "passed": self.passed,
        }


def growth_threshold(constant: float, d: int) -> float:
    """C^{-d/2-1/4} 2^{-d/2} / 3 for the measured derivative constant C."""
    return constant ** (-d / 2.0 - 0.25) * 2.0 ** (-d / 2.0) / 3.0


def matrix_weights(g: GammaSet, c: np.ndarray) -> tuple[float, float, float]:
    """|c|, |gamma^0 c| and sum_k |gamma^k c| (Euclidean vector norms)."""
    w1 = float(np.linalg.norm(c))
    w2 = float(np.linalg.norm(g.gamma[0] @ c))
    w3 = float(sum(np.linalg.norm(g.gamma[k] @ c) for k in range(1, g.d + 1)))
    return w1, w2, w3


def _central_binom_product(p) -> int:
    out = 1
    for pk in p:
        out *= math.comb(pk, pk // 2)
    return out


def direct_quantity(p, weights: tuple[float, float, float]) -> float:
    """Degree-|p| direct quantity of one coefficient: the neighbour-index
    sums collapse to 3^{|p|} because the summand never depends on them, and
    the split maximum is attained at the central binomials."""
    r = sum(p)
    return 3.0**r * _central_binom_product(p) * max(weights)


def difference_split_maximum(p, i: int) -> Fraction:
    """Exact rational maximum over the nested splits of (p - e_i)^+ of
    E_{mn} a_max(m) b_max(n) / (|m|+1); the combinatorial core of the
    difference quantity."""
    q = decrement_index(p, i)
    best = Fraction(0)
    for (m, n), coeff in multinomial_split(q).items():
        val = Fraction(
            coeff * _central_binom_product(m) * _central_binom_product(n),
            sum(m) + 1,
        )
        best = max(best, val)
    return best


def difference_quantity(p, i: int, weights: tuple[float, float, float]) -> float:
    """Degree-(|p|-1) difference quantity from component i of one
    coefficient: 3^{r+1} (the +1 from the extra modulation index) times the
    best nested split of (p - e_i)^+ with the 1/(|m|+1) line-integral
    weight, times p_i and the summed matrix weights."""
    q = decrement_index(p, i)
    r = sum(q)
    core = 3 ** (r + 1) * p[i - 1] * difference_split_maximum(p, i)
    return float(core) * sum(weights)


def growth_audit(
    F: PowerSeriesNonlinearity,
    g: GammaSet,
    constant: float,
    tail_ratio: float | None = None,
) -> GrowthAuditReport:
    """Audit the series coefficients against the smallness threshold.

    ``constant`` is the measured derivative-inequality constant (see
    norms.measure_bernstein_constant) or an override.  ``tail_ratio``
    overrides the ratio declared by the series itself.
    """
    if F.is_zero():
        raise ValueError("cannot audit an empty series")
    if g.d0 != F.d0:
        raise ValueError("gamma set and series spinor dimensions differ")
    tail = tail_ratio if tail_ratio is not None else F.tail_ratio
    report = GrowthAuditReport(
        d=g.d,
        d0=g.d0,
        constant=float(constant),
        threshold=growth_threshold(constant, g.d),
        tail_ratio=tail,
    )
    for p, c in F.terms.items():
        r = sum(p)
        if r < 1:
            continue
        w = matrix_weights(g, c)
        bq = direct_quantity(p, w)
        report.direct[r] = max(report.direct.get(r, 0.0), bq)
        for i in range(1, F.d0 + 1):
            if p[i - 1] == 0:
                continue
            aq = difference_quantity(p, i, w)
            rq = r - 1
            report.difference[rq] = max(report.difference.get(rq, 0.0), aq)
    for r in sorted(set(report.direct) | set(report.difference)):
        if r < 1:
            continue
        worst = max(report.direct.get(r, 0.0), report.difference.get(r, 0.0))
        if worst > 0.0:
            report.roots[r] = worst ** (1.0 / r)
    # The audited statement is asymptotic: a finite series has vanishing
    # tail quantities, so only a declared tail makes the represented-degree
    # roots speak for the limit.
    report.proxy = max(report.roots.values(), default=0.0) if tail is not None else 0.0
    report.passed = report.proxy < report.threshold
    return report


def modulation_weight_sum(p_norm: int, constant: float, half_range: int) -> float:
    """Partial sums of the modulation-index weight series
    sum_i C^{-2^{-|i|} |p|/(|p|+1)} over |i| <= half_range.

    Diagnostic only: the terms tend to 1 as |i| grows, so the partial sums
    grow linearly in the range and the full series has no finite limit.
    """
    x = p_norm / (p_norm + 1.0)
    idx = np.arange(-half_range, half_range + 1)
    return float(np.sum(constant ** (-np.exp2(-np.abs(idx)) * x)))
