"""Coherence checks for generated anyon model data."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from models import Family, TheorySpec, VerifyReport, Violation
from services.anyon_model import (
    AnyonModelData,
    ConsistencyError,
    build_model,
    derived_invariants,
)
from utils.config import get_settings
from utils.run_logger import RunLogger, null_logger

MAX_REPORTED_INDICES = 20

_S3 = math.sqrt(3.0)
_S2 = math.sqrt(2.0)

JK4_F_TABLE: Dict[Tuple[int, int, int, int, int, int], float] = {
    (1, 2, 2, 1, 1, 0): 1 / _S2,
    (1, 2, 2, 1, 1, 2): 1 / _S2,
    (1, 2, 2, 1, 3, 0): 1 / _S2,
    (1, 2, 2, 1, 3, 2): -1 / _S2,
    (1, 2, 1, 0, 1, 1): 1.0,
    (1, 2, 1, 2, 1, 1): -0.5,
    (1, 2, 1, 2, 1, 3): _S3 / 2,
    (1, 1, 1, 1, 0, 2): math.sqrt(2 / 3),
    (1, 1, 1, 1, 2, 2): -1 / _S3,
    (1, 1, 1, 3, 2, 2): 1.0,
    (3, 2, 1, 0, 1, 3): 1.0,
    (3, 2, 1, 2, 1, 1): _S3 / 2,
    (3, 2, 1, 2, 1, 3): 0.5,
    (1, 1, 3, 3, 0, 2): math.sqrt(2 / 3),
    (1, 1, 3, 1, 2, 2): 1.0,
    (1, 1, 3, 3, 2, 2): 1 / _S3,
    (1, 1, 1, 1, 0, 0): 1 / _S3,
    (1, 1, 1, 1, 2, 0): math.sqrt(2 / 3),
    (1, 2, 2, 3, 1, 4): 1 / _S2,
    (3, 2, 2, 1, 1, 4): 1 / _S2,
    (1, 2, 2, 3, 3, 4): 1 / _S2,
    (3, 2, 2, 1, 3, 4): 1 / _S2,
    (4, 2, 1, 3, 2, 1): 1.0,
    (4, 2, 1, 1, 2, 3): 1.0,
}

JK4_R_TABLE: Dict[Tuple[int, int, int], complex] = {
    (1, 1, 0): cmath.exp(-1j * math.pi / 4),
    (1, 1, 2): cmath.exp(5j * math.pi / 12),
    (1, 2, 1): cmath.exp(-2j * math.pi / 3),
    (2, 1, 1): cmath.exp(-2j * math.pi / 3),
    (1, 2, 3): cmath.exp(5j * math.pi / 6),
    (2, 1, 3): cmath.exp(5j * math.pi / 6),
    (2, 2, 0): cmath.exp(2j * math.pi / 3),
    (2, 2, 2): cmath.exp(-2j * math.pi / 3),
    (2, 2, 4): cmath.exp(-1j * math.pi / 3),
}


class GluingCheckError(RuntimeError):
    """Raised when SU(2)_4 and JK_4 x semion data disagree."""

    def __init__(self, message: str, worst: Dict[str, object]) -> None:
        super().__init__(message)
        self.worst = worst


@dataclass
class ConsistencyReport:
    """Maximum residual per identity plus the offending indices, if any."""

    theory: str
    tol: float
    residuals: Dict[str, float] = field(default_factory=dict)
    violations: List[Dict[str, object]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def record(self, name: str, residual: float, indices: Optional[List[List[int]]] = None) -> None:
        self.residuals[name] = float(residual)
        if residual > self.tol:
            self.violations.append(
                {"name": name, "residual": float(residual), "indices": indices or []}
            )

    def to_payload(self, *, semion_gluing: Optional[bool] = None) -> VerifyReport:
        return VerifyReport(
            theory=self.theory,
            tol=self.tol,
            passed=self.passed,
            residuals=self.residuals,
            violations=[Violation(**item) for item in self.violations],
            semion_gluing=semion_gluing,
        )


def _offenders(diff: np.ndarray, tol: float, prefix: Tuple[int, ...] = ()) -> List[List[int]]:
    hits = np.argwhere(np.abs(diff) > tol)[:MAX_REPORTED_INDICES]
    return [list(prefix) + [int(i) for i in row] for row in hits]


def _pentagon(model: AnyonModelData, tol: float) -> Tuple[float, List[List[int]]]:
    # index order of the reported tuples: a, b, c, d, e, f, g, k, l
    F = model.f_tensor()
    worst = 0.0
    offenders: List[List[int]] = []
    for a in model.charges:
        for b in model.charges:
            lhs = np.einsum("fcdegl,lefk->cdefgkl", F, F[a, b], optimize=True)
            rhs = np.einsum("cgfh,hdegk,cdkhl->cdefgkl", F[a, b], F[a], F[b], optimize=True)
            diff = lhs - rhs
            worst = max(worst, float(np.max(np.abs(diff))))
            if len(offenders) < MAX_REPORTED_INDICES:
                offenders.extend(_offenders(diff, tol, (a, b)))
    return worst, offenders[:MAX_REPORTED_INDICES]


def _hexagons(model: AnyonModelData, tol: float) -> Dict[str, Tuple[float, List[List[int]]]]:
    # index order of the reported tuples: a, b, c, d, e, g
    F = model.f_tensor()
    R = model.r_tensor
    Rc = R.conj()
    lhs = np.einsum("cae,acbdeg,cbg->abcdeg", R, F, R, optimize=True)
    rhs = np.einsum("cabdef,cfd,abcdfg->abcdeg", F, R, F, optimize=True)
    lhs_inv = np.einsum("ace,acbdeg,bcg->abcdeg", Rc, F, Rc, optimize=True)
    rhs_inv = np.einsum("cabdef,fcd,abcdfg->abcdeg", F, Rc, F, optimize=True)
    results = {}
    for name, diff in (("hexagon", lhs - rhs), ("hexagon_inverse", lhs_inv - rhs_inv)):
        results[name] = (float(np.max(np.abs(diff))), _offenders(diff, tol))
    return results


def _f_unitarity(model: AnyonModelData, tol: float) -> Tuple[float, List[List[int]]]:
    F = model.f_tensor()
    N = model.fusion.astype(float)
    size = model.level + 1
    eye = np.eye(size)
    rows = np.einsum("abe,ecd->abcde", N, N)
    cols = np.einsum("bcf,afd->abcdf", N, N)
    ffd = np.einsum("abcdef,abcdgf->abcdeg", F, F.conj())
    fdf = np.einsum("abcdef,abcdeg->abcdfg", F.conj(), F)
    diff_rows = ffd - rows[..., :, None] * eye
    diff_cols = fdf - cols[..., :, None] * eye
    worst = max(float(np.max(np.abs(diff_rows))), float(np.max(np.abs(diff_cols))))
    offenders = _offenders(diff_rows, tol) + _offenders(diff_cols, tol)
    return worst, offenders[:MAX_REPORTED_INDICES]


def _fusion_associativity(model: AnyonModelData) -> float:
    N = model.fusion.astype(int)
    left = np.einsum("abe,ecd->abcd", N, N)
    right = np.einsum("bcf,afd->abcd", N, N)
    commutes = np.array_equal(N, N.transpose(1, 0, 2))
    return float(np.max(np.abs(left - right))) + (0.0 if commutes else 1.0)


def _twist_orders(model: AnyonModelData) -> float:
    worst = 0.0
    bound = 4 * model.spec.r
    for theta in model.twists:
        best = min(abs(theta**m - 1) for m in range(1, bound + 1))
        worst = max(worst, best)
    return worst


def _bending(model: AnyonModelData, tol: float) -> Tuple[float, List[List[int]]]:
    worst = 0.0
    offenders: List[List[int]] = []
    d = model.qdims
    for a in model.charges:
        for b in model.charges:
            for c in model.channels(a, b):
                target = math.sqrt(d[c] / (d[a] * d[b]))
                for index in ((a, a, b, b, 0, c), (a, b, b, a, c, 0)):
                    residual = abs(model.F(*index) - target)
                    worst = max(worst, residual)
                    if residual > tol and len(offenders) < MAX_REPORTED_INDICES:
                        offenders.append(list(index))
    return worst, offenders


def _jk4_table(model: AnyonModelData, tol: float) -> Tuple[float, List[List[int]]]:
    worst = 0.0
    offenders: List[List[int]] = []
    for index, expected in JK4_F_TABLE.items():
        residual = abs(model.F(*index) - expected)
        worst = max(worst, residual)
        if residual > tol:
            offenders.append(list(index))
    for index, expected in JK4_R_TABLE.items():
        residual = abs(model.R(*index) - expected)
        worst = max(worst, residual)
        if residual > tol:
            offenders.append(list(index))
    return worst, offenders


def verify_consistency(
    model: AnyonModelData,
    tol: Optional[float] = None,
    *,
    raise_on_failure: bool = True,
    logger: Optional[RunLogger] = None,
) -> ConsistencyReport:
    """Evaluate every coherence identity and return the maximum residuals.

    Raises ``ConsistencyError`` naming each violated identity and up to
    ``MAX_REPORTED_INDICES`` offending index tuples unless
    ``raise_on_failure`` is false.
    """

    tol = get_settings().tol if tol is None else tol
    logger = logger or null_logger()
    spec = model.spec
    report = ConsistencyReport(theory=spec.label, tol=tol)

    report.record("fusion_associativity", _fusion_associativity(model))
    report.record("pentagon", *_pentagon(model, tol))
    for name, (residual, indices) in _hexagons(model, tol).items():
        report.record(name, residual, indices)
    report.record("f_unitarity", *_f_unitarity(model, tol))

    s = model.s_matrix
    report.record("s_unitarity", float(np.max(np.abs(s @ s.conj().T - np.eye(len(s))))))
    report.record("twist_root_of_unity", _twist_orders(model))

    invariants = derived_invariants(model, tol=math.inf)
    for name, residual in invariants.residuals.items():
        report.record(name, residual)

    if spec.family.base is Family.JK:
        report.record("jk_frob_schur", float(np.max(np.abs(model.frob_schur - 1))))
        report.record("jk_bending", *_bending(model, tol))
        if spec.level == 4:
            report.record("jk4_table", *_jk4_table(model, tol))

    logger.log(
        "verify_consistency",
        extra={"theory": spec.label, "tol": tol, "residuals": report.residuals},
    )
    if raise_on_failure and not report.passed:
        names = sorted({str(item["name"]) for item in report.violations})
        raise ConsistencyError(
            f"{spec.label} violates {', '.join(names)} beyond tol {tol:g}",
            report.violations,
            report=report,
        )
    return report


def semion_gluing_check(tol: Optional[float] = None) -> bool:
    """Check SU(2)_4 against conj(JK_4) glued with the semion on odd charges.

    The glued twists satisfy ``conj(theta^SU2_a) = theta^JK_a * theta^sem_(a mod 2)``
    with ``theta^sem_1 = -i`` and the S-matrices satisfy
    ``S^SU2_ab = sqrt(2) conj(S^JK_ab) S^sem_(a mod 2, b mod 2)``.
    """

    tol = get_settings().tol if tol is None else tol
    su2 = build_model(TheorySpec.su2(4))
    jk = build_model(TheorySpec.jk(4))
    semion_twist = np.array([1.0, -1j])
    semion_s = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)

    worst_residual = 0.0
    worst: Dict[str, object] = {"residual": 0.0}
    for a in su2.charges:
        glued = jk.twist(a) * semion_twist[a % 2]
        residual = abs(su2.twist(a).conjugate() - glued)
        if residual > worst_residual:
            worst_residual = residual
            worst = {"residual": residual, "kind": "twist", "charges": [a, a % 2]}
        for b in su2.charges:
            glued_s = math.sqrt(2) * jk.s_matrix[a, b].conjugate() * semion_s[a % 2, b % 2]
            residual = abs(su2.s_matrix[a, b] - glued_s)
            if residual > worst_residual:
                worst_residual = residual
                worst = {"residual": residual, "kind": "s_matrix", "charges": [a, b]}
    if worst_residual > tol:
        raise GluingCheckError(f"Semion gluing mismatch: {worst}", worst)
    return True
