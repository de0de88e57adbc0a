import json
import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from ..classes.certificate import Certificate, CertificateStatus, CertifyTolerances
from ..classes.errors import InputError
from ..classes.moment import MomentSequence
from ..classes.solution import PrimalSolution, SolverResiduals
from ..classes.tensor import AtomicMeasure, SymTensor3
from ..nodes.certifier import certify
from ..utils.moments import block_P, moment_matrix, moments_from_atoms
from ..utils.tensor_core import flatten, hs_norm

logger = logging.getLogger(__name__)

Matrix = List[List[float]]


def _matrix(M: np.ndarray) -> Matrix:
    return [[float(v) for v in row] for row in np.asarray(M)]


class AtomRecord(BaseModel):
    weight: float
    vector: List[float]


class SolutionRecord(BaseModel):
    """Everything certify() needs, plus the solver's bookkeeping."""

    psi: Optional[float] = None
    sigma: float = 0.0
    rho: float = 1.0
    converged: bool = False
    dca_iterations: int = 0
    admm_iterations: int = 0
    seed: Optional[int] = None
    residuals: Optional[Dict[str, float]] = None
    y: Optional[List[float]] = None
    B: Optional[Matrix] = None
    X: Optional[Matrix] = None
    U: Optional[Matrix] = None
    V: Optional[Matrix] = None
    W: Optional[Matrix] = None

    @classmethod
    def from_solution(cls, sol: PrimalSolution) -> "SolutionRecord":
        return cls(
            psi=sol.psi, sigma=sol.sigma, rho=sol.rho, converged=sol.converged,
            dca_iterations=sol.dca_iterations, admm_iterations=sol.admm_iterations, seed=sol.seed,
            residuals=vars(sol.residuals).copy(),
            y=[float(v) for v in sol.y.values],
            B=_matrix(sol.B), X=_matrix(sol.X), U=_matrix(sol.U), V=_matrix(sol.V), W=_matrix(sol.W),
        )

    @property
    def has_multipliers(self) -> bool:
        return self.U is not None and self.V is not None and self.W is not None


class InputDescriptor(BaseModel):
    source: str
    n: int
    rank: int
    norm: float


class RunReport(BaseModel):
    input: Optional[InputDescriptor] = None
    options: Dict[str, Any] = Field(default_factory=dict)
    solution: Optional[SolutionRecord] = None
    atoms: List[AtomRecord] = Field(default_factory=list)
    certificate: Optional[Certificate] = None
    refinement: Optional[Dict[str, Any]] = None
    seed: int = 0
    timings: Optional[Dict[str, float]] = None

    def to_json(self, timings: bool = False) -> str:
        exclude = None if timings else {"timings"}
        return self.model_dump_json(indent=2, exclude=exclude)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        try:
            return cls.model_validate_json(text)
        except ValidationError as e:
            raise InputError(f"malformed report: {e}") from e


def atoms_to_records(atoms: Optional[AtomicMeasure]) -> List[AtomRecord]:
    if not atoms:
        return []
    return [AtomRecord(weight=a.weight, vector=[float(v) for v in a.vector]) for a in atoms]


def build_report(tensor: SymTensor3, rank: int, state: Dict[str, Any], source: str = "<memory>",
                 seed: int = 0) -> RunReport:
    """Collect a finished graph state into a serializable report."""
    opts = state.get("options")
    multistart = state.get("multistart")
    tolerances = state.get("tolerances")
    options = {}
    if opts is not None:
        options["solver"] = opts.model_dump()
    if multistart is not None:
        options["multistart"] = multistart.model_dump()
    if tolerances is not None:
        options["tolerances"] = tolerances.model_dump()

    sol = state.get("solution")
    return RunReport(
        input=InputDescriptor(source=source, n=tensor.n, rank=rank, norm=hs_norm(tensor)),
        options=options,
        solution=SolutionRecord.from_solution(sol) if sol is not None else None,
        atoms=atoms_to_records(state.get("atoms")),
        certificate=state.get("certificate"),
        refinement=state.get("refinement") or None,
        seed=seed,
        timings=state.get("timings") or None,
    )


def _array(rows: Optional[Matrix], shape: Tuple[int, int], name: str) -> np.ndarray:
    M = np.asarray(rows, dtype=float)
    if M.shape != shape:
        raise InputError(f"{name} must be {shape}, got {M.shape}")
    return M


def load_solution(report: RunReport, tensor: SymTensor3) -> Tuple[PrimalSolution, Optional[AtomicMeasure], bool]:
    """Rebuild a PrimalSolution from a report.

    A report with only atoms gets its moments from the atomic measure and
    zero multipliers; the returned flag says whether real multipliers were present.
    """
    n = tensor.n
    record = report.solution or SolutionRecord()
    atoms = None
    if report.atoms:
        atoms = AtomicMeasure.from_pairs((a.weight, a.vector) for a in report.atoms)
        if len(atoms) and atoms.atoms[0].n != n:
            raise InputError(f"atoms of dimension {atoms.atoms[0].n} do not match n={n}")

    if record.y is not None:
        y = MomentSequence(n, 2, record.y)
    elif atoms is not None:
        y = moments_from_atoms(atoms, n, 2)
    else:
        raise InputError("solution file has neither a moment vector nor atoms")

    B = _array(record.B, (n, n * n), "B") if record.B is not None else block_P(y)
    X_bar = moment_matrix(y)
    X = _array(record.X, X_bar.shape, "X") if record.X is not None else X_bar
    size_l = n + 1
    if record.has_multipliers:
        U = _array(record.U, (n, n * n), "U")
        V = _array(record.V, X_bar.shape, "V")
        W = _array(record.W, (size_l, size_l), "W")
    else:
        U, V, W = np.zeros((n, n * n)), np.zeros(X_bar.shape), np.zeros((size_l, size_l))
    psi = record.psi
    if psi is None:
        psi = 0.5 * float(np.sum((flatten(tensor) - B) ** 2)) + record.sigma * float(X[0, 0])
    residuals = SolverResiduals(**record.residuals) if record.residuals else SolverResiduals(0.0, 0.0, 0.0, 0.0, 0.0)
    sol = PrimalSolution(B=B, X=X, y=y, U=U, V=V, W=W, sigma=record.sigma, rho=record.rho, psi=psi,
                         residuals=residuals, converged=record.converged,
                         dca_iterations=record.dca_iterations, admm_iterations=record.admm_iterations,
                         seed=record.seed)
    return sol, atoms, record.has_multipliers


def certify_report(report: RunReport, tensor: SymTensor3, rank: Optional[int] = None,
                   tolerances: Optional[CertifyTolerances] = None) -> Certificate:
    """certify() on a stored candidate; atoms-only candidates are evaluated but never certified."""
    if rank is None:
        if report.input is None:
            raise InputError("rank is neither given nor stored in the solution file")
        rank = report.input.rank
    if tolerances is None and "tolerances" in report.options:
        tolerances = CertifyTolerances(**report.options["tolerances"])
    sol, atoms, has_multipliers = load_solution(report, tensor)
    certificate = certify(tensor, rank, sol, tolerances, atoms=atoms)
    if not has_multipliers:
        logger.warning("Solution carries no multipliers; certification is gap-only")
        certificate = certificate.model_copy(update={
            "status": CertificateStatus.UNCERTIFIED,
            "alpha": None,
            "reason": "multipliers missing: gap-only evaluation",
        })
    return certificate


def render_text(report: RunReport) -> str:
    lines = []
    if report.input is not None:
        lines.append(f"Input: {report.input.source} (n={report.input.n}, rank={report.input.rank}, "
                     f"‖A‖={report.input.norm:.6f})")
    if report.solution is not None:
        sol = report.solution
        psi = "n/a" if sol.psi is None else f"{sol.psi:.8e}"
        lines.append(f"Solver: psi={psi}, sigma={sol.sigma:g}, converged={sol.converged}, "
                     f"DCA steps={sol.dca_iterations}, ADMM iterations={sol.admm_iterations}")
        if sol.residuals:
            lines.append("Residuals: " + ", ".join(f"{k}={v:.2e}" for k, v in sol.residuals.items()))
    for i, atom in enumerate(report.atoms, 1):
        vector = ", ".join(f"{v:.4f}" for v in atom.vector)
        lines.append(f"Atom {i}: weight {atom.weight:.4f}, x = ({vector})")
    if report.certificate is not None:
        cert = report.certificate
        d = cert.diagnostics
        status = cert.status.value if cert.alpha is None else f"{cert.status.value} (alpha={cert.alpha:.6g})"
        lines.append(f"Certificate: {status}: {cert.reason}")
        lines.append(f"  duality gap {d.duality_gap:.3e}, residual {d.residual:.6f} "
                     f"(independent entries {d.entry_residual:.6f}), ranks {d.ranks}, rank(B)={d.rank_B}")
        for name, gate in cert.gates.items():
            mark = "pass" if gate.passed else "FAIL"
            lines.append(f"  [{mark}] {name}: {gate.value:.3e} vs {gate.threshold:.3e}")
        for caveat in cert.caveats:
            lines.append(f"  note: {caveat}")
    if report.refinement:
        ref = report.refinement
        lines.append(f"Refinement ({ref.get('kind')}): residual {ref.get('residual', float('nan')):.6f}")
        if ref.get("kind") == "rank_one":
            vector = ", ".join(f"{v:.4f}" for v in ref["vector"])
            lines.append(f"  lambda = {ref['weight']:.4f}, x = ({vector})")
    if report.timings:
        lines.append("Timings: " + ", ".join(f"{k} {v:.3f}s" for k, v in report.timings.items()))
    return "\n".join(lines)


def render_certificate(certificate: Certificate) -> str:
    return json.dumps(certificate.model_dump(mode="json"), indent=2)
