import logging

from langchain_core.messages import AIMessage

from ..classes.certificate import CertifyTolerances
from ..classes.errors import ExtractionError, NotFlatError
from ..classes.state import CertificationState
from ..utils.moments import extract_atoms, flatness

logger = logging.getLogger(__name__)


class Extractor:
    """Checks flatness of the selected moment vector and recovers its atoms."""

    async def extract(self, state: CertificationState) -> CertificationState:
        tols = state.get("tolerances") or CertifyTolerances()
        y = state["solution"].y
        report = flatness(y, tol_rank=tols.rank, tol_psd=tols.psd, tol_feas=tols.primal_feas)
        state["flatness"] = report
        state["atoms"] = None
        state["extraction_error"] = None

        if report.flat:
            try:
                state["atoms"] = extract_atoms(y, tol_rank=tols.rank, seed=tols.seed,
                                               tol_psd=tols.psd, tol_feas=tols.primal_feas)
                msg = f"🧩 Extractor: flat with ranks {report.ranks}, {len(state['atoms'])} atom(s) recovered"
            except (NotFlatError, ExtractionError) as e:
                logger.warning(f"Atom extraction failed: {e}")
                state["extraction_error"] = str(e)
                msg = f"🧩 Extractor: flat with ranks {report.ranks} but extraction failed"
        else:
            msg = f"🧩 Extractor: not flat, ranks {report.ranks}"

        logger.info(msg)
        messages = state.get("messages", [])
        messages.append(AIMessage(content=msg))
        state["messages"] = messages
        return state

    async def run(self, state: CertificationState) -> CertificationState:
        return await self.extract(state)
