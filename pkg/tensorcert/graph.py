import logging
import time
from typing import Any, AsyncIterator, Awaitable, Callable, Dict, Optional

from langchain_core.messages import SystemMessage
from langgraph.graph import END, StateGraph

from .classes.certificate import CertifyTolerances
from .classes.errors import InputError
from .classes.solution import MultistartConfig, SolverOptions
from .classes.state import CertificationState
from .classes.tensor import SymTensor3
from .nodes import Certifier, Extractor, Refiner, SolverNode

logger = logging.getLogger(__name__)

Node = Callable[[CertificationState], Awaitable[CertificationState]]


class CertificationGraph:
    """solver -> extractor -> certifier -> (refiner when certified)."""

    def __init__(self, tensor: Optional[SymTensor3] = None, rank: int = 1,
                 options: Optional[SolverOptions] = None,
                 multistart: Optional[MultistartConfig] = None,
                 tolerances: Optional[CertifyTolerances] = None):
        self.input_state: Dict[str, Any] = {}
        if tensor is not None:
            self.input_state = CertificationState(
                tensor=tensor,
                rank=rank,
                options=options or SolverOptions(),
                multistart=multistart or MultistartConfig(),
                tolerances=tolerances or CertifyTolerances(),
                messages=[
                    SystemMessage(content=f"Certified rank-{rank} approximation of an n={tensor.n} tensor")
                ],
                timings={},
            )

        self._init_nodes()
        self._build_workflow()

    def _init_nodes(self):
        """Initialize all workflow nodes"""
        self.solver = SolverNode()
        self.extractor = Extractor()
        self.certifier = Certifier()
        self.refiner = Refiner()

    @staticmethod
    def _timed(name: str, node: Node) -> Node:
        async def wrapped(state: CertificationState) -> CertificationState:
            start = time.perf_counter()
            state = await node(state)
            timings = dict(state.get("timings") or {})
            timings[name] = time.perf_counter() - start
            state["timings"] = timings
            return state

        return wrapped

    @staticmethod
    def _route(state: CertificationState) -> str:
        certificate = state.get("certificate")
        return "refiner" if certificate is not None and certificate.certified else END

    def _build_workflow(self):
        """Configure the state graph workflow"""
        self.workflow = StateGraph(CertificationState)

        self.workflow.add_node("solver", self._timed("solve", self.solver.run))
        self.workflow.add_node("extractor", self._timed("extract", self.extractor.run))
        self.workflow.add_node("certifier", self._timed("certify", self.certifier.run))
        self.workflow.add_node("refiner", self._timed("refine", self.refiner.run))

        self.workflow.set_entry_point("solver")
        self.workflow.add_edge("solver", "extractor")
        self.workflow.add_edge("extractor", "certifier")
        self.workflow.add_conditional_edges("certifier", self._route, {"refiner": "refiner", END: END})
        self.workflow.add_edge("refiner", END)

    async def run(self, thread: Optional[Dict[str, Any]] = None) -> AsyncIterator[Dict[str, Any]]:
        """Stream per-node updates of the certification workflow"""
        compiled_graph = self.workflow.compile()
        async for update in compiled_graph.astream(self.input_state, thread or {}):
            logger.debug(f"Graph update from {list(update.keys())}")
            yield update

    async def execute(self) -> CertificationState:
        """Run the workflow to completion and return the final state"""
        if not self.input_state:
            raise InputError("graph was built without an input tensor")
        compiled_graph = self.workflow.compile()
        return await compiled_graph.ainvoke(self.input_state)

    # Compile for langgraph studio
    def compile(self):
        return self.workflow.compile()
