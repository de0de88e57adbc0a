import json
import logging
from pathlib import Path
from typing import List, Tuple, Union

from pydantic import BaseModel, Field, ValidationError, field_validator

from ..classes.errors import InputError
from ..classes.moment import MomentSequence
from ..classes.tensor import SymTensor3

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class TensorEntry(BaseModel):
    idx: Tuple[int, int, int]
    val: float

    @field_validator("idx")
    @classmethod
    def _one_based(cls, idx: Tuple[int, int, int]) -> Tuple[int, int, int]:
        if min(idx) < 1:
            raise ValueError(f"indices are 1-based, got {list(idx)}")
        return idx


class TensorFile(BaseModel):
    """On-disk tensor: {"n": int, "entries": [{"idx": [i, j, k], "val": float}, ...]}."""

    n: int = Field(ge=1)
    entries: List[TensorEntry] = Field(default_factory=list)

    def to_tensor(self) -> SymTensor3:
        values = {}
        for entry in self.entries:
            key = tuple(sorted(i - 1 for i in entry.idx))
            if key in values:
                raise InputError(f"duplicate tensor index {list(entry.idx)}")
            values[key] = entry.val
        return SymTensor3.from_entries(self.n, values)

    @classmethod
    def from_tensor(cls, A: SymTensor3, keep_zeros: bool = False) -> "TensorFile":
        entries = [
            TensorEntry(idx=tuple(i + 1 for i in idx), val=val)
            for idx, val in A.entries().items() if keep_zeros or val != 0.0
        ]
        return cls(n=A.n, entries=entries)


def parse_tensor(payload: Union[str, dict]) -> SymTensor3:
    try:
        data = json.loads(payload) if isinstance(payload, str) else payload
        return TensorFile.model_validate(data).to_tensor()
    except json.JSONDecodeError as e:
        raise InputError(f"tensor file is not valid JSON: {e}") from e
    except ValidationError as e:
        raise InputError(f"malformed tensor file: {e}") from e


def load_tensor(path: PathLike) -> SymTensor3:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise InputError(f"cannot read tensor file {path}: {e}") from e
    A = parse_tensor(text)
    logger.debug(f"Loaded n={A.n} tensor from {path}")
    return A


def dump_tensor(A: SymTensor3) -> str:
    return TensorFile.from_tensor(A).model_dump_json(indent=2)


def save_tensor(A: SymTensor3, path: PathLike) -> None:
    Path(path).write_text(dump_tensor(A) + "\n")


class MomentFile(BaseModel):
    n: int
    k: int
    y: List[float]


def dump_moments(y: MomentSequence) -> str:
    return MomentFile(n=y.n, k=y.k, y=[float(v) for v in y.values]).model_dump_json(indent=2)


def parse_moments(payload: Union[str, dict]) -> MomentSequence:
    try:
        data = json.loads(payload) if isinstance(payload, str) else payload
        record = MomentFile.model_validate(data)
    except json.JSONDecodeError as e:
        raise InputError(f"moment file is not valid JSON: {e}") from e
    except ValidationError as e:
        raise InputError(f"malformed moment file: {e}") from e
    return MomentSequence(record.n, record.k, record.y)


def save_moments(y: MomentSequence, path: PathLike) -> None:
    Path(path).write_text(dump_moments(y) + "\n")
