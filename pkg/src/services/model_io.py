"""
Model files
JSON documents of the form {"C": [[...]], "D": [[...]]}
"""
import json
from pathlib import Path
from typing import List, Union

from pydantic import BaseModel, ConfigDict

from src.models import MapModel
from src.services.map_core import validate_model
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

PathLike = Union[str, Path]


class ModelFile(BaseModel):
    """On-disk MAP description"""

    model_config = ConfigDict(extra="forbid")

    C: List[List[float]]
    D: List[List[float]]

    @classmethod
    def from_model(cls, model: MapModel) -> "ModelFile":
        return cls(C=model.C.tolist(), D=model.D.tolist())


def parse_model(text: str) -> MapModel:
    """
    Parse and validate a model document

    Raises:
        pydantic.ValidationError: If the JSON is malformed or lacks C or D
        ModelValidationError: If (C, D) is not a valid MAP
    """
    document = ModelFile.model_validate_json(text)
    return validate_model(document.C, document.D)


def load_model(path: PathLike) -> MapModel:
    """Read a model file from disk"""
    path = Path(path)
    model = parse_model(path.read_text())
    logger.info(f"Loaded {model!r} from {path}")
    return model


def dump_model(model: MapModel) -> str:
    """Serialize a model; floats are written with full precision so parsing returns an equal model"""
    return json.dumps(ModelFile.from_model(model).model_dump(), indent=2)


def save_model(model: MapModel, path: PathLike) -> None:
    Path(path).write_text(dump_model(model) + "\n")
