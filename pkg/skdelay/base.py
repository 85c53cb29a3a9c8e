from abc import ABC, abstractmethod
from io import BytesIO
from pathlib import Path
from typing import Union

import joblib
from confection import Config


class Serializable(ABC):
    """Objects that can be dumped to bytes or to a folder with their
    configuration next to the binary payload."""

    def to_bytes(self) -> bytes:
        buffer = BytesIO()
        joblib.dump(self, buffer)
        return buffer.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes):
        buffer = BytesIO(data)
        res = joblib.load(buffer)
        if not isinstance(res, cls):
            raise TypeError(
                f"Payload holds a {type(res).__name__}, not a {cls.__name__}."
            )
        return res

    @property
    @abstractmethod
    def config(self) -> Config:
        pass

    def to_disk(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        model_path = path.joinpath("model.bin")
        with open(model_path, "wb") as model_file:
            model_file.write(self.to_bytes())
        config_path = path.joinpath("config.cfg")
        self.config.to_disk(config_path)

    @classmethod
    def from_disk(cls, path: Union[str, Path]):
        path = Path(path)
        model_path = path.joinpath("model.bin")
        with open(model_path, "rb") as model_file:
            model_data = model_file.read()
        return cls.from_bytes(model_data)
