import enum
from dataclasses import dataclass
from typing import Optional

from neunets.codec.base import AbstractNode


@dataclass()
class Enum(AbstractNode):
    """Enum members travel as their values"""
    pytype: type

    @classmethod
    def match(cls, pytype: type, localns=None) -> Optional[AbstractNode]:
        if isinstance(pytype, type) and issubclass(pytype, enum.Enum):
            return Enum(pytype)

    def parse_dto(self, struct):
        return self.pytype(struct)

    def create_dto(self, pystruct):
        return self.pytype(pystruct).value
