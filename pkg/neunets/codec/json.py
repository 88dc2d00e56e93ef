import typing
from dataclasses import dataclass
from typing import Optional

from neunets.codec.base import AbstractNode


@dataclass()
class Json(AbstractNode):
    """Untyped subtree, passed through as is (must already be json compatible)"""

    @classmethod
    def match(cls, pytype: type, localns=None) -> Optional[AbstractNode]:
        if pytype is typing.Any:
            return Json()

    def parse_dto(self, struct):
        return struct

    def create_dto(self, pystruct):
        return pystruct
