from dataclasses import dataclass
from types import GenericAlias
from typing import Optional

from neunets.codec.base import AbstractNode
from neunets.codec.typetree import get_type_tree


@dataclass
class Tuple(AbstractNode):
    fields: list[AbstractNode]
    variadic: bool = False  # tuple[X, ...]

    @classmethod
    def match(cls, pytype: type, localns=None) -> Optional[AbstractNode]:
        if isinstance(pytype, GenericAlias) and pytype.__origin__ == tuple:
            args = pytype.__args__
            if len(args) == 2 and args[1] is Ellipsis:
                return Tuple([get_type_tree(args[0], localns=localns)], variadic=True)
            return Tuple([get_type_tree(f, localns=localns) for f in args])

    def parse_dto(self, struct):
        if self.variadic:
            return tuple(self.fields[0].parse_dto(item) for item in struct)
        return tuple(field_tree.parse_dto(item) for field_tree, item in zip(self.fields, struct))

    def create_dto(self, pystruct):
        if self.variadic:
            return [self.fields[0].create_dto(item) for item in pystruct]
        return [field_tree.create_dto(item) for field_tree, item in zip(self.fields, pystruct)]
