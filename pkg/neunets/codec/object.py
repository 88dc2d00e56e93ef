import dataclasses
from dataclasses import dataclass, is_dataclass
from typing import get_type_hints, Callable, Optional

from neunets.codec.base import AbstractNode
from neunets.codec.typetree import get_type_tree


def get_dataclass_type_hints(dc, localns=None):
    dc_types = get_type_hints(dc, localns=localns)
    return {
        field.name: dc_types[field.name]
        for field in dataclasses.fields(dc)
    }


@dataclass()
class Object(AbstractNode):
    name: str
    constructor: Callable  # python constructor for the object, taking keyword arguments for each field
    fields: dict[str, AbstractNode]

    @classmethod
    def match(cls, pytype: type, localns=None):
        if isinstance(pytype, type) and is_dataclass(pytype):
            field_hints = get_dataclass_type_hints(pytype, localns=localns)
            fields = {
                field_name: get_type_tree(subtype, localns)
                for field_name, subtype in field_hints.items()
            }
            return Object(pytype.__name__, constructor=pytype, fields=fields)

    def parse_dto(self, struct):
        # missing keys fall back to the dataclass defaults, so older files stay readable
        return self.constructor(**{
            name: subtype.parse_dto(struct[name])
            for name, subtype in self.fields.items()
            if name in struct
        })

    def create_dto(self, pystruct):
        return {
            name: subtype.create_dto(getattr(pystruct, name))
            for name, subtype in self.fields.items()
        }
