from neunets.codec.base import AbstractNode, Primitive, UnsupportedTypeError
from neunets.codec.dates import DateTime, Date
from neunets.codec.dict import Dict
from neunets.codec.enum import Enum
from neunets.codec.json import Json
from neunets.codec.list import List
from neunets.codec.nullable import Nullable
from neunets.codec.object import Object
from neunets.codec.tuple import Tuple
from neunets.codec.typetree import type_registry, get_type_tree

type_registry.extend([Primitive, List, Object, DateTime, Date, Dict, Tuple, Nullable, Enum, Json])


def to_dto(pystruct, pytype: type = None):
    """Encode a (dataclass) value into json compatible structures"""
    return get_type_tree(pytype or type(pystruct)).create_dto(pystruct)


def from_dto(pytype: type, struct):
    return get_type_tree(pytype).parse_dto(struct)
