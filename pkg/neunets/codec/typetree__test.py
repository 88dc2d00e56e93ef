import datetime
import enum
from dataclasses import dataclass, field
from typing import Any, Optional

import pytest

from neunets.codec import from_dto, to_dto
from neunets.codec.base import Primitive, UnsupportedTypeError, UnsupportedTypeNode
from neunets.codec.dates import DateTime, Date
from neunets.codec.dict import Dict
from neunets.codec.enum import Enum
from neunets.codec.json import Json
from neunets.codec.list import List
from neunets.codec.object import Object
from neunets.codec.typetree import get_type_tree


class Color(enum.Enum):
    RED = "red"
    BLUE = "blue"


def test_primitives():
    assert get_type_tree(int) == Primitive(int)
    assert get_type_tree(float) == Primitive(float)
    assert get_type_tree(str) == Primitive(str)
    assert get_type_tree(bool) == Primitive(bool)


def test_float_dto_is_plain_float():
    import numpy as np
    dto = Primitive(float).create_dto(np.float32(0.5))
    assert type(dto) is float
    assert dto == 0.5


def test_numpy_scalars_encode_to_json_scalars():
    import json
    import numpy as np
    dtos = [Primitive(int).create_dto(np.int64(3)), Primitive(bool).create_dto(np.bool_(True))]
    assert [type(d) for d in dtos] == [int, bool]
    assert json.loads(json.dumps(dtos)) == [3, True]


def test_non_json_leaf_types_are_not_primitives():
    assert not isinstance(get_type_tree(bytes), Primitive)


def test_datetime():
    assert get_type_tree(datetime.datetime) == DateTime()
    source = datetime.datetime(2020, 10, 1, 3, 2, 1, 500)
    assert DateTime().create_dto(source) == "2020-10-01T03:02:01.000500Z"
    assert DateTime().parse_dto("2020-10-01T03:02:01.000500Z") == source.replace(tzinfo=datetime.timezone.utc)
    local = datetime.timezone(datetime.timedelta(hours=2))
    assert DateTime().create_dto(datetime.datetime(2020, 10, 1, 5, 2, 1, 500, tzinfo=local)) == "2020-10-01T03:02:01.000500Z"


def test_date():
    assert get_type_tree(datetime.date) == Date()
    source = datetime.date(2020, 10, 1)
    assert Date().create_dto(source) == "2020-10-01"
    assert Date().parse_dto("2020-10-01") == source


def test_enum():
    assert get_type_tree(Color) == Enum(Color)
    assert Enum(Color).create_dto(Color.RED) == "red"
    assert Enum(Color).parse_dto("blue") is Color.BLUE


def test_any_passthrough():
    assert get_type_tree(Any) == Json()
    assert Json().create_dto({"a": [1, 2]}) == {"a": [1, 2]}


class TestObject:
    def test_simple(self):
        @dataclass
        class Foo:
            some_field: str

        assert get_type_tree(Foo, locals()) == Object("Foo", Foo, {"some_field": Primitive(str)})

    def test_nested(self):
        @dataclass
        class Bar:
            other_field: str

        @dataclass
        class Foo:
            some_field: Bar
            list_field: list[Bar]

        expected_bar_node = Object("Bar", Bar, {"other_field": Primitive(str)})
        assert get_type_tree(Foo, locals()) == Object(
            "Foo",
            Foo,
            {
                "some_field": expected_bar_node,
                "list_field": List(expected_bar_node)
            }
        )

    def test_round_trip_keeps_snake_case(self):
        @dataclass
        class Record:
            run_id: str
            accuracies: list[float]
            color: Color
            note: Optional[str] = None

        tree = get_type_tree(Record, locals())
        record = Record(run_id="x", accuracies=[0.5, 0.25], color=Color.RED)
        dto = tree.create_dto(record)
        assert dto == {"run_id": "x", "accuracies": [0.5, 0.25], "color": "red", "note": None}
        assert tree.parse_dto(dto) == record

    def test_missing_keys_use_defaults(self):
        @dataclass
        class Settings:
            name: str
            tags: list[str] = field(default_factory=list)

        assert get_type_tree(Settings, locals()).parse_dto({"name": "a"}) == Settings("a")


class TestDict:
    def test_tree_parsing(self):
        assert get_type_tree(dict[str, int]) == Dict(Primitive(int))
        t = get_type_tree(dict[int, str])
        assert t == UnsupportedTypeNode(dict[int, str])
        with pytest.raises(UnsupportedTypeError):
            t.create_dto({1: "a"})


def test_module_level_helpers():
    assert to_dto([1, 2], list[int]) == [1, 2]
    assert from_dto(tuple[int, str], [1, "a"]) == (1, "a")
