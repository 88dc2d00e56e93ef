from typing import Iterable, Mapping

from neunets.errors import NeunetsError


class CyclicGraphError(NeunetsError):
    def __init__(self, layer_id):
        super().__init__(f"Layer {layer_id} depends on itself")
        self.layer_id = layer_id


def topological_order(dependencies: Mapping[int, Iterable[int]]) -> list[int]:
    """Every node after all of its dependencies

    Siblings are visited in ascending id order, so the order only depends on the DAG and
    not on how the mapping was built.

    :raises CyclicGraphError: if a node directly or indirectly depends on itself
    """
    deps = {node: sorted(set(inputs)) for node, inputs in dependencies.items()}
    result: list[int] = []
    used: set[int] = set()

    for root in sorted(deps):
        # explicit stack of (node, ancestors) instead of recursion, networks can get deep
        stack = [(root, frozenset())]
        while stack:
            node, ancestors = stack[-1]
            if node in used:
                stack.pop()
                continue
            if node in ancestors:
                raise CyclicGraphError(node)
            unused = [d for d in deps.get(node, ()) if d not in used]
            if not unused:  # leaf
                result.append(node)
                used.add(node)
                stack.pop()
                continue
            for dep in unused:
                if dep in ancestors or dep == node:
                    raise CyclicGraphError(dep)
            stack.extend((dep, ancestors | {node}) for dep in reversed(unused))
    return result


def ancestors(dependencies: Mapping[int, Iterable[int]], node: int) -> set[int]:
    """All nodes `node` (inclusive) is computed from"""
    seen = {node}
    frontier = [node]
    while frontier:
        for dep in dependencies[frontier.pop()]:
            if dep not in seen:
                seen.add(dep)
                frontier.append(dep)
    return seen
