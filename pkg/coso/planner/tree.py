"""Agglomerative views: the PSP as merge events and an SO plan as a tree."""

from __future__ import annotations

from typing import Iterable, List, Optional

from pydantic import Field

from coso.common.ids import UserId, sorted_users, subset_sort_key
from coso.common.rationals import format_decimal, format_rational
from coso.common.schemas import CosoModel, NormalizedUserId, Rational
from coso.par.service import Psp
from coso.partitions.service import restrict_blocks
from coso.planner.schemas import SoPlan


class MergeEvent(CosoModel):
    alpha: Rational
    merged: List[NormalizedUserId]
    parts: List[List[NormalizedUserId]]


def information_hierarchy(chain: Psp) -> List[MergeEvent]:
    """For each critical point, which blocks of the finer partition fuse into each coarser block."""
    events = []
    for j in range(chain.p, 0, -1):
        coarse, fine = chain.partition(j - 1), chain.partition(j)
        for block in coarse.ordered():
            if block in fine.blocks:
                continue
            parts = restrict_blocks(block, fine)
            events.append(
                MergeEvent(alpha=chain.alpha(j), merged=sorted_users(block), parts=[sorted_users(p) for p in parts])
            )
    return events


def node_name(members: Iterable[UserId]) -> str:
    """Node id: u4 for a user, s145 for a super-user; multi-character ids are joined with an underscore."""
    ids = [str(u) for u in sorted_users(members)]
    if len(ids) == 1:
        return "u" + ids[0]
    sep = "" if all(len(i) == 1 for i in ids) else "_"
    return "s" + sep.join(ids)


class TreeNode(CosoModel):
    name: str
    members: List[NormalizedUserId]
    stage: Optional[int] = None
    alpha: Optional[Rational] = None
    rate: Optional[Rational] = None


class TreeEdge(CosoModel):
    parent: str
    child: str
    stage: int
    rate: Rational


class TreeDocument(CosoModel):
    model: str
    nodes: List[TreeNode] = Field(default_factory=list)
    edges: List[TreeEdge] = Field(default_factory=list)
    root: str

    def to_dot(self) -> str:
        lines = [f"digraph so_tree_{self.model} {{", "  rankdir=BT;"]
        for node in self.nodes:
            if node.stage is None:
                lines.append(f'  "{node.name}" [label="{node.members[0]}", shape=circle];')
            else:
                label = f"{node.name[1:]}\\nα={format_decimal(node.alpha)}"
                lines.append(f'  "{node.name}" [label="{label}", shape=box];')
        for edge in self.edges:
            label = f"r^({edge.stage})={format_decimal(edge.rate)}"
            lines.append(f'  "{edge.child}" -> "{edge.parent}" [label="{label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        children: dict[str, list[TreeEdge]] = {}
        for edge in self.edges:
            children.setdefault(edge.parent, []).append(edge)
        by_name = {node.name: node for node in self.nodes}
        out: list[str] = []

        def walk(name: str, depth: int, rate: Optional[str]) -> None:
            node = by_name[name]
            where = f" (stage {node.stage}, α={format_rational(node.alpha)})" if node.stage is not None else ""
            via = f" r={rate}" if rate is not None else ""
            out.append("  " * depth + name + where + via)
            for edge in children.get(name, []):
                walk(edge.child, depth + 1, format_rational(edge.rate))

        walk(self.root, 0, None)
        return "\n".join(out) + "\n"


def export_tree(plan: SoPlan) -> TreeDocument:
    """Users are leaves; each new stage target is a super-user over the maximal earlier nodes inside it."""
    doc_nodes: list[TreeNode] = []
    edges: list[TreeEdge] = []
    for user in sorted_users(plan.users):
        doc_nodes.append(TreeNode(name=node_name([user]), members=[user]))

    tops: list[frozenset] = []
    for stage in plan.stages:
        rates = stage.rates
        for target in sorted(stage.target_sets, key=subset_sort_key):
            if target in tops:
                continue
            inner = [t for t in tops if t <= target]
            covered = frozenset().union(*inner) if inner else frozenset()
            kids = sorted(inner + [frozenset([u]) for u in target - covered], key=subset_sort_key)
            name = node_name(target)
            doc_nodes.append(
                TreeNode(
                    name=name,
                    members=sorted_users(target),
                    stage=stage.index,
                    alpha=stage.alpha,
                    rate=rates.sum(target),
                )
            )
            for kid in kids:
                edges.append(TreeEdge(parent=name, child=node_name(kid), stage=stage.index, rate=rates.sum(kid)))
            tops = [t for t in tops if not t <= target] + [target]

    root = node_name(plan.users) if plan.users in tops else doc_nodes[-1].name
    return TreeDocument(model=plan.model.value, nodes=doc_nodes, edges=edges, root=root)
