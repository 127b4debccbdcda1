"""Ranks simulated candidate configurations and picks one.

Candidates failing a hard threshold are excluded with a reason; the rest are
ordered lexicographically by the policy's objective keys.  Throughput means
that sit within one standard error of each other are treated as tied before
later keys apply, so selection is not driven by replication noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import NoFeasibleCandidate
from .optimizer import Solution
from .simulator import SimReport

_OBJECTIVE_KEYS = ("throughput", "agents", "adjustment")


@dataclass(frozen=True)
class SelectionPolicy:
    min_throughput: Optional[float] = None
    max_agents: Optional[int] = None
    objective: Tuple[str, ...] = ("throughput", "agents", "adjustment")

    def __post_init__(self):
        if not self.objective:
            raise ValueError("objective order must be non-empty")
        if len(set(self.objective)) != len(self.objective):
            raise ValueError("objective order must not repeat keys")
        unknown = [k for k in self.objective if k not in _OBJECTIVE_KEYS]
        if unknown:
            raise ValueError(f"unknown objective keys: {unknown}")


@dataclass(frozen=True)
class SelectionResult:
    chosen: int
    ranking: Tuple[int, ...]
    exclusions: Dict[int, Tuple[str, ...]]

    def to_dict(self) -> dict:
        return {
            "chosen": self.chosen,
            "ranking": list(self.ranking),
            "exclusions": {str(i): list(v) for i, v in sorted(self.exclusions.items())},
        }


def _throughput_groups(
    idxs: List[int], stats: Dict[int, Tuple[float, float]]
) -> Dict[int, int]:
    """Rank index per candidate; adjacent means within one SE share a rank.

    Candidates are sorted by mean descending and merged pairwise along that
    order when |difference| <= max of the two standard errors, which closes
    chains of overlapping estimates into one tie group.
    """
    order = sorted(idxs, key=lambda i: (-stats[i][0], i))
    ranks: Dict[int, int] = {}
    rank = -1
    prev: Optional[int] = None
    for i in order:
        if prev is None:
            rank += 1
        else:
            gap = stats[prev][0] - stats[i][0]
            se = max(stats[prev][1], stats[i][1])
            if gap > se + 1e-12:
                rank += 1
        ranks[i] = rank
        prev = i
    return ranks


def select(
    candidates: Sequence[Tuple[Solution, SimReport]],
    policy: SelectionPolicy,
    throughput_stats: Optional[Sequence[Tuple[float, float]]] = None,
) -> SelectionResult:
    """Choose the best feasible candidate under the policy.

    throughput_stats supplies (replicate mean, standard error) per candidate;
    when omitted, each report's own throughput is used with zero error.  Ties
    remaining after every objective key go to the lower candidate index.
    """
    if not candidates:
        raise ValueError("candidates must be non-empty")
    if throughput_stats is not None and len(throughput_stats) != len(candidates):
        raise ValueError("throughput_stats length must match candidates")

    stats = {
        i: (
            (float(throughput_stats[i][0]), float(throughput_stats[i][1]))
            if throughput_stats is not None
            else (float(r.throughput), 0.0)
        )
        for i, (_, r) in enumerate(candidates)
    }

    exclusions: Dict[int, Tuple[str, ...]] = {}
    feasible: List[int] = []
    for i, (sol, _) in enumerate(candidates):
        reasons: List[str] = []
        mean = stats[i][0]
        if policy.min_throughput is not None and mean < policy.min_throughput:
            reasons.append(f"throughput {mean:g} below minimum {policy.min_throughput:g}")
        if policy.max_agents is not None and sol.agents_used > policy.max_agents:
            reasons.append(f"uses {sol.agents_used} agents, more than {policy.max_agents}")
        if reasons:
            exclusions[i] = tuple(reasons)
        else:
            feasible.append(i)

    if not feasible:
        raise NoFeasibleCandidate({i: list(v) for i, v in exclusions.items()})

    ranks = _throughput_groups(feasible, stats)

    def sort_key(i: int):
        sol = candidates[i][0]
        parts: List[float] = []
        for key in policy.objective:
            if key == "throughput":
                parts.append(ranks[i])
            elif key == "agents":
                parts.append(sol.agents_used)
            else:
                parts.append(sol.adjustment)
        parts.append(i)
        return tuple(parts)

    ranking = tuple(sorted(feasible, key=sort_key))
    return SelectionResult(ranking[0], ranking, exclusions)
