"""Drone tasks: natural-language queries with ground-truth transition lists.

Tasks are built from structured maneuvers. Each maneuver produces exactly
one state transition. Ground truth is a closed-form fold over the maneuvers
that tracks yaw, and an oracle SkillScript program realizes the same
maneuvers through the interpreter so the two can be checked against each
other.

Three families reproduce the complexity range of the sample tasks:

* ``A`` axis-aligned moves at the initial heading,
* ``B`` turns combined with body-frame moves,
* ``C`` moves at an angle inside a body-frame plane.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

from gsce.dronesim import Simulator, StateTransition, body_to_world, normalize_yaw
from gsce.skillscript import format_number, interpret, parse

SCHEMA_VERSION = 1
FAMILIES = ("A", "B", "C")
ORACLE_TOLERANCE = 1e-6

# body-frame unit vectors named the way queries phrase them
DIRECTIONS = {
    "forward": (1.0, 0.0, 0.0),
    "backward": (-1.0, 0.0, 0.0),
    "right": (0.0, 1.0, 0.0),
    "left": (0.0, -1.0, 0.0),
    "down": (0.0, 0.0, 1.0),
    "up": (0.0, 0.0, -1.0),
}

# plane -> (horizontal axis, second axis, words for the +/- horizontal, words for the +/- second)
PLANES = {
    "XY": ("x", "y", ("front", "back"), ("right", "left")),
    "XZ": ("x", "z", ("front", "back"), ("top", "bottom")),
    "YZ": ("y", "z", ("right", "left"), ("top", "bottom")),
}


class CorpusError(ValueError):
    """Schema or consistency problem in a task or corpus file."""


# -- maneuvers --------------------------------------------------------------


@dataclass(frozen=True)
class RelativeMove:
    frame: str  # "world" or "body"
    dx: float
    dy: float
    dz: float


@dataclass(frozen=True)
class Turn:
    degrees: float  # clockwise-positive, |degrees| <= 180


@dataclass(frozen=True)
class PlaneAngleMove:
    """Move ``distance`` meters at ``angle`` degrees from the plane's horizontal axis.

    ``signs`` picks the quadrant: the first entry is the direction along the
    horizontal axis, the second along the other axis. For the vertical
    planes a positive second sign means up, i.e. negative body z.
    """

    plane: str
    angle: float
    distance: float
    signs: tuple[int, int] = (1, 1)

    def body_delta(self) -> tuple[float, float, float]:
        h_axis, v_axis, _, _ = PLANES[self.plane]
        rad = math.radians(self.angle)
        along = self.signs[0] * self.distance * math.cos(rad)
        across = self.signs[1] * self.distance * math.sin(rad)
        if v_axis == "z":
            across = -across
        delta = {"x": 0.0, "y": 0.0, "z": 0.0}
        delta[h_axis] = along
        delta[v_axis] = across
        return (delta["x"], delta["y"], delta["z"])


Maneuver = Union[RelativeMove, Turn, PlaneAngleMove]


def check_maneuver(m: Maneuver) -> None:
    if isinstance(m, RelativeMove):
        if m.frame not in ("world", "body"):
            raise CorpusError(f"unknown frame {m.frame!r}")
        if not all(math.isfinite(v) for v in (m.dx, m.dy, m.dz)):
            raise CorpusError("move deltas must be finite")
    elif isinstance(m, Turn):
        if not (math.isfinite(m.degrees) and abs(m.degrees) <= 180):
            raise CorpusError(f"turn magnitude must be at most 180 degrees, got {m.degrees}")
    elif isinstance(m, PlaneAngleMove):
        if m.plane not in PLANES:
            raise CorpusError(f"unknown plane {m.plane!r}")
        if not 0 <= m.angle <= 90:
            raise CorpusError(f"plane angle must lie in [0, 90], got {m.angle}")
        if not m.distance > 0:
            raise CorpusError("plane move distance must be positive")
        if any(s not in (-1, 1) for s in m.signs):
            raise CorpusError(f"quadrant signs must be +1/-1, got {m.signs}")
    else:
        raise CorpusError(f"not a maneuver: {m!r}")


def maneuver_to_json(m: Maneuver) -> dict:
    if isinstance(m, RelativeMove):
        return {"kind": "move", "frame": m.frame, "dx": m.dx, "dy": m.dy, "dz": m.dz}
    if isinstance(m, Turn):
        return {"kind": "turn", "degrees": m.degrees}
    return {
        "kind": "plane",
        "plane": m.plane,
        "angle": m.angle,
        "distance": m.distance,
        "signs": list(m.signs),
    }


def maneuver_from_json(d: dict) -> Maneuver:
    try:
        kind = d["kind"]
        if kind == "move":
            m: Maneuver = RelativeMove(d["frame"], float(d["dx"]), float(d["dy"]), float(d["dz"]))
        elif kind == "turn":
            m = Turn(float(d["degrees"]))
        elif kind == "plane":
            s0, s1 = d.get("signs", (1, 1))
            m = PlaneAngleMove(d["plane"], float(d["angle"]), float(d["distance"]), (int(s0), int(s1)))
        else:
            raise CorpusError(f"unknown maneuver kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CorpusError):
            raise
        raise CorpusError(f"malformed maneuver {d!r}: {exc}") from None
    check_maneuver(m)
    return m


# -- ground truth -----------------------------------------------------------


def derive_ground_truth(maneuvers: Iterable[Maneuver]) -> list[StateTransition]:
    """Closed-form transitions for a maneuver list, starting at yaw 0."""
    yaw = 0.0
    out = []
    for m in maneuvers:
        if isinstance(m, Turn):
            dyaw = normalize_yaw(m.degrees)
            yaw = normalize_yaw(yaw + m.degrees)
            out.append(StateTransition(0.0, 0.0, 0.0, dyaw))
            continue
        if isinstance(m, RelativeMove) and m.frame == "world":
            dx, dy, dz = m.dx + 0.0, m.dy + 0.0, m.dz + 0.0
        else:
            body = (m.dx, m.dy, m.dz) if isinstance(m, RelativeMove) else m.body_delta()
            dx, dy, dz = body_to_world(*body, yaw)
        out.append(StateTransition(dx, dy, dz, 0.0))
    return out


# -- oracle program ---------------------------------------------------------


def _lit(v: float) -> str:
    text = format_number(v + 0.0)
    return f"({text})" if v < 0 else text


def _describe_maneuver(m: Maneuver) -> str:
    if isinstance(m, Turn):
        return describe_turn(m)
    if isinstance(m, RelativeMove):
        return describe_move(m)
    return describe_plane_move(m)


def oracle_program(maneuvers: Sequence[Maneuver], flip_z: bool = False, ignore_body_frame: bool = False) -> str:
    """A SkillScript program that performs ``maneuvers`` after takeoff.

    Plane-angle trigonometry and the body-to-world rotation are written out
    in the script itself, so executing it is an independent route to the
    transitions computed by :func:`derive_ground_truth`.

    ``flip_z`` negates every vertical displacement and ``ignore_body_frame``
    applies body-frame deltas as if they were world deltas; both exist to
    build deliberately faulty programs.
    """
    lines = ["takeoff()"]
    zs = -1 if flip_z else 1
    for i, m in enumerate(maneuvers, start=1):
        lines.append(f"# step {i}: {_describe_maneuver(m)}")
        if isinstance(m, Turn):
            lines.append(f"set_yaw(get_yaw() + {_lit(m.degrees)})")
            continue
        lines.append("pos = get_drone_position()")
        if isinstance(m, RelativeMove):
            bx, by, bz = _lit(m.dx), _lit(m.dy), _lit(zs * m.dz)
        else:
            h_axis, v_axis, _, _ = PLANES[m.plane]
            lines.append(f"dist = {_lit(m.distance)}")
            lines.append(f"ang = radians({_lit(m.angle)})")
            comp = {"x": "0", "y": "0", "z": "0"}
            comp[h_axis] = f"{m.signs[0]} * dist * cos(ang)"
            # up is negative z in the body frame
            vsign = m.signs[1] * (-1 if v_axis == "z" else 1)
            if v_axis == "z":
                vsign *= zs
            comp[v_axis] = f"{vsign} * dist * sin(ang)"
            lines.append(f"bx = {comp['x']}")
            lines.append(f"by = {comp['y']}")
            lines.append(f"bz = {comp['z']}")
            bx, by, bz = "bx", "by", "bz"
        if isinstance(m, RelativeMove) and m.frame == "world" or ignore_body_frame:
            lines.append(f"fly_to(pos.x + {bx}, pos.y + {by}, pos.z + {bz})")
        else:
            lines.append("yaw = radians(get_yaw())")
            lines.append(
                f"fly_to(pos.x + {bx} * cos(yaw) - {by} * sin(yaw), "
                f"pos.y + {bx} * sin(yaw) + {by} * cos(yaw), pos.z + {bz})"
            )
    return "\n".join(lines) + "\n"


# -- natural language -------------------------------------------------------


def _num_text(v: float) -> str:
    v = abs(v)
    return str(int(v)) if float(v).is_integer() else format_number(v)


def _meters(v: float) -> str:
    text = _num_text(v)
    return f"{text} meter" if text == "1" else f"{text} meters"


def describe_turn(m: Turn) -> str:
    sense = "clockwise" if m.degrees >= 0 else "counterclockwise"
    return f"turn {_num_text(m.degrees)} degrees {sense}"


def describe_move(m: RelativeMove) -> str:
    components = [(m.dx, "forward", "backward"), (m.dy, "right", "left"), (m.dz, "down", "up")]
    parts = [f"{_meters(v)} {pos if v > 0 else neg}" for v, pos, neg in components if v != 0]
    text = "fly " + (" and ".join(parts) if parts else "0 meters")
    if m.frame == "body":
        text += " in the drone's body frame"
    return text


def describe_plane_move(m: PlaneAngleMove) -> str:
    _, _, h_words, v_words = PLANES[m.plane]
    h = h_words[0] if m.signs[0] > 0 else h_words[1]
    v = v_words[0] if m.signs[1] > 0 else v_words[1]
    quadrant = f"{v}-{h}" if m.plane != "XY" else f"{h}-{v}"
    return (
        f"fly the drone in the {quadrant} direction at an angle of {_num_text(m.angle)} degrees "
        f"from the horizontal axis, in the {m.plane} plane of drone's body frame "
        f"for a distance of {_meters(m.distance)}"
    )


def render_query(maneuvers: Sequence[Maneuver]) -> str:
    clauses = [_describe_maneuver(m) for m in maneuvers]
    if not clauses:
        return "Take off and hover."
    text = ", then ".join(clauses)
    return text[0].upper() + text[1:] + "."


# -- tasks ------------------------------------------------------------------


@dataclass
class Task:
    id: str
    query: str
    family: str
    ground_truth: list[StateTransition]
    maneuvers: list[Maneuver] | None = None
    tags: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        d = {
            "id": self.id,
            "query": self.query,
            "family": self.family,
            "tags": list(self.tags),
            "ground_truth": [t.as_list() for t in self.ground_truth],
        }
        if self.maneuvers is not None:
            d["maneuvers"] = [maneuver_to_json(m) for m in self.maneuvers]
        return d

    @classmethod
    def from_json(cls, d: dict) -> Task:
        try:
            gt = [StateTransition.from_seq(row) for row in d["ground_truth"]]
            maneuvers = d.get("maneuvers")
            return cls(
                id=str(d["id"]),
                query=str(d["query"]),
                family=str(d.get("family", "")),
                ground_truth=gt,
                maneuvers=None if maneuvers is None else [maneuver_from_json(m) for m in maneuvers],
                tags=list(d.get("tags", [])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, CorpusError):
                raise
            raise CorpusError(f"malformed task record: {exc}") from None

    @property
    def has_vertical(self) -> bool:
        return any(abs(t.dz) > 1e-9 for t in self.ground_truth)


def make_task(task_id: str, maneuvers: Sequence[Maneuver], family: str, tags=()) -> Task:
    for m in maneuvers:
        check_maneuver(m)
    return Task(
        id=task_id,
        query=render_query(maneuvers),
        family=family,
        ground_truth=derive_ground_truth(maneuvers),
        maneuvers=list(maneuvers),
        tags=list(tags),
    )


def _component_mismatch(a: StateTransition, b: StateTransition, tol: float) -> bool:
    pos = any(abs(x - y) > tol for x, y in zip(a.as_list()[:3], b.as_list()[:3]))
    return pos or abs(normalize_yaw(a.dyaw - b.dyaw)) > tol


def execute_oracle(maneuvers: Sequence[Maneuver], takeoff_altitude_m: float = 1.5) -> list[StateTransition]:
    sim = Simulator(takeoff_altitude_m=takeoff_altitude_m)
    outcome = interpret(parse(oracle_program(maneuvers)), sim)
    if not outcome.ok:
        raise CorpusError(f"oracle program failed: {outcome.error}")
    return list(sim.log)


def validate_task(task: Task, tol: float = ORACLE_TOLERANCE) -> None:
    """Run the oracle program for ``task`` and compare its log to the ground truth.

    Raises :class:`CorpusError` naming the first divergent transition.
    """
    if not task.ground_truth:
        raise CorpusError(f"task {task.id}: empty ground truth")
    if task.maneuvers is None:
        raise CorpusError(f"task {task.id}: no maneuvers, cannot run the oracle")
    if len(task.maneuvers) != len(task.ground_truth):
        raise CorpusError(
            f"task {task.id}: {len(task.maneuvers)} maneuvers but "
            f"{len(task.ground_truth)} ground-truth transitions"
        )
    log = execute_oracle(task.maneuvers)
    for i, (got, want) in enumerate(zip(log, task.ground_truth)):
        if _component_mismatch(got, want, tol):
            raise CorpusError(
                f"task {task.id}: transition {i} diverges: oracle {got.as_list()} "
                f"vs ground truth {want.as_list()}"
            )
    if len(log) != len(task.ground_truth):
        raise CorpusError(f"task {task.id}: oracle logged {len(log)} transitions, expected {len(task.ground_truth)}")


# -- corpus files -----------------------------------------------------------


@dataclass
class CorpusFile:
    tasks: list[Task]
    version: int = SCHEMA_VERSION

    def to_json(self) -> dict:
        return {"version": self.version, "tasks": [t.to_json() for t in self.tasks]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    def by_id(self) -> dict[str, Task]:
        return {t.id: t for t in self.tasks}


def parse_corpus(data: dict, validate: bool = True) -> CorpusFile:
    if not isinstance(data, dict) or "tasks" not in data:
        raise CorpusError("corpus must be an object with a 'tasks' list")
    version = data.get("version")
    if version != SCHEMA_VERSION:
        raise CorpusError(f"unsupported corpus version {version!r}")
    tasks = [Task.from_json(d) for d in data["tasks"]]
    seen = set()
    for t in tasks:
        if t.id in seen:
            raise CorpusError(f"duplicate task id {t.id!r}")
        seen.add(t.id)
        if not t.ground_truth:
            raise CorpusError(f"task {t.id}: empty ground truth")
        if validate and t.maneuvers is not None:
            validate_task(t)
    return CorpusFile(tasks, version)


def load_corpus(path: str | Path, validate: bool = True) -> CorpusFile:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: invalid JSON: {exc}") from None
    return parse_corpus(data, validate=validate)


# -- generation -------------------------------------------------------------

_DISTANCES = [x / 2 for x in range(2, 21)]  # 1.0 .. 10.0 in half meters
_TURNS = [30, 45, 60, 90, 120, 135, 150, 180]
_ANGLES = [15, 30, 45, 60, 75]


def _axis_move(rng: random.Random, frame: str) -> RelativeMove:
    name = rng.choice(sorted(DIRECTIONS))
    d = rng.choice(_DISTANCES)
    ux, uy, uz = DIRECTIONS[name]
    return RelativeMove(frame, ux * d, uy * d, uz * d)


def _turn(rng: random.Random) -> Turn:
    deg = rng.choice(_TURNS)
    return Turn(float(deg if deg == 180 or rng.random() < 0.5 else -deg))


def _plane_move(rng: random.Random) -> PlaneAngleMove:
    return PlaneAngleMove(
        plane=rng.choice(sorted(PLANES)),
        angle=float(rng.choice(_ANGLES)),
        distance=float(rng.choice(range(2, 13))),
        signs=(rng.choice((1, -1)), rng.choice((1, -1))),
    )


def _family_a(rng: random.Random) -> list[Maneuver]:
    n = rng.choice((1, 2, 2, 3))
    moves: list[Maneuver] = []
    while len(moves) < n:
        m = _axis_move(rng, "world")
        if moves and isinstance(moves[-1], RelativeMove) and _same_axis(moves[-1], m):
            continue
        moves.append(m)
    return moves


def _same_axis(a: RelativeMove, b: RelativeMove) -> bool:
    return [v != 0 for v in (a.dx, a.dy, a.dz)] == [v != 0 for v in (b.dx, b.dy, b.dz)]


def _family_b(rng: random.Random) -> list[Maneuver]:
    seq: list[Maneuver] = [_turn(rng), _axis_move(rng, "body")]
    for _ in range(rng.choice((0, 1, 2))):
        seq.append(_turn(rng) if rng.random() < 0.4 else _axis_move(rng, "body"))
    return seq


def _family_c(rng: random.Random) -> list[Maneuver]:
    seq: list[Maneuver] = []
    if rng.random() < 0.5:
        seq.append(_turn(rng))
    seq.append(_plane_move(rng))
    if rng.random() < 0.4:
        seq.append(_axis_move(rng, "body"))
    return seq


_FAMILY_BUILDERS = {"A": _family_a, "B": _family_b, "C": _family_c}


def generate_corpus(seed: int, counts: Sequence[int] = (15, 15, 14)) -> CorpusFile:
    """Deterministic corpus with ``counts[i]`` tasks from family ``FAMILIES[i]``."""
    if len(counts) != len(FAMILIES) or any(c < 0 for c in counts):
        raise ValueError(f"counts must be three non-negative integers, got {counts!r}")
    rng = random.Random(seed)
    tasks = []
    for family, count in zip(FAMILIES, counts):
        for i in range(1, count + 1):
            maneuvers = _FAMILY_BUILDERS[family](rng)
            tags = sorted({type(m).__name__ for m in maneuvers})
            task = make_task(f"{family}{i:03d}", maneuvers, family, tags)
            validate_task(task)
            tasks.append(task)
    return CorpusFile(tasks)


def sample_tasks() -> list[Task]:
    """The three published sample queries, one per family."""
    return [
        make_task("S1", [RelativeMove("world", 0, 0, 5), RelativeMove("world", 0, 0, -4)], "A", ["sample"]),
        make_task("S2", [Turn(90), RelativeMove("body", 0, -4, 0)], "B", ["sample"]),
        make_task("S3", [PlaneAngleMove("YZ", 30, 10, (1, 1))], "C", ["sample"]),
    ]


def default_corpus_path() -> Path:
    return Path(__file__).parent / "assets" / "corpus_default.json"
