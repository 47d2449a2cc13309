"""
NBeacons grid domain generator.

An agent walks a grid to activate beacons. Sandpits trap it; wind blowing
across the grid sweeps it into the nearest sandpit within wind speed. Digging
out takes three actions, or one with a packed hook bought before departure.

Cells are named ``c{x}-{y}``, 1-based, with north as +y.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .parser import format_domain, format_problem
from .strips import (
    ActionKind,
    ActionSchema,
    DomainModel,
    GroundAction,
    GroundPlan,
    Literal,
    PredicateDecl,
    Problem,
    State,
    TypedObject,
    TypedVar,
    atom,
)

logger = logging.getLogger(__name__)

Cell = tuple[int, int]

AGENT = "agent"
DIRECTIONS: dict[str, Cell] = {"N": (0, 1), "S": (0, -1), "E": (1, 0), "W": (-1, 0)}
MOVES = (("north", "n", "N"), ("south", "s", "S"), ("east", "e", "E"), ("west", "w", "W"))


def cell_name(cell: Cell) -> str:
    return f"c{cell[0]}-{cell[1]}"


@dataclass(frozen=True)
class GridConfig:
    width: int
    height: int
    agent_start: Cell
    beacons: tuple[Cell, ...]
    sandpits: tuple[Cell, ...] = ()
    wind_direction: str = "W"
    wind_speed: int = 5
    wind_probability: float = 0.0
    name: str = "nbeacons"

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ConfigError("grid dimensions must be positive")
        if self.wind_direction not in DIRECTIONS:
            raise ConfigError(f"wind direction must be one of N, S, E, W, got {self.wind_direction}")
        if self.wind_speed < 1:
            raise ConfigError("wind speed must be positive")
        if not 0.0 <= self.wind_probability <= 1.0:
            raise ConfigError("wind probability must lie in [0, 1]")
        if not self.beacons:
            raise ConfigError("at least one beacon is required")
        cells = [self.agent_start, *self.beacons, *self.sandpits]
        for cell in cells:
            if not self.in_bounds(cell):
                raise ConfigError(f"cell {cell} lies outside the {self.width}x{self.height} grid")
        if len(set(cells)) != len(cells):
            raise ConfigError("start, beacons and sandpits must be pairwise distinct")

    def in_bounds(self, cell: Cell) -> bool:
        return 1 <= cell[0] <= self.width and 1 <= cell[1] <= self.height

    def cells(self) -> list[Cell]:
        return [(x, y) for x in range(1, self.width + 1) for y in range(1, self.height + 1)]

    def beacon_names(self) -> list[str]:
        if len(self.beacons) == 1:
            return ["beacon"]
        return [f"beacon-{i}" for i in range(1, len(self.beacons) + 1)]

    def downwind(self) -> dict[Cell, Cell]:
        """Each non-pit cell mapped to the first sandpit the wind would sweep it into."""
        dx, dy = DIRECTIONS[self.wind_direction]
        pits = set(self.sandpits)
        out: dict[Cell, Cell] = {}
        for cell in self.cells():
            if cell in pits:
                continue
            for distance in range(1, self.wind_speed + 1):
                target = (cell[0] + dx * distance, cell[1] + dy * distance)
                if not self.in_bounds(target):
                    break
                if target in pits:
                    out[cell] = target
                    break
        return out


def _var(name: str, type_name: str) -> TypedVar:
    return TypedVar(name, type_name)


def _lit(predicate: str, *args: str, positive: bool = True) -> Literal:
    return Literal(predicate, tuple(args), positive)


def build_domain(name: str = "nbeacons") -> DomainModel:
    a, c, b = "?a", "?c", "?b"
    agent, cell = _var(a, "agent"), _var(c, "cell")
    predicates = [
        PredicateDecl("at", (agent, cell)),
        *(
            PredicateDecl(f"adjacent-{short}", (_var("?from", "cell"), _var("?to", "cell")))
            for _, short, _ in MOVES
        ),
        PredicateDecl("canMove", (agent,)),
        PredicateDecl("sandpit", (cell,)),
        PredicateDecl("buried3", (agent,)),
        PredicateDecl("buried2", (agent,)),
        PredicateDecl("buried1", (agent,)),
        PredicateDecl("bought", (agent,)),
        PredicateDecl("packed", (agent,)),
        PredicateDecl("departed", (agent,)),
        PredicateDecl("activated", (_var(b, "beacon"),)),
        PredicateDecl("beacon-at", (_var(b, "beacon"), cell)),
        PredicateDecl("downwind", (cell, _var("?pit", "cell"))),
    ]

    schemas: list[ActionSchema] = []
    for long, short, _ in MOVES:
        schemas.append(
            ActionSchema(
                name=f"move-{long}",
                parameters=(agent, _var("?from", "cell"), _var("?to", "cell")),
                preconditions=(
                    _lit("canMove", a),
                    _lit("at", a, "?from"),
                    _lit(f"adjacent-{short}", "?from", "?to"),
                ),
                effects=(
                    _lit("at", a, "?from", positive=False),
                    _lit("at", a, "?to"),
                    _lit("departed", a),
                ),
            )
        )
    schemas.append(
        ActionSchema(
            name="activate",
            parameters=(agent, cell, _var(b, "beacon")),
            preconditions=(_lit("at", a, c), _lit("beacon-at", b, c), _lit("activated", b, positive=False)),
            effects=(_lit("activated", b),),
        )
    )
    for level in (3, 2, 1):
        effects = [_lit(f"buried{level}", a, positive=False)]
        effects.append(_lit(f"buried{level - 1}", a) if level > 1 else _lit("canMove", a))
        schemas.append(
            ActionSchema(
                name=f"dig{level}",
                parameters=(agent,),
                preconditions=(_lit(f"buried{level}", a),),
                effects=tuple(effects),
            )
        )
    schemas.append(
        ActionSchema(
            name="wind-capture",
            parameters=(agent, cell, _var("?pit", "cell")),
            preconditions=(_lit("at", a, c), _lit("canMove", a), _lit("downwind", c, "?pit")),
            effects=(
                _lit("at", a, c, positive=False),
                _lit("at", a, "?pit"),
                _lit("canMove", a, positive=False),
                _lit("buried3", a),
            ),
            kind=ActionKind.EVENT,
        )
    )
    schemas.append(
        ActionSchema(
            name="buy-hook",
            parameters=(agent,),
            preconditions=(_lit("bought", a, positive=False), _lit("departed", a, positive=False)),
            effects=(_lit("bought", a),),
            kind=ActionKind.MITIGATION,
        )
    )
    schemas.append(
        ActionSchema(
            name="pack-hook",
            parameters=(agent,),
            preconditions=(
                _lit("bought", a),
                _lit("packed", a, positive=False),
                _lit("departed", a, positive=False),
            ),
            effects=(_lit("packed", a),),
            kind=ActionKind.MITIGATION,
        )
    )
    schemas.append(
        ActionSchema(
            name="hook-out",
            parameters=(agent,),
            preconditions=(_lit("packed", a), _lit("canMove", a, positive=False)),
            effects=(
                _lit("buried3", a, positive=False),
                _lit("buried2", a, positive=False),
                _lit("buried1", a, positive=False),
                _lit("canMove", a),
            ),
            kind=ActionKind.MITIGATION,
        )
    )
    return DomainModel(
        name=name,
        types=("agent", "beacon", "cell"),
        predicates=tuple(predicates),
        schemas=tuple(schemas),
    )


def build_problem(config: GridConfig, domain: DomainModel) -> Problem:
    beacons = config.beacon_names()
    objects = [TypedObject(AGENT, "agent")]
    objects += [TypedObject(name, "beacon") for name in beacons]
    objects += [TypedObject(cell_name(cell), "cell") for cell in config.cells()]

    init = [atom("at", AGENT, cell_name(config.agent_start)), atom("canMove", AGENT)]
    for cell in config.cells():
        for _, short, direction in MOVES:
            dx, dy = DIRECTIONS[direction]
            neighbour = (cell[0] + dx, cell[1] + dy)
            if config.in_bounds(neighbour):
                init.append(atom(f"adjacent-{short}", cell_name(cell), cell_name(neighbour)))
    init += [atom("sandpit", cell_name(pit)) for pit in config.sandpits]
    init += [atom("beacon-at", name, cell_name(cell)) for name, cell in zip(beacons, config.beacons)]
    init += [
        atom("downwind", cell_name(cell), cell_name(pit))
        for cell, pit in sorted(config.downwind().items())
    ]
    return Problem(
        name=f"{config.name}-{config.width}x{config.height}",
        domain_name=domain.name,
        objects=tuple(objects),
        init=State.of(init),
        goal=tuple(atom("activated", name) for name in beacons),
    )


def generate(config: GridConfig) -> tuple[str, str]:
    """Domain and problem file texts for ``config``; a pure function of the config."""
    domain = build_domain()
    problem = build_problem(config, domain)
    logger.info(
        "Generated %s with %s sandpits and %s downwind facts",
        problem.name,
        len(config.sandpits),
        len(config.downwind()),
    )
    return format_domain(domain), format_problem(problem)


CANONICAL_CONFIG = GridConfig(
    width=10,
    height=10,
    agent_start=(6, 1),
    beacons=((6, 9),),
    sandpits=((2, 2), (3, 3), (1, 4), (4, 5)),
    wind_direction="W",
    wind_speed=5,
    name="canonical",
)


def canonical_plan(domain: DomainModel) -> GroundPlan:
    move = domain.schema("move-north")
    steps = [
        GroundAction.from_schema(move, {"?a": AGENT, "?from": f"c6-{y}", "?to": f"c6-{y + 1}"})
        for y in range(1, 9)
    ]
    steps.append(
        GroundAction.from_schema(domain.schema("activate"), {"?a": AGENT, "?c": "c6-9", "?b": "beacon"})
    )
    return GroundPlan(tuple(steps))


def canonical_scenario() -> tuple[DomainModel, Problem, GroundPlan]:
    """Ten by ten grid, west wind of speed five, eight moves north then activate.

    Each of rows 2 to 5 has exactly one sandpit within reach of the wind from
    column 6, so the plan meets four wind threats after its first four moves.
    """
    domain = build_domain()
    return domain, build_problem(CANONICAL_CONFIG, domain), canonical_plan(domain)


def random_config(
    width: int,
    height: int,
    sandpits: int = 3,
    beacons: int = 1,
    seed: int = 0,
    wind_direction: str = "W",
    wind_speed: int = 5,
) -> GridConfig:
    needed = 1 + beacons + sandpits
    if needed > width * height:
        raise ConfigError(f"a {width}x{height} grid cannot hold {needed} distinct cells")
    rng = np.random.default_rng(seed)
    cells = [(x, y) for x in range(1, width + 1) for y in range(1, height + 1)]
    picks = [cells[i] for i in rng.choice(len(cells), size=needed, replace=False)]
    return GridConfig(
        width=width,
        height=height,
        agent_start=picks[0],
        beacons=tuple(picks[1 : 1 + beacons]),
        sandpits=tuple(sorted(picks[1 + beacons :])),
        wind_direction=wind_direction,
        wind_speed=wind_speed,
        name=f"random-s{seed}",
    )
