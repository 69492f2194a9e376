"""Processor geometries: qubit coordinates, colored edge layers, probe and decoding patches."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

COLORS = ("orange", "blue", "green", "red")
DEFAULT_CYCLE = ("orange", "blue", "green", "red", "orange", "blue", "green", "red")


@dataclass(frozen=True)
class Geometry:
    name: str
    qubits: tuple  # (x, y) per qubit
    edges: tuple  # (i, j, color)
    cycle_colors: tuple = DEFAULT_CYCLE
    probe: int | None = None
    patches: tuple = ()  # nested D_0 ⊂ D_1 ⊂ ... as tuples of qubit indices
    final: tuple = ()  # qubits left unmeasured in the entanglement experiments

    def __post_init__(self):
        coords = [tuple(c) for c in self.qubits]
        if len(set(coords)) != len(coords):
            raise ValueError(f"{self.name}: duplicate qubit coordinates")
        object.__setattr__(self, "qubits", tuple(coords))
        object.__setattr__(self, "edges", tuple((int(i), int(j), str(c)) for i, j, c in self.edges))
        object.__setattr__(self, "cycle_colors", tuple(self.cycle_colors))
        object.__setattr__(self, "patches", tuple(tuple(sorted(p)) for p in self.patches))
        object.__setattr__(self, "final", tuple(self.final))
        self.validate()

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    def validate(self) -> None:
        used: dict[str, set] = {c: set() for c in COLORS}
        for i, j, color in self.edges:
            if color not in used:
                raise ValueError(f"{self.name}: unknown color {color!r}")
            (xi, yi), (xj, yj) = self.qubits[i], self.qubits[j]
            if abs(xi - xj) + abs(yi - yj) != 1:
                raise ValueError(f"{self.name}: edge {i}-{j} is not nearest-neighbor")
            if i in used[color] or j in used[color]:
                raise ValueError(f"{self.name}: color {color} is not a matching")
            used[color].update((i, j))
        for c in self.cycle_colors:
            if c not in COLORS:
                raise ValueError(f"{self.name}: unknown cycle color {c!r}")
        if self.patches:
            if self.probe is None:
                raise ValueError(f"{self.name}: patches need a probe")
            if self.patches[0]:
                raise ValueError(f"{self.name}: D_0 must be empty")
            for a, b in zip(self.patches, self.patches[1:]):
                if not set(a) < set(b):
                    raise ValueError(f"{self.name}: patches are not strictly nested")
            everything = set(self.patches[-1]) | {self.probe}
            if everything != set(range(self.n_qubits)) or self.probe in self.patches[-1]:
                raise ValueError(f"{self.name}: last patch plus probe must cover every qubit once")

    def edges_of(self, color: str) -> list:
        return [(i, j) for i, j, c in self.edges if c == color]

    def index_of(self, x: int, y: int) -> int:
        return self.qubits.index((x, y))

    @property
    def r_max(self) -> int:
        return len(self.patches) - 1

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "qubits": [list(c) for c in self.qubits],
            "edges": [[i, j, c] for i, j, c in self.edges],
            "cycle_colors": list(self.cycle_colors),
            "probe": self.probe,
            "patches": [list(p) for p in self.patches],
            "final": list(self.final),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Geometry":
        return cls(
            name=d["name"],
            qubits=tuple(tuple(c) for c in d["qubits"]),
            edges=tuple(tuple(e) for e in d["edges"]),
            cycle_colors=tuple(d.get("cycle_colors", DEFAULT_CYCLE)),
            probe=d.get("probe"),
            patches=tuple(tuple(p) for p in d.get("patches", ())),
            final=tuple(d.get("final", ())),
        )


def edge_color(a: tuple, b: tuple) -> str:
    """Staggered coloring of the square lattice; every color is a matching.

    Bonds along y are orange/green and bonds along x are blue/red, so with the
    cycle order orange, blue, green, red only cycles 2 and 4 couple columns.
    """
    (xa, ya), (xb, yb) = sorted([a, b])
    along_x = ya == yb
    parity = (xa + ya) % 2
    if along_x:
        return "blue" if parity == 0 else "red"
    return "orange" if parity == 0 else "green"


def lattice_geometry(name: str, coords, probe=None, final=()) -> Geometry:
    """Build a geometry from lattice sites, coloring every nearest-neighbor bond.

    With a probe, patches are the columns swept away from it: D_r holds every
    non-probe qubit with x < r.
    """
    coords = [tuple(c) for c in coords]
    index = {c: k for k, c in enumerate(coords)}
    edges = []
    for (x, y), k in index.items():
        for nb in ((x + 1, y), (x, y + 1)):
            if nb in index:
                edges.append((k, index[nb], edge_color((x, y), nb)))
    order = {c: n for n, c in enumerate(COLORS)}
    edges.sort(key=lambda e: (order[e[2]], e[0], e[1]))
    patches = ()
    probe_idx = None
    if probe is not None:
        probe_idx = index[tuple(probe)]
        width = max(x for x, _ in coords) + 1
        patches = tuple(
            tuple(sorted(k for c, k in index.items() if c[0] < r and k != probe_idx)) for r in range(width + 1)
        )
    return Geometry(name, tuple(coords), tuple(edges), DEFAULT_CYCLE, probe_idx, patches, tuple(final))


def rectangle(name: str, width: int, height: int, drop=()) -> Geometry:
    drop = {tuple(d) for d in drop}
    coords = [(x, y) for x in range(width) for y in range(height) if (x, y) not in drop]
    return lattice_geometry(name, coords, probe=(0, height // 2))


def grid19() -> Geometry:
    """Three rows: a 7-qubit top chain (qubits 0..6) above 7 + 5 measured qubits."""
    chain = [(x, 2) for x in range(7)]
    middle = [(x, 1) for x in range(7)]
    bottom = [(x, 0) for x in range(1, 6)]
    return lattice_geometry("grid19", chain + middle + bottom, probe=(0, 1), final=range(7))


def builtin_geometries() -> dict:
    return {
        "grid19": grid19(),
        "n12": rectangle("n12", 4, 3),
        "n24": rectangle("n24", 6, 4),
        "n40": rectangle("n40", 8, 5),
        "n58": rectangle("n58", 10, 6, drop=[(9, 0), (9, 5)]),
        "n70": rectangle("n70", 10, 7),
    }


def load_geometry(name_or_path: str) -> Geometry:
    """Load a shipped geometry by name, or any geometry JSON file by path."""
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        return Geometry.from_dict(json.loads(path.read_text()))
    try:
        text = resources.files("mipt.circuits").joinpath("data", f"{name_or_path}.json").read_text()
    except FileNotFoundError:
        raise KeyError(f"unknown geometry {name_or_path!r}") from None
    return Geometry.from_dict(json.loads(text))


def write_builtin(directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for name, geom in builtin_geometries().items():
        (directory / f"{name}.json").write_text(json.dumps(geom.to_dict(), indent=1) + "\n")
