"""Particle tables and JSON configuration files.

Particle table: a header line ``# species x_cm y_cm z_cm``, then one
whitespace-separated row per particle. Other ``#`` lines are comments.

Superposition config (JSON object, unknown keys rejected)::

    {
      "params":  {"lambda": 1e-8, "r_C": 1e-5}      # or "gamma", or "target_rate"
      "species": {"N": 1.0, "Na": 23.0},            # name -> daltons
      "amp_a": 0.6, "amp_b": [0.0, 0.8],            # real or [re, im]; optional
      "weight_a": 0.3,                              # or real amplitudes by weight
      "comp_a": [["N", 0, 0, 0], ...] | {"table": "a.txt"},
      "comp_b": ...,
      "medium": {...}                               # instead of comp_a/comp_b
    }

``target_rate`` picks lambda so that the exact decay rate equals it.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from cslbounds.medium import (
    MediumBox,
    generate_displacement_scenario,
    generate_swap_scenario,
)
from cslbounds.model import (
    CollapseParams,
    Configuration,
    InvalidParameterError,
    Species,
    Superposition,
)

TABLE_HEADER = "# species x_cm y_cm z_cm"
PROVENANCE_KEYS = {"run_config", "tool", "version"}


class ConfigError(ValueError):
    """Malformed input, with location when known."""

    def __init__(self, message, path=None, line=None, column=None):
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}:{column if column is not None else 1}"
            loc += ": "
        super().__init__(loc + message)
        self.path, self.line, self.column = path, line, column


def read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(str(e), path) from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, path, e.lineno, e.colno) from e
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object", path, 1, 1)
    return data


def check_keys(d: dict, allowed, where: str, required=()):
    unknown = set(d) - set(allowed) - PROVENANCE_KEYS
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(d)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


def write_table(config: Configuration, comments=()) -> str:
    lines = [TABLE_HEADER]
    lines += [f"# {c}" for c in comments]
    for s, (x, y, z) in zip(config.species, config.positions):
        lines.append(f"{s.name} {float(x)!r} {float(y)!r} {float(z)!r}")
    return "\n".join(lines) + "\n"


def parse_table(text: str, species: dict, path=None) -> Configuration:
    """Parse a particle table; ``species`` maps names to :class:`Species`."""
    seen_header = False
    particles = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.split() == TABLE_HEADER.split():
                seen_header = True
            continue
        if not seen_header:
            raise ConfigError(f"expected header '{TABLE_HEADER}'", path, lineno, 1)
        fields = line.split()
        if len(fields) != 4:
            raise ConfigError(f"expected 4 fields, got {len(fields)}", path, lineno, 1)
        name = fields[0]
        if name not in species:
            raise ConfigError(f"unknown species {name!r}", path, lineno, raw.index(name) + 1)
        xyz = []
        col = raw.index(name) + len(name)
        for f in fields[1:]:
            col = raw.index(f, col)
            try:
                v = float(f)
            except ValueError:
                raise ConfigError(f"not a number: {f!r}", path, lineno, col + 1) from None
            if not np.isfinite(v):
                raise ConfigError(f"non-finite coordinate {f!r}", path, lineno, col + 1)
            xyz.append(v)
            col += len(f)
        particles.append((species[name], xyz))
    if not seen_header:
        raise ConfigError(f"missing header '{TABLE_HEADER}'", path, 1, 1)
    return Configuration.from_particles(particles)


def _amp(v, where):
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2:
        return complex(v[0], v[1])
    raise ConfigError(f"{where}: amplitude must be a number or [re, im]")


def _species_map(d) -> dict:
    if not isinstance(d, dict) or not d:
        raise ConfigError("species: expected a non-empty {name: mass} object")
    try:
        return {k: Species(k, float(v)) for k, v in d.items()}
    except (TypeError, ValueError) as e:
        raise ConfigError(f"species: {e}") from e


def _component(spec, species, base: Path, where: str) -> Configuration:
    if isinstance(spec, dict):
        check_keys(spec, {"table"}, where, required={"table"})
        p = base / spec["table"]
        try:
            text = p.read_text()
        except OSError as e:
            raise ConfigError(str(e), p) from e
        return parse_table(text, species, p)
    if not isinstance(spec, list):
        raise ConfigError(f"{where}: expected a particle list or {{'table': path}}")
    particles = []
    for i, row in enumerate(spec):
        if not (isinstance(row, list) and len(row) == 4):
            raise ConfigError(f"{where}[{i}]: expected [species, x, y, z]")
        if row[0] not in species:
            raise ConfigError(f"{where}[{i}]: unknown species {row[0]!r}")
        particles.append((species[row[0]], [float(v) for v in row[1:]]))
    return Configuration.from_particles(particles)


def species_from_dict(d, where) -> Species:
    check_keys(d, {"name", "mass"}, where, required={"name", "mass"})
    return Species(str(d["name"]), float(d["mass"]))


MEDIUM_KEYS = {"kind", "r_C", "box", "n", "jitter", "offset", "redraw_seed"}
BOX_KEYS = {"side", "spacing", "fluid", "solutes", "min_solute_separation", "seed"}


def build_medium(spec: dict, seed: int | None = None, r_C: float | None = None) -> Superposition:
    """Generate a swap or displacement superposition from a medium spec.

    Lengths in the spec are in units of r_C, taken from ``spec["r_C"]``,
    else the ``r_C`` argument, else 1.
    """
    check_keys(spec, MEDIUM_KEYS, "medium", required={"kind", "box", "n"})
    b = dict(spec["box"])
    check_keys(b, BOX_KEYS, "medium.box", required={"side"})
    kw = {k: b[k] for k in ("side", "spacing", "min_solute_separation") if k in b}
    if "fluid" in b:
        kw["fluid"] = species_from_dict(b["fluid"], "medium.box.fluid")
    if "solutes" in b:
        kw["solutes"] = tuple(species_from_dict(s, "medium.box.solutes") for s in b["solutes"])
    kw["seed"] = int(seed if seed is not None else b.get("seed", 0))
    box = MediumBox(**kw)
    r_C = float(spec.get("r_C", r_C if r_C is not None else 1.0))
    kind = spec["kind"]
    if kind == "swap":
        extra = {"jitter", "offset", "redraw_seed"} & set(spec)
        if extra:
            raise ConfigError(f"medium: keys {sorted(extra)} only apply to kind 'displacement'")
        return generate_swap_scenario(box, int(spec["n"]), r_C)
    if kind == "displacement":
        return generate_displacement_scenario(
            box,
            int(spec["n"]),
            r_C,
            jitter=float(spec.get("jitter", 0.0)),
            offset=tuple(spec.get("offset", (0.0, 0.0, 0.0))),
            redraw_seed=spec.get("redraw_seed"),
        )
    raise ConfigError(f"medium.kind must be 'swap' or 'displacement', got {kind!r}")


SUPERPOSITION_KEYS = {
    "params", "species", "amp_a", "amp_b", "weight_a", "comp_a", "comp_b", "medium",
}


def load_superposition(d: dict, base: Path = Path("."), extra_keys=()):
    """Build ``(Superposition, CollapseParams)`` from a parsed config.

    ``extra_keys`` are tolerated and left for the caller.
    """
    check_keys(d, SUPERPOSITION_KEYS | set(extra_keys), "config", required={"params"})
    if "weight_a" in d and {"amp_a", "amp_b"} & set(d):
        raise ConfigError("config: give either weight_a or amp_a/amp_b")
    if "medium" in d:
        if {"comp_a", "comp_b", "species"} & set(d):
            raise ConfigError("config: give either 'medium' or comp_a/comp_b/species")
        p = d["params"]
        gen = build_medium(d["medium"], r_C=float(p["r_C"]) if isinstance(p, dict) and "r_C" in p else None)
        a, b = gen.comp_a, gen.comp_b
    else:
        check_keys(d, SUPERPOSITION_KEYS | set(extra_keys), "config", required={"species", "comp_a", "comp_b"})
        species = _species_map(d["species"])
        a = _component(d["comp_a"], species, base, "comp_a")
        b = _component(d["comp_b"], species, base, "comp_b")
    try:
        if "weight_a" in d:
            sup = Superposition.with_weight(a, b, float(d["weight_a"]))
        else:
            amp_a = _amp(d.get("amp_a", 2 ** -0.5), "amp_a")
            amp_b = _amp(d.get("amp_b", 2 ** -0.5), "amp_b")
            sup = Superposition(a, b, amp_a, amp_b)
    except InvalidParameterError as e:
        raise ConfigError(str(e)) from e
    params = load_params(d["params"], sup)
    return sup, params


def load_params(p: dict, sup: Superposition | None = None) -> CollapseParams:
    check_keys(p, {"lambda", "gamma", "r_C", "target_rate"}, "params", required={"r_C"})
    given = [k for k in ("lambda", "gamma", "target_rate") if k in p]
    if len(given) != 1:
        raise ConfigError("params: give exactly one of lambda, gamma, target_rate")
    r_C = float(p["r_C"])
    if "lambda" in p:
        return CollapseParams.from_lambda(float(p["lambda"]), r_C)
    if "gamma" in p:
        return CollapseParams(float(p["gamma"]), r_C)
    from cslbounds.rates import gamma_exact

    if sup is None:
        raise ConfigError("params: target_rate needs a superposition")
    unit = gamma_exact(sup, CollapseParams.from_lambda(1.0, r_C)).gamma_rate
    if unit <= 0:
        raise ConfigError("params: target_rate impossible, decay rate is zero")
    return CollapseParams.from_lambda(float(p["target_rate"]) / unit, r_C)


def inline_tables(d: dict, base: Path) -> dict:
    """Copy of a config with ``{"table": path}`` components read inline."""
    out = dict(d)
    if "medium" in d or "species" not in d:
        return out
    species = _species_map(d["species"])
    for key in ("comp_a", "comp_b"):
        if isinstance(d.get(key), dict):
            c = _component(d[key], species, base, key)
            out[key] = [[s.name, *map(float, x)] for s, x in zip(c.species, c.positions)]
    return out


def superposition_to_dict(sup: Superposition, params_spec: dict) -> dict:
    """Inline, fully resolved superposition config."""
    species = {}
    for s in sup.comp_a.species + sup.comp_b.species:
        species[s.name] = s.mass

    def rows(c):
        return [[s.name, *map(float, x)] for s, x in zip(c.species, c.positions)]

    return {
        "params": params_spec,
        "species": species,
        "amp_a": [sup.amp_a.real, sup.amp_a.imag],
        "amp_b": [sup.amp_b.real, sup.amp_b.imag],
        "comp_a": rows(sup.comp_a),
        "comp_b": rows(sup.comp_b),
    }
