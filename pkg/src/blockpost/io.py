"""File formats: model-spec JSON, observation CSV, configuration JSON,
and result CSV writing with a JSON sidecar.

Model spec file (JSON object):

    {
      "variant": {"kind": "lbm"} |
                 {"kind": "sbm", "directed": bool, "self_loops": bool},
      "Q": int, "L": int,
      "alpha": [..Q..], "beta": [..L..],
      "family": {"kind": "bernoulli", "a": 0.1} | ... ,
      "pi": row-major nested rows; each entry is a number, a list of
            "levels" probabilities (multinomial), or a [sparsity, inner]
            pair (zero-inflated),
      "xi": optional sparsity scale in (0, 1]
    }

Observation matrix file: first line ``# index_set=<full|no_diag|upper>``
followed by ``i,j,value`` triples, 1-based indices, row-major over the
index set; real values carry 17 significant digits.

Configuration file (JSON): ``{"z": [...], "w": [...]}`` with 1-based
labels; ``w`` may be omitted in the graph case.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import SpecError
from .families import family_from_dict
from .model import (
    Configuration,
    ConnectivityMatrix,
    ModelSpec,
    ModelVariant,
    ObservationMatrix,
    index_mask,
)

__all__ = [
    "spec_to_dict",
    "spec_from_dict",
    "load_spec",
    "save_spec",
    "observations_text",
    "write_observations",
    "read_observations",
    "write_configuration",
    "read_configuration",
    "spec_content_hash",
    "format_real",
]


def format_real(v: float) -> str:
    """17 significant digits, locale-independent; integers print bare."""
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return format(v, ".17g")


def spec_to_dict(spec: ModelSpec) -> dict:
    fam = spec.family
    vals = spec.pi.values
    if fam.param_dim == 1:
        pi_rows = [[float(v) for v in row] for row in vals]
    else:
        pi_rows = [[[float(c) for c in cell] for cell in row] for row in vals]
    out = {
        "variant": spec.variant.to_dict(),
        "Q": spec.Q,
        "L": spec.L,
        "alpha": [float(a) for a in spec.alpha],
        "beta": [float(b) for b in spec.beta],
        "family": fam.to_dict(),
        "pi": pi_rows,
    }
    if spec.pi.scale is not None:
        out["xi"] = spec.pi.scale
    return out


def spec_from_dict(d: dict) -> ModelSpec:
    for key in ("variant", "Q", "L", "alpha", "beta", "family", "pi"):
        if key not in d:
            raise SpecError(f"model spec file is missing the {key!r} key")
    variant = ModelVariant.from_dict(d["variant"])
    family = family_from_dict(d["family"])
    pi_vals = np.asarray(d["pi"], dtype=float)
    Q, L = int(d["Q"]), int(d["L"])
    expected = (Q, L) if family.param_dim == 1 else (Q, L, family.param_dim)
    if pi_vals.shape != expected:
        raise SpecError(f"pi has shape {pi_vals.shape}, expected {expected}")
    pi = ConnectivityMatrix(pi_vals, family, scale=d.get("xi"))
    return ModelSpec(variant, d["alpha"], d["beta"], pi)


def load_spec(path) -> ModelSpec:
    with open(path) as fh:
        return spec_from_dict(json.load(fh))


def save_spec(spec: ModelSpec, path) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2) + "\n")


def spec_content_hash(spec: ModelSpec) -> str:
    """Content hash of the canonical JSON form of a spec."""
    canon = json.dumps(spec_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def observations_text(x: ObservationMatrix) -> str:
    lines = [f"# index_set={x.variant.index_set_name}"]
    n, m = x.n, x.m
    for i in range(n):
        for j in range(m):
            if x.mask[i, j]:
                lines.append(f"{i + 1},{j + 1},{format_real(float(x.values[i, j]))}")
    return "\n".join(lines) + "\n"


def write_observations(x: ObservationMatrix, path) -> None:
    Path(path).write_text(observations_text(x))


def read_observations(path, variant: ModelVariant, n: int, m: int) -> ObservationMatrix:
    text = Path(path).read_text().strip().splitlines()
    if not text or not text[0].startswith("# index_set="):
        raise SpecError("observation file must start with '# index_set=<name>'")
    declared = text[0].split("=", 1)[1].strip()
    if declared != variant.index_set_name:
        raise SpecError(
            f"observation file index set {declared!r} does not match the "
            f"variant's {variant.index_set_name!r}"
        )
    mask = index_mask(variant, n, m)
    values = np.zeros((n, m), dtype=float)
    seen = np.zeros((n, m), dtype=bool)
    for line in text[1:]:
        line = line.strip()
        if not line or line.lower() == "i,j,value":
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise SpecError(f"malformed observation row: {line!r}")
        i, j = int(parts[0]) - 1, int(parts[1]) - 1
        if not (0 <= i < n and 0 <= j < m) or not mask[i, j]:
            raise SpecError(f"cell ({i + 1}, {j + 1}) is outside the index set")
        if seen[i, j]:
            raise SpecError(f"duplicate cell ({i + 1}, {j + 1})")
        values[i, j] = float(parts[2])
        seen[i, j] = True
    if not bool(np.all(seen[mask])):
        raise SpecError("observation file does not cover the whole index set")
    return ObservationMatrix(values, variant)


def write_configuration(config: Configuration, path, sbm: bool = False) -> None:
    z, w = config.one_based()
    payload: dict = {"z": z}
    if not (sbm or config.shared):
        payload["w"] = w
    Path(path).write_text(json.dumps(payload) + "\n")


def read_configuration(path, sbm: bool = False) -> Configuration:
    with open(path) as fh:
        payload = json.load(fh)
    if "z" not in payload:
        raise SpecError("configuration file must carry a 'z' list")
    if sbm or "w" not in payload:
        return Configuration.from_one_based(payload["z"])
    return Configuration.from_one_based(payload["z"], payload["w"])


def write_csv(path, header: list[str], rows: list[list]) -> str:
    """Write rows to CSV with shortest round-trip float rendering;
    returns the text that was written (for byte-identity checks)."""

    def cell(v) -> str:
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return repr(v)
        return str(v)

    text = ",".join(header) + "\n"
    text += "".join(",".join(cell(v) for v in row) + "\n" for row in rows)
    if path is not None:
        Path(path).write_text(text)
    return text


def write_sidecar(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
