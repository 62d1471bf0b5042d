"""File formats.

- Matrix CSV: one row per line, comma-separated decimal entries, no header.
- Distribution CSV: a single comma-separated line.
- Sequence file: one integer state id per line.
- Result JSON: ``{cost, iterations, stationary, coupling}`` where
  ``coupling`` lists the positive entries as ``[i, j, value]`` triplets
  (vertex couplings are sparse); entropic results add
  ``{xi, L_used, T_used, sinkhorn_iters, stopped_by}``.
- HMM JSON: ``{d, m, transitions, emissions}``.
- Coupled-HMM JSON: lifted cost, joint emissions, observation cost, the
  hidden-pair coupling as triplets, and the solver result.

Decimal text uses 17 significant digits so values round-trip exactly, and
all writers emit through a temp-file rename so partial files never land.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .hmm import CoupledHmm, Hmm
from .markov import InvalidInputError
from .otc_exact import OtcSolution

FLOAT_FMT = "%.17g"


def _atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_matrix_csv(M) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return "\n".join(",".join(FLOAT_FMT % x for x in row) for row in M) + "\n"


def write_matrix_csv(path, M) -> None:
    _atomic_write_text(path, format_matrix_csv(M))


def read_matrix_csv(path) -> np.ndarray:
    try:
        M = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except ValueError as exc:
        raise InvalidInputError(f"cannot parse matrix CSV {path}: {exc}") from exc
    return M


def write_distribution_csv(path, w) -> None:
    w = np.asarray(w, dtype=float).reshape(1, -1)
    _atomic_write_text(path, format_matrix_csv(w))


def read_distribution_csv(path) -> np.ndarray:
    return read_matrix_csv(path).reshape(-1)


def write_sequence(path, seq) -> None:
    _atomic_write_text(path, "\n".join(str(int(s)) for s in seq) + "\n")


def read_sequence(path) -> np.ndarray:
    try:
        seq = np.loadtxt(path, dtype=int, ndmin=1)
    except ValueError as exc:
        raise InvalidInputError(f"cannot parse sequence file {path}: {exc}") from exc
    return seq


def coupling_triplets(R, threshold: float = 0.0) -> list[list]:
    """Positive entries of a matrix as row-major [i, j, value] triplets."""
    R = np.asarray(R, dtype=float)
    out = []
    for i, j in zip(*np.nonzero(R > threshold)):
        out.append([int(i), int(j), float(R[i, j])])
    return out


def triplets_to_matrix(triplets, shape) -> np.ndarray:
    M = np.zeros(shape)
    for i, j, v in triplets:
        M[int(i), int(j)] = float(v)
    return M


def solution_to_dict(sol: OtcSolution) -> dict:
    doc = {
        "cost": float(sol.cost),
        "iterations": int(sol.iterations),
        "stationary": [float(x) for x in sol.stationary],
        "coupling": coupling_triplets(sol.coupling),
    }
    for key in ("xi", "L_used", "T_used", "sinkhorn_iters", "stopped_by"):
        if key in sol.extras:
            doc[key] = sol.extras[key]
    return doc


def write_solution_json(path, sol: OtcSolution) -> None:
    _atomic_write_text(path, json.dumps(solution_to_dict(sol), indent=2) + "\n")


def write_hmm_json(path, H: Hmm) -> None:
    doc = {
        "d": H.n_states,
        "m": H.n_observations,
        "transitions": [[float(x) for x in row] for row in H.transitions],
        "emissions": [[float(x) for x in row] for row in H.emissions],
    }
    _atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


def read_hmm_json(path) -> Hmm:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot parse HMM JSON {path}: {exc}") from exc
    for key in ("transitions", "emissions"):
        if key not in doc:
            raise InvalidInputError(f"HMM JSON {path} lacks field {key!r}")
    return Hmm(np.asarray(doc["transitions"], dtype=float), np.asarray(doc["emissions"], dtype=float))


def write_coupled_json(path, coupled: CoupledHmm, solution: OtcSolution, obs_cost) -> None:
    da, db, ma, mb = coupled.joint_emissions.shape
    doc = {
        "d": da,
        "m_a": ma,
        "m_b": mb,
        "obs_cost": [[float(x) for x in row] for row in np.asarray(obs_cost, dtype=float)],
        "lifted_cost": [[float(x) for x in row] for row in coupled.lifted_cost],
        "joint_emissions": [
            [[float(x) for x in row] for row in coupled.joint_emissions[x, y]]
            for x in range(da)
            for y in range(db)
        ],
        "coupling": coupling_triplets(coupled.coupling),
        "solution": solution_to_dict(solution),
    }
    _atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


def read_coupled_json(path) -> tuple[CoupledHmm, np.ndarray]:
    """Load a coupled HMM plus its observation cost matrix."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot parse coupled JSON {path}: {exc}") from exc
    d = int(doc["d"])
    ma, mb = int(doc["m_a"]), int(doc["m_b"])
    joint = np.array(doc["joint_emissions"], dtype=float).reshape(d, d, ma, mb)
    coupling = triplets_to_matrix(doc["coupling"], (d * d, d * d))
    lifted = np.asarray(doc["lifted_cost"], dtype=float)
    obs_cost = np.asarray(doc["obs_cost"], dtype=float)
    return CoupledHmm(coupling, joint, lifted), obs_cost


def write_samples_csv(path, sample, obs_cost) -> None:
    """Trajectory CSV with columns step,hidden_x,hidden_y,obs_u,obs_v,pair_cost."""
    obs_cost = np.asarray(obs_cost, dtype=float)
    lines = ["step,hidden_x,hidden_y,obs_u,obs_v,pair_cost"]
    for t in range(len(sample.hidden_x)):
        u, v = sample.obs_u[t], sample.obs_v[t]
        lines.append(
            f"{t},{sample.hidden_x[t]},{sample.hidden_y[t]},{u},{v},"
            + FLOAT_FMT % obs_cost[u, v]
        )
    _atomic_write_text(path, "\n".join(lines) + "\n")
