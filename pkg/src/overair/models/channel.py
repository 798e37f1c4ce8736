from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator

from .topology import PhysicalTopology

_DB_PATTERN = re.compile(r"^\s*(-?\d+(?:\.\d+)?(?:[eE]-?\d+)?)\s*dB\s*$")


def parse_power(value: float | int | str) -> float:
    """Linear power from a number or a decibel string such as ``"-60dB"``."""
    if isinstance(value, str):
        match = _DB_PATTERN.match(value)
        if match is None:
            return float(value)
        return float(10.0 ** (float(match.group(1)) / 10.0))
    return float(value)


def _per_agent(value: Any, n: int, name: str) -> tuple[float, ...]:
    if isinstance(value, (list, tuple)):
        if len(value) != n:
            raise ValueError(f"{name}: expected {n} entries, got {len(value)}")
        return tuple(parse_power(v) for v in value)
    return tuple(parse_power(value) for _ in range(n))


def _fading_matrix(value: Any, n: int) -> tuple[tuple[float, ...], ...]:
    if isinstance(value, dict):
        matrix = np.full((n, n), float(value.get("default", 1.0)))
        for override in value.get("overrides", []):
            i, j, lam = int(override[0]), int(override[1]), float(override[2])
            matrix[i, j] = lam
            matrix[j, i] = lam
    elif isinstance(value, (list, tuple)):
        matrix = np.asarray(value, dtype=float)
        if matrix.shape != (n, n):
            raise ValueError(f"lambda: expected shape ({n}, {n}), got {matrix.shape}")
    else:
        matrix = np.full((n, n), float(value))
    np.fill_diagonal(matrix, 0.0)
    return tuple(tuple(float(v) for v in row) for row in matrix)


class ChannelModel(BaseModel):
    """Fading variances, noise powers, transmit coefficient and slot probabilities.

    JSON accepts scalars (broadcast to every agent or pair), per-agent lists, noise powers
    in dB (``"-60dB"``) and ``lambda`` as a dense matrix or ``{"default", "overrides"}``.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    n_agents: PositiveInt
    rho: PositiveFloat = 1.0
    p: tuple[float, ...]
    sigma2: tuple[float, ...]
    fading: tuple[tuple[float, ...], ...] = Field(alias="lambda")

    @model_validator(mode="before")
    @classmethod
    def _expand(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        if "n_agents" not in data:
            raise ValueError("n_agents is required (or declare it on the topology)")
        n = int(data["n_agents"])
        data["p"] = _per_agent(data.get("p", 0.5), n, "p")
        data["sigma2"] = _per_agent(data.get("sigma2", 0.0), n, "sigma2")
        raw_fading = data.pop("lambda", data.pop("fading", 1.0))
        data["lambda"] = _fading_matrix(raw_fading, n)
        return data

    @model_validator(mode="after")
    def _check(self) -> ChannelModel:
        if any(not 0.0 < p < 1.0 for p in self.p):
            raise ValueError("every slot probability p_i must lie strictly inside (0, 1)")
        if any(s < 0.0 for s in self.sigma2):
            raise ValueError("noise powers must be nonnegative")
        lam = self.lambda_matrix
        if np.any(lam < 0.0):
            raise ValueError("fading variances must be nonnegative")
        if not np.allclose(lam, lam.T, rtol=0.0, atol=1e-12):
            raise ValueError("fading variances must be symmetric (lambda_ij == lambda_ji)")
        return self

    @classmethod
    def uniform(
        cls,
        n_agents: int,
        *,
        rho: float = 1.0,
        p: float = 0.5,
        sigma2: float | str = 0.0,
        fading: float = 1.0,
    ) -> ChannelModel:
        return cls.model_validate(
            {"n_agents": n_agents, "rho": rho, "p": p, "sigma2": sigma2, "lambda": fading}
        )

    def _key(self) -> tuple[Any, ...]:
        return (self.n_agents, self.rho, self.p, self.sigma2, self.fading)

    # cached arrays live in __dict__ next to the fields; compare the fields only
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChannelModel):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    @cached_property
    def lambda_matrix(self) -> np.ndarray:
        matrix = np.asarray(self.fading, dtype=float)
        matrix.setflags(write=False)
        return matrix

    @cached_property
    def p_vector(self) -> np.ndarray:
        return np.asarray(self.p, dtype=float)

    @cached_property
    def sigma2_vector(self) -> np.ndarray:
        return np.asarray(self.sigma2, dtype=float)

    @cached_property
    def pair_probability(self) -> np.ndarray:
        """E[Gamma_ij] = p_i(1-p_j) + p_j(1-p_i), zero on the diagonal."""
        p = self.p_vector
        prob = np.outer(p, 1.0 - p) + np.outer(1.0 - p, p)
        np.fill_diagonal(prob, 0.0)
        return prob


@dataclass(frozen=True)
class RoundDraw:
    """One step's randomness. ``h`` is populated only on active ordered pairs."""

    gamma: np.ndarray
    h: np.ndarray
    noise: np.ndarray
    active_mask: np.ndarray
    failed: np.ndarray

    @property
    def n_agents(self) -> int:
        return int(self.gamma.shape[0])

    @property
    def active(self) -> PhysicalTopology:
        return PhysicalTopology.from_adjacency(self.active_mask)

    @property
    def pairing(self) -> np.ndarray:
        """Gamma_ij(k), masked to the active topology."""
        g = self.gamma.astype(float)
        pairing = np.outer(g, 1.0 - g) + np.outer(1.0 - g, g)
        return pairing * self.active_mask


@dataclass(frozen=True)
class RoundBatch:
    """A block of independent rounds on a fixed topology, leading axis = round."""

    gamma: np.ndarray
    h: np.ndarray
    noise: np.ndarray
    active_mask: np.ndarray

    @property
    def size(self) -> int:
        return int(self.gamma.shape[0])

    @property
    def pairing(self) -> np.ndarray:
        g = self.gamma.astype(float)
        pairing = g[:, :, None] * (1.0 - g[:, None, :]) + (1.0 - g[:, :, None]) * g[:, None, :]
        return pairing * self.active_mask[None, :, :]


@dataclass(frozen=True)
class SignalBreakdown:
    power: float
    linear_term: float
    noise_sq: float
    cross_fading: float
    cross_noise: float

    def total(self) -> float:
        return self.linear_term + self.noise_sq + self.cross_fading + self.cross_noise
