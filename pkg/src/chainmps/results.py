"""Time-series results: an in-memory store with a portable on-disk layout.

A run directory contains ``manifest.json`` (label, resolved configuration,
diagnostics, series shapes) and one CSV per series under ``series/``; the
first CSV column is always time and complex series split into ``.re``/``.im``
column pairs.  Numbers are written with 17 significant digits so a round trip
through disk is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["ResultsStore", "export"]

_FMT = "%.17g"


def _column_labels(name: str, shape: tuple[int, ...]) -> list[str]:
    if len(shape) == 1:
        return [name]
    if len(shape) == 2:
        return [f"{name}[{i}]" for i in range(shape[1])]
    if len(shape) == 3:
        return [f"{name}[{i},{j}]" for i in range(shape[1]) for j in range(shape[2])]
    raise ValueError(f"series {name!r}: rank {len(shape)} series are not supported")


@dataclass
class ResultsStore:
    """One run's label, resolved configuration and measured time series."""

    label: str
    config: dict
    times: np.ndarray
    series: dict[str, np.ndarray]
    norms: np.ndarray
    energies: np.ndarray
    bond_dims: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size == 0:
            raise ValueError("times must be a nonempty 1-d array")
        if self.times[0] != 0.0:
            raise ValueError("time series must start at t = 0")
        if self.times.size > 1:
            gaps = np.diff(self.times)
            if np.abs(gaps - gaps[0]).max() > 1e-9 * max(gaps[0], 1e-300):
                raise ValueError("time axis must be uniformly spaced")
        for name, values in self.series.items():
            if np.asarray(values).shape[0] != self.times.size:
                raise ValueError(f"series {name!r} does not share the time axis")
        for name in ("norms", "energies", "bond_dims"):
            if np.asarray(getattr(self, name)).shape[0] != self.times.size:
                raise ValueError(f"{name} does not share the time axis")

    @property
    def names(self) -> list[str]:
        return sorted(self.series)

    # ------------------------------------------------------------- storage

    def save(self, directory) -> Path:
        directory = Path(directory)
        series_dir = directory / "series"
        series_dir.mkdir(parents=True, exist_ok=True)
        shapes = {}
        complexes = {}
        everything = dict(self.series)
        everything["norm"] = self.norms
        everything["energy"] = self.energies
        everything["bond_dims"] = self.bond_dims
        for name, values in everything.items():
            values = np.asarray(values)
            shapes[name] = list(values.shape)
            complexes[name] = bool(np.iscomplexobj(values))
            _write_series_csv(series_dir / f"{name}.csv", name, self.times, values)
        manifest = {
            "label": self.label,
            "config": self.config,
            "info": self.info,
            "series_shapes": shapes,
            "series_complex": complexes,
            "observable_names": self.names,
        }
        with open(directory / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        return directory

    @classmethod
    def load(cls, directory) -> "ResultsStore":
        directory = Path(directory)
        with open(directory / "manifest.json") as fh:
            manifest = json.load(fh)
        series: dict[str, np.ndarray] = {}
        times = None
        for name, shape in manifest["series_shapes"].items():
            path = directory / "series" / f"{name}.csv"
            times, values = _read_series_csv(
                path, tuple(shape), manifest["series_complex"][name]
            )
            series[name] = values
        if times is None:
            raise ValueError(f"{directory}: no series found")
        return cls(
            label=manifest["label"],
            config=manifest["config"],
            times=times,
            series={
                k: v
                for k, v in series.items()
                if k not in ("norm", "energy", "bond_dims")
            },
            norms=series["norm"],
            energies=series["energy"],
            bond_dims=series["bond_dims"],
            info=manifest.get("info", {}),
        )


def _write_series_csv(path, name: str, times: np.ndarray, values: np.ndarray) -> None:
    values = np.asarray(values)
    flat = values.reshape(values.shape[0], -1)
    labels = _column_labels(name, values.shape)
    if np.iscomplexobj(flat):
        header = ["time"]
        cols = [times]
        for j, lab in enumerate(labels):
            header += [f"{lab}.re", f"{lab}.im"]
            cols += [flat[:, j].real, flat[:, j].imag]
    else:
        header = ["time"] + labels
        cols = [times] + [flat[:, j] for j in range(flat.shape[1])]
    table = np.column_stack(cols)
    np.savetxt(path, table, fmt=_FMT, delimiter=",", header=",".join(header), comments="")


def _read_series_csv(path, shape: tuple[int, ...], is_complex: bool):
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    times = table[:, 0]
    data = table[:, 1:]
    if is_complex:
        values = data[:, 0::2] + 1j * data[:, 1::2]
    else:
        values = data
    return times, values.reshape(shape)


def export(results_path, what: str = "all", outdir=None) -> list[Path]:
    """Re-emit stored series as plot-ready CSV files.

    ``what`` selects one observable by name or "all"; unknown names raise
    with the list of available ones.  Files land in ``outdir`` (default
    ``<results_path>/export``).
    """
    store = ResultsStore.load(results_path)
    available = store.names + ["norm", "energy", "bond_dims"]
    if what == "all":
        selected = available
    elif what in available:
        selected = [what]
    else:
        raise ValueError(
            f"unknown observable {what!r}; available: {', '.join(available)}"
        )
    outdir = Path(outdir) if outdir is not None else Path(results_path) / "export"
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    lookup = dict(store.series, norm=store.norms, energy=store.energies, bond_dims=store.bond_dims)
    for name in selected:
        path = outdir / f"{name}.csv"
        _write_series_csv(path, name, store.times, np.asarray(lookup[name]))
        written.append(path)
    return written
