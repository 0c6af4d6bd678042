#!/usr/bin/env python3
"""Regenerate the committed benchmark fixtures in fixtures/.

Each benchmark is a synthetic dataset drawn from the standard published
network structure (asia, sachs, child, alarm).  Mechanisms and seeds are
frozen so the CSVs are reproducible byte-for-byte; the .edges files carry
the generating structure, which doubles as the evaluation ground truth.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "fixtures"

# ---------------------------------------------------------------- asia ----

ASIA_NAMES = ["asia", "tub", "smoke", "bronc", "lung", "either", "xray",
              "dysp"]
ASIA_EDGES = [
    ("asia", "tub"), ("smoke", "lung"), ("smoke", "bronc"),
    ("tub", "either"), ("lung", "either"), ("either", "xray"),
    ("either", "dysp"), ("bronc", "dysp"),
]


def gen_asia(seed: int = 0, n: int = 2000) -> np.ndarray:
    rng = np.random.default_rng(seed)
    asia = rng.normal(size=n)
    tub = 1.0 * asia + 0.8 * rng.uniform(-1.5, 1.5, size=n)
    smoke = rng.normal(size=n)
    lung = 0.8 * smoke + 0.6 * rng.normal(size=n)
    bronc = 0.7 * smoke + 0.7 * rng.normal(size=n)
    either = 0.02 * tub + 0.02 * lung + rng.uniform(-1.5, 1.5, size=n)
    xray = 0.9 * either + 0.7 * rng.uniform(-1, 1, size=n)
    dysp = 0.9 * either + 0.28 * bronc + 0.5 * rng.normal(size=n)
    return np.column_stack([asia, tub, smoke, bronc, lung, either, xray,
                            dysp])


# --------------------------------------------------------------- sachs ----

SACHS_NAMES = ["raf", "mek", "plcg", "pip2", "pip3", "erk", "akt", "pka",
               "pkc", "p38", "jnk"]
SACHS_EDGES = [
    ("pka", "raf"), ("pkc", "raf"),
    ("raf", "mek"), ("pka", "mek"), ("pkc", "mek"),
    ("mek", "erk"), ("pka", "erk"),
    ("erk", "akt"), ("pka", "akt"),
    ("pkc", "pka"),
    ("pka", "p38"), ("pkc", "p38"),
    ("pka", "jnk"), ("pkc", "jnk"),
    ("plcg", "pip3"),
    ("plcg", "pip2"), ("pip3", "pip2"),
]

# pkc -> pka noise profile: sharp Gaussian core plus a broad uniform slab
_CORE, _SLAB, _W, _RANGE = 0.10, 1.8, 0.20, 0.8


def _spiky_sample(rng: np.random.Generator, n: int) -> np.ndarray:
    spike = rng.normal(0, _CORE, size=n)
    broad = rng.uniform(-_SLAB, _SLAB, size=n)
    return np.where(rng.uniform(size=n) < _W, broad, spike)


def _spiky_pdf(t: np.ndarray) -> np.ndarray:
    gauss = np.exp(-0.5 * (t / _CORE) ** 2) / (_CORE * np.sqrt(2 * np.pi))
    slab = np.where(np.abs(t) <= _SLAB, 1.0 / (2 * _SLAB), 0.0)
    return (1 - _W) * gauss + _W * slab


def gen_sachs(seed: int = 1, n: int = 2000) -> np.ndarray:
    rng = np.random.default_rng(seed)
    U = lambda s=1.5: rng.uniform(-s, s, size=n)
    N = lambda: rng.normal(size=n)

    # pkc -> pka: the joint satisfies pkc = pka + e with spiky e independent
    # of pka, but pka is generated FROM pkc through the conditional quantile,
    # so the causal direction is pkc -> pka while the anti-causal linear fit
    # looks like a textbook additive-noise model.
    pkc = rng.uniform(-_RANGE, _RANGE, size=n) + _spiky_sample(rng, n)
    grid = np.linspace(-_RANGE, _RANGE, 801)
    dens = _spiky_pdf(pkc[:, None] - grid[None, :])
    cdf = np.cumsum(dens, axis=1)
    cdf /= cdf[:, -1:]
    uq = rng.uniform(size=n)
    pka = np.array([np.interp(uq[k], cdf[k], grid) for k in range(n)])

    plcg = N()
    pip3 = 0.9 * plcg + 0.8 * U()
    pip2 = 1.0 * pip3 + 0.5 * pip3 * N() + 0.3 * plcg
    raf = 0.6 * pka + 0.6 * pkc + 0.8 * U()
    mek = 0.7 * raf + 0.4 * pka + 0.4 * pkc + 0.7 * U()
    erk = (0.35 * mek + 0.8 * np.tanh(1.5 * mek) + 0.45 * pka
           + (0.2 + 0.7 * np.abs(mek)) * N())
    akt = (0.35 * erk + 0.8 * np.tanh(1.5 * erk) + 0.4 * pka
           + (0.2 + 0.6 * np.abs(erk)) * N())
    p38 = np.exp(0.75 * pka + 0.45 * N()) + 0.3 * pkc
    jnk = (0.35 * pkc + 0.8 * np.tanh(1.5 * pkc) + 0.4 * pka
           + (0.2 + 0.7 * np.abs(pkc)) * N())
    return np.column_stack([raf, mek, plcg, pip2, pip3, erk, akt, pka, pkc,
                            p38, jnk])


# --------------------------------------------------------------- child ----

CHILD_EDGES = [
    ("BirthAsphyxia", "Disease"),
    ("Disease", "Age"), ("Disease", "LVH"), ("Disease", "DuctFlow"),
    ("Disease", "CardiacMixing"), ("Disease", "LungParench"),
    ("Disease", "LungFlow"), ("Disease", "Sick"),
    ("LVH", "LVHreport"),
    ("DuctFlow", "HypDistrib"), ("CardiacMixing", "HypDistrib"),
    ("CardiacMixing", "HypoxiaInO2"), ("LungParench", "HypoxiaInO2"),
    ("LungParench", "CO2"), ("LungParench", "ChestXray"),
    ("LungFlow", "ChestXray"),
    ("LungParench", "Grunting"), ("Sick", "Grunting"),
    ("HypDistrib", "LowerBodyO2"), ("HypoxiaInO2", "LowerBodyO2"),
    ("HypoxiaInO2", "RUQO2"),
    ("CO2", "CO2Report"), ("ChestXray", "XrayReport"),
    ("Grunting", "GruntingReport"), ("Sick", "Age"),
]
CHILD_NAMES = [
    "BirthAsphyxia", "Disease", "Age", "LVH", "DuctFlow", "CardiacMixing",
    "LungParench", "LungFlow", "Sick", "LVHreport", "HypDistrib",
    "HypoxiaInO2", "CO2", "ChestXray", "Grunting", "LowerBodyO2", "RUQO2",
    "CO2Report", "XrayReport", "GruntingReport",
]

# --------------------------------------------------------------- alarm ----

ALARM_EDGES = [
    ("HYPOVOLEMIA", "LVEDVOLUME"), ("LVFAILURE", "LVEDVOLUME"),
    ("LVEDVOLUME", "CVP"), ("LVEDVOLUME", "PCWP"),
    ("LVFAILURE", "HISTORY"),
    ("HYPOVOLEMIA", "STROKEVOLUME"), ("LVFAILURE", "STROKEVOLUME"),
    ("STROKEVOLUME", "CO"), ("HR", "CO"),
    ("CO", "BP"), ("TPR", "BP"),
    ("ANAPHYLAXIS", "TPR"),
    ("INSUFFANESTH", "CATECHOL"), ("TPR", "CATECHOL"),
    ("SAO2", "CATECHOL"), ("ARTCO2", "CATECHOL"),
    ("CATECHOL", "HR"),
    ("ERRLOWOUTPUT", "HRBP"), ("HR", "HRBP"),
    ("ERRCAUTER", "HREKG"), ("HR", "HREKG"),
    ("ERRCAUTER", "HRSAT"), ("HR", "HRSAT"),
    ("PULMEMBOLUS", "PAP"),
    ("PULMEMBOLUS", "SHUNT"), ("INTUBATION", "SHUNT"),
    ("SHUNT", "SAO2"), ("PVSAT", "SAO2"),
    ("VENTALV", "PVSAT"), ("FIO2", "PVSAT"),
    ("VENTALV", "ARTCO2"),
    ("ARTCO2", "EXPCO2"), ("VENTLUNG", "EXPCO2"),
    ("VENTLUNG", "VENTALV"), ("INTUBATION", "VENTALV"),
    ("VENTLUNG", "MINVOL"), ("INTUBATION", "MINVOL"),
    ("VENTTUBE", "VENTLUNG"), ("KINKEDTUBE", "VENTLUNG"),
    ("INTUBATION", "VENTLUNG"),
    ("KINKEDTUBE", "PRESS"), ("INTUBATION", "PRESS"),
    ("VENTTUBE", "PRESS"),
    ("VENTMACH", "VENTTUBE"), ("DISCONNECT", "VENTTUBE"),
    ("MINVOLSET", "VENTMACH"),
]
ALARM_NAMES = [
    "MINVOLSET", "VENTMACH", "DISCONNECT", "VENTTUBE", "KINKEDTUBE",
    "INTUBATION", "VENTLUNG", "VENTALV", "FIO2", "PVSAT", "ARTCO2",
    "EXPCO2", "MINVOL", "PRESS", "PULMEMBOLUS", "PAP", "SHUNT", "SAO2",
    "INSUFFANESTH", "ANAPHYLAXIS", "TPR", "CATECHOL", "HR", "ERRLOWOUTPUT",
    "ERRCAUTER", "HRBP", "HREKG", "HRSAT", "HYPOVOLEMIA", "LVFAILURE",
    "LVEDVOLUME", "CVP", "PCWP", "HISTORY", "STROKEVOLUME", "CO", "BP",
]


def gen_linear_anm(names: list[str], edges: list[tuple[str, str]],
                   seed: int, n: int = 2000) -> np.ndarray:
    """Linear ANM with uniform noise, filled in topological order."""
    rng = np.random.default_rng(seed)
    parents = {name: [p for p, c in edges if c == name] for name in names}
    values: dict[str, np.ndarray] = {}
    remaining = list(names)
    while remaining:
        progressed = False
        for name in list(remaining):
            if all(p in values for p in parents[name]):
                col = 0.8 * rng.uniform(-1.5, 1.5, size=n)
                for p in parents[name]:
                    col = col + 0.7 * values[p]
                values[name] = col
                remaining.remove(name)
                progressed = True
        if not progressed:
            raise ValueError("edge list is cyclic")
    return np.column_stack([values[name] for name in names])


# ---------------------------------------------------------------- main ----

def write_csv(path: Path, names: list[str], data: np.ndarray) -> None:
    with path.open("w") as fh:
        fh.write(",".join(names) + "\n")
        for row in data:
            fh.write(",".join(f"{v:.10g}" for v in row) + "\n")


def write_edges(path: Path, edges: list[tuple[str, str]]) -> None:
    with path.open("w") as fh:
        fh.write("# parent,child\n")
        for a, b in edges:
            fh.write(f"{a},{b}\n")


def non_leaves(names: list[str], edges: list[tuple[str, str]]) -> int:
    return len({p for p, _ in edges})


def main() -> None:
    OUT.mkdir(exist_ok=True)
    manifest = []
    benchmarks = [
        ("asia", ASIA_NAMES, ASIA_EDGES, gen_asia()),
        ("sachs", SACHS_NAMES, SACHS_EDGES, gen_sachs()),
        ("child", CHILD_NAMES, CHILD_EDGES,
         gen_linear_anm(CHILD_NAMES, CHILD_EDGES, seed=7)),
        ("alarm", ALARM_NAMES, ALARM_EDGES,
         gen_linear_anm(ALARM_NAMES, ALARM_EDGES, seed=11)),
    ]
    for name, names, edges, data in benchmarks:
        assert data.shape == (2000, len(names)), name
        write_csv(OUT / f"{name}.csv", names, data)
        write_edges(OUT / f"{name}.edges", edges)
        manifest.append({
            "name": name,
            "csv": f"{name}.csv",
            "gt": f"{name}.edges",
            "V": len(names),
            "gt_edges": len(edges),
            "K": non_leaves(names, edges),
        })
        print(f"{name}: V={len(names)} edges={len(edges)} "
              f"K={non_leaves(names, edges)}")
    with (OUT / "manifest.json").open("w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"wrote {OUT}/manifest.json")


if __name__ == "__main__":
    main()
