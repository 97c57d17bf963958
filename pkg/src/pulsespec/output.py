"""Deterministic CSV, JSON and SVG writers (floats at 17 significant digits)."""
from __future__ import annotations

import math
import os

import numpy as np

EVANS_COLUMNS = ("re_lambda", "im_lambda", "re_gamma", "im_gamma", "re_value", "im_value", "ledger", "kind")


def fmt(x):
    """Float at 17 significant digits; non-finite values as nan/inf."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(c if isinstance(c, str) else fmt(c) for c in row) + "\n")


def write_evans_csv(path, values):
    rows = [(v.lam.real, v.lam.imag, v.gamma.real, v.gamma.imag, v.value.real, v.value.imag,
             v.scaling_ledger, v.kind) for v in values]
    write_csv(path, EVANS_COLUMNS, rows)


def _json(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return fmt(x) if math.isfinite(x) else '"' + fmt(x) + '"'
    if isinstance(obj, (complex, np.complexfloating)):
        return _json({"re": complex(obj).real, "im": complex(obj).imag}, indent, level)
    if isinstance(obj, str):
        import json
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _json(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json(str(k), indent, level + 1)}: {_json(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _json(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "__dataclass_fields__"):
        return _json({k: getattr(obj, k) for k in obj.__dataclass_fields__ if not k.startswith("_")}, indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    """JSON text with floats at 17 significant digits and complex as {re, im}."""
    return _json(obj, indent, 0) + "\n"


def write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps(obj))


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "pulsespec"
    return plt


def plot_spectrum_svg(path, curves=(), roots=(), title=""):
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 4))
    for c in curves:
        ax.plot(np.real(c.lam), np.imag(c.lam), lw=1)
    if roots:
        z = np.array([r for r, _ in roots])
        ax.plot(z.real, z.imag, "o", ms=4)
    ax.set_xlabel("Re lambda")
    ax.set_ylabel("Im lambda")
    ax.set_title(title)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_bands_svg(path, lam, t, bands=(), title=""):
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 4))
    t = np.clip(np.asarray(t, float), -10, 10)
    ax.plot(lam, t, lw=1)
    ax.axhline(2, ls="--", lw=0.5)
    ax.axhline(-2, ls="--", lw=0.5)
    for a, b in bands:
        ax.axvspan(a, b, alpha=0.2)
    ax.set_xlabel("lambda")
    ax.set_ylabel("t(lambda)")
    ax.set_title(title)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
