"""PNG figures written next to the delimited report files."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {"figure.figsize": (5.0, 3.4), "axes.grid": True, "grid.alpha": 0.3,
         "font.size": 9, "savefig.dpi": 130}


def _cascade(ax, s):
    ax.semilogy(s["scale"], s["lhs"], "o-", label="sum at scale")
    ax.semilogy(s["scale"], s["rhs"], "s--", label="d x sum one scale up")
    ax.set_xlabel("scale")
    ax.legend()


def _jn(ax, s):
    fr = [max(f, 1e-12) for f in s["fraction"]]
    ax.semilogy(s["mu"], fr, "o-")
    ax.set_xlabel("mu")
    ax.set_ylabel("level-set fraction")


def _weak(ax, s):
    ax.loglog(s["lambda"], [max(m, 1e-12) for m in s["measure"]], "o-")
    ax.set_xlabel("lambda")
    ax.set_ylabel("measure")


def _quadratic(ax, s):
    ax.step(s["k"], s["im"], where="post", lw=0.6)
    ax.set_xlabel("k")
    ax.set_ylabel("Im Q")


def _continuous(ax, s):
    ax.semilogy(s["k"], [max(v, 1e-18) for v in s["loga"]], lw=0.8)
    ax.set_xlabel("k")
    ax.set_ylabel("log|a|")


DRAW = {"cascade": _cascade, "jn": _jn, "weak": _weak, "quadratic": _quadratic,
        "continuous": _continuous}


def render(report, out: Path) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    with plt.rc_context(STYLE):
        for name, data in report.series.items():
            fig, ax = plt.subplots()
            DRAW[name](ax, data)
            ax.set_title(f"{report.config.experiment}: {name}")
            fig.tight_layout()
            p = out / f"{report.config.experiment}-{name}.png"
            fig.savefig(p)
            plt.close(fig)
            paths.append(p)
    return paths
