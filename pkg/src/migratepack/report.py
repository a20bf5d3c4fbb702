"""PNG plots from a pack-online CSV.  Needs matplotlib; nothing else imports this."""

from __future__ import annotations

import csv
import os


def read_csv(path: str) -> list:
    with open(path) as fh:
        rows = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(rows))


def write_report(csv_path: str, out_dir: str) -> list:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_csv(csv_path)
    os.makedirs(out_dir, exist_ok=True)
    t = [int(r["t"]) for r in rows]
    written = []

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(t, [int(r["bins"]) for r in rows], label="bins")
    ax.plot(t, [int(r["opt_lb"]) for r in rows], label="OPT lower bound")
    ax.plot(t, [float(r["lin_lb_dec"]) for r in rows], label="LIN lower bound", linestyle=":")
    ax.set_xlabel("arrival")
    ax.set_ylabel("bins")
    ax.legend()
    path = os.path.join(out_dir, "bins.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(t, [float(r["migration_dec"]) for r in rows], label="per arrival", linewidth=0.8)
    ax.plot(t, [float(r["max_migration_dec"]) for r in rows], label="running max")
    ax.set_xlabel("arrival")
    ax.set_ylabel("migration factor")
    ax.legend()
    path = os.path.join(out_dir, "migration.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)
    return written
