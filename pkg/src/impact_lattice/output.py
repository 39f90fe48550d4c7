"""Byte-exact CSV and Netpbm (P5/P6) emitters."""

from __future__ import annotations

import hashlib
import os
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

# opinion k -> RGB; opinions >= 12 reuse the table cyclically
PALETTE = (
    (220, 50, 47),
    (133, 153, 0),
    (38, 139, 210),
    (181, 137, 0),
    (211, 54, 130),
    (42, 161, 152),
    (203, 75, 22),
    (108, 113, 196),
    (88, 110, 117),
    (238, 232, 213),
    (7, 54, 66),
    (147, 161, 161),
)

_QUANTUM = Decimal("0.000001")


def fmt_decimal(x: float) -> str:
    """Six decimals, round-half-up on the shortest decimal repr of ``x``."""
    return str(Decimal(repr(float(x))).quantize(_QUANTUM, rounding=ROUND_HALF_UP))


def fmt_param(x: float) -> str:
    return f"{float(x):g}"


def gray_level(p) -> np.ndarray:
    """``round(255 * p)`` with halves rounded up."""
    return np.floor(255.0 * np.asarray(p, dtype=float) + 0.5).astype(np.uint8)


def opinions_csv(grid) -> bytes:
    return "".join(",".join(str(int(v)) for v in row) + "\n" for row in np.asarray(grid)).encode()


def opinions_ppm(grid) -> bytes:
    g = np.asarray(grid)
    palette = np.array(PALETTE, dtype=np.uint8)
    pixels = palette[g % len(PALETTE)]
    rows, cols = g.shape
    return f"P6\n{cols} {rows}\n255\n".encode() + pixels.tobytes()


def sustain_csv(values) -> bytes:
    return "".join(",".join(fmt_decimal(v) for v in row) + "\n" for row in np.asarray(values)).encode()


def sustain_pgm(values) -> bytes:
    v = np.asarray(values)
    rows, cols = v.shape
    return f"P5\n{cols} {rows}\n255\n".encode() + gray_level(v).tobytes()


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_files(items: list[tuple[Path, bytes]]) -> None:
    """Write every ``(path, data)`` pair, or none: on failure all are removed."""
    written = []
    try:
        for path, data in items:
            tmp = path.with_name(path.name + ".part")
            written.append(tmp)
            with open(tmp, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
            written[-1] = path
    except OSError:
        for p in written:
            try:
                os.remove(p)
            except OSError:
                pass
        raise


def emit_snapshot(config, directory) -> list[tuple[str, Path, str]]:
    """``opinions_t<step>.csv`` and ``opinions_t<step>.ppm``; returns (kind, path, sha256)."""
    directory = Path(directory)
    grid = config.grid()
    stem = f"opinions_t{config.step_index}"
    items = [(directory / f"{stem}.csv", opinions_csv(grid)), (directory / f"{stem}.ppm", opinions_ppm(grid))]
    write_files(items)
    return [("opinions_csv", items[0][0], digest(items[0][1])), ("opinions_ppm", items[1][0], digest(items[1][1]))]


def emit_sustain_map(field, directory) -> list[tuple[str, Path, str]]:
    """``sustain_t<step>.csv`` and ``sustain_t<step>.pgm``; returns (kind, path, sha256)."""
    directory = Path(directory)
    stem = f"sustain_t{field.step_index}"
    items = [(directory / f"{stem}.csv", sustain_csv(field.values)), (directory / f"{stem}.pgm", sustain_pgm(field.values))]
    write_files(items)
    return [("sustain_csv", items[0][0], digest(items[0][1])), ("sustain_pgm", items[1][0], digest(items[1][1]))]


SMAX_HEADER = "T,alpha,mean_smax_frac,std_smax_frac,mean_n_clusters,mean_n_small_clusters,runs"


def smax_table_csv(stats) -> bytes:
    """One row per parameter point, ordered by (T, alpha)."""
    lines = [SMAX_HEADER]
    for s in sorted(stats, key=lambda s: (s.temperature, s.alpha)):
        lines.append(
            ",".join(
                [
                    fmt_param(s.temperature),
                    fmt_param(s.alpha),
                    fmt_decimal(s.mean_smax_frac),
                    fmt_decimal(s.std_smax_frac),
                    fmt_decimal(s.mean_n_clusters),
                    fmt_decimal(s.mean_n_small_clusters),
                    str(s.n_runs),
                ]
            )
        )
    return ("\n".join(lines) + "\n").encode()


def histogram_csv(stats) -> bytes:
    lines = ["size,mean_count"] + [f"{size},{fmt_decimal(c)}" for size, c in sorted(stats.mean_histogram.items())]
    return ("\n".join(lines) + "\n").encode()


def histogram_name(alpha: float, temperature: float) -> str:
    return f"histogram_{fmt_param(alpha)}_{fmt_param(temperature)}.csv"
