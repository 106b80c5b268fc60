"""Monte Carlo BER/BLER sweep harness with deterministic per-frame seeding.

Every frame draws its randomness from ``SeedSequence((seed, grid_index,
frame_index))``, so results are independent of batch boundaries and of
how frames are distributed over workers.  Each grid point keeps sending
frames until it has seen ``min_error_blocks`` erroneous blocks or
``max_frames`` frames, evaluating the stop rule on whole batches in
frame order.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .channels import ERASED, ebn0_db_to_sigma
from .concat import ConcatSpec, _concat_decode_batch, concat_encode, read_concat_spec
from .decoders import Quantizer, _bp_awgn_batch, _bp_bec_batch, _sc_awgn_batch, _sc_bec_batch
from .factor_graph import build_graph
from .ldpc import _ldpc_bp_batch, ldpc_encode, read_alist, systematic_columns
from .polar import CodeSpec, encode, read_spec

__all__ = ["SweepConfig", "SimRecord", "run_sweep", "confidence_interval"]

SCHEMES = ("polar-sc", "polar-bp", "ldpc", "concat")
CSV_COLUMNS = [
    "scheme", "channel", "param", "frames", "info_bits_per_frame",
    "bit_errors", "block_errors", "ber", "bler", "ci99_lo", "ci99_hi",
    "ani", "ani_ldpc", "ani_polar", "wall_time_s", "seed",
]


@dataclass(frozen=True)
class SweepConfig:
    scheme: str
    channel: str  # "bec" | "awgn" (awgn grid values are Eb/N0 in dB)
    grid: tuple
    spec_path: str | None = None
    alist_path: str | None = None
    concat_path: str | None = None
    min_error_blocks: int = 100
    max_frames: int = 1_000_000
    seed: int = 0
    max_iter: int = 60
    quantize: bool = False
    batch: int = 256

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.channel not in ("bec", "awgn"):
            raise ValueError(f"channel must be 'bec' or 'awgn', got {self.channel!r}")
        if not self.grid:
            raise ValueError("parameter grid is empty")
        if self.min_error_blocks < 1:
            raise ValueError("min_error_blocks must be >= 1")
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))

    def digest(self) -> str:
        payload = {k: v for k, v in asdict(self).items()}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class SimRecord:
    scheme: str
    channel: str
    param: float
    frames: int
    info_bits_per_frame: int
    bit_errors: int
    block_errors: int
    ber: float
    bler: float
    ci99_lo: float
    ci99_hi: float
    ani: float
    ani_ldpc: float | None
    ani_polar: float | None
    wall_time_s: float
    seed: int


def confidence_interval(errors: int, trials: int, level: float = 0.99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= errors <= trials:
        raise ValueError("errors must lie in [0, trials]")
    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4.0 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


class _SchemeRunner:
    """Encodes, transmits and decodes one batch of frames for one scheme."""

    def __init__(self, cfg: SweepConfig):
        self.cfg = cfg
        self.quantizer = Quantizer() if cfg.quantize else None
        scheme = cfg.scheme
        if scheme in ("polar-sc", "polar-bp"):
            if cfg.spec_path is None:
                raise ValueError(f"{scheme} sweep needs spec_path")
            self.spec, _ = read_spec(cfg.spec_path)
            self.graph = build_graph(self.spec.n) if scheme == "polar-bp" else None
            self.k = self.spec.K
            self.rate_eff = self.spec.rate
        elif scheme == "ldpc":
            if cfg.alist_path is None:
                raise ValueError("ldpc sweep needs alist_path")
            self.H = read_alist(cfg.alist_path)
            self.sys_idx = systematic_columns(self.H)
            self.k = self.H.n_cols - self.H.m
            self.rate_eff = self.k / self.H.n_cols
        else:
            if cfg.concat_path is None:
                raise ValueError("concat sweep needs concat_path")
            self.cs = read_concat_spec(cfg.concat_path)
            self.k = self.cs.k
            self.rate_eff = self.cs.r_eff

    def channel_param(self, grid_value: float) -> float:
        if self.cfg.channel == "bec":
            return grid_value
        return ebn0_db_to_sigma(grid_value, self.rate_eff)

    def _frame_rngs(self, grid_idx: int, frame_lo: int, count: int):
        return [
            np.random.default_rng(np.random.SeedSequence((self.cfg.seed, grid_idx, f)))
            for f in range(frame_lo, frame_lo + count)
        ]

    def run_batch(self, grid_idx: int, grid_value: float, frame_lo: int, count: int) -> dict:
        """Simulate ``count`` frames; returns error counts and iteration sums."""
        cfg = self.cfg
        param = self.channel_param(grid_value)
        rngs = self._frame_rngs(grid_idx, frame_lo, count)
        info = np.stack([r.integers(0, 2, size=self.k).astype(np.uint8) for r in rngs])

        if cfg.scheme in ("polar-sc", "polar-bp"):
            x = encode(self.spec, info)
        elif cfg.scheme == "ldpc":
            x = ldpc_encode(self.H, info)
        else:
            x = concat_encode(self.cs, info)

        n_chan = x.shape[1]
        if cfg.channel == "bec":
            era = np.stack([r.random(n_chan) < param for r in rngs])
            sym = np.where(era, ERASED, x.astype(np.int8)).astype(np.int8)
            llr = None
        else:
            noise = np.stack([r.standard_normal(n_chan) for r in rngs])
            y = (1.0 - 2.0 * x.astype(np.float64)) + param * noise
            llr = 2.0 * y / (param * param)

        iters_ldpc = iters_polar = None
        if cfg.scheme == "polar-sc":
            if cfg.channel == "bec":
                u = _sc_bec_batch(self.spec, sym)
            else:
                u = _sc_awgn_batch(self.spec, llr)
            est = u[:, list(self.spec.info_set)]
            iters = np.ones(count, dtype=np.int64)
        elif cfg.scheme == "polar-bp":
            if cfg.channel == "bec":
                est, iters, _, _ = _bp_bec_batch(self.spec, sym, max_iter=cfg.max_iter)
            else:
                est, iters, _ = _bp_awgn_batch(
                    self.spec, llr, max_iter=cfg.max_iter, quantizer=self.quantizer
                )
        elif cfg.scheme == "ldpc":
            if llr is None:
                llr = np.where(sym == ERASED, 0.0, 1.0 - 2.0 * (sym == 1)) * 36.0
            post, hard, conv, iters = _ldpc_bp_batch(
                self.H, llr, max_iter=cfg.max_iter, quantizer=self.quantizer
            )
            est = hard[:, self.sys_idx]
        else:
            if llr is None:
                llr = np.where(sym == ERASED, 0.0, 1.0 - 2.0 * (sym == 1)) * 36.0
            est, iters_ldpc, iters_polar, _ = _concat_decode_batch(
                self.cs, llr, iters=(cfg.max_iter, cfg.max_iter), quantizer=self.quantizer
            )
            iters = iters_ldpc + iters_polar

        wrong = (est != info)
        if est.dtype == np.int8:
            wrong |= est == ERASED  # unresolved BEC positions count as bit errors
        out = {
            "bit_errors": int(wrong.sum()),
            "block_errors": int(np.any(wrong, axis=1).sum()),
            "iter_sum": int(iters.sum()),
            "frames": count,
        }
        if iters_ldpc is not None:
            out["iter_sum_ldpc"] = int(iters_ldpc.sum())
            out["iter_sum_polar"] = int(iters_polar.sum())
        return out


def _merge(acc: dict, part: dict) -> None:
    for key, val in part.items():
        acc[key] = acc.get(key, 0) + val


_POOL_RUNNER: _SchemeRunner | None = None


def _pool_init(cfg: SweepConfig) -> None:
    global _POOL_RUNNER
    _POOL_RUNNER = _SchemeRunner(cfg)


def _pool_batch(task):
    grid_idx, grid_value, lo, cnt = task
    return _POOL_RUNNER.run_batch(grid_idx, grid_value, lo, cnt)


def run_sweep(cfg: SweepConfig, out_csv=None, out_jsonl=None, resume: bool = True,
              emit=None) -> list[SimRecord]:
    """Run the configured sweep; returns one record per grid point.

    Records stream to the optional CSV/JSONL outputs as they finish.  A
    JSONL file from an earlier run of the same configuration makes the
    finished grid points no-ops (``resume``).
    """
    runner = _SchemeRunner(cfg)
    digest = cfg.digest()
    done: dict[float, SimRecord] = {}
    if resume and out_jsonl and Path(out_jsonl).exists():
        for line in Path(out_jsonl).read_text().splitlines():
            row = json.loads(line)
            if row.get("kind") == "record" and row.get("config") == digest:
                rec = SimRecord(**row["record"])
                done[rec.param] = rec

    csv_fh = None
    if out_csv:
        new = not Path(out_csv).exists()
        csv_fh = open(out_csv, "a", newline="")
        writer = csv.DictWriter(csv_fh, fieldnames=CSV_COLUMNS)
        if new:
            writer.writeheader()
    jsonl_fh = open(out_jsonl, "a") if out_jsonl else None

    workers = max(1, int(os.environ.get("POLARFEC_WORKERS", "1")))
    pool = None
    if workers > 1:
        pool = ProcessPoolExecutor(max_workers=workers,
                                   initializer=_pool_init, initargs=(cfg,))
    records = []
    try:
        for gi, gval in enumerate(cfg.grid):
            if gval in done:
                records.append(done[gval])
                continue
            t0 = time.monotonic()
            acc: dict = {}
            frame_lo = 0
            # frames are seeded individually and the stop rule is applied
            # in batch order on fixed batch boundaries, so the records do
            # not depend on the worker count: extra speculative batches a
            # pool computes past the stop point are simply discarded
            while frame_lo < cfg.max_frames:
                tasks = []
                while len(tasks) < workers and frame_lo < cfg.max_frames:
                    cnt = min(cfg.batch, cfg.max_frames - frame_lo)
                    tasks.append((gi, gval, frame_lo, cnt))
                    frame_lo += cnt
                if pool is not None:
                    parts = list(pool.map(_pool_batch, tasks))
                else:
                    parts = [runner.run_batch(*t) for t in tasks]
                stopped = False
                for part in parts:
                    _merge(acc, part)
                    if acc.get("block_errors", 0) >= cfg.min_error_blocks:
                        stopped = True
                        break
                if stopped:
                    break
            frames = acc["frames"]
            bits = frames * runner.k
            lo_ci, hi_ci = confidence_interval(acc["bit_errors"], bits)
            rec = SimRecord(
                scheme=cfg.scheme,
                channel=cfg.channel,
                param=gval,
                frames=frames,
                info_bits_per_frame=runner.k,
                bit_errors=acc["bit_errors"],
                block_errors=acc["block_errors"],
                ber=acc["bit_errors"] / bits,
                bler=acc["block_errors"] / frames,
                ci99_lo=lo_ci,
                ci99_hi=hi_ci,
                ani=acc["iter_sum"] / frames,
                ani_ldpc=acc["iter_sum_ldpc"] / frames if "iter_sum_ldpc" in acc else None,
                ani_polar=acc["iter_sum_polar"] / frames if "iter_sum_polar" in acc else None,
                wall_time_s=time.monotonic() - t0,
                seed=cfg.seed,
            )
            records.append(rec)
            if emit:
                emit(rec)
            if csv_fh:
                writer.writerow(asdict(rec))
                csv_fh.flush()
            if jsonl_fh:
                jsonl_fh.write(json.dumps(
                    {"kind": "record", "config": digest, "record": asdict(rec)}) + "\n")
                jsonl_fh.flush()
    finally:
        if pool is not None:
            pool.shutdown()
        if csv_fh:
            csv_fh.close()
        if jsonl_fh:
            jsonl_fh.close()
    return records
