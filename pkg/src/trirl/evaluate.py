"""Success criterion, ASR aggregation, benchmark orchestration, persistence.

A benchmark manifest is JSON: {"images": [{"id": str, "tensor": path, "label":
int}, ...]} with tensor paths relative to the manifest file. Each image is
verified correctly classified (unbudgeted), then attacked by both controllers,
the slow-alpha-rule baseline at its budget and the Q-learning controller at
its (typically smaller) one. Results persist as JSONL, one object per attacked
image per controller:

    {"image_id", "controller", "queries_used", "best_l2", "rmse",
     "success": {"<c>": bool}, "seed"}

and every successful adversarial tensor is written to a sibling `adv/`
directory so any success can be re-verified offline against the oracle spec.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .attack import DEFAULT_RMSE_CONSTANTS, AttackConfig, AttackResult, run_attack
from .oracle import HalfspaceOracle, Oracle, PolytopeOracle, SphereOracle
from .tensor import read_tensor, rmse, write_tensor

DEFAULT_BUDGETS = {"ta": 1000, "tarl": 500}


def is_success(x: np.ndarray, adv: np.ndarray, y: int, adv_label: int, c: float) -> bool:
    """Success iff the label flipped and the distortion fits the RMSE budget c."""
    if x.shape != adv.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {adv.shape}")
    return adv_label != y and rmse(x, adv) <= c


def compute_asr(results: list[AttackResult], c: float) -> float:
    """Percentage of results whose success flag at budget c is set."""
    if not results:
        raise ValueError("compute_asr needs a non-empty result list")
    hits = sum(1 for r in results if r.success_flags.get(c, False))
    return 100.0 * hits / len(results)


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    tensor_path: Path
    label: int


def load_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    raw = json.loads(path.read_text())
    images = raw.get("images")
    if not images:
        raise ValueError(f"manifest {path} lists no images")
    entries = []
    for item in images:
        entries.append(
            ManifestEntry(
                image_id=str(item["id"]),
                tensor_path=(path.parent / item["tensor"]).resolve(),
                label=int(item["label"]),
            )
        )
    return entries


def _load_params(path: str) -> dict:
    return json.loads(Path(path).read_text())


def make_oracle(spec: str, timeout: float = 30.0) -> Oracle:
    """Build an oracle from the CLI spec grammar.

    synthetic:halfspace:<params-file> | synthetic:sphere:<params-file> |
    synthetic:polytope:<params-file> | synthetic:ta-failure:<fixture-id> |
    remote:tcp:<host>:<port> | remote:stdio:<command>
    """
    kind, _, rest = spec.partition(":")
    if kind == "remote":
        from .remote import remote_oracle

        return remote_oracle(rest, timeout=timeout)
    if kind != "synthetic":
        raise ValueError(f"unknown oracle spec {spec!r}")
    family, _, arg = rest.partition(":")
    if not arg:
        raise ValueError(f"oracle spec {spec!r} is missing its argument")
    if family == "halfspace":
        p = _load_params(arg)
        shape = tuple(p["shape"])
        return HalfspaceOracle(np.asarray(p["normal"], dtype=float).reshape(shape), float(p["bias"]))
    if family == "sphere":
        p = _load_params(arg)
        shape = tuple(p["shape"])
        return SphereOracle(np.asarray(p["center"], dtype=float).reshape(shape), float(p["radius"]))
    if family == "polytope":
        p = _load_params(arg)
        shape = tuple(p["shape"])
        faces = [
            (np.asarray(f["normal"], dtype=float).reshape(shape), float(f["bias"]))
            for f in p["faces"]
        ]
        return PolytopeOracle(faces)
    if family == "ta-failure":
        from .fixtures import TaFailureOracle, load_fixture

        return TaFailureOracle(load_fixture(arg))
    raise ValueError(f"unknown synthetic oracle family {family!r}")


@dataclass
class BenchmarkConfig:
    budgets: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_BUDGETS))
    constants: tuple[float, ...] = DEFAULT_RMSE_CONSTANTS
    workers: int = 4
    seed: int = 0
    attack: AttackConfig = field(default_factory=AttackConfig)
    keep_qtable: bool = False  # chain the learned table across images (forces sequential runs)


@dataclass
class BenchmarkReport:
    records: list[dict]
    errors: list[dict]
    budgets: dict[str, int]
    constants: tuple[float, ...]

    def asr(self, controller: str, c: float) -> float:
        rows = [r for r in self.records if r["controller"] == controller]
        if not rows:
            raise ValueError(f"no records for controller {controller!r}")
        hits = sum(1 for r in rows if r["success"].get(_ckey(c), False))
        return 100.0 * hits / len(rows)

    def diff(self, c: float) -> float:
        return round(self.asr("tarl", c), 1) - round(self.asr("ta", c), 1)

    def render(self, fmt: str = "table") -> str:
        cs = list(self.constants)
        if fmt == "json":
            payload = {
                "budgets": self.budgets,
                "asr": {
                    ctl: {_ckey(c): round(self.asr(ctl, c), 1) for c in cs}
                    for ctl in ("ta", "tarl")
                },
                "diff": {_ckey(c): round(self.diff(c), 1) for c in cs},
                "attacked": len({r["image_id"] for r in self.records}),
                "errors": self.errors,
            }
            return json.dumps(payload, indent=2)
        header = ["controller"] + [f"C={c:g}" for c in cs]
        rows = []
        for ctl in ("ta", "tarl"):
            rows.append([f"{ctl} (Q={self.budgets[ctl]})"] + [f"{round(self.asr(ctl, c), 1):.1f}" for c in cs])
        rows.append(["diff"] + [f"{round(self.diff(c), 1):+.1f}" for c in cs])
        if fmt == "csv":
            return "\n".join(",".join(r) for r in [header] + rows)
        if fmt != "table":
            raise ValueError(f"unknown report format {fmt!r}")
        widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
        lines.append("  ".join("-" * w for w in widths))
        for r in rows:
            lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
        return "\n".join(lines)


def _ckey(c: float) -> str:
    return f"{c:g}"


def result_record(image_id: str, controller: str, x: np.ndarray, result: AttackResult, seed: int) -> dict:
    return {
        "image_id": image_id,
        "controller": controller,
        "queries_used": result.queries_used,
        "best_l2": result.best_l2,
        "rmse": rmse(x, result.best_adv) if result.best_adv is not None else None,
        "success": {_ckey(c): bool(v) for c, v in result.success_flags.items()},
        "seed": seed,
    }


def run_benchmark(
    entries: list[ManifestEntry],
    oracle_spec: str,
    out_dir,
    cfg: BenchmarkConfig,
    controllers: tuple[str, ...] = ("ta", "tarl"),
) -> BenchmarkReport:
    if not entries:
        raise ValueError("benchmark needs a non-empty manifest")
    out_dir = Path(out_dir)
    adv_dir = out_dir / "adv"
    adv_dir.mkdir(parents=True, exist_ok=True)

    errors: list[dict] = []
    records: list[dict] = []
    lock = threading.Lock()

    def task(index: int, entry: ManifestEntry, controller: str, qtable=None):
        seed = cfg.seed + index  # stable per (image, controller) pair
        try:
            x = read_tensor(entry.tensor_path)
            oracle = make_oracle(oracle_spec)  # one oracle per task, never shared
            try:
                if oracle.label(x) != entry.label:  # unbudgeted verification
                    raise ValueError("image not correctly classified before attack")
                acfg = replace(
                    cfg.attack,
                    controller=controller,
                    max_queries=cfg.budgets[controller],
                    seed=seed,
                    rmse_constants=cfg.constants,
                    initial_qtable=qtable,
                )
                result = run_attack(x, entry.label, oracle, acfg)
            finally:
                oracle.close()
        except Exception as exc:
            with lock:
                errors.append({"image_id": entry.image_id, "controller": controller, "error": str(exc)})
            return None
        rec = result_record(entry.image_id, controller, x, result, seed)
        if result.best_adv is not None:
            write_tensor(adv_dir / f"{entry.image_id}.{controller}.tnsr", result.best_adv)
        with lock:
            records.append(rec)
        return result.qtable

    if cfg.keep_qtable:
        # the shared table is mutated in place, so chained runs stay sequential
        tables: dict[str, object] = {controller: cfg.attack.initial_qtable for controller in controllers}
        for i, entry in enumerate(entries):
            for controller in controllers:
                out = task(i, entry, controller, tables[controller])
                if out is not None:
                    tables[controller] = out
    else:
        with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
            futures = [
                pool.submit(task, i, entry, controller)
                for i, entry in enumerate(entries)
                for controller in controllers
            ]
            for f in futures:
                f.result()  # propagate programming errors; attack errors were caught

    records.sort(key=lambda r: (r["image_id"], r["controller"]))
    report = BenchmarkReport(records=records, errors=errors, budgets=dict(cfg.budgets), constants=cfg.constants)
    with open(out_dir / "results.jsonl", "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    (out_dir / "report.json").write_text(report.render("json"))
    return report


def reverify_successes(out_dir, oracle_spec: str, entries: list[ManifestEntry]) -> int:
    """Re-query every stored success tensor; returns how many verdicts held.

    Raises if any stored success fails to reproduce its adversarial verdict.
    """
    out_dir = Path(out_dir)
    labels = {e.image_id: e.label for e in entries}
    oracle = make_oracle(oracle_spec)
    held = 0
    try:
        with open(out_dir / "results.jsonl") as fh:
            for line in fh:
                rec = json.loads(line)
                if not any(rec["success"].values()):
                    continue
                adv = read_tensor(out_dir / "adv" / f"{rec['image_id']}.{rec['controller']}.tnsr")
                if oracle.label(adv) == labels[rec["image_id"]]:
                    raise AssertionError(f"stored success no longer adversarial: {rec['image_id']}")
                held += 1
    finally:
        oracle.close()
    return held
