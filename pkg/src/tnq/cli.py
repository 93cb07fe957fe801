"""Batch front-end: ``tnq run <config.json>`` and ``tnq validate <config.json>``.

Exit codes: 0 success, 2 invalid config, 3 numeric failure (``error.json``
written to the output directory), 4 resource guard tripped.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config, validate_config
from .errors import ContractViolation, NumericError, ResourceGuardError

log = logging.getLogger("tnq")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_GUARD = 0, 2, 3, 4


class ConfigError(Exception):
    pass


# ----------------------------------------------------------------------------- serialization


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise NumericError(f"non-finite value {x!r} in results")
    text = format(x, ".17g")
    if "." not in text and "e" not in text and "inf" not in text and "nan" not in text:
        text += ".0"
    return text


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    return obj


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON with sorted keys and floats at 17 significant digits."""
    obj = _plain(obj) if _level == 0 else obj
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps(obj[k], indent, _level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, float):
        return _fmt_float(obj)
    return json.dumps(obj)


def dumps_line(obj) -> str:
    return dumps(obj, indent=0).replace("\n", "")


def write_csv(rows: list[dict], path: Path) -> None:
    if not rows:
        path.write_text("")
        return
    fields = list(rows[0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt_float(float(r[f])) if isinstance(r[f], (float, np.floating)) else r[f] for f in fields])
    path.write_text(buf.getvalue())


# ----------------------------------------------------------------------------- builders


def _policy(cfg):
    from .tensor import TruncationPolicy

    t = cfg.get("truncation", {})
    return TruncationPolicy(max_bond=t.get("max_bond"), sv_cutoff=t.get("sv_cutoff", 1e-28))


def build_operator(spec: dict):
    from .mpo import OperatorSpec

    kind = spec["kind"]
    if kind == "tfi":
        return OperatorSpec.tfi(spec["n"], spec.get("J", 1.0), spec.get("g", 1.0), spec.get("h", 0.0))
    if kind == "xxz":
        return OperatorSpec.xxz(spec["n"], spec["delta"], spec.get("J", 1.0))
    return OperatorSpec.pauli_sum([(c, p) for c, p in spec["terms"]])


def build_state(spec: dict, rng):
    from .mps import make_named_state, product_state, random_mps

    kind = spec["kind"]
    if kind == "product":
        return make_named_state("product", len(spec["bits"]), spec["bits"])
    if kind in ("ghz", "w"):
        return make_named_state(kind, spec["n"])
    if kind == "plus":
        return make_named_state("plus_all", spec["n"])
    if kind == "t_product":
        t = np.array([1, np.exp(1j * np.pi / 4)]) / np.sqrt(2)
        return product_state([t] * spec["n"])
    return random_mps(spec["n"], spec["chi"], rng)


def build_problem(spec: dict, rng):
    from . import anneal

    kind = spec["kind"]
    if kind == "maxcut_example":
        return anneal.encode_maxcut(anneal.example_graph()), anneal.example_graph()
    if kind == "maxcut":
        edges = tuple((int(e[0]), int(e[1]), float(e[2]) if len(e) > 2 else 1.0) for e in spec["edges"])
        if any(max(a, b) >= spec["n"] or a == b for a, b, _ in edges):
            raise ConfigError("/problem/edges: vertex out of range or self-loop")
        g = anneal.GraphSpec(spec["n"], edges)
        return anneal.encode_maxcut(g), g
    if kind == "maxcut_random_regular":
        g = anneal.GraphSpec.random_regular(spec["degree"], spec["n"], rng)
        return anneal.encode_maxcut(g), g
    if kind == "qubo":
        q = np.asarray(spec["q"], dtype=float)
        return anneal.QuboProblem(q, spec.get("c"), spec.get("offset", 0.0)), None
    d = np.asarray(spec["distances"], dtype=float)
    return anneal.encode_tsp(d, None, spec.get("h", 0.5 / d.max())), None


def _observables(cfg, n):
    from .pauli import PauliString

    out = []
    for text in cfg.get("observables", []):
        p = PauliString.from_text(text)
        if p.n != n:
            raise ConfigError(f"/observables: {text!r} has length {p.n}, register has {n}")
        out.append(p)
    return out


# ----------------------------------------------------------------------------- tasks


def _rng(cfg):
    from .rng import named_stream

    return named_stream(cfg["seed"], cfg["task"])


def task_tebd(cfg, out):
    from .mps import all_bond_entropies, expect_pauli_string
    from .tebd import evolve, trotterize

    h = build_operator(cfg["model"])
    s = build_state(cfg["state"], _rng(cfg))
    if s.n != h.n:
        raise ConfigError("/state: register size differs from /model/n")
    sch = cfg["schedule"]
    plan = trotterize(h, sch["dt"], sch.get("order", 2), sch.get("mode", "real"), sch.get("layout", "brickwork"))
    obs = _observables(cfg, s.n)
    rows = []

    def record(k, st):
        row = {"step": k, "time": k * sch["dt"], "norm": st.norm(), "max_bond": st.max_bond}
        ent = all_bond_entropies(st)
        row["entropy_mid"] = ent[len(ent) // 2] if ent else 0.0
        for i, o in enumerate(obs):
            row[f"obs{i}"] = float(expect_pauli_string(st, o))
        rows.append(row)

    record(0, s)
    s, discarded, _ = evolve(s, plan, sch["steps"], _policy(cfg), callback=record)
    return {
        "norm": s.norm(),
        "entropies": all_bond_entropies(s),
        "bond_dims": s.bond_dims,
        "discarded_total": float(sum(discarded)),
        "observables": {cfg["observables"][i]: float(expect_pauli_string(s, o)) for i, o in enumerate(obs)},
    }, rows, None


def task_tdvp(cfg, out):
    from .mpo import build_mpo
    from .mps import all_bond_entropies, expect_pauli_string
    from .tdvp import LanczosParams, tdvp_sweep

    h = build_operator(cfg["model"])
    s = build_state(cfg["state"], _rng(cfg))
    if s.n != h.n:
        raise ConfigError("/state: register size differs from /model/n")
    sch = cfg["schedule"]
    mpo = build_mpo(h)
    obs = _observables(cfg, s.n)
    p = LanczosParams(krylov_dim=sch.get("krylov", 20))
    policy = _policy(cfg)
    rows = []
    for k in range(1, sch["steps"] + 1):
        s, d = tdvp_sweep(s, mpo, sch["dt"], sch.get("variant", "two_site"), policy, p, hermitian_checked=True)
        row = {"step": k, "time": k * sch["dt"], "energy": d["energy"], "norm": d["norm"],
               "max_bond": d["max_bond"], "discarded": d["discarded"]}
        for i, o in enumerate(obs):
            row[f"obs{i}"] = float(expect_pauli_string(s, o))
        rows.append(row)
    return {
        "norm": s.norm(),
        "entropies": all_bond_entropies(s),
        "bond_dims": s.bond_dims,
        "energy": rows[-1]["energy"] if rows else None,
        "observables": {cfg["observables"][i]: float(expect_pauli_string(s, o)) for i, o in enumerate(obs)},
    }, rows, None


def task_dqa(cfg, out):
    from . import anneal
    from .mps import sample_bitstrings

    rng = _rng(cfg)
    problem, graph = build_problem(cfg["problem"], rng)
    sch = cfg["schedule"]
    comp = cfg.get("compression", {})
    res = anneal.run_dqa(problem, anneal.DqaSchedule(sch["P"], sch["tau"]), comp.get("chi", 16),
                         comp.get("mode", "optimized"), comp.get("sweeps", 2))
    count = cfg.get("samples", 1024)
    bits, probs = sample_bitstrings(res.state, count, rng)
    vals = anneal.cost_values(problem, bits)
    k = int(np.argmin(vals))
    result = {"energy": res.energy_trace[-1], "residual_energy": res.residual_energy,
              "best_bits": bits[k], "best_value": float(vals[k]), "samples": count}
    if problem.n <= anneal.BRUTE_FORCE_MAX_N:
        opt_bits, opt_val = anneal.brute_force_minimize(problem)
        result["brute_force_value"] = float(opt_val)
        result["optimum_found"] = bool(abs(vals[k] - opt_val) < 1e-9)
    if graph is not None:
        result["best_cut"] = graph.cut_value(bits[k])
        if "brute_force_value" in result:
            result["brute_force"] = anneal.maxcut_from_value(result["brute_force_value"])
    rows = [{"step": p + 1, "energy": e} for p, e in enumerate(res.energy_trace)]
    samples = [{"bits": "".join(str(int(b)) for b in bb), "prob": float(pp), "value": float(v)}
               for bb, pp, v in zip(bits, probs, vals)]
    return result, rows, samples


def task_qaoa(cfg, out):
    from . import anneal

    problem, _ = build_problem(cfg["problem"], _rng(cfg))
    sch = cfg["schedule"]
    p = sch["layers"]
    comp = cfg.get("compression", {})
    s = (np.arange(1, p + 1) - 0.5) / p
    betas0, gammas0 = 0.5 * (1 - s), 0.5 * s  # linear-ramp start
    betas, gammas, e = anneal.qaoa_optimize(problem, betas0, gammas0, comp.get("chi"),
                                            sch.get("iterations", 200), sch.get("step", 0.1))
    result = {"energy": e, "betas": betas, "gammas": gammas}
    if problem.n <= anneal.BRUTE_FORCE_MAX_N:
        result["brute_force_value"] = float(anneal.brute_force_minimize(problem)[1])
    return result, [], None


def task_thermal(cfg, out):
    from .mpo import mpo_trace
    from .open_systems import (classical_ising_thermal_mpo, physical_trace, purity,
                               thermal_log_partition, thermal_superket_evolve)

    m = cfg["model"]
    sch = cfg["schedule"]
    beta = sch["beta"]
    if m["kind"] == "classical_ising":
        J, h = m.get("J", 1.0), m.get("h", 0.0)
        z = mpo_trace(classical_ising_thermal_mpo(m["n"], J, h, beta)).real
        res = {"Z": z, "log_Z": math.log(z)}
        if h == 0:
            res["Z_closed_form"] = 2 ** m["n"] * math.cosh(beta * J) ** (m["n"] - 1)
        return res, [], None
    op = build_operator(m)
    rows = []

    def record(b, r):
        rows.append({"beta": b, "log_Z": thermal_log_partition(r), "purity": purity(r)})

    r, z = thermal_superket_evolve(op, beta, sch.get("dbeta", 0.05), _policy(cfg), record)
    return {"Z": z, "log_Z": thermal_log_partition(r), "trace": physical_trace(r), "purity": purity(r)}, rows, None


def task_metts(cfg, out):
    from .open_systems import MettsConfig, metts_estimate, metts_run

    h = build_operator(cfg["model"])
    sch = cfg["schedule"]
    obs = _observables(cfg, h.n)
    mc = MettsConfig(sch["beta"], sch.get("dbeta", 0.05), sch["samples"], sch.get("burn_in", 10),
                     sch.get("basis", "alternating"), cfg.get("truncation", {}).get("max_bond"))
    recs = metts_run(h, mc, obs, _rng(cfg))
    e, se = metts_estimate(recs, "energy")
    result = {"energy": e, "energy_stderr": se, "samples": len(recs), "observables": {}}
    for i, text in enumerate(cfg.get("observables", [])):
        m_, s_ = metts_estimate(recs, "observables", i)
        result["observables"][text] = {"mean": m_, "stderr": s_}
    rows = [{"step": r["step"], "basis": r["basis"], "energy": r["energy"], "max_bond": r["max_bond"]} for r in recs]
    return result, rows, recs


def task_lindblad(cfg, out):
    from .open_systems import (hardcore_boson_spec, lindblad_evolve, local_observable, physical_trace,
                               superket_from_mps)
    from .pauli import Z

    m = cfg["model"]
    spec = hardcore_boson_spec(m["n"], m["gamma_loss"], m["gamma_gain"], m.get("hopping", 1.0))
    s = build_state(cfg["state"], _rng(cfg))
    if s.n != spec.n:
        raise ConfigError("/state: register size differs from /model/n")
    rho = superket_from_mps(s, "pauli")
    sch = cfg["schedule"]
    every = sch.get("record_every", 1)
    rows = []

    def density(r):
        tr = physical_trace(r)
        return [float((1 - local_observable(r, Z, j).real / tr) / 2) for j in range(r.mps.n)]

    def record(k, r):
        if k % every == 0 or k == sch["steps"]:
            row = {"step": k, "time": k * sch["dt"], "trace": physical_trace(r)}
            row.update({f"n{j}": v for j, v in enumerate(density(r))})
            rows.append(row)

    rho = lindblad_evolve(rho, spec, sch["dt"], sch["steps"], _policy(cfg), callback=record)
    return {"density": density(rho), "trace": physical_trace(rho), "max_bond": rho.mps.max_bond}, rows, None


def task_monitored(cfg, out):
    from .mps import make_named_state
    from .open_systems import monitored_trajectory
    from .tebd import BrickworkCircuit

    rng = _rng(cfg)
    n = cfg["circuit"]["n"]
    circ = BrickworkCircuit.random(n, 2, rng)
    sch = cfg["schedule"]
    rec = monitored_trajectory(make_named_state("product", n), circ, sch["rate"], sch["steps"], rng,
                               sch.get("dt", 1.0), _policy(cfg))
    rows = []
    for k, (ent, z) in enumerate(zip(rec["entropies"], rec["z"])):
        rows.append({"step": k + 1, "entropy_mid": ent[len(ent) // 2], "clicks": len(rec["measurements"][k]),
                     **{f"z{j}": v for j, v in enumerate(z)}})
    samples = [{"step": k + 1, "clicks": [list(c) for c in clicks]} for k, clicks in enumerate(rec["measurements"])]
    return {"final_entropies": rec["entropies"][-1], "final_z": rec["z"][-1],
            "clicks_total": sum(len(c) for c in rec["measurements"])}, rows, samples


def task_magic(cfg, out):
    from .stabilizer import sre

    rng = _rng(cfg)
    s = build_state(cfg["state"], rng)
    method = cfg["method"]
    index = cfg.get("index", 2)
    samples = None
    if method == "exact":
        est, se, count = sre.sre_exact(s, index), 0.0, None
    elif method == "sample":
        count = cfg.get("samples", 1000)
        alphas, probs = sre.sample_pauli_strings(s, count, rng)
        est, se = sre.sre_sample(s, index, count, rng)
        samples = [{"string": "".join("IXYZ"[a] for a in row), "prob": float(p)} for row, p in zip(alphas, probs)]
    else:
        if index != 2:
            raise ConfigError("/index: replica paths compute index 2 only")
        est, se, count = sre.sre_replica2(s, method), 0.0, None
    return {"estimate": est, "stderr": se, "samples": count, "method": method, "index": index}, [], samples


def task_sample(cfg, out):
    from .mps import sample_bitstrings

    rng = _rng(cfg)
    s = build_state(cfg["state"], rng)
    bits, probs = sample_bitstrings(s, cfg["count"], rng)
    strings = ["".join(str(int(b)) for b in row) for row in bits]
    hist = {}
    for t in strings:
        hist[t] = hist.get(t, 0) + 1
    samples = [{"bits": t, "prob": float(p)} for t, p in zip(strings, probs)]
    return {"count": cfg["count"], "histogram": hist}, [], samples


def task_stab_find(cfg, out):
    from .stabilizer import find_stabilizer_group

    s = build_state(cfg["state"], _rng(cfg))
    res = find_stabilizer_group(s, cfg.get("budget", 4096))
    return {"generators": [str(p) for p in res.generators], "nullity": res.nullity,
            "complete": res.complete}, [], None


def task_circuit_export(cfg, out):
    from .mps import apply_circuit, circuit_to_json, make_named_state, overlap, to_staircase_circuit

    s = build_state(cfg["state"], _rng(cfg)).normalized()
    gates = to_staircase_circuit(s)
    back = apply_circuit(make_named_state("product", s.n), gates)
    fid = abs(overlap(s, back)) ** 2
    return {"circuit": circuit_to_json(gates), "fidelity": fid, "gate_count": len(gates)}, [], None


TASK_FUNCS = {
    "tebd": task_tebd, "tdvp": task_tdvp, "dqa": task_dqa, "qaoa": task_qaoa, "thermal": task_thermal,
    "metts": task_metts, "lindblad": task_lindblad, "monitored": task_monitored, "magic": task_magic,
    "sample": task_sample, "stab-find": task_stab_find, "circuit-export": task_circuit_export,
}


# ----------------------------------------------------------------------------- entry points


def _configure_logging():
    level = os.environ.get("TNQ_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def cmd_validate(path) -> int:
    try:
        cfg = load_config(path)
    except (OSError, json.JSONDecodeError) as exc:
        print(dumps({"valid": False, "errors": [{"pointer": "/", "message": str(exc)}]}))
        return EXIT_CONFIG
    errors = validate_config(cfg)
    print(dumps({"valid": not errors, "errors": errors}))
    return EXIT_OK if not errors else EXIT_CONFIG


def run_config(cfg: dict, out_dir: Path, config_bytes: bytes = b"") -> int:
    """Run a parsed config and write the artifacts; returns the exit code."""
    errors = validate_config(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    if errors:
        for e in errors:
            log.error("%s: %s", e["pointer"], e["message"])
            print(f"config error at {e['pointer']}: {e['message']}", file=sys.stderr)
        return EXIT_CONFIG
    start = time.perf_counter()
    task = cfg["task"]
    try:
        result, rows, samples = TASK_FUNCS[task](cfg, out_dir)
        text = dumps({"task": task, "seed": cfg["seed"], "results": result})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceGuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        (out_dir / "error.json").write_text(dumps({"error": "resource_guard", "message": str(exc),
                                                   "estimate": exc.estimate}) + "\n")
        return EXIT_GUARD
    except ContractViolation as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        ctx = getattr(exc, "context", {})
        (out_dir / "error.json").write_text(dumps({"error": type(exc).__name__, "message": str(exc),
                                                   "task": task, "context": ctx}) + "\n")
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    (out_dir / "results.json").write_text(text + "\n")
    write_csv(rows, out_dir / "trace.csv")
    files = ["results.json", "trace.csv"]
    if samples is not None:
        with open(out_dir / "samples.jsonl", "w") as fh:
            for rec in samples:
                fh.write(dumps_line(rec) + "\n")
        files.append("samples.jsonl")
    import scipy

    manifest = {
        "config_sha256": hashlib.sha256(config_bytes or json.dumps(cfg, sort_keys=True).encode()).hexdigest(),
        "task": task,
        "versions": {"tnq": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "wall_time_s": time.perf_counter() - start,
        "files": files,
    }
    (out_dir / "manifest.json").write_text(dumps(manifest) + "\n")
    log.info("task %s finished in %.3f s", task, manifest["wall_time_s"])
    return EXIT_OK


def cmd_run(path, out: str | None, threads: int) -> int:
    try:
        raw = Path(path).read_bytes()
        cfg = json.loads(raw)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(out) if out else Path(path).with_suffix("").parent / (Path(path).stem + "_out")
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=threads):
        return run_config(cfg, out_dir, raw)


def main(argv=None) -> int:
    _configure_logging()
    ap = argparse.ArgumentParser(prog="tnq", description="Config-driven tensor-network experiments.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run a config and write results.json, trace.csv, manifest.json")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (default: <config>_out next to the config)")
    r.add_argument("--threads", type=int, default=1, help="BLAS threads (default 1 for reproducibility)")
    v = sub.add_parser("validate", help="check a config against its schema without computing")
    v.add_argument("config")
    args = ap.parse_args(argv)
    if args.cmd == "validate":
        return cmd_validate(args.config)
    return cmd_run(args.config, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
