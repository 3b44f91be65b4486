"""Command-line front end.

Every command writes its outputs plus a run manifest (``manifest.json`` in an
output directory, ``<out>.manifest.json`` next to an output file).  The
manifest records the exact argument vector and the digest of every input, so
``hoversim replay`` can re-run it and reproduce the same bytes.

Exit codes: 0 success, 2 usage or configuration error, 3 bad input data.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (
    HeuristicConfig,
    DetectionReport,
    biometrics,
    biometrics_csv,
    detect_keyboard,
    detection_csv,
    score_detection,
    segments_csv,
)
from .attacker import AttackerConfig, CaptureDecodeError, decode_stream, encode_stream, run_attack
from .dispatch import parse_policy
from .events import InputMethod, ScreenSpec, SessionParseError, read_session, serialize_session, validate_session
from .learn import (
    build_set,
    fit,
    kfold_accuracy,
    kfold_rmse,
    loocv_rmse,
    metrics_csv,
    metrics_csv_row,
    model_to_json,
    parse_model_spec,
    truth_index,
)
from .synth import (
    SAMPLE_TEXT,
    BallGame,
    TrajectoryProfile,
    Typing,
    default_profile,
    make_layout,
    profile_from_config,
    read_flat_config,
    synth_mixed,
    typing_intervals,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# -- small helpers -------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write(path: Path, data: bytes) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as e:
        raise DataError(f"cannot write {path}: {e.strerror}") from None


def _dump_json(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode()


def _read_config(path: Optional[str]) -> dict[str, str]:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e.strerror}") from None
    try:
        return read_flat_config(text)
    except Exception as e:
        raise UsageError(f"bad config {path}: {e}") from None


def _expand(paths: Sequence[str], suffix: str) -> list[Path]:
    """Files as given, directories expanded to their ``*suffix`` entries."""
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(p.glob("*" + suffix)))
        elif p.is_file():
            out.append(p)
        else:
            raise DataError(f"no such file or directory: {p}")
    if not out:
        raise DataError(f"no {suffix} files found in {', '.join(paths)}")
    return out


def _load_sessions(paths: Sequence[str]):
    sessions = []
    for p in _expand(paths, ".jsonl"):
        try:
            sessions.append((p, read_session(p)))
        except SessionParseError as e:
            raise DataError(f"{p}: {e}") from None
    return sessions


def _load_captures(paths: Sequence[str]):
    out = []
    for p in _expand(paths, ".cap"):
        try:
            out.append((p, decode_stream(p.read_bytes())))
        except CaptureDecodeError as e:
            raise DataError(f"{p}: {e}") from None
    return out


def _screen(args) -> ScreenSpec:
    try:
        w, h = (int(v) for v in args.screen.lower().split("x"))
        return ScreenSpec(w, h)
    except ValueError:
        raise UsageError(f"bad --screen {args.screen!r}, expected WxH") from None


def _read_intervals(path: str) -> dict[int, list[tuple[int, int]]]:
    try:
        rows = list(csv.DictReader(io.StringIO(Path(path).read_text())))
        out: dict[int, list[tuple[int, int]]] = {}
        for r in rows:
            out.setdefault(int(r["user_id"]), []).append((int(r["t_start_us"]), int(r["t_end_us"])))
        return out
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}") from None
    except (KeyError, ValueError) as e:
        raise DataError(f"bad typing interval file {path}: {e}") from None


# -- synth ---------------------------------------------------------------------

_CORPUS_KEYS = {"method": "stylus", "users": "20", "workload": "ball", "clicks": "50", "chars": "100", "blocks": "2",
                "width_px": "720", "height_px": "1280", "first_user": "0"}
_PROFILE_KEYS = {f.name for f in dataclasses.fields(TrajectoryProfile)}


def _session_seed(seed: int, user_id: int) -> int:
    return int(np.random.SeedSequence([seed, user_id]).generate_state(1)[0])


def _user_text(user_id: int, chars: int) -> str:
    start = (user_id * 37) % len(SAMPLE_TEXT)
    text = (SAMPLE_TEXT * (chars // len(SAMPLE_TEXT) + 2))[start : start + chars]
    return text.strip() or "hover"


def cmd_synth(args) -> dict:
    cfg = _read_config(args.config)
    unknown = sorted(set(cfg) - set(_CORPUS_KEYS) - _PROFILE_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    c = {**_CORPUS_KEYS, **{k: v for k, v in cfg.items() if k in _CORPUS_KEYS}}
    overrides = "\n".join(f"{k} = {v}" for k, v in cfg.items() if k in _PROFILE_KEYS)
    try:
        method = InputMethod(c["method"])
        users, clicks, chars, blocks = int(c["users"]), int(c["clicks"]), int(c["chars"]), int(c["blocks"])
        first = int(c["first_user"])
        screen = ScreenSpec(int(c["width_px"]), int(c["height_px"]))
        if c["workload"] not in ("ball", "typing", "mixed"):
            raise ValueError(f"unknown workload {c['workload']!r}")
        if min(users, clicks, chars, blocks) < 1:
            raise ValueError("users, clicks, chars and blocks must be positive")
    except ValueError as e:
        raise UsageError(f"bad config: {e}") from None

    out = Path(args.out)
    written = []
    interval_rows = []
    for uid in range(first, first + users):
        try:
            profile = profile_from_config(overrides, default_profile(method, uid))
        except (ValueError, TypeError) as e:
            raise UsageError(f"bad profile override: {e}") from None
        if c["workload"] == "ball":
            plan = [BallGame(clicks)]
        elif c["workload"] == "typing":
            plan = [Typing(_user_text(uid, chars))]
        else:
            plan = []
            for b in range(blocks):
                plan += [BallGame(clicks), Typing(_user_text(uid * blocks + b, chars))]
        session, flags = synth_mixed(screen, method, plan, profile, _session_seed(args.seed, uid), uid)
        path = out / f"user_{uid:03d}.jsonl"
        _write(path, serialize_session(session))
        written.append(path)
        for lo, hi in typing_intervals(session, flags):
            interval_rows.append([str(uid), str(lo), str(hi)])

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["user_id", "t_start_us", "t_end_us"])
    w.writerows(interval_rows)
    ipath = out / "typing_intervals.csv"
    _write(ipath, buf.getvalue().encode())
    written.append(ipath)
    return {"outputs": written, "manifest": out / "manifest.json"}


def cmd_validate(args) -> dict:
    bad = 0
    for path, s in _load_sessions(args.sessions):
        for v in validate_session(s):
            print(f"{path}: {v}", file=sys.stderr)
            bad += 1
    if bad:
        raise DataError(f"{bad} invariant violation(s)")
    return {}


# -- attack --------------------------------------------------------------------

_ATTACK_KEYS = {"activation_ms": float, "max_hovers": int, "reaction_latency_us": int, "deactivate": str,
                "window_anchor": str}


def cmd_attack(args) -> dict:
    raw = _read_config(args.config)
    unknown = sorted(set(raw) - set(_ATTACK_KEYS))
    if unknown:
        raise UsageError(f"unknown attacker config keys: {', '.join(unknown)}")
    try:
        kw = {k: _ATTACK_KEYS[k](v) for k, v in raw.items()}
        if args.anchor is not None:
            kw["window_anchor"] = args.anchor
        cfg = AttackerConfig(**kw)
        policy = parse_policy(args.policy)
    except ValueError as e:
        raise UsageError(str(e)) from None

    out = Path(args.out)
    written = []
    per_session = []
    total = {"clicks": 0, "captured": 0, "hovers": 0, "obstructed_clicks": 0, "touches_to_overlay": 0,
             "illegal_commands": 0}
    for path, session in _load_sessions(args.sessions):
        if validate_session(session):
            raise DataError(f"{path}: session violates its invariants (run 'hoversim validate')")
        captures, audit, _ = run_attack(session, cfg, policy)
        cap_path = out / (path.stem + ".cap")
        _write(cap_path, encode_stream(captures))
        written.append(cap_path)
        row = {
            "session": path.name,
            "user_id": session.user_id,
            "clicks": len(session.truth_clicks),
            "captured": len(captures),
            "hovers": sum(len(c.hovers) for c in captures),
            **dataclasses.asdict(audit),
        }
        per_session.append(row)
        for k in total:
            total[k] += row[k]
    doc = {
        "attacker": {**dataclasses.asdict(cfg), "window_anchor": cfg.window_anchor.value},
        "policy": dataclasses.asdict(policy),
        "sessions": per_session,
        "total": total,
        "clean": total["obstructed_clicks"] == 0 and total["touches_to_overlay"] == 0 and total["illegal_commands"] == 0,
    }
    audit_path = out / "audit.json"
    _write(audit_path, _dump_json(doc))
    written.append(audit_path)
    return {"outputs": written, "manifest": out / "manifest.json"}


# -- eval ----------------------------------------------------------------------


def _parse_cv(text: str) -> tuple[str, int]:
    if text == "loocv":
        return "loocv", 0
    name, _, k = text.partition(":")
    if name == "kfold":
        try:
            k = int(k) if k else 10
        except ValueError:
            k = 0
        if k >= 2:
            return "kfold", k
    raise UsageError(f"bad --cv {text!r}, expected loocv or kfold:K")


def cmd_eval(args) -> dict:
    task = {"point": "regression", "key": "classification"}[args.task]
    cv, k = _parse_cv(args.cv)
    if task == "classification" and cv == "loocv":
        raise UsageError("key prediction is evaluated with --cv kfold:K")
    if args.k_hovers < 1:
        raise UsageError("--k-hovers must be >= 1")
    sessions = _load_sessions(args.truth)
    screen = sessions[0][1].screen
    layout = make_layout(screen)
    truth = truth_index(s for _, s in sessions)
    captures = [c for _, caps in _load_captures(args.captures) for c in caps]
    if not captures:
        raise DataError("capture files hold no records")
    try:
        data, dropped = build_set(captures, truth, task, args.k_hovers, not args.no_dt)
    except KeyError as e:
        raise DataError(f"captures do not join to the truth sessions: {e}") from None
    except ValueError as e:
        raise DataError(str(e)) from None

    texts = list(args.model or [])
    if not any(t.split(":")[0].strip().lower().startswith("baseline") for t in texts):
        texts.insert(0, "baseline")
    try:
        specs = [parse_model_spec(t, task, layout, args.seed) for t in texts]
    except ValueError as e:
        raise UsageError(str(e)) from None

    corpus = args.corpus or Path(args.captures[0]).name
    cv_label = "loocv" if cv == "loocv" else f"kfold:{k}"
    rows = []
    for spec in specs:
        try:
            if cv == "loocv":
                m = loocv_rmse(data, spec)
            elif task == "regression":
                m = kfold_rmse(data, spec, k, args.seed)
            else:
                m = kfold_accuracy(data, spec, k, args.seed)
        except ValueError as e:
            raise DataError(f"{spec.label}: {e}") from None
        rows.append(metrics_csv_row(corpus, spec, cv_label, m, dropped))

    out = Path(args.out)
    _write(out, metrics_csv(rows).encode())
    written = [out]
    if args.save_model:
        mpath = Path(args.save_model)
        _write(mpath, (model_to_json(fit(specs[-1], data)) + "\n").encode())
        written.append(mpath)
    return {"outputs": written, "manifest": out.with_name(out.name + ".manifest.json")}


# -- detect / biometrics -------------------------------------------------------


def _sum_reports(reports: Sequence[DetectionReport]) -> DetectionReport:
    return DetectionReport(
        tuple(s for r in reports for s in r.segments),
        sum(r.n_typing for r in reports),
        sum(r.n_other for r in reports),
        sum(r.false_positives for r in reports),
        sum(r.false_negatives for r in reports),
    )


def cmd_detect(args) -> dict:
    layout = make_layout(_screen(args))
    try:
        cfgs = {
            "simple": HeuristicConfig(layout.region, args.min_seq_len, args.first_key_delay_ms, refined=False),
            "refined": HeuristicConfig(layout.region, args.min_seq_len, args.first_key_delay_ms, refined=True),
        }
    except ValueError as e:
        raise UsageError(str(e)) from None
    truth = _read_intervals(args.truth) if args.truth else None
    if args.report and truth is None:
        raise UsageError("--report needs --truth")

    seg_rows = []
    reports: dict[str, list[DetectionReport]] = {m: [] for m in cfgs}
    for _, caps in _load_captures(args.captures):
        if not caps:
            continue
        uid = caps[0].user_id
        for mode, cfg in cfgs.items():
            segs = detect_keyboard(caps, cfg)
            seg_rows.append((uid, mode, segs, caps))
            if truth is not None:
                reports[mode].append(score_detection(segs, truth.get(uid, []), caps))

    out = Path(args.out)
    _write(out, segments_csv(seg_rows).encode())
    written = [out]
    if args.report:
        rpath = Path(args.report)
        _write(rpath, detection_csv([(m, _sum_reports(r)) for m, r in reports.items()]).encode())
        written.append(rpath)
    return {"outputs": written, "manifest": out.with_name(out.name + ".manifest.json")}


def cmd_biometrics(args) -> dict:
    records = []
    for path, caps in _load_captures(args.captures):
        if not caps:
            continue
        try:
            records.extend((c.user_id, r) for c, r in zip(caps, biometrics(caps)))
        except ValueError as e:
            raise DataError(f"{path}: {e}") from None
    out = Path(args.out)
    _write(out, biometrics_csv(records).encode())
    return {"outputs": [out], "manifest": out.with_name(out.name + ".manifest.json")}


# -- replay --------------------------------------------------------------------


def cmd_replay(args) -> dict:
    try:
        doc = json.loads(Path(args.manifest).read_text())
        argv = doc["argv"]
        inputs = doc["inputs"]
    except OSError as e:
        raise DataError(f"cannot read manifest {args.manifest}: {e.strerror}") from None
    except (ValueError, KeyError) as e:
        raise DataError(f"bad manifest {args.manifest}: {e}") from None
    if argv and argv[0] == "replay":
        raise UsageError("a replay manifest cannot be replayed")
    for rec in inputs:
        p = Path(rec["path"])
        if not p.is_file() or _sha256(p) != rec["sha256"]:
            raise DataError(f"input {p} changed since the recorded run")
    code = main(argv)
    if code:
        raise SystemExit(code)
    return {"replayed": True}


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hoversim", description="Hover eavesdropping simulator.")
    p.add_argument("--version", action="version", version=f"hoversim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        sp.add_argument("--seed", type=int, default=0, help="root of all randomness (default 0)")
        if config:
            sp.add_argument("--config", help="flat key = value file")

    sp = sub.add_parser("synth", help="generate a corpus of ground-truth sessions")
    common(sp)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("validate", help="check session files against their invariants")
    sp.add_argument("sessions", nargs="+")
    sp.set_defaults(func=cmd_validate, no_manifest=True)

    sp = sub.add_parser("attack", help="run the overlay attack on sessions")
    common(sp)
    sp.add_argument("sessions", nargs="+", help="session files or directories")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--policy", default="none", help="comma list of countermeasures")
    sp.add_argument("--anchor", choices=["down", "up"], help="activation window anchor")
    sp.set_defaults(func=cmd_attack)

    sp = sub.add_parser("eval", help="cross-validate models on captures")
    common(sp, config=False)
    sp.add_argument("captures", nargs="+", help="capture files or directories")
    sp.add_argument("--truth", nargs="+", required=True, help="session files or directories")
    sp.add_argument("--task", choices=["point", "key"], default="point")
    sp.add_argument("--model", action="append", help="model spec, repeatable (e.g. forest:n=100,depth=12)")
    sp.add_argument("--cv", default="loocv", help="loocv or kfold:K")
    sp.add_argument("--k-hovers", type=int, default=4)
    sp.add_argument("--no-dt", action="store_true", help="coordinates only, no hover timing features")
    sp.add_argument("--corpus", help="corpus name for the CSV (default: first capture path)")
    sp.add_argument("--save-model", help="also fit the last model on all rows and save it as JSON")
    sp.add_argument("--out", required=True, help="metrics CSV")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("detect", help="find typing sessions in captures")
    common(sp, config=False)
    sp.add_argument("captures", nargs="+")
    sp.add_argument("--screen", default="720x1280")
    sp.add_argument("--min-seq-len", type=int, default=4)
    sp.add_argument("--first-key-delay-ms", type=int, default=500)
    sp.add_argument("--truth", help="typing_intervals.csv from synth, for scoring")
    sp.add_argument("--report", help="FP/FN report CSV (needs --truth)")
    sp.add_argument("--out", required=True, help="segments CSV")
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("biometrics", help="click timing features from captures")
    common(sp, config=False)
    sp.add_argument("captures", nargs="+")
    sp.add_argument("--out", required=True, help="biometrics CSV")
    sp.set_defaults(func=cmd_biometrics)

    sp = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    sp.add_argument("manifest")
    sp.set_defaults(func=cmd_replay, no_manifest=True)
    return p


def _input_paths(args) -> list[Path]:
    paths: list[Path] = []
    for name, suffix in (("sessions", ".jsonl"), ("captures", ".cap"), ("truth", ".jsonl")):
        v = getattr(args, name, None)
        if isinstance(v, list):
            paths += _expand(v, suffix)
    for name in ("config",):
        v = getattr(args, name, None)
        if v:
            paths.append(Path(v))
    if args.command == "detect" and args.truth:
        paths.append(Path(args.truth))
    return sorted(set(paths))


def _manifest(args, argv: Sequence[str], inputs: Sequence[Path], outputs: Sequence[Path]) -> bytes:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "no_manifest")}
    return _dump_json({
        "tool": "hoversim",
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "params": params,
        "seed": getattr(args, "seed", None),
        "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in inputs],
        "outputs": [{"path": str(p), "sha256": _sha256(p)} for p in outputs],
    })


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        inputs = [] if getattr(args, "no_manifest", False) else _input_paths(args)
        result = args.func(args)
        if not getattr(args, "no_manifest", False):
            _write(result["manifest"], _manifest(args, argv, inputs, result["outputs"]))
    except UsageError as e:
        print(f"hoversim: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"hoversim: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as e:
        return int(e.code or 0)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
