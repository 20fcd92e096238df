"""Command line runner: ``fbcap run|sweep|plotdata``.

Every number written comes from a library call; this module only parses,
dispatches and serialises. Output files are deterministic for a fixed config.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import json
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import capacity as cap
from . import channel as chmod
from . import codelab
from .processes import NoiseModel, block_marginal, make_rng, super_decompose
from .prob import CHANNEL, Pmf, random_kernel, to_json

SCHEMA_ID = "fbcap-config/1"
OUTPUT_ENV = "FBCAP_OUTPUT_DIR"
EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 2, 3


class ConfigError(Exception):
    def __init__(self, field: str, message: str, kind: str = "config"):
        super().__init__(message)
        self.field = field
        self.kind = kind

    def to_dict(self) -> dict:
        return {"error": {"type": self.kind, "field": self.field, "message": str(self)}}


def load_schema() -> dict:
    return json.loads(resources.files("fbcap").joinpath("schemas/config.schema.json").read_text())


@dataclass
class ExperimentConfig:
    command: str
    params: dict
    seed: int = 0
    name: str | None = None
    output: str | None = None
    channel: dict | None = None
    noise: dict | None = None
    sweep: dict = field(default_factory=dict)
    source: str | None = None

    @classmethod
    def from_dict(cls, d: dict, source: str | None = None) -> "ExperimentConfig":
        validate(d)
        return cls(d["command"], dict(d["params"]), d.get("seed", 0), d.get("name"), d.get("output"),
                   d.get("channel"), d.get("noise"), dict(d.get("sweep", {})), source)

    def to_dict(self) -> dict:
        d = {"schema": SCHEMA_ID, "command": self.command, "seed": self.seed, "params": self.params}
        for key in ("name", "output", "channel", "noise"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        if self.sweep:
            d["sweep"] = self.sweep
        return d

    @property
    def stem(self) -> str:
        if self.output:
            return self.output
        if self.name:
            return self.name
        return Path(self.source).stem if self.source else self.command


def _field_of(err: jsonschema.ValidationError) -> str:
    path = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        path += missing[:1]
    elif err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        path += extra[:1]
    return ".".join(path) or "<root>"


def validate(d: dict) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(d))
    if err is not None:
        raise ConfigError(_field_of(err), err.message, "schema")


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError("<file>", str(e), "io") from e
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<file>", f"invalid JSON: {e}", "parse") from e
    if not isinstance(d, dict):
        raise ConfigError("<root>", "config must be a JSON object", "schema")
    return ExperimentConfig.from_dict(d, str(path))


# -- object builders ------------------------------------------------------------

def build_channel(cfg: ExperimentConfig) -> chmod.SlidingBlockChannel:
    d = cfg.channel
    if d is None:
        raise ConfigError("channel", f"command {cfg.command!r} needs a channel")
    want = d["x_size"] ** (d["m"] + 1) * d["z_size"] ** (d["m"] + 1)
    if len(d["g"]) != want:
        raise ConfigError("channel.g", f"g needs {want} entries, got {len(d['g'])}")
    if max(d["g"], default=0) >= d["y_size"]:
        raise ConfigError("channel.g", "g takes values outside the output alphabet")
    return chmod.SlidingBlockChannel.from_flat(d["m"], d["x_size"], d["z_size"], d["y_size"], d["g"])


def build_noise(cfg: ExperimentConfig, z_size: int | None = None) -> NoiseModel:
    d = cfg.noise
    if d is None:
        raise ConfigError("noise", f"command {cfg.command!r} needs a noise model")
    try:
        kind = d["kind"]
        if kind == "iid":
            model = NoiseModel.iid(d["probs"])
        elif kind == "markov":
            model = NoiseModel.markov(d["transition"], d.get("stationary"))
        elif kind == "hidden_markov":
            model = NoiseModel.hidden_markov(d["transition"], d["emission"], d.get("stationary"))
        else:
            model = NoiseModel.periodic(d["cycle"], d.get("size", z_size))
    except ValueError as e:
        raise ConfigError("noise", str(e)) from e
    if z_size is not None and model.alphabet.size != z_size:
        raise ConfigError("noise", f"noise alphabet has {model.alphabet.size} symbols, channel expects {z_size}")
    return model


def _setup(cfg: ExperimentConfig):
    ch = build_channel(cfg)
    return ch, build_noise(cfg, ch.z_size)


def _kernel(ch, noise, n):
    return chmod.n_block_law(ch, block_marginal(noise, n), n)


def _result(res: cap.CapacityResult, maximizer) -> dict:
    return {"value": res.value, "gap": res.gap, "iterations": res.iterations, "converged": res.converged,
            "maximizer": maximizer}


# -- commands --------------------------------------------------------------------

def cmd_capacity(cfg: ExperimentConfig):
    p = cfg.params
    ch, noise = _setup(cfg)
    ns = p["n"] if isinstance(p["n"], list) else [p["n"]]
    out = []
    for n in ns:
        res = cap.nonfeedback_capacity(_kernel(ch, noise, n), tol=p.get("tol", 1e-9), max_iter=p.get("max_iter", 200_000))
        d = _result(res, res.maximizer.ravel().tolist())
        d["n"] = n
        out.append(d)
    ok = all(r["converged"] for r in out)
    return ({"results": out, "value": out[0]["value"] if len(out) == 1 else None}, None, ok)


def cmd_fbcapacity(cfg: ExperimentConfig):
    p = cfg.params
    ch, noise = _setup(cfg)
    n = p["n"]
    k = _kernel(ch, noise, n)
    if p.get("method", "ascent") == "exhaustive":
        try:
            res = cap.cfb_exhaustive(k, p.get("grid_resolution", 1 / 64))
        except ValueError as e:
            raise ConfigError("params.method", str(e)) from e
    else:
        res = cap.cfb_ascent(k, tol=p.get("tol", 1e-7), multistarts=p.get("multistarts", 16), seed=cfg.seed,
                             max_sweeps=p.get("max_sweeps", 2000))
    d = _result(res, to_json(res.maximizer))
    d.update(n=n, nonfeedback=cap.nonfeedback_capacity(k).value,
             history_blind=cap.history_blind_rate(k, seed=cfg.seed).value)
    d.update({key: v for key, v in res.info.items() if key in ("best_start", "start_values", "final_values")})
    return d, None, res.converged


def _random_state_channel(seed: int, i: int) -> cap.StateChannel:
    rng = make_rng(seed, i)
    return cap.StateChannel(rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(2), size=(2, 2)))


def cmd_lemma(cfg: ExperimentConfig):
    p = cfg.params
    lemma = p["lemma"]
    rows = []
    if lemma == "state1":
        if "state_channel" in p:
            sc = p["state_channel"]
            try:
                chans = [cap.StateChannel(np.asarray(sc["ps"]), np.asarray(sc["W"], dtype=float))]
            except ValueError as e:
                raise ConfigError("params.state_channel", str(e)) from e
        else:
            chans = [_random_state_channel(cfg.seed, i) for i in range(p.get("instances", 10))]
        for sc in chans:
            r = cap.verify_state1(sc, p.get("cap"))
            rows.append({"lhs": r.lhs, "rhs": r.rhs, "gap": r.gap, "under_capped": r.under_capped})
    elif lemma == "state2":
        if cfg.channel is not None:
            ch, noise = _setup(cfg)
            kernels = [_kernel(ch, noise, 2)]
        else:
            kernels = [random_kernel(make_rng(cfg.seed, i), CHANNEL, (2, 2), (2, 2)) for i in range(p.get("instances", 10))]
        for k in kernels:
            try:
                r = cap.verify_state2(k, p.get("caps"), multistarts=p.get("multistarts", 16), seed=cfg.seed,
                                      grid_resolution=p.get("grid_resolution", 1 / 64))
            except ValueError as e:
                raise ConfigError("params", str(e)) from e
            rows.append({"lhs": r.lhs, "rhs": r.rhs, "gap": r.gap, "under_capped": r.under_capped,
                         "support": r.info["support"]})
    else:
        ch, noise = _setup(cfg)
        t = cap.superadditivity_check(ch, noise, p.get("n_list", [1, 2, 3, 4, 5]), p.get("tol", 1e-6))
        return ({"lemma": lemma, "n_c_n": {str(n): v for n, v in t.n_c_n.items()},
                 "violations": [list(v) for v in t.violations], "ok": t.ok}, None, True)
    return {"lemma": lemma, "instances": rows, "max_gap": max(r["gap"] for r in rows)}, None, True


def _sim_common(p: dict) -> dict:
    return dict(trials=p["trials"], epsilon=p.get("epsilon", 0.05), decoder=p.get("decoder", "auto"),
                shared_codebook=p.get("shared_codebook", False), row_cap=p.get("row_cap", codelab.ROW_CAP),
                trial_offset=p.get("trial_offset", 0))


def _run_guarded(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except codelab.RowCapError as e:
        raise ConfigError("params.R", str(e), "cap") from e
    except ValueError as e:
        raise ConfigError("params", str(e)) from e


def cmd_simulate_nf(cfg: ExperimentConfig):
    p = cfg.params
    ch, noise = _setup(cfg)
    n = p["n"]
    if "pstar" in p:
        if len(p["pstar"]) != ch.x_size**n:
            raise ConfigError("params.pstar", f"pstar needs {ch.x_size ** n} entries")
        pstar = Pmf(p["pstar"])
    else:
        pstar = Pmf.uniform(ch.x_size**n)
    rep = _run_guarded(codelab.run_nf_experiment, ch, noise, pstar, n, p["L"], p["R"], seed=cfg.seed, **_sim_common(p))
    return rep.to_dict(), [rep.row()], True


def _strategy(cfg: ExperimentConfig, ch, noise, n: int):
    spec = cfg.params.get("strategy", "capacity")
    k = _kernel(ch, noise, n)
    if spec == "pass-through":
        return chmod.pass_through_strategy(k.x_sizes, k.y_sizes), None
    if spec == "capacity":
        res = cap.cfb_ascent(k, multistarts=cfg.params.get("multistarts", 16), seed=cfg.seed)
        return chmod.strategy_from_input_kernel(res.maximizer), res.value
    try:
        maps = tuple(np.asarray(m, dtype=np.int64) for m in spec["maps"])
        return chmod.ShannonStrategy(k.x_sizes, k.y_sizes, maps, tuple(spec["pmfs"])), None
    except ValueError as e:
        raise ConfigError("params.strategy", str(e)) from e


def cmd_simulate_fb(cfg: ExperimentConfig):
    p = cfg.params
    ch, noise = _setup(cfg)
    n = p["n"]
    if n <= ch.m:
        raise ConfigError("params.n", "block length must exceed the channel memory")
    strategy, value = _strategy(cfg, ch, noise, n)
    rep = _run_guarded(codelab.run_fb_experiment, ch, noise, strategy, None, n, p["L"], p["R"], seed=cfg.seed,
                       **_sim_common(p))
    d = rep.to_dict()
    d["u_sizes"] = list(strategy.u_sizes)
    if value is not None:
        d["fb_capacity"] = value
    return d, [rep.row()], True


def cmd_decompose(cfg: ExperimentConfig):
    noise = build_noise(cfg)
    try:
        dec = super_decompose(noise, cfg.params["n"])
    except NotImplementedError as e:
        raise ConfigError("noise.kind", str(e), "unsupported") from e
    return ({"n": dec.n, "n_prime": dec.n_prime, "weights": list(dec.weights),
             "modes": [m.probs.tolist() for m in dec.modes], "phase_map": list(dec.phase_map)}, None, True)


COMMANDS = {
    "capacity": cmd_capacity, "fbcapacity": cmd_fbcapacity, "lemma-check": cmd_lemma,
    "simulate-nf": cmd_simulate_nf, "simulate-fb": cmd_simulate_fb, "decompose": cmd_decompose,
}


# -- output ------------------------------------------------------------------------

def _plain(o):
    if isinstance(o, dict):
        return {str(k): _plain(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_plain(v) for v in o]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return _plain(o.tolist())
    return o


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=codelab.CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in codelab.CSV_COLUMNS})
    return buf.getvalue()


def output_dir(explicit: str | None) -> Path:
    d = Path(explicit or os.environ.get(OUTPUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def execute(cfg: ExperimentConfig) -> tuple[dict, list | None, bool]:
    body, rows, ok = COMMANDS[cfg.command](cfg)
    result = {"schema": SCHEMA_ID, "command": cfg.command, "seed": cfg.seed, "config": cfg.to_dict(),
              "status": "ok" if ok else "not_converged", "result": body}
    return result, rows, ok


def run(config_path, out_dir: str | None = None) -> int:
    cfg = load_config(config_path)
    result, rows, ok = execute(cfg)
    d = output_dir(out_dir)
    (d / f"{cfg.stem}.json").write_text(dumps(result))
    if rows is not None:
        (d / f"{cfg.stem}.csv").write_text(csv_text(rows))
    print(str(d / f"{cfg.stem}.json"))
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def _set_dotted(d: dict, path: str, value) -> None:
    keys = path.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value


def grid_points(sweep: dict):
    keys = sorted(sweep)
    for values in itertools.product(*(sweep[k] for k in keys)):
        yield dict(zip(keys, values))


def sweep(config_path, out_dir: str | None = None) -> int:
    base = load_config(config_path)
    if base.command not in ("simulate-nf", "simulate-fb"):
        raise ConfigError("command", "sweep supports simulate-nf and simulate-fb")
    raw = base.to_dict()
    raw.pop("sweep", None)
    rows, ok = [], True
    # a grid without axes has no points, like one with an empty axis
    for point in (grid_points(base.sweep) if base.sweep else ()):
        d = copy.deepcopy(raw)
        for path, value in point.items():
            _set_dotted(d, path, value)
        try:
            cfg = ExperimentConfig.from_dict(d, base.source)
        except ConfigError as e:
            raise ConfigError(f"sweep.{e.field}", str(e), e.kind) from e
        _, r, good = execute(cfg)
        rows.extend(r)
        ok &= good
    path = output_dir(out_dir) / f"{base.stem}.csv"
    path.write_text(csv_text(rows))
    print(str(path))
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def plot_data(csv_path, x: str = "auto") -> str:
    """Whitespace-delimited columns for gnuplot: (rate, pe) or (L, pe, ci_lo, ci_hi)."""
    try:
        with open(csv_path, newline="") as f:
            reader = csv.DictReader(f)
            header = reader.fieldnames or list(codelab.CSV_COLUMNS)
            rows = list(reader)
    except OSError as e:
        raise ConfigError("<file>", str(e), "io") from e
    missing = [c for c in codelab.CSV_COLUMNS if c not in header]
    if missing:
        raise ConfigError(missing[0], f"CSV lacks column {missing[0]!r}", "columns")
    if x == "auto":
        x = "L" if len({r["L"] for r in rows}) > 1 else "rate"
    cols = ("L", "pe", "ci_lo", "ci_hi") if x == "L" else ("R", "pe")
    names = ("L", "pe", "ci_lo", "ci_hi") if x == "L" else ("rate", "pe")
    lines = [f"# source: {Path(csv_path).name}", "# " + " ".join(names)]
    lines += [" ".join(r[c] for c in cols) for r in rows]
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fbcap", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name in ("run", "sweep"):
        s = sub.add_parser(name)
        s.add_argument("config")
        s.add_argument("-o", "--output-dir", default=None, help=f"defaults to ${OUTPUT_ENV} or the working directory")
    s = sub.add_parser("plotdata")
    s.add_argument("csv")
    s.add_argument("--x", choices=("auto", "rate", "L"), default="auto")
    s.add_argument("-o", "--output", default=None, help="write here instead of stdout")
    args = ap.parse_args(argv)
    try:
        if args.cmd == "run":
            return run(args.config, args.output_dir)
        if args.cmd == "sweep":
            return sweep(args.config, args.output_dir)
        text = plot_data(args.csv, args.x)
        if args.output:
            Path(args.output).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    except ConfigError as e:
        sys.stderr.write(json.dumps(e.to_dict(), sort_keys=True) + "\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
