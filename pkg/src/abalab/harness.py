"""Batch runs, scenario files and the ``abalab`` command line.

A scenario is a flat TOML document: top-level keys for the run
parameters and an optional ``[adversary]`` table::

    name = "equivocating_dealer"
    n = 4
    t = 1
    workload = "ivss"
    rounds = 4
    seeds = [1, 2, 3]

    [adversary]
    name = "equivocating_dealer"
    corrupt = [4]
    favored = [1]

Command-line flags override file values. Each batch writes one CSV row per
seed and a JSON summary into the output directory (``--out-dir``, else
``$ABALAB_OUT_DIR``, else ``./abalab-out``).

Exit status: 0 when every run passed its checks, 1 on a protocol check
failure (the offending seeds are named on stderr), 2 on a usage error and
3 when some run hit the step limit without finishing.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .adversary import SCRIPTS, AdversaryScript, ScriptError
from .field_poly import DEFAULT_PRIME, coin_modulus, is_probable_prime
from .simnet import CSV_COLUMNS, TRANSPORTS, WORKLOADS, RunMetrics, SimConfig, bad_round_budget, run

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_STALLED = 0, 1, 2, 3

ANY_SCRIPT = "any"

_SCENARIO_KEYS = {
    "name", "n", "t", "inputs", "trials", "seed", "seeds", "max_steps", "prime",
    "fairness", "workload", "transport", "rounds", "advance_after", "adversary",
}


class ScenarioError(ValueError):
    """The scenario or flags describe an impossible or unknown configuration."""


def parse_inputs(spec, n: int) -> tuple[int, ...] | None:
    """``"random"`` (or None) means per-seed random inputs; otherwise exactly n bits."""
    if spec is None or spec == "random":
        return None
    if isinstance(spec, (list, tuple)):
        bits = tuple(int(b) for b in spec)
    else:
        text = str(spec).strip()
        if len(text) == 1 and text in "01":
            text = text * n
        bits = tuple(int(c) for c in text if c in "01")
        if len(bits) != len(text.replace(",", "").replace(" ", "")):
            raise ScenarioError(f"inputs must be bits or 'random', got {spec!r}")
    if len(bits) != n or any(b not in (0, 1) for b in bits):
        raise ScenarioError(f"need {n} input bits, got {spec!r}")
    return bits


def parse_seeds(spec) -> tuple[int, ...]:
    """Seeds as a list, or a string of comma-separated values and ``a-b`` ranges."""
    if isinstance(spec, int):
        return (spec,)
    if isinstance(spec, (list, tuple)):
        return tuple(int(s) for s in spec)
    out: list[int] = []
    for part in str(spec).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            a, b = int(lo), int(hi)
            if b < a:
                raise ScenarioError(f"empty seed range {part!r}")
            out.extend(range(a, b + 1))
        else:
            out.append(int(part))
    if not out:
        raise ScenarioError("no seeds given")
    return tuple(out)


@dataclass(frozen=True)
class Scenario:
    name: str = "run"
    n: int = 4
    t: int = 1
    inputs: tuple[int, ...] | None = None
    adversary: tuple[AdversaryScript, ...] = (AdversaryScript(),)
    seeds: tuple[int, ...] = (0,)
    max_steps: int = 1_000_000
    p: int = DEFAULT_PRIME
    fairness: int | None = None
    workload: str = "aba"
    transport: str = "ideal"
    rounds: int = 3
    advance_after: int | None = None

    def __post_init__(self):
        if self.n <= 3 * self.t or self.n < 4 or self.t < 0:
            raise ScenarioError(f"need n > 3t and n >= 4, got n={self.n}, t={self.t}")
        if self.inputs is not None and len(self.inputs) != self.n:
            raise ScenarioError("inputs length must equal n")
        if self.p <= max(self.n, coin_modulus(self.n)) or not is_probable_prime(self.p):
            raise ScenarioError(f"prime must be a prime above max(n, ceil(0.87n)), got {self.p}")
        if not self.seeds:
            raise ScenarioError("no seeds given")
        if not self.adversary:
            raise ScenarioError("no adversary script given")
        if self.workload not in WORKLOADS:
            raise ScenarioError(f"unknown workload {self.workload!r}")
        if self.transport not in TRANSPORTS:
            raise ScenarioError(f"unknown transport {self.transport!r}")

    def config(self) -> SimConfig:
        return SimConfig(
            n=self.n, t=self.t, inputs=self.inputs, workload=self.workload, rounds=self.rounds,
            advance_after=self.advance_after, p=self.p, fairness=self.fairness, max_steps=self.max_steps, transport=self.transport,
        )

    def script_for(self, index: int) -> AdversaryScript:
        """Scripts are assigned to seeds round-robin, so each seed yields one row."""
        return self.adversary[index % len(self.adversary)]

    @classmethod
    def from_mapping(cls, data: dict) -> "Scenario":
        extra = set(data) - _SCENARIO_KEYS
        if extra:
            raise ScenarioError(f"unknown scenario keys: {', '.join(sorted(extra))}")
        n = int(data.get("n", 4))
        kw: dict = {"n": n, "t": int(data.get("t", 1))}
        if "name" in data:
            kw["name"] = str(data["name"])
        kw["inputs"] = parse_inputs(data.get("inputs"), n)
        kw["adversary"] = parse_adversary(data.get("adversary", "none"))
        if "seeds" in data:
            kw["seeds"] = parse_seeds(data["seeds"])
        else:
            first = int(data.get("seed", 0))
            kw["seeds"] = tuple(range(first, first + int(data.get("trials", 1))))
        for key, attr in (("max_steps", "max_steps"), ("prime", "p"), ("fairness", "fairness"), ("rounds", "rounds"),
                          ("advance_after", "advance_after")):
            if data.get(key) is not None:
                kw[attr] = int(data[key])
        for key in ("workload", "transport"):
            if key in data:
                kw[key] = str(data[key])
        try:
            return cls(**kw)
        except (ScriptError, ValueError) as exc:
            raise ScenarioError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Scenario":
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ScenarioError(f"{path}: {exc}") from exc
        data.setdefault("name", Path(path).stem)
        return cls.from_mapping(data)


def parse_adversary(spec) -> tuple[AdversaryScript, ...]:
    try:
        if spec == ANY_SCRIPT:
            return tuple(AdversaryScript(name=s) for s in SCRIPTS)
        if isinstance(spec, list):
            return tuple(AdversaryScript.from_record(s) for s in spec)
        return (AdversaryScript.from_record(spec),)
    except ScriptError as exc:
        raise ScenarioError(str(exc)) from exc


# -- batches -------------------------------------------------------------------------


def run_checks(m: RunMetrics) -> list[str]:
    """Per-run assertions: protocol checks, termination and the bad-round budget."""
    problems = list(m.violations)
    if not m.within_budget:
        problems.append(f"{len(m.e_rounds)} rounds with divergent reconstruction exceed the budget")
    return problems


def _one(job):
    config, script, seed = job
    return run(config, script, seed)


@dataclass
class BatchReport:
    scenario: Scenario
    runs: list[RunMetrics] = field(default_factory=list)

    @property
    def failures(self) -> dict[int, list[str]]:
        return {m.seed: p for m in self.runs if (p := run_checks(m))}

    @property
    def stalled(self) -> list[int]:
        return [m.seed for m in self.runs if not m.terminated]

    def exit_code(self) -> int:
        if self.failures:
            return EXIT_FAILED
        if self.stalled:
            return EXIT_STALLED
        return EXIT_OK

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for m in self.runs:
            w.writerow(m.csv_row())
        return buf.getvalue()

    def summary(self) -> dict:
        s = self.scenario
        runs = self.runs
        rounds = [m.rounds for m in runs if m.rounds is not None]
        coin_table: dict[str, int] = {"0": 0, "1": 0}
        for m in runs:
            for outs in m.coins.values():
                for c in outs:
                    if c is not None:
                        coin_table[str(c)] += 1
        budget = bad_round_budget(s.n, s.t)
        by_script: dict[str, dict] = {}
        for m in runs:
            d = by_script.setdefault(m.script, {"runs": 0, "decided": 0, "e_rounds": 0})
            d["runs"] += 1
            d["decided"] += int(m.decided)
            d["e_rounds"] += len(m.e_rounds)
        return {
            "scenario": s.name,
            "n": s.n,
            "t": s.t,
            "workload": s.workload,
            "transport": s.transport,
            "adversary": [a.name for a in s.adversary],
            "trials": len(runs),
            "decision_rate": sum(m.decided for m in runs) / len(runs) if runs else 0.0,
            "outputs": {str(k): v for k, v in _output_counts(runs).items()},
            "rounds": {
                "mean": statistics.fmean(rounds) if rounds else None,
                "median": statistics.median(rounds) if rounds else None,
                "max": max(rounds) if rounds else None,
            },
            "coin_frequency": coin_table,
            "e_rounds_total": sum(len(m.e_rounds) for m in runs),
            "runs_with_e": sum(1 for m in runs if m.e_rounds),
            "fp_pairs": {"max": max((m.fp_pairs for m in runs), default=0), "total": sum(m.fp_pairs for m in runs)},
            "bad_round_budget": {
                "bound": budget,
                "max_observed": max((len(m.e_rounds) for m in runs), default=0),
                "holds": all(m.within_budget for m in runs),
            },
            "by_script": by_script,
            "failures": {str(k): v for k, v in self.failures.items()},
            "stalled": self.stalled,
        }

    def write(self, out_dir: str | os.PathLike) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{self.scenario.name}.csv"
        json_path = out / f"{self.scenario.name}.json"
        csv_path.write_text(self.csv_text())
        json_path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def _output_counts(runs) -> dict:
    counts: dict = {}
    for m in runs:
        key = "none" if m.output is None else m.output
        counts[key] = counts.get(key, 0) + 1
    return counts


def run_batch(scenario: Scenario, workers: int = 1) -> BatchReport:
    config = scenario.config()
    jobs = [(config, scenario.script_for(i), seed) for i, seed in enumerate(scenario.seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        runs = [_one(j) for j in jobs]
    return BatchReport(scenario, runs)


# -- command line --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="abalab", description="Simulate asynchronous Byzantine agreement runs.")
    ap.add_argument("--scenario", help="TOML scenario file; flags override its values")
    ap.add_argument("--n", type=int)
    ap.add_argument("--t", type=int)
    ap.add_argument("--inputs", help="n bits such as 1101, a single bit for unanimity, or 'random'")
    ap.add_argument("--trials", type=int, help="number of consecutive seeds starting at --seed")
    seeds = ap.add_mutually_exclusive_group()
    seeds.add_argument("--seed", type=int)
    seeds.add_argument("--seeds", help="comma-separated seeds and ranges, e.g. 1,4,10-20")
    ap.add_argument("--adversary", help=f"one of {', '.join(SCRIPTS)}, or '{ANY_SCRIPT}' to rotate through all")
    ap.add_argument("--max-steps", type=int)
    ap.add_argument("--prime", type=int)
    ap.add_argument("--fairness", type=int, help="largest delay the scheduler may assign (default 64 n^2)")
    ap.add_argument("--workload", choices=WORKLOADS)
    ap.add_argument("--transport", choices=TRANSPORTS)
    ap.add_argument("--rounds", type=int, help="rounds for the ivss workload")
    ap.add_argument("--out-dir", help="report directory (default $ABALAB_OUT_DIR or ./abalab-out)")
    ap.add_argument("--format", choices=("csv", "json"), default="json", help="report printed to stdout")
    ap.add_argument("--workers", type=int, default=1)
    return ap


def scenario_from_args(args: argparse.Namespace) -> Scenario:
    data: dict = {}
    if args.scenario:
        with open(args.scenario, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ScenarioError(f"{args.scenario}: {exc}") from exc
        data.setdefault("name", Path(args.scenario).stem)
    for flag, key in (
        ("n", "n"), ("t", "t"), ("inputs", "inputs"), ("max_steps", "max_steps"), ("prime", "prime"),
        ("fairness", "fairness"), ("workload", "workload"), ("transport", "transport"), ("rounds", "rounds"),
    ):
        val = getattr(args, flag)
        if val is not None:
            data[key] = val
    if args.adversary is not None:
        data["adversary"] = args.adversary
    if args.seeds is not None:
        data["seeds"] = args.seeds
        data.pop("seed", None)
        data.pop("trials", None)
    elif args.seed is not None or args.trials is not None:
        data.pop("seeds", None)
        if args.seed is not None:
            data["seed"] = args.seed
        if args.trials is not None:
            data["trials"] = args.trials
    return Scenario.from_mapping(data)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        scenario = scenario_from_args(args)
    except (ScenarioError, OSError) as exc:
        ap.print_usage(sys.stderr)
        print(f"abalab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.workers < 1:
        ap.print_usage(sys.stderr)
        print("abalab: error: --workers must be positive", file=sys.stderr)
        return EXIT_USAGE
    report = run_batch(scenario, workers=args.workers)
    out_dir = args.out_dir or os.environ.get("ABALAB_OUT_DIR") or "abalab-out"
    report.write(out_dir)
    if args.format == "csv":
        sys.stdout.write(report.csv_text())
    else:
        print(json.dumps(report.summary(), indent=2, sort_keys=True))
    code = report.exit_code()
    for seed, problems in report.failures.items():
        for p in problems:
            print(f"abalab: seed {seed}: {p}", file=sys.stderr)
    if code == EXIT_STALLED:
        print(f"abalab: step limit reached without finishing for seeds {report.stalled}", file=sys.stderr)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
