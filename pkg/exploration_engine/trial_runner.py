"""
trial_runner.py - Batch trials over paired seeds, per-trial CSV/PGM/Q-table
output, per-policy summaries and policy comparison
"""

from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
from tqdm import tqdm

import config
from utils import TrialLogger
from utils.logger import setup_logging
from .metrics import SUMMARY_NUMERIC_FIELDS, MetricsReport, merge_frequency_report, team_union_map
from .scenario import ScenarioFile, emit_config, load_world, to_sim_config
from .simulator import build_report, run_state
from .world import GroundTruthGrid

logger = setup_logging(__name__)

FLOAT_FORMAT = "%.6f"


class OutputError(RuntimeError):
    pass


@dataclass
class TrialResult:
    index: int
    seed: int
    policy: str
    report: Optional[MetricsReport] = None
    error: Optional[str] = None
    files: List[Path] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.report is not None


@dataclass
class TrialSummary:
    """Per-trial summary rows plus mean and std rows for one policy"""
    policy: str
    results: List[TrialResult]
    trials: pd.DataFrame
    aggregates: pd.DataFrame
    path: Optional[Path] = None

    @property
    def all_completed(self) -> bool:
        return all(r.ok for r in self.results)

    def mean(self, column: str) -> float:
        return float(self.aggregates.loc['mean', column])


def _write(path: Path, writer):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        writer(path)
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e}") from e
    return path


def run_trial(
    scenario: ScenarioFile,
    grid: GroundTruthGrid,
    index: int,
    policy: str,
    out_dir: Path,
    snapshot_every: int = 0,
) -> TrialResult:
    """
    Run one seeded trial and write its files

    Files: trial_XX_seedS.csv (ticks), trial_XX_union.pgm, one PGM and one
    Q-table CSV per robot, optional union snapshots.

    Returns:
        TrialResult (error set instead of raising for simulation failures)
    """
    seed = int(scenario['seed']) + index
    result = TrialResult(index, seed, policy)
    policy_dir = out_dir / policy
    stem = f"trial_{index:02d}"
    snapshot_dir = str(policy_dir / f"{stem}_snapshots") if snapshot_every else None

    try:
        cfg = to_sim_config(scenario, seed=seed, policy=policy, grid=grid, snapshot_dir=snapshot_dir)
        cfg.snapshot_every = snapshot_every
        state = run_state(cfg)
        report = build_report(state)
    except Exception as e:
        logger.error(f"{policy} trial {index} (seed {seed}) failed: {e}")
        result.error = str(e)
        return result

    frame = report.tick_frame()
    result.files.append(_write(
        policy_dir / f"{stem}_seed{seed}.csv",
        lambda p: frame.to_csv(p, index=False, float_format=FLOAT_FORMAT),
    ))
    union = team_union_map([a.local_map for a in state.agents])
    result.files.append(_write(policy_dir / f"{stem}_union.pgm", union.save_pgm))
    for agent in state.agents:
        result.files.append(_write(policy_dir / f"{stem}_robot{agent.id}.pgm", agent.local_map.save_pgm))
        if len(agent.q_table):
            result.files.append(_write(policy_dir / f"{stem}_robot{agent.id}_q.csv", agent.q_table.save_csv))

    merge_frequency_report(report)
    result.report = report
    return result


def summarize(policy: str, results: Sequence[TrialResult]) -> TrialSummary:
    """Trial rows plus mean and population std over completed trials"""
    rows = [r.report.summary_row() for r in results if r.ok]
    trials = pd.DataFrame(rows)
    numeric = [c for c in SUMMARY_NUMERIC_FIELDS if c in trials.columns]
    if trials.empty:
        aggregates = pd.DataFrame(index=['mean', 'std'], columns=SUMMARY_NUMERIC_FIELDS, dtype=float)
    else:
        aggregates = pd.DataFrame({
            'mean': trials[numeric].mean(),
            'std': trials[numeric].std(ddof=0),
        }).T
    return TrialSummary(policy, list(results), trials, aggregates)


def write_summary(summary: TrialSummary, out_dir: Path) -> Path:
    """summary.csv: one row per trial, then 'mean' and 'std' rows"""
    trials = summary.trials.copy()
    trials.insert(0, 'row', [f"trial_{r.index:02d}" for r in summary.results if r.ok])
    agg = summary.aggregates.copy()
    agg.insert(0, 'row', agg.index)
    agg['policy'] = summary.policy
    table = pd.concat([trials, agg.reset_index(drop=True)], ignore_index=True)
    path = out_dir / summary.policy / "summary.csv"
    summary.path = _write(path, lambda p: table.to_csv(p, index=False, float_format=FLOAT_FORMAT))
    return summary.path


def run_policy(
    scenario: ScenarioFile,
    grid: GroundTruthGrid,
    policy: str,
    out_dir: Path,
    snapshot_every: int = 0,
    quiet: bool = False,
    parallel: bool = config.ENABLE_PARALLEL,
) -> TrialSummary:
    """Run every trial of one policy, in parallel threads when enabled"""
    indices = list(range(scenario.trials))
    results: List[TrialResult] = []
    bar = tqdm(total=len(indices), desc=policy, disable=quiet, unit="trial")

    if parallel and len(indices) > 1:
        with ThreadPoolExecutor(max_workers=config.MAX_WORKERS) as executor:
            futures = [
                executor.submit(run_trial, scenario, grid, i, policy, out_dir, snapshot_every)
                for i in indices
            ]
            for future in as_completed(futures):
                results.append(future.result())
                bar.update(1)
    else:
        for i in indices:
            results.append(run_trial(scenario, grid, i, policy, out_dir, snapshot_every))
            bar.update(1)
    bar.close()

    results.sort(key=lambda r: r.index)
    summary = summarize(policy, results)
    write_summary(summary, out_dir)
    return summary


def run_trials(
    scenario: ScenarioFile,
    out_dir: Optional[str] = None,
    policies: Optional[Sequence[str]] = None,
    snapshot_every: Optional[int] = None,
    quiet: bool = False,
    parallel: bool = config.ENABLE_PARALLEL,
) -> Dict[str, TrialSummary]:
    """
    Run the scenario's trials for one or more policies on identical seeds

    Args:
        scenario: Parsed scenario
        out_dir: Output directory (scenario 'output' when None)
        policies: Policies to run (scenario 'policy' when None)
        snapshot_every: Union-map snapshot interval in ticks (scenario value when None)
        quiet: Hide progress bars and the summary banner
        parallel: Run trials in worker threads

    Returns:
        Policy name -> TrialSummary
    """
    tracker = TrialLogger(quiet=quiet)
    tracker.start()

    out = config.setup_folders(out_dir or scenario.output)
    policies = list(policies or [scenario['policy']])
    every = scenario['snapshot_every'] if snapshot_every is None else snapshot_every

    grid = load_world(scenario)
    to_sim_config(scenario, grid=grid).validate()
    _write(out / "scenario_echo.cfg", lambda p: p.write_text(emit_config(scenario), encoding='utf-8'))
    tracker.log_event('WORLD_LOADED', f"{grid.width}x{grid.height}, {grid.free_count} free cells")

    summaries = {}
    for policy in policies:
        summaries[policy] = run_policy(scenario, grid, policy, out, every, quiet, parallel)
        tracker.log_event('POLICY_DONE', policy)

    if len(policies) > 1:
        write_comparison(summaries, out)

    results = [r for s in summaries.values() for r in s.results]
    tracker.print_summary({
        'total_trials': len(results),
        'completed': sum(1 for r in results if r.ok),
        'failed': sum(1 for r in results if not r.ok),
    })
    return summaries


def write_comparison(summaries: Dict[str, TrialSummary], out_dir: Path) -> Path:
    """comparison.csv: mean metrics per policy plus payload share of full_share"""
    rows = []
    full_bytes = summaries['full_share'].mean('total_bytes') if 'full_share' in summaries else None
    for policy, summary in summaries.items():
        row = {'policy': policy}
        for column in SUMMARY_NUMERIC_FIELDS:
            row[f'{column}_mean'] = summary.mean(column)
            row[f'{column}_std'] = float(summary.aggregates.loc['std', column])
        if full_bytes:
            row['payload_vs_full_share'] = summary.mean('total_bytes') / full_bytes
        rows.append(row)
    frame = pd.DataFrame(rows)
    return _write(out_dir / "comparison.csv", lambda p: frame.to_csv(p, index=False, float_format=FLOAT_FORMAT))
