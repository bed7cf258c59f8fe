"""Quantitative evaluation harnesses.

Two protocols: obstacle-removal question answering (which removal most
improves a metric, ground truth by exhaustive simulation / re-optimization)
and a discrimination game (tell the optimized control points from a noisy
distractor, optionally with a numerical control that sees coordinates
instead of explanations). Reports are CSV plus a JSON summary and SVG
charts.
"""
from __future__ import annotations

import csv
import json
import string
from dataclasses import dataclass, field

import numpy as np

from .optimize import OptimizerConfig, run_optimization
from .rng import STREAM_CANDIDATE_ORDER, STREAM_DISTRACTOR, stream
from .scenario import Scenario, to_grid
from .simulator import SimulationError, simulate
from .trace import phi_e
from .explain.templates import make_template
from .explain.transport import LMClient

SIGMA_GRID = (0.02, 0.06, 0.1, 0.15, 0.2)

QUESTION_PHASES = ("initial", "optimized")
QUESTION_METRICS = ("time", "cost")
DESCRIPTION_TYPES = ("full", "step_level", "update")

_CONTEXT_SHORT = (
    "There is a simulation of a train moving along a track. The train wants to get "
    "to the end of the track as fast as possible and also for the track to cost as "
    "little as possible to construct. There are obstacles that slow the train down "
    "and each position on the track has a cost to construct. A differentiable "
    "simulation is used to optimise the track by updating control points that define "
    "where the track gets layed."
)

QA_TASK = (
    _CONTEXT_SHORT
    + "\n\nYou will be presented with a detailed breakdown of the events that occured "
    "in the initial simulation of the optimization. You will be provided with "
    "information about the objects, control points, events, a detailed description "
    "of the optimisation process, and a question about the effect of moving making "
    "a change to the state of the simulation. Answer the question with with the "
    "name of an object."
)

QA_TEMPLATE = make_template(
    QA_TASK,
    inputs=[
        ("object_positions", "String detailing grid positions and radii of simulation objects."),
        ("control_points", "String detailing grid positions of control points."),
        ("initial_events", "String detailing events from the initial trajectory."),
        ("optimisation_description", "A textual description of the control point optimization process."),
        ("question", "The specific question about the optimization or its effects."),
    ],
    outputs=[("answer", "A string, typically the name of an object, answering the question.")],
)

_DISCRIM_TASK = (
    _CONTEXT_SHORT
    + "\n\nYou will be presented with a detailed description of an optimization of "
    "control points, the grid positions of the objects in the simulation, the grid "
    "positions of the initial control points (i.e. the control points before "
    "optimization), and the grid positions of 2 candidate sets of control points.\n"
    "You will then be asked to choose between those 2 candidate sets to identify the "
    "id number of the set of control points that fits to the description.\n"
    "To do this, learn from the description of the optimization to know where to the "
    "control points have moved, and compare with the candidates."
)

_DISCRIM_ANSWER_DESC = (
    "The ID number of the set of grid positions of the optimised control points, "
    "among the 2 proposed candidates. Either 1 or 2. DO NOT INCLUDE ANY OTHER TEXT."
)

DISCRIMINATION_TEMPLATE = make_template(
    _DISCRIM_TASK,
    inputs=[
        ("seed", "Random seed parameter."),
        ("optimization_description", "A description of the optimization process of control points."),
        ("object_positions", "Names and grid positions of the objects in the simulation."),
        ("initial_control_points", "Grid positions of the initial control points."),
        ("candidate_control_points_1", "Grid positions of the first candidate set of control points."),
        ("candidate_control_points_2", "Grid positions of the second candidate set of control points."),
    ],
    outputs=[("answer", _DISCRIM_ANSWER_DESC)],
)

NUMERICAL_TEMPLATE = make_template(
    _DISCRIM_TASK,
    inputs=[
        ("seed", "Random seed parameter."),
        ("final_control_points", "Grid positions of the optimized control points."),
        ("object_positions", "Names and grid positions of the objects in the simulation."),
        ("initial_control_points", "Grid positions of the initial control points."),
        ("candidate_control_points_1", "Grid positions of the first candidate set of control points."),
        ("candidate_control_points_2", "Grid positions of the second candidate set of control points."),
    ],
    outputs=[("answer", _DISCRIM_ANSWER_DESC)],
)


# -- shared rendering -----------------------------------------------------------


def render_object_positions(scenario: Scenario) -> str:
    if not scenario.obstacles:
        return "(no objects)"
    lines = []
    for o in scenario.obstacles:
        gx, gy = to_grid(o.center)
        lines.append(f"{o.nickname}: position [{gx}, {gy}], radius {o.radius * 100:.1f}")
    return "\n".join(lines)


def render_grid_points(theta: np.ndarray) -> str:
    return "[" + ", ".join(f"[{to_grid(p)[0]}, {to_grid(p)[1]}]" for p in theta) + "]"


def grid_coords(theta: np.ndarray) -> np.ndarray:
    return np.array([to_grid(p) for p in theta], dtype=int)


# -- reports --------------------------------------------------------------------


@dataclass
class TaskRecord:
    task_id: str
    kind: str
    sigma: float | None
    desc_type: str
    answer: str
    correct: bool
    flagged: bool = False
    degenerate: bool = False
    extra: dict = field(default_factory=dict)


@dataclass
class EvalReport:
    records: list[TaskRecord] = field(default_factory=list)
    chance: float | None = None

    @property
    def scored(self) -> list[TaskRecord]:
        return [r for r in self.records if not r.degenerate]

    @property
    def accuracy(self) -> float:
        scored = self.scored
        return sum(r.correct for r in scored) / len(scored) if scored else float("nan")

    def accuracy_by(self, key) -> dict:
        groups: dict = {}
        for r in self.scored:
            groups.setdefault(key(r), []).append(r.correct)
        return {k: sum(v) / len(v) for k, v in sorted(groups.items(), key=lambda kv: str(kv[0]))}

    def summary_obj(self) -> dict:
        scored = self.scored
        return {
            "total": len(self.records),
            "scored": len(scored),
            "correct": int(sum(r.correct for r in scored)),
            "accuracy": self.accuracy,
            "chance": self.chance,
            "flagged": int(sum(r.flagged for r in self.records)),
            "degenerate": int(sum(r.degenerate for r in self.records)),
            "by_kind": {str(k): v for k, v in self.accuracy_by(lambda r: r.kind).items()},
            "by_sigma": {str(k): v for k, v in self.accuracy_by(lambda r: r.sigma).items()},
            "by_desc_type": {str(k): v for k, v in self.accuracy_by(lambda r: r.desc_type).items()},
        }


def write_report_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["task_id", "kind", "sigma", "desc_type", "answer", "correct"])
        for r in report.records:
            w.writerow([r.task_id, r.kind, "" if r.sigma is None else r.sigma, r.desc_type, r.answer, int(r.correct)])


def write_report_summary(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.summary_obj(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- question answering -----------------------------------------------------------


@dataclass
class QATask:
    scenario: Scenario
    question_kind: tuple[str, str]  # (initial|optimized, time|cost)
    options: list[str]
    ground_truth: str
    description_type: str
    description_text: str = ""
    initial_events_text: str = ""
    task_id: str = ""

    def __post_init__(self):
        phase, metric = self.question_kind
        if phase not in QUESTION_PHASES or metric not in QUESTION_METRICS:
            raise ValueError(f"unknown question kind {self.question_kind}")
        if self.ground_truth not in self.options:
            raise ValueError("ground truth must be among the options")

    @property
    def question_text(self) -> str:
        phase, metric = self.question_kind
        trajectory = "initial trajectory" if phase == "initial" else "final optimized trajectory"
        return f"Which obstacle would improve the {trajectory} {metric} the most if removed?"


def _metric(result, metric: str) -> float:
    return float(result.total_time) if metric == "time" else float(result.total_cost)


def _without(scenario: Scenario, nickname: str) -> Scenario:
    return Scenario(
        obstacles=[o for o in scenario.obstacles if o.nickname != nickname],
        ctrl_points=scenario.ctrl_points.copy(),
        cost_field=scenario.cost_field,
        physics=scenario.physics,
        seed=scenario.seed,
    )


def _initial_metric(scenario: Scenario, metric: str) -> float:
    try:
        return _metric(simulate(scenario.ctrl_points, scenario).detach(), metric)
    except SimulationError as e:
        return 1e3 * (1.0 + e.step / scenario.physics.n_steps)


def _optimized_metric(scenario: Scenario, metric: str, config: OptimizerConfig) -> float:
    run = run_optimization(scenario, config)
    last = run.signals.rewards[-1]
    return last.time if metric == "time" else last.cost


def qa_ground_truth(
    scenario: Scenario,
    question_kind: tuple[str, str],
    opt_config: OptimizerConfig | None = None,
) -> str:
    """Obstacle whose removal most improves the metric; ties break by name.

    ``initial`` questions simulate the current control points per removal;
    ``optimized`` questions re-run a full optimization per removal.
    """
    phase, metric = question_kind
    if not scenario.obstacles:
        raise ValueError("scenario has no obstacles")
    if phase == "initial":
        baseline = _initial_metric(scenario, metric)
        removed = {
            o.nickname: _initial_metric(_without(scenario, o.nickname), metric)
            for o in scenario.obstacles
        }
    else:
        config = opt_config or OptimizerConfig()
        baseline = _optimized_metric(scenario, metric, config)
        removed = {
            o.nickname: _optimized_metric(_without(scenario, o.nickname), metric, config)
            for o in scenario.obstacles
        }
    improvements = {name: baseline - m for name, m in removed.items()}
    return min(improvements, key=lambda n: (-improvements[n], n))


def normalize_answer(text: str) -> str:
    return text.strip().strip(string.punctuation + string.whitespace).lower()


def initial_events_text(scenario: Scenario, event_rate: int = 10) -> str:
    result = simulate(scenario.ctrl_points, scenario).detach()
    return "\n".join(line.text for line in phi_e(result, event_rate))


def run_qa(tasks: list[QATask], lm: LMClient) -> EvalReport:
    """Ask each question with the task's description; exact-nickname scoring."""
    report = EvalReport()
    values_list = [
        {
            "object_positions": render_object_positions(t.scenario),
            "control_points": render_grid_points(t.scenario.ctrl_points),
            "initial_events": t.initial_events_text,
            "optimisation_description": t.description_text,
            "question": t.question_text,
        }
        for t in tasks
    ]
    results = lm.complete_many(QA_TEMPLATE, values_list)
    chances = []
    for task, fields in zip(tasks, results):
        raw = fields["answer"]
        norm = normalize_answer(raw)
        matched = next((opt for opt in task.options if opt.lower() == norm), None)
        report.records.append(
            TaskRecord(
                task_id=task.task_id or f"qa-{len(report.records)}",
                kind="_".join(task.question_kind),
                sigma=None,
                desc_type=task.description_type,
                answer=raw,
                correct=matched == task.ground_truth,
                flagged=matched is None,
            )
        )
        chances.append(1.0 / len(task.options))
    report.chance = float(np.mean(chances)) if chances else None
    return report


# -- discrimination ---------------------------------------------------------------


@dataclass
class DiscriminationTask:
    scenario: Scenario
    target_theta: np.ndarray
    distractor_theta: np.ndarray
    sigma: float
    candidate_order_seed: int
    description_type: str
    mode: str = "explanation"  # explanation | numerical
    description_text: str = ""
    task_id: str = ""

    def __post_init__(self):
        if self.mode not in ("explanation", "numerical"):
            raise ValueError(f"unknown discrimination mode '{self.mode}'")

    def candidates(self) -> tuple[np.ndarray, np.ndarray, int]:
        """Candidate pair in randomized order; returns (c1, c2, target_position)."""
        rng = stream(self.candidate_order_seed, STREAM_CANDIDATE_ORDER)
        target_first = bool(rng.integers(0, 2))
        if target_first:
            return self.target_theta, self.distractor_theta, 1
        return self.distractor_theta, self.target_theta, 2


def make_distractor(target_theta: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Gaussian perturbation of the free control points; endpoints untouched."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    theta = np.asarray(target_theta, dtype=float).copy()
    if sigma > 0 and len(theta) > 2:
        noise = stream(seed, STREAM_DISTRACTOR).normal(0.0, sigma, size=(len(theta) - 2, 2))
        theta[1:-1] += noise
    return theta


def numerical_oracle(task: DiscriminationTask, cand1: np.ndarray, cand2: np.ndarray) -> str:
    """Non-LM chooser: nearest total squared grid distance to the target."""
    target = grid_coords(task.target_theta)
    d1 = int(np.sum((grid_coords(cand1) - target) ** 2))
    d2 = int(np.sum((grid_coords(cand2) - target) ** 2))
    return "1" if d1 <= d2 else "2"


def random_chooser(seed: int = 0):
    rng = stream(seed, STREAM_CANDIDATE_ORDER + 100)

    def choose(task, cand1, cand2) -> str:
        return str(int(rng.integers(1, 3)))

    return choose


def run_discrimination(tasks: list[DiscriminationTask], lm: LMClient | None = None, chooser=None) -> EvalReport:
    """Score each task; ``chooser(task, cand1, cand2)`` replaces the LM if given."""
    if lm is None and chooser is None:
        raise ValueError("need an LM client or a chooser")
    report = EvalReport()
    report.chance = 0.5
    for i, task in enumerate(tasks):
        cand1, cand2, target_pos = task.candidates()
        if np.array_equal(grid_coords(cand1), grid_coords(cand2)):
            report.records.append(
                TaskRecord(
                    task_id=task.task_id or f"discrim-{i}", kind=task.mode,
                    sigma=task.sigma, desc_type=task.description_type,
                    answer="", correct=False, degenerate=True,
                )
            )
            continue
        if chooser is not None:
            raw = chooser(task, cand1, cand2)
        else:
            common = {
                "seed": str(task.candidate_order_seed),
                "object_positions": render_object_positions(task.scenario),
                "initial_control_points": render_grid_points(task.scenario.ctrl_points),
                "candidate_control_points_1": render_grid_points(cand1),
                "candidate_control_points_2": render_grid_points(cand2),
            }
            if task.mode == "numerical":
                fields = lm.complete(
                    NUMERICAL_TEMPLATE,
                    {**common, "final_control_points": render_grid_points(task.target_theta)},
                )
            else:
                fields = lm.complete(
                    DISCRIMINATION_TEMPLATE,
                    {**common, "optimization_description": task.description_text},
                )
            raw = fields["answer"]
        answer = raw.strip()
        valid = answer in ("1", "2")
        report.records.append(
            TaskRecord(
                task_id=task.task_id or f"discrim-{i}", kind=task.mode,
                sigma=task.sigma, desc_type=task.description_type,
                answer=answer, correct=valid and int(answer) == target_pos,
                flagged=not valid,
            )
        )
    return report


def discrimination_suite(
    scenario: Scenario,
    target_theta: np.ndarray,
    sigmas=SIGMA_GRID,
    distractor_seeds=(0, 1),
    order_seeds=(0, 1),
    description_type: str = "full",
    description_text: str = "",
    mode: str = "explanation",
    instance_id: str = "inst",
) -> list[DiscriminationTask]:
    """All (sigma, distractor seed, order seed) tasks for one optimized instance."""
    tasks = []
    for sigma in sigmas:
        for ds in distractor_seeds:
            distractor = make_distractor(target_theta, sigma, ds)
            for os_ in order_seeds:
                tasks.append(
                    DiscriminationTask(
                        scenario=scenario,
                        target_theta=np.asarray(target_theta, dtype=float),
                        distractor_theta=distractor,
                        sigma=float(sigma),
                        candidate_order_seed=int(os_ * 10_000 + ds * 100 + round(sigma * 1000)),
                        description_type=description_type,
                        mode=mode,
                        description_text=description_text,
                        task_id=f"{instance_id}-s{sigma}-d{ds}-o{os_}",
                    )
                )
    return tasks


# -- plots -------------------------------------------------------------------------


def qa_plot_svg(report: EvalReport, path) -> None:
    """Bar chart of QA accuracy per question kind, one bar group per description type."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    kinds = sorted({r.kind for r in report.scored})
    desc_types = sorted({r.desc_type for r in report.scored})
    by = {(r.kind, r.desc_type): [] for r in report.scored}
    for r in report.scored:
        by[(r.kind, r.desc_type)].append(r.correct)
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.8 / max(len(desc_types), 1)
    xs = np.arange(len(kinds))
    for j, dt in enumerate(desc_types):
        heights = [np.mean(by.get((k, dt), [0.0])) for k in kinds]
        ax.bar(xs + j * width, heights, width, label=dt)
    if report.chance is not None:
        ax.axhline(report.chance, color="gray", linestyle="--", linewidth=1, label="chance")
    ax.set_xticks(xs + width * (len(desc_types) - 1) / 2)
    ax.set_xticklabels(kinds, rotation=20)
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def discrimination_plot_svg(report: EvalReport, path) -> None:
    """Success rate against distractor noise, one line per description type."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    desc_types = sorted({r.desc_type for r in report.scored})
    fig, ax = plt.subplots(figsize=(7, 4))
    for dt in desc_types:
        recs = [r for r in report.scored if r.desc_type == dt]
        sigmas = sorted({r.sigma for r in recs})
        ys = [np.mean([r.correct for r in recs if r.sigma == s]) for s in sigmas]
        ax.plot(sigmas, ys, marker="o", label=dt)
    ax.axhline(0.5, color="gray", linestyle="--", linewidth=1, label="chance")
    ax.set_xlabel("distractor noise sigma")
    ax.set_ylabel("success rate")
    ax.set_ylim(0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
