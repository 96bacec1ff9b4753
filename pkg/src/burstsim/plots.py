"""Figure rendering for run reports. Everything goes straight to files;
nothing here opens a window."""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .engine import US_PER_S


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_delay_cdf(curves: dict, path, title: str = "Short-task queueing delay") -> None:
    """curves: label -> list of (delay_s, fraction) points."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, points in curves.items():
        if not points:
            continue
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        ax.step(xs, ys, where="post", label=label)
    ax.set_xlabel("queueing delay (s)")
    ax.set_ylabel("fraction of tasks")
    ax.set_ylim(0.0, 1.02)
    ax.grid(alpha=0.3)
    ax.set_title(title)
    if len(curves) > 1:
        ax.legend()
    _save(fig, path)


def plot_concurrency_profile(profile, path) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 3.5))
    w = profile.coarse_window_us / US_PER_S
    xs = [i * w for i in range(len(profile.values))]
    ax.step(xs, profile.values, where="post")
    ax.axhline(profile.mean, color="gray", linestyle="--", linewidth=1,
               label=f"mean {profile.mean:.1f}")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("avg concurrent tasks")
    ax.grid(alpha=0.3)
    ax.set_title("Omniscient task concurrency")
    ax.legend()
    _save(fig, path)


def plot_transient_timeline(timeline, path, end_us: int) -> None:
    """timeline: (time_us, alive count) steps."""
    fig, ax = plt.subplots(figsize=(7.0, 3.5))
    xs = [t / US_PER_S for t, _ in timeline] + [end_us / US_PER_S]
    ys = [c for _, c in timeline] + [timeline[-1][1] if timeline else 0]
    ax.step(xs, ys, where="post")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("transient servers alive")
    ax.grid(alpha=0.3)
    ax.set_title("Transient fleet over the run")
    _save(fig, path)
