"""Run reports: a config echo, a metrics block, and artifact paths.

The report file must be byte-stable across reruns of the same config,
so nothing time- or host-dependent is written here; wall time is shown
on stdout by the CLI instead.
"""

from dataclasses import dataclass, field

from .config import format_value, render_config


@dataclass
class RunReport:
    config_echo: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    artifact_paths: list = field(default_factory=list)


def render_report(report: RunReport) -> str:
    parts = ["[config]", render_config(report.config_echo).rstrip("\n")]
    parts.append("")
    parts.append("[metrics]")
    for key, value in report.metrics.items():
        parts.append(f"{key}\t{format_value(value)}")
    parts.append("")
    parts.append("[artifacts]")
    for p in report.artifact_paths:
        parts.append(p)
    return "\n".join(parts) + "\n"
