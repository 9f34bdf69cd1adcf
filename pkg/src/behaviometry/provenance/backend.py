"""Run external backend executables from command templates.

A template is a shell command with ``{placeholders}``, e.g.::

    {runtime} ./video_detect_landmarks {input} {output_dir}/rects.txt

Bound values are shell-quoted when needed. ``{runtime}`` defaults to the
``BEHAVIOMETRY_RUNTIME`` environment variable (empty for native binaries,
or a container prefix such as ``docker run --rm -v ...:/app image``).
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import os
import shlex
import string
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import BackendError, ConfigurationError
from .cache import (
    DEFAULT_RETENTION,
    RetentionPeriod,
    SidecarMetadata,
    hash_input,
    output_lock,
    should_reuse,
    write_sidecar,
)

log = logging.getLogger(__name__)

RUNTIME_ENV = "BEHAVIOMETRY_RUNTIME"
_EMPTY_SHA256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


@dataclass
class ExecutionRecord:
    cmd: str
    outputs: list
    executed: bool = False
    reused: bool = False
    dry_run: bool = False
    returncode: int | None = None
    stdout: str = ""
    stderr: str = ""
    sidecars: list = field(default_factory=list)
    reasons: dict = field(default_factory=dict)


def placeholders(template: str) -> list:
    return [name for _, name, _, _ in string.Formatter().parse(template) if name]


def _bind(template: str, bindings: dict, quote: bool) -> str:
    values = dict(bindings)
    values.setdefault("runtime", os.environ.get(RUNTIME_ENV, ""))
    missing = [n for n in placeholders(template) if n not in values]
    if missing:
        raise ConfigurationError(
            f"unbound template placeholders: {', '.join('{' + m + '}' for m in missing)}"
        )

    def render(name):
        v = str(values[name])
        # runtime is a command prefix, not a single argument
        return v if (not quote or name == "runtime") else shlex.quote(v)

    out = []
    for literal, name, spec, conv in string.Formatter().parse(template):
        out.append(literal)
        if name:
            if spec or conv:
                raise ConfigurationError(f"format specs are not supported in {{{name}}}")
            out.append(render(name))
    text = "".join(out)
    return text.strip() if quote else text


def materialize_command(template: str, bindings: dict) -> str:
    """Fill every placeholder; raises ConfigurationError when one is unbound."""
    return _bind(template, bindings, quote=True)


def _default_runner(cmd: str):
    return subprocess.run(cmd, shell=True, capture_output=True, text=True)


def run_backend(template: str, bindings: dict, output_paths, *, backend: str = "external",
                retention: RetentionPeriod = DEFAULT_RETENTION, dry_run: bool = False,
                force: bool = False, now: dt.datetime | None = None, runner=None,
                metadata: dict | None = None) -> ExecutionRecord:
    """Materialize ``template``, run it unless every output is fresh, and
    write one sidecar per declared output.

    ``output_paths`` may themselves contain placeholders. ``runner`` takes
    the command string and returns an object with ``returncode``,
    ``stdout`` and ``stderr`` (defaults to a shell subprocess).
    """
    cmd = materialize_command(template, bindings)
    outputs = [Path(_bind(str(p), bindings, quote=False)) for p in output_paths]
    record = ExecutionRecord(cmd=cmd, outputs=outputs)
    if dry_run:
        record.dry_run = True
        return record

    input_path = bindings.get("input")
    if input_path and Path(input_path).is_file():
        digest = hash_input(input_path)
    else:
        digest = _EMPTY_SHA256

    if not force and outputs:
        decisions = {str(p): should_reuse(p, retention, digest, now=now, current_cmd=cmd)
                     for p in outputs}
        record.reasons = {k: d.reason for k, d in decisions.items()}
        if all(decisions.values()):
            record.reused = True
            log.info("reusing cached outputs for %s", cmd)
            return record

    for p in outputs:
        p.parent.mkdir(parents=True, exist_ok=True)
    log.info("running backend: %s", cmd)
    proc = (runner or _default_runner)(cmd)
    record.executed = True
    record.returncode = proc.returncode
    record.stdout = proc.stdout or ""
    record.stderr = proc.stderr or ""
    if proc.returncode != 0:
        tail = record.stderr.strip().splitlines()[-5:]
        raise BackendError(
            f"backend exited with status {proc.returncode}: " + " | ".join(tail),
            cmd=cmd, returncode=proc.returncode, stdout=record.stdout, stderr=record.stderr,
        )
    missing = [str(p) for p in outputs if not p.exists()]
    if missing:
        raise BackendError(f"backend did not produce declared outputs: {', '.join(missing)}",
                           cmd=cmd, returncode=0, stdout=record.stdout, stderr=record.stderr)

    out_dir = bindings.get("output_dir") or (outputs[0].parent if outputs else ".")
    with output_lock(out_dir):
        for p in outputs:
            meta = SidecarMetadata.create(backend, cmd, input_path, digest, out_dir, now=now,
                                          **(metadata or {}))
            record.sidecars.append(write_sidecar(meta, p))
    return record


def load_templates(path) -> dict:
    """Read a JSON template config.

    Layout::

        {"runtime": "...",                       # optional default {runtime}
         "templates": {"name": {"cmd": "...", "outputs": [...],
                                "backend": "...", "metadata": {...}}},
         "pipelines": {"name": ["stage", ...]}}  # optional
    """
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read template config {path}: {exc}") from None
    templates = cfg.get("templates")
    if not isinstance(templates, dict) or not templates:
        raise ConfigurationError(f"{path}: no 'templates' object")
    for name, t in templates.items():
        if not isinstance(t, dict) or "cmd" not in t:
            raise ConfigurationError(f"{path}: template {name!r} has no 'cmd'")
    for name, stages in cfg.get("pipelines", {}).items():
        unknown = [s for s in stages if s not in templates]
        if unknown:
            raise ConfigurationError(f"{path}: pipeline {name!r} uses unknown stages {unknown}")
    return cfg


def run_pipeline(cfg: dict, stages, bindings: dict, **kwargs) -> list:
    """Run configured templates in order, sharing one set of bindings."""
    bindings = dict(bindings)
    if cfg.get("runtime") is not None:
        bindings.setdefault("runtime", cfg["runtime"])
    records = []
    for name in stages:
        t = cfg["templates"][name]
        records.append(run_backend(
            t["cmd"], bindings, t.get("outputs", []), backend=t.get("backend", name),
            metadata=t.get("metadata"), **kwargs,
        ))
    return records
