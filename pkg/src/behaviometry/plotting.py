"""Self-contained plot documents: inline SVG line plots plus embedded data.

The HTML output references no external resources; everything needed to
display it (data, styles, the small frame slider script) is inlined.
"""

from __future__ import annotations

import html
import json
import math
from pathlib import Path

import numpy as np

from ._fsutil import atomic_write_text
from .errors import ValidationError
from .signal import Modality, Signal

__all__ = ["emit_plot", "render_svg"]

_W, _H, _PAD = 720, 140, 28
_SVG_NS = "http://www.w3.org/2000/svg"

_STYLE = """
body{font-family:sans-serif;margin:16px;color:#222}
h1{font-size:16px} h2{font-size:13px;margin:8px 0 2px}
polyline{fill:none;stroke:#1f5fa8;stroke-width:1.2}
.peak{fill:#d62728} .axis{stroke:#999;stroke-width:.6}
.scatter circle{fill:#2ca02c}
"""

_SLIDER_JS = """
(function(){
var data=JSON.parse(document.getElementById('plot-data').textContent);
var lm=data.landmarks; if(!lm)return;
var svg=document.getElementById('scatter'), s=document.getElementById('frame');
var lab=document.getElementById('frame-label');
function draw(f){
 var pts=lm.frames[f]; var out='';
 for(var i=0;i<pts.length;i++){var p=pts[i]; if(p[0]===null)continue;
  var x=(p[0]-lm.xmin)/(lm.xmax-lm.xmin||1)*300+10;
  var y=(p[1]-lm.ymin)/(lm.ymax-lm.ymin||1)*300+10;
  out+='<circle cx="'+x.toFixed(2)+'" cy="'+y.toFixed(2)+'" r="2.5"></circle>';}
 svg.innerHTML=out; lab.textContent='frame '+f;}
s.max=lm.frames.length-1; s.oninput=function(){draw(+s.value)}; draw(0);
})();
"""


def _finite_list(col) -> list:
    return [None if not math.isfinite(v) else float(v) for v in col]


def _channel_svg(values: np.ndarray, peaks, label: str, bare: bool, y0: int = 0) -> str:
    n = len(values)
    finite = values[np.isfinite(values)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = hi - lo or 1.0

    def xy(i, v):
        x = _PAD + (i / max(n - 1, 1)) * (_W - 2 * _PAD)
        y = y0 + _H - _PAD - (v - lo) / span * (_H - 2 * _PAD)
        return x, y

    pts = " ".join("%.2f,%.2f" % xy(i, v) for i, v in enumerate(values) if math.isfinite(v))
    parts = [
        f'<line class="axis" x1="{_PAD}" y1="{y0 + _H - _PAD}" x2="{_W - _PAD}" '
        f'y2="{y0 + _H - _PAD}"></line>',
        f'<text x="{_PAD}" y="{y0 + 14}" font-size="11">{html.escape(label)}</text>',
        f'<polyline points="{pts}"></polyline>',
    ]
    for f in peaks:
        x, y = xy(f, values[f])
        parts.append(f'<circle class="peak" data-frame="{int(f)}" cx="{x:.2f}" cy="{y:.2f}" '
                     f'r="3"></circle>')
    if bare:
        return "\n".join(parts)
    return (f'<svg width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">' + "\n".join(parts)
            + "</svg>")


def _peak_map(signal: Signal, peaks) -> dict:
    out = {c: [] for c in range(signal.n_channels)}
    for key, frames in (peaks or {}).items():
        c = signal.channel_labels.index(key) if isinstance(key, str) else int(key)
        out[c] = sorted(int(f) for f in frames)
    return out


def render_svg(signal: Signal, peaks=None) -> str:
    """Standalone SVG document with one stacked panel per channel."""
    pk = _peak_map(signal, peaks)
    height = _H * signal.n_channels
    body = [_channel_svg(signal.data[:, c], pk[c], signal.channel_labels[c], True, y0=_H * c)
            for c in range(signal.n_channels)]
    return (f'<?xml version="1.0" encoding="UTF-8"?>\n<svg xmlns="{_SVG_NS}" width="{_W}" '
            f'height="{height}" viewBox="0 0 {_W} {height}">\n<style>{_STYLE}</style>\n'
            + "\n".join(body) + "\n</svg>\n")


def _landmark_payload(s: Signal) -> dict:
    dim = 3 if s.modality is Modality.LANDMARKS3D else 2
    pts = s.data.reshape(s.n_frames, -1, dim)[:, :, :2]
    xs, ys = pts[..., 0], pts[..., 1]
    ok = np.isfinite(xs) & np.isfinite(ys)
    bounds = (xs[ok].min(), xs[ok].max(), ys[ok].min(), ys[ok].max()) if ok.any() else (0, 1, 0, 1)
    return {
        **dict(zip(("xmin", "xmax", "ymin", "ymax"), (float(b) for b in bounds))),
        "frames": [[_finite_list(p) for p in frame] for frame in pts],
    }


def emit_plot(signal: Signal, out_path, overlays=(), peaks=None, fmt: str | None = None) -> Path:
    """Write a plot of ``signal`` to ``out_path``.

    ``peaks`` maps channel label or index to detected peak frames, drawn as
    markers. ``overlays`` are further signals (e.g. landmark tracks) whose
    per-frame point clouds are shown in a frame-by-frame scatter panel.
    ``fmt`` is ``"html"`` (default) or ``"svg"``.
    """
    if signal.n_frames == 0 or signal.n_channels == 0:
        raise ValidationError("cannot plot an empty signal")
    out_path = Path(out_path)
    fmt = fmt or ("svg" if out_path.suffix.lower() == ".svg" else "html")
    if fmt == "svg":
        atomic_write_text(out_path, render_svg(signal, peaks))
        return out_path
    if fmt != "html":
        raise ValidationError(f"unknown plot format {fmt!r}; supported: html, svg")

    pk = _peak_map(signal, peaks)
    landmark_sources = [s for s in (signal, *overlays)
                        if s.modality in (Modality.LANDMARKS2D, Modality.LANDMARKS3D)]
    payload = {
        "fps": signal.fps,
        "modality": signal.modality.value,
        "channels": {lab: _finite_list(signal.data[:, c])
                     for c, lab in enumerate(signal.channel_labels)},
        "peaks": {signal.channel_labels[c]: f for c, f in pk.items()},
        "overlays": [{"modality": s.modality.value, "labels": list(s.channel_labels),
                      "n_frames": s.n_frames} for s in overlays],
    }
    if landmark_sources:
        payload["landmarks"] = _landmark_payload(landmark_sources[0])

    panels = [f"<h2>{html.escape(lab)}</h2>" + _channel_svg(signal.data[:, c], pk[c], lab, False)
              for c, lab in enumerate(signal.channel_labels)]
    scatter = ""
    if landmark_sources:
        scatter = ('<h2 id="frame-label">frame 0</h2><input type="range" id="frame" min="0" '
                   'value="0"><br><svg class="scatter" id="scatter" width="320" height="320">'
                   '</svg>')
    data_json = json.dumps(payload).replace("</", "<\\/")
    doc = (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
        f"<title>{html.escape(signal.modality.value)} plot</title><style>{_STYLE}</style>"
        "</head><body>\n"
        f"<h1>{html.escape(signal.modality.value)}: {signal.n_frames} frames at "
        f"{signal.fps:g} Hz</h1>\n" + "\n".join(panels) + "\n" + scatter + "\n"
        f'<script type="application/json" id="plot-data">{data_json}</script>\n'
        f"<script>{_SLIDER_JS}</script>\n</body></html>\n"
    )
    atomic_write_text(out_path, doc)
    return out_path
