"""Methods-section text and numbered references for a processing setup."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ValidationError

_REFERENCES = {
    "3di": (
        "Sariyanidi E, Zampella CJ, Schultz RT, Tunc B (2024). Inequality-Constrained 3D "
        "Morphable Face Model Fitting. IEEE Transactions on Pattern Analysis and Machine "
        "Intelligence, 46(2), 1305-1318. https://doi.org/10.1109/TPAMI.2023.3334948"
    ),
    "bfm2009": (
        "Paysan P, Knothe R, Amberg B, Romdhani S, Vetter T (2009). A 3D Face Model for Pose "
        "and Illumination Invariant Face Recognition. In Proceedings of the IEEE International "
        "Conference on Advanced Video and Signal based Surveillance (AVSS), 296-301. "
        "https://doi.org/10.1109/AVSS.2009.58"
    ),
    "ibug51": (
        "Sariyanidi E, Zampella CJ, Schultz RT, Tunc B (2020). Can facial pose and expression "
        "be separated with weak perspective camera? In Proceedings of the IEEE/CVF Conference "
        "on Computer Vision and Pattern Recognition (CVPR), 7173-7182. "
        "https://doi.org/10.1109/CVPR42600.2020.00720"
    ),
    "facial_basis": (
        "Sariyanidi E, Yankowitz L, Schultz RT, Herrington JD, Tunc B, Cohn J (2025). Beyond "
        "FACS: Data-driven facial expression dictionaries, with application to predicting "
        "autism. In Proceedings of the IEEE International Conference on Automatic Face and "
        "Gesture Recognition (FG), 19, 1-10. https://doi.org/10.1109/fg61629.2025.11099288"
    ),
}

# name -> (display name, reference key or None)
_BACKENDS = {"3di": ("3DI", "3di"), "3di-lite": ("3DI-Lite", None)}
_MODELS = {
    "bfm-2009": ("Basel Face Model (BFM) 2009", "bfm2009"),
    "bfm2009": ("Basel Face Model (BFM) 2009", "bfm2009"),
    "bfmmm-19830": ("Basel Face Model (BFM) 2009", "bfm2009"),
}
_LANDMARKS = {"ibug51": ("iBUG-51 landmark template", "ibug51"),
              "ibug-51": ("iBUG-51 landmark template", "ibug51")}


@dataclass(frozen=True)
class CitationConfig:
    backend: str
    toolkit_version: str | None = None
    morphable_model: str | None = None
    camera_fov_deg: float | None = None
    landmark_template: str | None = None
    used_local_coefficients: bool = False

    def __post_init__(self):
        if not self.backend or not self.backend.strip():
            raise ValidationError("citation needs a backend name")


class _Refs:
    def __init__(self):
        self.keys = []

    def cite(self, key):
        if key is None:
            return ""
        if key not in self.keys:
            self.keys.append(key)
        return f" [{self.keys.index(key) + 1}]"


def citation_block(cfg: CitationConfig) -> str:
    """Methods paragraph followed by references numbered from [1].

    The local expression coefficient sentence and its reference appear only
    when ``used_local_coefficients`` is set.
    """
    from .. import __version__

    version = cfg.toolkit_version or __version__
    refs = _Refs()
    backend, backend_ref = _BACKENDS.get(cfg.backend.lower(), (cfg.backend, None))

    sentences = [f"Behavioral measurements were computed with behaviometry version {version}."]
    model_part = ""
    if cfg.morphable_model:
        model, model_ref = _MODELS.get(cfg.morphable_model.lower(), (cfg.morphable_model, None))
    sentences.append(f"Faces were modeled with {backend}{refs.cite(backend_ref)}")
    if cfg.morphable_model:
        model_part = f" using the {model}{refs.cite(model_ref)}"
    sentences[-1] += model_part + "."

    settings = []
    if cfg.camera_fov_deg is not None:
        settings.append(f"a camera field of view of {cfg.camera_fov_deg:g} degrees")
    if cfg.landmark_template:
        name, ref = _LANDMARKS.get(cfg.landmark_template.lower(), (cfg.landmark_template, None))
        settings.append(f"the {name}{refs.cite(ref)} for landmark definitions")
    if settings:
        sentences.append(f"{backend} was configured with " + " and ".join(settings) + ".")
    if cfg.used_local_coefficients:
        sentences.append("Localized expression coefficients were obtained with Facial Basis"
                         f"{refs.cite('facial_basis')}.")

    lines = [" ".join(sentences), ""]
    lines += [f"[{i}] {_REFERENCES[k]}" for i, k in enumerate(refs.keys, start=1)]
    return "\n".join(lines).rstrip() + "\n"
