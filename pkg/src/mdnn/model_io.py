"""Model persistence: one tensor container per parameter plus text manifests.

A model directory holds ``model.txt`` (kind + architecture as key=value
lines), ``params.txt`` (parameter names in serialization order) and one
``.ntc`` file per parameter.  A fusion bundle is a directory with the three
model subdirectories and ``bundle.txt`` recording the concatenation order and
a SHA-256 of each sub-model's parameter bytes, so frozen-sub-model integrity
is checkable at load time.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

from .audio_net import AudioNetConfig, build_audio_net
from .data import read_container, write_container
from .errors import FormatError
from .fusion import CONCAT_ORDER, build_fusion_head
from .layers import Net
from .video_net import VideoNetConfig, build_video_net


def _kv_write(path, mapping: dict):
    with open(path, "w") as f:
        for k, v in mapping.items():
            f.write(f"{k}={v}\n")


def _kv_read(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{path}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(p) for p in s.split("x"))


def model_kind(net: Net) -> str:
    cfg = getattr(net, "config", None)
    if isinstance(cfg, AudioNetConfig):
        return "audio"
    if isinstance(cfg, VideoNetConfig):
        return "video"
    return "fusion"


def _arch_mapping(net: Net) -> dict:
    kind = model_kind(net)
    out = {"kind": kind}
    if kind == "audio":
        c = net.config
        out.update(input_shape="x".join(map(str, c.input_shape)),
                   conv_filters=c.conv_filters,
                   kernel="x".join(map(str, c.kernel)),
                   dropout_rate=c.dropout_rate,
                   dense1_width=c.dense1_width,
                   num_classes=c.num_classes)
    elif kind == "video":
        c = net.config
        out.update(input_shape="x".join(map(str, c.input_shape)),
                   stage_channels="x".join(map(str, c.stage_channels)),
                   blocks_per_stage=c.blocks_per_stage,
                   num_classes=c.num_classes)
    return out


def _build_from_mapping(m: dict) -> Net:
    kind = m.get("kind")
    if kind == "audio":
        cfg = AudioNetConfig(input_shape=_ints(m["input_shape"]),
                             conv_filters=int(m["conv_filters"]),
                             kernel=_ints(m["kernel"]),
                             dropout_rate=float(m["dropout_rate"]),
                             dense1_width=int(m["dense1_width"]),
                             num_classes=int(m["num_classes"]))
        return build_audio_net(cfg, rng_seed=0)
    if kind == "video":
        cfg = VideoNetConfig(input_shape=_ints(m["input_shape"]),
                             stage_channels=_ints(m["stage_channels"]),
                             blocks_per_stage=int(m["blocks_per_stage"]),
                             num_classes=int(m["num_classes"]))
        return build_video_net(cfg, rng_seed=0)
    if kind == "fusion":
        return build_fusion_head(rng_seed=0)
    raise FormatError(f"unknown model kind {kind!r}")


def _param_filename(name: str) -> str:
    return name.replace("/", "__").replace(".", "-") + ".ntc"


def param_sha256(net: Net) -> str:
    return hashlib.sha256(net.param_bytes()).hexdigest()


def save_net(directory, net: Net):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _kv_write(directory / "model.txt", _arch_mapping(net))
    names = list(net.params)
    (directory / "params.txt").write_text("".join(n + "\n" for n in names))
    for name in names:
        write_container(directory / _param_filename(name), net.params[name])


def load_net(directory) -> Net:
    directory = Path(directory)
    net = _build_from_mapping(_kv_read(directory / "model.txt"))
    names = (directory / "params.txt").read_text().split()
    if names != list(net.params):
        raise FormatError(f"{directory}: parameter list does not match architecture")
    for name in names:
        net.set_param(name, read_container(directory / _param_filename(name)))
    net.zero_grad()
    return net


def save_bundle(directory, video_net: Net, audio_net: Net, fusion_net: Net):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_net(directory / "video", video_net)
    save_net(directory / "audio", audio_net)
    save_net(directory / "fusion", fusion_net)
    _kv_write(directory / "bundle.txt", {
        "concat_order": ",".join(CONCAT_ORDER),
        "video_sha256": param_sha256(video_net),
        "audio_sha256": param_sha256(audio_net),
        "fusion_sha256": param_sha256(fusion_net),
    })


def load_bundle(directory):
    directory = Path(directory)
    meta = _kv_read(directory / "bundle.txt")
    if meta.get("concat_order") != ",".join(CONCAT_ORDER):
        raise FormatError(f"{directory}: unexpected concat order {meta.get('concat_order')!r}")
    nets = {}
    for part in ("video", "audio", "fusion"):
        nets[part] = load_net(directory / part)
        digest = param_sha256(nets[part])
        if digest != meta.get(f"{part}_sha256"):
            raise FormatError(f"{directory}: {part} parameter hash mismatch")
    return nets["video"], nets["audio"], nets["fusion"]
