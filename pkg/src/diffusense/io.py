"""File formats: scenario/sweep configs, raw SH matrices, float WAV, CSV.

Raw matrix files start with one ASCII header line::

    DIFFUSENSE-SHRAW 1 order=<L> samples=<T> rate=<Hz>\\n

followed by ``(L+1)**2 * T`` little-endian float64 values, channel-major
(row ``i`` holds ACN channel ``i``). WAV files are 32-bit float,
``(L+1)**2`` channels in ACN order, N3D normalisation.
"""
import io
import json
import math
import os
import tempfile

import numpy as np
import yaml
from scipy.io import wavfile

from .experiments import DEFAULT_BETA, DEFAULT_ORDERS, DEFAULT_Q, SweepSpec, UsageError
from .field_sim import ConfigError, ScenarioConfig, Source
from .sh_math import Direction, n_channels, packing_directions

__all__ = [
    "ConfigFileError",
    "RAW_MAGIC",
    "atomic_write_bytes",
    "atomic_write_text",
    "load_scenario",
    "parse_scenario",
    "scenario_to_dict",
    "dump_scenario",
    "load_sweep",
    "parse_sweep",
    "write_raw",
    "read_raw",
    "write_wav",
    "read_wav",
    "read_signals",
    "write_block",
    "block_metadata",
]

RAW_MAGIC = "DIFFUSENSE-SHRAW"
RAW_VERSION = 1

SCENARIO_KEYS = {"order", "beta", "samples", "seed", "correlation", "ignore_sources",
                 "sample_rate", "sources"}
SOURCE_KEYS = {"azimuth", "elevation", "power"}
PACKING_KEYS = {"packing", "power"}
SWEEP_KEYS = {"experiment", "estimators", "orders", "q_values", "beta_values", "correlation",
              "samples", "seeds", "seed", "covariance_mode"}
TRANSITION_KEYS = {"experiment", "orders", "q_values", "samples", "seeds", "seed"}


class ConfigFileError(ValueError):
    """Config problem with location: ``field`` and (when known) ``line``."""

    def __init__(self, message, field=None, line=None, source=None):
        where = source or "<config>"
        if line is not None:
            where += f":{line}"
        prefix = f"{where}: " + (f"field '{field}': " if field else "")
        super().__init__(prefix + message)
        self.field = field
        self.line = line


# --- atomic writes ---------------------------------------------------------

def atomic_write_bytes(path, data):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


# --- YAML with line numbers ------------------------------------------------

def _line_map(text):
    """Map dotted key paths (``sources[0].power``) to 1-based line numbers."""
    lines = {}
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return lines

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = f"{path}.{k.value}" if path else str(k.value)
                lines[p] = k.start_mark.line + 1
                walk(v, p)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                p = f"{path}[{i}]"
                lines[p] = v.start_mark.line + 1
                walk(v, p)

    if root is not None:
        walk(root, "")
    return lines


def _load_yaml(text, source):
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigFileError(f"malformed document: {exc}",
                              line=None if mark is None else mark.line + 1, source=source)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigFileError("top level must be a mapping", line=1, source=source)
    return data, _line_map(text)


def _fail(message, field, lines, source, exc=ConfigFileError):
    line = lines.get(field)
    if line is None and field and "." in field:
        line = lines.get(field.split(".")[0])
    if exc is ConfigFileError:
        return ConfigFileError(message, field=field, line=line, source=source)
    where = (source or "<config>") + (f":{line}" if line else "")
    return exc(f"{where}: field '{field}': {message}")


def _check_keys(mapping, allowed, path, lines, source):
    for key in mapping:
        if key not in allowed:
            field = f"{path}.{key}" if path else str(key)
            raise _fail(f"unknown key (allowed: {', '.join(sorted(allowed))})", field, lines, source)


def _number(value, field, lines, source, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _fail(f"expected a number, got {value!r}", field, lines, source)
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise _fail(f"expected an integer, got {value!r}", field, lines, source)
        return int(value)
    if not math.isfinite(value):
        raise _fail("must be finite", field, lines, source)
    return float(value)


# --- scenario configs ------------------------------------------------------

def _parse_sources(raw, lines, source):
    if raw is None:
        return ()
    if isinstance(raw, dict):
        _check_keys(raw, PACKING_KEYS, "sources", lines, source)
        if "packing" not in raw:
            raise _fail("mapping form needs a 'packing' count", "sources", lines, source)
        q = _number(raw["packing"], "sources.packing", lines, source, int)
        if q < 1:
            raise _fail("packing count must be >= 1", "sources.packing", lines, source)
        power = _number(raw.get("power", 1.0), "sources.power", lines, source)
        return tuple(Source(d, power) for d in packing_directions(q))
    if not isinstance(raw, list):
        raise _fail("expected a list of sources or a {packing: Q} mapping", "sources", lines, source)
    out = []
    for i, item in enumerate(raw):
        path = f"sources[{i}]"
        if not isinstance(item, dict):
            raise _fail("each source must be a mapping", path, lines, source)
        _check_keys(item, SOURCE_KEYS, path, lines, source)
        for key in ("azimuth", "elevation"):
            if key not in item:
                raise _fail(f"missing '{key}' (degrees)", path, lines, source)
        az = _number(item["azimuth"], f"{path}.azimuth", lines, source)
        el = _number(item["elevation"], f"{path}.elevation", lines, source)
        if not -90.0 <= el <= 90.0:
            raise _fail("elevation must lie in [-90, 90] degrees", f"{path}.elevation", lines, source)
        power = _number(item.get("power", 1.0), f"{path}.power", lines, source)
        out.append(Source(Direction.from_degrees(az, el), power))
    return tuple(out)


def parse_scenario(text, source=None):
    """Parse a YAML scenario document into a :class:`ScenarioConfig`.

    Schema (angles in degrees)::

        order: 3                  # required
        beta: 0.5                 # required, relative noise level in [0, 1]
        samples: 1024
        seed: 0
        correlation: uncorrelated # or identical
        ignore_sources: false     # allow beta = 1 with sources listed
        sample_rate: 48000
        sources:                  # list form ...
          - {azimuth: 0, elevation: 0, power: 1}
        # ... or packing form:  sources: {packing: 7, power: 1}

    Unknown keys are rejected.
    """
    data, lines = _load_yaml(text, source)
    _check_keys(data, SCENARIO_KEYS, "", lines, source)
    for key in ("order", "beta"):
        if key not in data:
            raise ConfigFileError("required key missing", field=key, line=None, source=source)
    kwargs = {
        "order": _number(data["order"], "order", lines, source, int),
        "beta": _number(data["beta"], "beta", lines, source),
        "samples": _number(data.get("samples", 1024), "samples", lines, source, int),
        "seed": _number(data.get("seed", 0), "seed", lines, source, int),
        "sample_rate": _number(data.get("sample_rate", 48000), "sample_rate", lines, source),
        "sources": _parse_sources(data.get("sources"), lines, source),
    }
    corr = data.get("correlation", "uncorrelated")
    if not isinstance(corr, str):
        raise _fail("expected a string", "correlation", lines, source)
    kwargs["correlation"] = corr
    ign = data.get("ignore_sources", False)
    if not isinstance(ign, bool):
        raise _fail("expected true or false", "ignore_sources", lines, source)
    kwargs["ignore_sources"] = ign
    try:
        return ScenarioConfig(**kwargs)
    except ConfigError as exc:
        raise _fail(str(exc), exc.field, lines, source) from exc


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_scenario(text, source=os.fspath(path))


def scenario_to_dict(config):
    return {
        "order": int(config.order),
        "beta": float(config.beta),
        "samples": int(config.samples),
        "seed": int(config.seed),
        "correlation": config.correlation,
        "ignore_sources": bool(config.ignore_sources),
        "sample_rate": float(config.sample_rate),
        "sources": [{"azimuth": math.degrees(s.direction.azimuth),
                     "elevation": math.degrees(s.direction.elevation),
                     "power": float(s.power)} for s in config.sources],
    }


def dump_scenario(config):
    return yaml.safe_dump(scenario_to_dict(config), sort_keys=False)


# --- sweep specs -----------------------------------------------------------

def _list(data, key, default, lines, source, kind=float):
    raw = data.get(key, default)
    if not isinstance(raw, (list, tuple)):
        raise _fail("expected a list", key, lines, source, UsageError)
    if len(raw) == 0:
        raise _fail("must not be empty", key, lines, source, UsageError)
    if kind is str:
        if not all(isinstance(x, str) for x in raw):
            raise _fail("expected a list of names", key, lines, source, UsageError)
        return tuple(raw)
    try:
        return tuple(_number(x, f"{key}[{i}]", lines, source, kind) for i, x in enumerate(raw))
    except ConfigFileError as exc:
        raise UsageError(str(exc)) from exc


def parse_sweep(text, source=None):
    """Parse a YAML sweep document.

    Returns ``("sweep", SweepSpec)`` or ``("transition", dict)`` where the
    dict holds ``orders``, ``q_values``, ``samples``, ``seeds`` and ``seed``.
    Empty axes and unknown keys raise :class:`UsageError`.
    """
    data, lines = _load_yaml(text, source)
    kind = data.get("experiment", "sweep")
    if kind not in ("sweep", "transition"):
        raise _fail("must be 'sweep' or 'transition'", "experiment", lines, source, UsageError)
    allowed = SWEEP_KEYS if kind == "sweep" else TRANSITION_KEYS
    try:
        _check_keys(data, allowed, "", lines, source)
    except ConfigFileError as exc:
        raise UsageError(str(exc)) from exc

    def scalar(key, default):
        try:
            return _number(data.get(key, default), key, lines, source, int)
        except ConfigFileError as exc:
            raise UsageError(str(exc)) from exc

    if kind == "transition":
        return kind, {
            "orders": _list(data, "orders", (1, 2, 3, 4), lines, source, int),
            "q_values": _list(data, "q_values", DEFAULT_Q, lines, source, int),
            "samples": scalar("samples", 1024),
            "seeds": scalar("seeds", 10),
            "seed": scalar("seed", 0),
        }
    spec = SweepSpec(
        estimators=_list(data, "estimators", ("comedie", "dirac", "thiele_gover"), lines, source, str),
        orders=_list(data, "orders", DEFAULT_ORDERS, lines, source, int),
        q_values=_list(data, "q_values", DEFAULT_Q, lines, source, int),
        beta_values=_list(data, "beta_values", DEFAULT_BETA, lines, source),
        correlation=data.get("correlation", "uncorrelated"),
        samples=scalar("samples", 1024),
        seeds=scalar("seeds", 10),
        covariance_mode=data.get("covariance_mode", "empirical"),
        seed=scalar("seed", 0),
    )
    return kind, spec


def load_sweep(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_sweep(text, source=os.fspath(path))


# --- signal files ----------------------------------------------------------

def raw_bytes(block):
    header = (f"{RAW_MAGIC} {RAW_VERSION} order={block.order} samples={block.samples} "
              f"rate={block.sample_rate:g}\n")
    return header.encode("ascii") + np.ascontiguousarray(block.data, dtype="<f8").tobytes()


def write_raw(path, block):
    atomic_write_bytes(path, raw_bytes(block))


def read_raw(path):
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        payload = fh.read()
    if len(header) < 4 or header[0] != RAW_MAGIC:
        raise ValueError(f"{path}: not a {RAW_MAGIC} file")
    fields = dict(tok.split("=", 1) for tok in header[2:] if "=" in tok)
    try:
        order = int(fields["order"])
        samples = int(fields["samples"])
        rate = float(fields.get("rate", 48000))
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed header") from exc
    n = n_channels(order)
    if len(payload) != 8 * n * samples:
        raise ValueError(f"{path}: expected {8 * n * samples} data bytes, found {len(payload)}")
    data = np.frombuffer(payload, dtype="<f8").reshape(n, samples).astype(np.float64)
    return data, rate


def write_wav(path, block):
    rate = int(round(block.sample_rate))
    bio = io.BytesIO()
    wavfile.write(bio, rate, block.data.T.astype(np.float32))
    atomic_write_bytes(path, bio.getvalue())


def read_wav(path):
    rate, frames = wavfile.read(path)
    frames = np.asarray(frames)
    if frames.ndim == 1:
        frames = frames[:, None]
    if np.issubdtype(frames.dtype, np.integer):
        frames = frames / float(np.iinfo(frames.dtype).max)
    return np.ascontiguousarray(frames.T, dtype=np.float64), float(rate)


def read_signals(path):
    """Read a raw-matrix or WAV file; returns ``(channels x T array, rate)``."""
    with open(path, "rb") as fh:
        head = fh.read(len(RAW_MAGIC))
    if head == RAW_MAGIC.encode("ascii"):
        return read_raw(path)
    if head[:4] == b"RIFF":
        return read_wav(path)
    raise ValueError(f"{path}: unrecognised signal file (expected {RAW_MAGIC} or WAV)")


def block_metadata(block, config=None, fmt="raw"):
    meta = {
        "order": int(block.order),
        "channels": n_channels(block.order),
        "samples": int(block.samples),
        "sample_rate": float(block.sample_rate),
        "seed": None if block.seed is None else int(block.seed),
        "noise_power": float(block.noise_power),
        "generator": block.generator,
        "channel_order": "ACN",
        "normalization": "N3D",
        "format": fmt,
    }
    if config is not None:
        meta["scenario"] = scenario_to_dict(config)
    return meta


def write_block(path, block, fmt="raw", config=None):
    """Write ``block`` plus a JSON sidecar at ``path + '.json'``."""
    if fmt == "raw":
        write_raw(path, block)
    elif fmt == "wav":
        write_wav(path, block)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    sidecar = os.fspath(path) + ".json"
    atomic_write_text(sidecar, json.dumps(block_metadata(block, config, fmt), indent=2) + "\n")
    return sidecar

