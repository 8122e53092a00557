"""JSON run configurations.

A config has four blocks::

    {
      "model": {"m": 1, "n": 1, "q": 3, "num_params": 3,
                "theta": {"1,1": {"e": 0.5}},
                "terms": [{"row": 1, "col": 0, "word": "1", "coef": 1.0, "param": 1}],
                "mask": [[1, 1, "1.1"]],
                "true_params": [-1, 0, 4]},
      "simulation": {"T": 0.2, "dt": 0.001, "N": 2000, "seed": 0, "scheme": "heun"},
      "estimation": {"r": 3, "word_sets": {"W1": ["0.1.0"]}, "words": "W1", "trials": 20,
                     "solver": {"starts": 200, "box": 10, "tol": 1e-10}},
      "output": {"dir": "out"}
    }

``theta`` holds known word->value maps per "i,j" slot.  ``terms`` add
affine pieces coef * u_param (1-based ``param``; null for a constant).  Each
``mask`` entry [i, j, word] appends a plain unknown slot after the params
declared by ``num_params``.
"""
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .estimator import EstimationConfig, SolverConfig
from .sde_model import DEFAULT_NORM_CAP, Theta
from .shuffle_algebra import parse_word

BUNDLED = ("experiment1", "experiment2", "experiment3")


class ConfigError(ValueError):
    """Schema violation; ``path`` names the offending field."""

    def __init__(self, path, msg):
        super().__init__(f"{path}: {msg}")
        self.path = path


@dataclass
class RunConfig:
    name: str
    theta: Theta
    true_params: np.ndarray
    T: float = 0.2
    dt: float = 0.001
    N: int = 2000
    seed: int = 0
    scheme: str = "heun"
    cap: float = DEFAULT_NORM_CAP
    r: int = 3
    word_sets: dict = field(default_factory=dict)
    words: str = None
    trials: int = 20
    solver: SolverConfig = field(default_factory=SolverConfig)
    out_dir: str = "out"

    def estimation(self, words=None, **over):
        """EstimationConfig for one word set (name or explicit list)."""
        words = self.words if words is None else words
        if isinstance(words, str):
            if words not in self.word_sets:
                raise ConfigError("estimation.words", f"unknown word set {words!r}")
            words = self.word_sets[words]
        kw = dict(words=words, r=self.r, N=self.N, T=self.T, dt=self.dt, solver=self.solver,
                  seed=self.seed, scheme=self.scheme, cap=self.cap)
        kw.update(over)
        return EstimationConfig(**kw)


def _get(block, key, path, kind, default=...):
    if key not in block:
        if default is ...:
            raise ConfigError(f"{path}.{key}", "missing required field")
        return default
    val = block[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if kind is not None and (isinstance(val, bool) or not isinstance(val, kind)):
        raise ConfigError(f"{path}.{key}", f"expected {getattr(kind, '__name__', kind)}")
    return val


def _word(text, path, width):
    try:
        w = parse_word(text) if isinstance(text, str) else tuple(int(a) for a in text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, f"bad word {text!r} ({exc})") from None
    if any(not 0 <= a < width for a in w):
        raise ConfigError(path, f"word {text!r} uses letters outside 0..{width - 1}")
    return w


def _block(raw, key, required=True):
    if key not in raw:
        if required:
            raise ConfigError(key, "missing required block")
        return {}
    if not isinstance(raw[key], dict):
        raise ConfigError(key, "expected an object")
    return raw[key]


def _model(raw):
    mb = _block(raw, "model")
    m = _get(mb, "m", "model", int)
    n = _get(mb, "n", "model", int)
    q = _get(mb, "q", "model", int, 3)
    if m < 1 or n < 0 or q < 0:
        raise ConfigError("model", "need m >= 1, n >= 0, q >= 0")
    width = m + 1
    num_params = _get(mb, "num_params", "model", int, 0)
    mask = _get(mb, "mask", "model", list, [])
    total = num_params + len(mask)
    try:
        theta = Theta(m, n, q, total)
    except ValueError as exc:
        raise ConfigError("model.num_params", str(exc)) from None

    def slot(i, j, word, path):
        if not isinstance(i, int) or not 1 <= i <= m:
            raise ConfigError(path, f"row {i!r} outside 1..{m}")
        if not isinstance(j, int) or not 0 <= j <= n:
            raise ConfigError(path, f"column {j!r} outside 0..{n}")
        w = _word(word, path, width)
        if len(w) > q:
            raise ConfigError(path, f"word {word!r} longer than q={q}")
        return w

    for key, entries in _get(mb, "theta", "model", dict, {}).items():
        path = f"model.theta.{key}"
        try:
            i, j = (int(a) for a in key.split(","))
        except ValueError:
            raise ConfigError(path, "slot keys look like \"i,j\"") from None
        if not isinstance(entries, dict):
            raise ConfigError(path, "expected a word -> value map")
        for word, value in entries.items():
            w = slot(i, j, word, f"{path}.{word}")
            if not isinstance(value, (int, float)):
                raise ConfigError(f"{path}.{word}", "expected a number")
            theta.add_term(i, j, w, float(value))
    for k, t in enumerate(_get(mb, "terms", "model", list, [])):
        path = f"model.terms[{k}]"
        if not isinstance(t, dict):
            raise ConfigError(path, "expected an object")
        i = _get(t, "row", path, int)
        j = _get(t, "col", path, int)
        w = slot(i, j, _get(t, "word", path, None), f"{path}.word")
        coef = _get(t, "coef", path, float, 1.0)
        param = _get(t, "param", path, None, None)
        if param is not None:
            if not isinstance(param, int) or not 1 <= param <= num_params:
                raise ConfigError(f"{path}.param", f"param must be in 1..{num_params}")
            param -= 1
        theta.add_term(i, j, w, coef, param)
    seen = set()
    for k, entry in enumerate(mask):
        path = f"model.mask[{k}]"
        if not isinstance(entry, list) or len(entry) != 3:
            raise ConfigError(path, "expected [row, col, word]")
        w = slot(entry[0], entry[1], entry[2], path)
        key = (entry[0], entry[1], w)
        if key in seen:
            raise ConfigError(path, "slot masked twice")
        seen.add(key)
        theta.add_term(entry[0], entry[1], w, 1.0, num_params + k)
    true = _get(mb, "true_params", "model", list, [])
    if total and len(true) != total:
        raise ConfigError("model.true_params", f"expected {total} values, got {len(true)}")
    return theta, np.array(true, dtype=float)


def config_from_dict(raw, name="config"):
    if not isinstance(raw, dict):
        raise ConfigError("$", "config must be a JSON object")
    theta, true = _model(raw)
    sb = _block(raw, "simulation", required=False)
    eb = _block(raw, "estimation", required=False)
    ob = _block(raw, "output", required=False)
    cfg = RunConfig(name=raw.get("name", name), theta=theta, true_params=true)
    cfg.T = _get(sb, "T", "simulation", float, cfg.T)
    cfg.dt = _get(sb, "dt", "simulation", float, cfg.dt)
    cfg.N = _get(sb, "N", "simulation", int, cfg.N)
    cfg.seed = _get(sb, "seed", "simulation", int, cfg.seed)
    cfg.scheme = _get(sb, "scheme", "simulation", str, cfg.scheme)
    cfg.cap = _get(sb, "cap", "simulation", float, cfg.cap)
    if cfg.scheme not in ("heun", "midpoint"):
        raise ConfigError("simulation.scheme", "must be 'heun' or 'midpoint'")
    if cfg.T <= 0 or cfg.dt <= 0 or cfg.N < 1:
        raise ConfigError("simulation", "T, dt and N must be positive")
    if abs(round(cfg.T / cfg.dt) * cfg.dt - cfg.T) > 1e-9 * max(1.0, cfg.T):
        raise ConfigError("simulation.dt", f"dt={cfg.dt} does not divide T={cfg.T}")
    cfg.r = _get(eb, "r", "estimation", int, cfg.r)
    if cfg.r < 1:
        raise ConfigError("estimation.r", "must be >= 1")
    cfg.trials = _get(eb, "trials", "estimation", int, cfg.trials)
    width = theta.width
    for key, words in _get(eb, "word_sets", "estimation", dict, {}).items():
        path = f"estimation.word_sets.{key}"
        if not isinstance(words, list):
            raise ConfigError(path, "expected a list of words")
        ws = [_word(w, f"{path}[{k}]", width) for k, w in enumerate(words)]
        if len(set(ws)) != len(ws):
            raise ConfigError(path, "words must be distinct")
        if any(len(w) > theta.q for w in ws):
            raise ConfigError(path, f"words must have length <= q={theta.q}")
        if len(ws) != theta.num_unknowns:
            raise ConfigError(path, f"{len(ws)} words for {theta.num_unknowns} unknowns")
        cfg.word_sets[key] = ws
    cfg.words = _get(eb, "words", "estimation", str, next(iter(cfg.word_sets), None))
    if cfg.words is not None and cfg.words not in cfg.word_sets:
        raise ConfigError("estimation.words", f"unknown word set {cfg.words!r}")
    sv = _get(eb, "solver", "estimation", dict, {})
    try:
        cfg.solver = SolverConfig(
            starts=_get(sv, "starts", "estimation.solver", int, 200),
            box=_get(sv, "box", "estimation.solver", float, 10.0),
            tol=_get(sv, "tol", "estimation.solver", float, 1e-10),
            max_iter=_get(sv, "max_iter", "estimation.solver", int, 100),
            dedup=_get(sv, "dedup", "estimation.solver", float, 1e-6),
            seed=_get(sv, "seed", "estimation.solver", int, 0))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("estimation.solver", str(exc)) from None
    cfg.out_dir = _get(ob, "dir", "output", str, cfg.out_dir)
    return cfg


def parse_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON ({exc})") from None
    return config_from_dict(raw, name=str(path))


def bundled_config(name):
    """One of the shipped experiment configs, by name or number."""
    if str(name).isdigit():
        name = f"experiment{name}"
    if name not in BUNDLED:
        raise ConfigError("$", f"no bundled config {name!r}; choose from {BUNDLED}")
    text = resources.files("sigsde").joinpath(f"configs/{name}.json").read_text()
    return config_from_dict(json.loads(text), name=name)
