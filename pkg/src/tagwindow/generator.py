"""Synthetic entry streams from the windowed Yule-Simon process.

Each step emits one entry. Its window size ``w`` is drawn first, then the
innovation probability for the entry is resolved, then ``w`` distinct tags are
drawn one by one: with probability alpha a brand-new tag, otherwise an
existing tag picked with probability proportional to its use count.

Random stream
-------------
All randomness comes from CPython's ``random.Random`` (MT19937 seeded with
``init_by_array`` over the 32-bit words of the seed; ``random()`` returns
``(a >> 5) * 2**26 + (b >> 6)) / 2**53`` from two consecutive outputs).
Per entry the uniforms are consumed in this order:

1. window size: one uniform, inverted through the sampler's cumulative table
   (``Constant`` samplers consume nothing);
2. user: one uniform ``u`` giving ``floor(u * num_users)`` when ``num_users > 1``;
3. for each slot of the window: one uniform ``u``; the tag is new when
   ``u < alpha``. Otherwise uniforms ``v`` are drawn until the urn position
   ``floor(v * N_visible)`` holds a tag not already in the window.

A slot with no eligible existing tag (empty vocabulary, or every visible tag
already in the window) consumes no uniform and produces a new tag, unless
alpha is exactly 0, in which case :class:`WindowUnsatisfiable` is raised.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .model import Entry, Lexicon, Stream

MAX_REDRAWS = 1000
MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    """Invalid generator configuration; ``field`` names the offending setting."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class WindowUnsatisfiable(RuntimeError):
    pass


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, run_index: int) -> int:
    """Seed for the ``run_index``-th member of an ensemble: splitmix64(seed XOR run_index)."""
    return splitmix64((seed ^ run_index) & MASK64)


# -- innovation-rate schedules ----------------------------------------------


@dataclass(frozen=True)
class ConstantAlpha:
    alpha: float

    def validate(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha_schedule", f"alpha must lie in [0, 1], got {self.alpha}")

    def resolve(self, w: int, n_annotations: int) -> float:
        return self.alpha

    def spec(self) -> str:
        return f"constant:{self.alpha!r}"


@dataclass(frozen=True)
class TimeDecay:
    """alpha_t = a * (N_t + 1) ** -b, clamped to [0, 1]; N_t is the sequence length at entry start."""

    a: float
    b: float

    def validate(self):
        if self.a < 0 or self.b < 0:
            raise ConfigError("alpha_schedule", "time decay needs a >= 0 and b >= 0")

    def resolve(self, w: int, n_annotations: int) -> float:
        return min(1.0, max(0.0, self.a * (n_annotations + 1) ** (-self.b)))

    def spec(self) -> str:
        return f"decay:{self.a!r}:{self.b!r}"


@dataclass(frozen=True)
class WindowCoupled:
    """alpha as a function of the entry's window size.

    ``table`` maps window sizes to alpha. Sizes between two keys are
    interpolated linearly in ln(w); sizes outside the keys take the value of
    the nearest key.
    """

    table: Mapping[int, float]

    def __post_init__(self):
        object.__setattr__(self, "table", dict(sorted(self.table.items())))

    def validate(self):
        if not self.table:
            raise ConfigError("alpha_schedule", "window-coupled table is empty")
        for w, a in self.table.items():
            if w < 1:
                raise ConfigError("alpha_schedule", f"window size {w} < 1")
            if not 0.0 <= a <= 1.0:
                raise ConfigError("alpha_schedule", f"alpha for w={w} outside [0, 1]")

    def __call__(self, w: float) -> float:
        keys = list(self.table)
        if w <= keys[0]:
            return self.table[keys[0]]
        if w >= keys[-1]:
            return self.table[keys[-1]]
        hi = bisect.bisect_left(keys, w)
        w1, w0 = keys[hi], keys[hi - 1]
        if w == w1:
            return self.table[w1]
        frac = math.log(w / w0) / math.log(w1 / w0)
        return self.table[w0] + frac * (self.table[w1] - self.table[w0])

    def resolve(self, w: int, n_annotations: int) -> float:
        cache = self.__dict__.setdefault("_cache", {})
        a = cache.get(w)
        if a is None:
            a = cache[w] = self(w)
        return a

    def spec(self) -> str:
        return "coupled:" + ",".join(f"{w}={a!r}" for w, a in self.table.items())


# -- window-size samplers ----------------------------------------------------


class _TableSampler:
    values: tuple[int, ...]
    cumulative: tuple[float, ...]

    def _set_pmf(self, pmf: Mapping[int, float]):
        items = sorted((int(w), float(p)) for w, p in pmf.items() if p > 0)
        values, cum, acc = [], [], 0.0
        for w, p in items:
            acc += p
            values.append(w)
            cum.append(acc)
        cum[-1] = 1.0
        object.__setattr__(self, "values", tuple(values))
        object.__setattr__(self, "cumulative", tuple(cum))

    def sample(self, rng: random.Random) -> int:
        return self.values[bisect.bisect_right(self.cumulative, rng.random())]


@dataclass(frozen=True)
class ConstantWindow:
    w: int

    def validate(self):
        if self.w < 1:
            raise ConfigError("window_sampler", f"window size must be >= 1, got {self.w}")

    def pmf(self) -> dict[int, float]:
        return {self.w: 1.0}

    def sample(self, rng: random.Random) -> int:
        return self.w

    def mean(self) -> float:
        return float(self.w)

    def spec(self) -> str:
        return f"constant:{self.w}"


@dataclass(frozen=True)
class UniformWindow(_TableSampler):
    lo: int
    hi: int

    def __post_init__(self):
        if 1 <= self.lo <= self.hi:
            self._set_pmf(self.pmf())

    def validate(self):
        if not 1 <= self.lo <= self.hi:
            raise ConfigError("window_sampler", f"need 1 <= lo <= hi, got {self.lo}..{self.hi}")

    def pmf(self) -> dict[int, float]:
        n = self.hi - self.lo + 1
        return {w: 1.0 / n for w in range(self.lo, self.hi + 1)}

    def mean(self) -> float:
        return (self.lo + self.hi) / 2

    def spec(self) -> str:
        return f"uniform:{self.lo}:{self.hi}"


@dataclass(frozen=True)
class PowerLawWindow(_TableSampler):
    """Discrete power law P(w) proportional to w**-exponent on 1..w_max."""

    exponent: float
    w_max: int

    def __post_init__(self):
        if self.w_max >= 1:
            self._set_pmf(self.pmf())

    def validate(self):
        if self.w_max < 1:
            raise ConfigError("window_sampler", f"w_max must be >= 1, got {self.w_max}")
        if not math.isfinite(self.exponent):
            raise ConfigError("window_sampler", "exponent must be finite")

    def pmf(self) -> dict[int, float]:
        weights = [w ** -self.exponent for w in range(1, self.w_max + 1)]
        z = math.fsum(weights)
        return {w: x / z for w, x in enumerate(weights, start=1)}

    def mean(self) -> float:
        return math.fsum(w * p for w, p in self.pmf().items())

    def spec(self) -> str:
        return f"powerlaw:{self.exponent!r}:{self.w_max}"


@dataclass(frozen=True)
class EmpiricalWindow(_TableSampler):
    table: Mapping[int, float]

    def __post_init__(self):
        object.__setattr__(self, "table", dict(sorted(self.table.items())))
        if self.table and all(p >= 0 for p in self.table.values()) and sum(self.table.values()) > 0:
            self._set_pmf(self.table)

    def validate(self):
        if not self.table:
            raise ConfigError("window_sampler", "empty PMF")
        if any(w < 1 for w in self.table):
            raise ConfigError("window_sampler", "PMF support must be >= 1")
        if any(p < 0 for p in self.table.values()):
            raise ConfigError("window_sampler", "negative probability in PMF")
        total = math.fsum(self.table.values())
        if abs(total - 1.0) > 1e-9:
            raise ConfigError("window_sampler", f"PMF sums to {total!r}, not 1")

    def pmf(self) -> dict[int, float]:
        return dict(self.table)

    def mean(self) -> float:
        return math.fsum(w * p for w, p in self.table.items())

    def spec(self) -> str:
        return "pmf:" + ",".join(f"{w}={p!r}" for w, p in self.table.items())


def _parse_table(text: str, field_name: str, value_type=float) -> dict[int, float]:
    table = {}
    for item in text.split(","):
        try:
            k, v = item.split("=")
            table[int(k)] = value_type(v)
        except ValueError:
            raise ConfigError(field_name, f"cannot parse table item {item!r}") from None
    return table


def parse_alpha_schedule(text: str):
    """Parse ``constant:A``, ``decay:A:B`` or ``coupled:W=A,W=A,...`` (a bare number means constant)."""
    kind, _, rest = text.partition(":")
    try:
        if not rest:
            return ConstantAlpha(float(kind))
        if kind == "constant":
            return ConstantAlpha(float(rest))
        if kind == "decay":
            a, b = rest.split(":")
            return TimeDecay(float(a), float(b))
    except ValueError:
        raise ConfigError("alpha_schedule", f"cannot parse {text!r}") from None
    if kind == "coupled":
        return WindowCoupled(_parse_table(rest, "alpha_schedule"))
    raise ConfigError("alpha_schedule", f"unknown schedule {kind!r}")


def parse_window_sampler(text: str):
    """Parse ``constant:W``, ``uniform:LO:HI``, ``powerlaw:GAMMA:WMAX`` or ``pmf:W=P,...``."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "constant":
            return ConstantWindow(int(rest))
        if kind == "uniform":
            lo, hi = rest.split(":")
            return UniformWindow(int(lo), int(hi))
        if kind == "powerlaw":
            g, wmax = rest.split(":")
            return PowerLawWindow(float(g), int(wmax))
    except ValueError:
        raise ConfigError("window_sampler", f"cannot parse {text!r}") from None
    if kind == "pmf":
        return EmpiricalWindow(_parse_table(rest, "window_sampler"))
    raise ConfigError("window_sampler", f"unknown sampler {kind!r}")


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    num_entries: int = 1000
    alpha_schedule: object = field(default_factory=lambda: ConstantAlpha(0.1))
    window_sampler: object = field(default_factory=lambda: ConstantWindow(1))
    num_users: int = 1
    per_entry_update: bool = False

    def validate(self) -> "GeneratorConfig":
        if not 0 <= self.seed <= MASK64:
            raise ConfigError("seed", "seed must be a 64-bit unsigned integer")
        if self.num_entries < 0:
            raise ConfigError("num_entries", "must be >= 0")
        if self.num_users < 1:
            raise ConfigError("num_users", "must be >= 1")
        self.alpha_schedule.validate()
        self.window_sampler.validate()
        return self

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "num_entries": self.num_entries,
            "alpha_schedule": self.alpha_schedule.spec(),
            "window_sampler": self.window_sampler.spec(),
            "num_users": self.num_users,
            "per_entry_update": self.per_entry_update,
        }


class GeneratorState:
    """Mutable process state: tag lexicon, urn of past annotations and the RNG.

    The urn holds the annotation sequence itself, so a uniform position in it
    selects tag i with probability k_i / N.
    """

    def __init__(self, seed: int = 0, *, per_entry_update: bool = False):
        self.rng = random.Random(seed)
        self.lexicon = Lexicon()
        self.urn: list[int] = []
        self.next_entry_index = 0
        self.per_entry_update = per_entry_update
        self.users = Lexicon()
        self.resources = Lexicon()

    @classmethod
    def from_sequence(cls, tags: Iterable[str], seed: int = 0) -> "GeneratorState":
        """State after the given tag sequence has been realised (one tag per step)."""
        state = cls(seed)
        for name in tags:
            state.urn.append(state.lexicon.add(name))
        return state

    def _new_tag(self) -> int:
        return self.lexicon.intern(f"t{len(self.lexicon)}")


def draw_tag(state: GeneratorState, alpha: float, *, exclude: Sequence[int] = (),
             commit: bool = True) -> tuple[int, bool]:
    """Draw one tag: new with probability ``alpha``, else an existing one by count.

    Tags in ``exclude`` (the current window) are rejected and redrawn. With
    ``commit=False`` the state's counts are left untouched, so repeated calls
    sample the same distribution; a would-be new tag is reported by the id it
    would receive.
    """
    lex = state.lexicon
    n = len(state.urn)
    eligible = len(lex) - len(exclude)
    rng = state.rng
    if eligible <= 0:
        if len(lex) and alpha == 0.0:
            raise WindowUnsatisfiable("no existing tag outside the window and alpha = 0")
        novel = True
    else:
        novel = rng.random() < alpha
    if novel:
        tag = state._new_tag() if commit else len(lex)
    else:
        urn = state.urn
        for _ in range(MAX_REDRAWS):
            tag = urn[int(rng.random() * n)]
            if tag not in exclude:
                break
        else:
            raise WindowUnsatisfiable(f"{MAX_REDRAWS} consecutive draws collided with the window")
    if commit:
        lex.use(tag)
        state.urn.append(tag)
    return tag, novel


def generate_entry(state: GeneratorState, config: GeneratorConfig) -> tuple[Entry, float]:
    """Generate the next entry; returns it with the alpha that was in force."""
    rng = state.rng
    random_ = rng.random
    lex = state.lexicon
    counts = lex._counts
    urn = state.urn
    w = config.window_sampler.sample(rng)
    if config.num_users > 1:
        user_name = f"u{int(random_() * config.num_users)}"
    else:
        user_name = "u0"
    n_start = len(urn)
    alpha = config.alpha_schedule.resolve(w, n_start)
    per_entry = state.per_entry_update
    vocab = len(counts)

    window: list[int] = []
    existing = 0
    for slot in range(w):
        if per_entry:
            eligible = vocab - existing
            n = n_start
        else:
            eligible = len(counts) - slot
            n = len(urn)
        if eligible <= 0:
            if counts and alpha == 0.0:
                raise WindowUnsatisfiable(
                    f"entry {state.next_entry_index}: cannot fill w={w} distinct tags with alpha = 0"
                )
            novel = True
        else:
            novel = random_() < alpha
        if novel:
            tag = lex.intern(f"t{len(counts)}")
        else:
            for _ in range(MAX_REDRAWS):
                tag = urn[int(random_() * n)]
                if tag not in window:
                    break
            else:
                raise WindowUnsatisfiable(
                    f"entry {state.next_entry_index}: {MAX_REDRAWS} draws collided with the window"
                )
            existing += 1
        window.append(tag)
        counts[tag] += 1
        if not per_entry:
            urn.append(tag)
    lex.total += w
    if per_entry:
        urn.extend(window)

    index = state.next_entry_index
    state.next_entry_index = index + 1
    entry = Entry(index, state.users.add(user_name), state.resources.add(f"r{index}"),
                  index, tuple(window))
    return entry, alpha


@dataclass
class SimulatedStream:
    stream: Stream
    true_alpha: list[float]
    config: GeneratorConfig


def generate_stream(config: GeneratorConfig) -> SimulatedStream:
    """Run the process for ``config.num_entries`` steps from a fresh state."""
    config.validate()
    state = GeneratorState(config.seed, per_entry_update=config.per_entry_update)
    entries: list[Entry] = []
    truth: list[float] = []
    for _ in range(config.num_entries):
        entry, alpha = generate_entry(state, config)
        entries.append(entry)
        truth.append(alpha)
    stream = Stream(entries, state.lexicon, state.users, state.resources)
    return SimulatedStream(stream, truth, config)


def write_truth(true_alpha: Sequence[float], fp) -> None:
    """Side file: the planted alpha of each entry, one decimal per line."""
    for a in true_alpha:
        fp.write(f"{a!r}\n")
