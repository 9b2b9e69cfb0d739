"""Input parameter distributions and their exact central-moment tensors.

A :class:`DistSpec` describes the joint distribution of the model's random
parameter vector: one marginal family per component, an optional
correlation block over normally distributed components, and an optional
finite mixture of sub-specs.  Hyperparameter fields are either free
(inferred) or fixed; the free fields map bijectively to an encoded vector
with the convention: means raw, standard deviations as natural logs,
correlations through atanh, skewnesses raw.

The encoded entries may be :class:`~momentode.dual.Dual1` scalars, in
which case every derived moment tensor carries first-order hyperparameter
derivatives (used for sensitivity/information analysis).
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .dual import Dual1, exp, log, tanh, value
from .errors import SpecValidationError

__all__ = [
    "Normal",
    "ShiftedGamma",
    "Uniform",
    "Degenerate",
    "CorrPair",
    "DistSpec",
    "InputMoments",
    "moments_of",
    "mixture_components",
]

_FAMILIES = {}


def _register(cls):
    _FAMILIES[cls.family] = cls
    return cls


def _is_scalarlike(x):
    return isinstance(x, (int, float, np.integer, np.floating, Dual1))


class _Marginal:
    """Shared behaviour for the marginal family dataclasses."""

    field_names: tuple = ()
    family: str = ""

    def _check_fixed(self):
        for f in self.fixed:
            if f not in self.field_names:
                raise SpecValidationError(
                    f"unknown fixed field {f!r} for family {self.family!r}"
                )
        for f in self.field_names:
            if not _is_scalarlike(getattr(self, f)):
                raise SpecValidationError(
                    f"field {f!r} of family {self.family!r} must be scalar"
                )

    def free_fields(self):
        return tuple(f for f in self.field_names if f not in self.fixed)

    def central_moments(self):
        """Exact (variance, third, fourth) central moments."""
        raise NotImplementedError

    def sample(self, rng, n):
        raise NotImplementedError


@_register
@dataclass(frozen=True)
class Normal(_Marginal):
    mu: object
    sigma: object
    fixed: tuple = ()

    family = "normal"
    field_names = ("mu", "sigma")

    def __post_init__(self):
        self._check_fixed()
        if value(self.sigma) < 0:
            raise SpecValidationError(f"normal sigma must be >= 0, got {self.sigma}")

    def central_moments(self):
        v = self.sigma**2
        return v, 0.0, 3.0 * v * v

    def sample(self, rng, n):
        return value(self.mu) + value(self.sigma) * rng.standard_normal(n)


@_register
@dataclass(frozen=True)
class ShiftedGamma(_Marginal):
    """Gamma translated (and reflected for negative skew) to match
    a prescribed mean, standard deviation and skewness."""

    mu: object
    sigma: object
    omega: object
    fixed: tuple = ()

    family = "shifted_gamma"
    field_names = ("mu", "sigma", "omega")

    def __post_init__(self):
        self._check_fixed()
        if value(self.sigma) < 0:
            raise SpecValidationError(f"shifted_gamma sigma must be >= 0, got {self.sigma}")
        if abs(value(self.omega)) > 2.0:
            raise SpecValidationError(
                f"shifted_gamma skewness must lie in [-2, 2], got {self.omega}"
            )

    def central_moments(self):
        v = self.sigma**2
        m3 = self.omega * self.sigma * v
        m4 = (3.0 + 1.5 * self.omega**2) * v * v
        return v, m3, m4

    def sample(self, rng, n):
        mu, sigma, omega = value(self.mu), value(self.sigma), value(self.omega)
        if abs(omega) < 1e-6 or sigma == 0.0:
            return mu + sigma * rng.standard_normal(n)
        k = 4.0 / omega**2
        s = sigma * abs(omega) / 2.0
        sign = 1.0 if omega > 0 else -1.0
        return mu - sign * 2.0 * sigma / abs(omega) + sign * rng.gamma(k, s, size=n)


@_register
@dataclass(frozen=True)
class Uniform(_Marginal):
    """Uniform on ``mu +- sqrt(3) sigma`` (mean/std parameterisation)."""

    mu: object
    sigma: object
    fixed: tuple = ()

    family = "uniform"
    field_names = ("mu", "sigma")

    def __post_init__(self):
        self._check_fixed()
        if value(self.sigma) < 0:
            raise SpecValidationError(f"uniform sigma must be >= 0, got {self.sigma}")

    def central_moments(self):
        v = self.sigma**2
        return v, 0.0, 1.8 * v * v

    def sample(self, rng, n):
        half = np.sqrt(3.0) * value(self.sigma)
        return rng.uniform(value(self.mu) - half, value(self.mu) + half, size=n)


@_register
@dataclass(frozen=True)
class Degenerate(_Marginal):
    """Point mass: every central moment is exactly zero."""

    mu: object
    fixed: tuple = ()

    family = "degenerate"
    field_names = ("mu",)

    def __post_init__(self):
        self._check_fixed()

    def central_moments(self):
        return 0.0, 0.0, 0.0

    def sample(self, rng, n):
        return np.full(n, value(self.mu))


@dataclass(frozen=True)
class CorrPair:
    a: str
    b: str
    rho: object
    fixed: bool = False


@dataclass(frozen=True)
class DistSpec:
    """Joint input distribution: components, correlation, optional mixture.

    Atomic specs hold ``components`` (ordered ``(name, marginal)`` pairs)
    plus correlation pairs.  Mixture specs hold ``mixture`` parts (each a
    ``(weight, DistSpec)`` pair over identically named components) and no
    components of their own.
    """

    components: tuple = ()
    correlation: tuple = ()
    mixture: tuple = None
    free_weights: bool = False

    def __post_init__(self):
        if self.mixture is not None:
            if self.components or self.correlation:
                raise SpecValidationError(
                    "mixture specs must not also declare components/correlation"
                )
            if not self.mixture:
                raise SpecValidationError("mixture must have at least one part")
            total = 0.0
            names = None
            for w, part in self.mixture:
                if value(w) < 0:
                    raise SpecValidationError(f"mixture weight {w} is negative")
                if not isinstance(part, DistSpec):
                    raise SpecValidationError("mixture parts must be DistSpec")
                total += value(w)
                pn = part.names
                if names is None:
                    names = pn
                elif pn != names:
                    raise SpecValidationError(
                        f"mixture parts disagree on components: {pn} vs {names}"
                    )
            if abs(total - 1.0) > 1e-12:
                raise SpecValidationError(f"mixture weights sum to {total}, not 1")
            return
        seen = set()
        for name, marg in self.components:
            if name in seen:
                raise SpecValidationError(f"duplicate component name {name!r}")
            seen.add(name)
            if not isinstance(marg, _Marginal):
                raise SpecValidationError(f"component {name!r} is not a marginal spec")
        for pair in self.correlation:
            for end in (pair.a, pair.b):
                if end not in seen:
                    raise SpecValidationError(f"correlation names unknown component {end!r}")
                if self.marginal(end).family != "normal":
                    raise SpecValidationError(
                        f"correlation allowed only between normal components; "
                        f"{end!r} is {self.marginal(end).family!r}"
                    )
            if pair.a == pair.b:
                raise SpecValidationError(f"correlation pair ({pair.a}, {pair.b}) is degenerate")
            if abs(value(pair.rho)) >= 1.0:
                raise SpecValidationError(f"correlation rho must satisfy |rho| < 1, got {pair.rho}")
        keys = [(min(p.a, p.b), max(p.a, p.b)) for p in self.correlation]
        if len(keys) != len(set(keys)):
            raise SpecValidationError("duplicate correlation pair")
        if self.correlation:
            C = self._corr_matrix_full(float)
            eigmin = np.linalg.eigvalsh(C).min()
            if eigmin < -1e-10:
                raise SpecValidationError(
                    f"correlation matrix not positive semi-definite (min eig {eigmin:.3e})"
                )

    # -- structure ---------------------------------------------------------
    @property
    def is_mixture(self):
        return self.mixture is not None

    @property
    def names(self):
        if self.is_mixture:
            return self.mixture[0][1].names
        return tuple(n for n, _ in self.components)

    @property
    def dim(self):
        return len(self.names)

    def marginal(self, name):
        for n, m in self.components:
            if n == name:
                return m
        raise KeyError(name)

    def index(self, name):
        return self.names.index(name)

    def random_indices(self):
        """Components that carry randomness (non-degenerate marginals)."""
        return tuple(
            i for i, (_, m) in enumerate(self.components) if m.family != "degenerate"
        )

    def _corr_matrix_full(self, dtype):
        d = self.dim
        C = np.eye(d, dtype=dtype) if dtype is float else np.eye(d) + np.zeros((d, d), dtype=object)
        for p in self.correlation:
            i, j = self.index(p.a), self.index(p.b)
            C[i, j] = C[j, i] = value(p.rho) if dtype is float else p.rho
        return C

    # -- free hyperparameter encoding ---------------------------------------
    def free_names(self):
        """Encoded-coordinate labels, in encoding order."""
        out = []
        if self.is_mixture:
            if self.free_weights:
                out += [f"w_{m}" for m in range(len(self.mixture) - 1)]
            for m, (_, part) in enumerate(self.mixture):
                out += [f"p{m}.{n}" for n in part.free_names()]
            return out
        for name, marg in self.components:
            for f in marg.free_fields():
                if f == "sigma":
                    out.append(f"ln_sigma_{name}")
                elif f == "omega":
                    out.append(f"omega_{name}")
                else:
                    out.append(f"mu_{name}")
        for p in self.correlation:
            if not p.fixed:
                out.append(f"atanh_rho_{p.a}_{p.b}")
        return out

    def xi(self):
        """Encode the current free hyperparameter values."""
        out = []
        if self.is_mixture:
            if self.free_weights:
                out += [value(w) for w, _ in self.mixture[:-1]]
            for _, part in self.mixture:
                out += list(part.xi())
            return np.array(out)
        for _, marg in self.components:
            for f in marg.free_fields():
                v = value(getattr(marg, f))
                out.append(np.log(v) if f == "sigma" else v)
        for p in self.correlation:
            if not p.fixed:
                out.append(np.arctanh(value(p.rho)))
        return np.array(out)

    def with_xi(self, xi):
        """Decode an encoded vector (floats or Dual1) into a new spec."""
        xi = list(xi)
        spec, rest = self._consume_xi(xi)
        if rest:
            raise SpecValidationError(
                f"encoded vector has {len(rest)} extra entries for this spec"
            )
        return spec

    def _consume_xi(self, xi):
        if self.is_mixture:
            parts = list(self.mixture)
            if self.free_weights:
                k = len(parts) - 1
                ws, xi = xi[:k], xi[k:]
                ws = list(ws) + [1.0 - sum(ws)]
            else:
                ws = [w for w, _ in parts]
            new_parts = []
            for w, (_, part) in zip(ws, parts):
                new_part, xi = part._consume_xi(xi)
                new_parts.append((w, new_part))
            return replace(self, mixture=tuple(new_parts)), xi
        comps = []
        for name, marg in self.components:
            updates = {}
            for f in marg.free_fields():
                v, xi = xi[0], xi[1:]
                updates[f] = exp(v) if f == "sigma" else v
            comps.append((name, replace(marg, **updates) if updates else marg))
        corr = []
        for p in self.correlation:
            if p.fixed:
                corr.append(p)
            else:
                v, xi = xi[0], xi[1:]
                corr.append(replace(p, rho=tanh(v)))
        return replace(self, components=tuple(comps), correlation=tuple(corr)), xi

    # -- serialisation -------------------------------------------------------
    def to_dict(self):
        if self.is_mixture:
            return {
                "mixture": [
                    {"weight": value(w), "spec": part.to_dict()} for w, part in self.mixture
                ],
                "free_weights": self.free_weights,
            }
        doc = {"parameters": []}
        for name, marg in self.components:
            entry = {"name": name, "family": marg.family}
            for f in marg.field_names:
                entry[f] = value(getattr(marg, f))
            if marg.fixed:
                entry["fixed"] = list(marg.fixed)
            doc["parameters"].append(entry)
        if self.correlation:
            doc["correlation"] = [
                {"a": p.a, "b": p.b, "rho": value(p.rho), "fixed": p.fixed}
                for p in self.correlation
            ]
        return doc

    @staticmethod
    def from_dict(doc):
        if "mixture" in doc:
            parts = tuple(
                (entry["weight"], DistSpec.from_dict(entry["spec"]))
                for entry in doc["mixture"]
            )
            return DistSpec(mixture=parts, free_weights=bool(doc.get("free_weights", False)))
        comps = []
        for entry in doc.get("parameters", []):
            family = entry.get("family")
            if family not in _FAMILIES:
                raise SpecValidationError(f"unknown family {family!r}")
            cls = _FAMILIES[family]
            kwargs = {f: entry[f] for f in cls.field_names}
            comps.append((entry["name"], cls(fixed=tuple(entry.get("fixed", ())), **kwargs)))
        corr = tuple(
            CorrPair(e["a"], e["b"], e["rho"], bool(e.get("fixed", False)))
            for e in doc.get("correlation", ())
        )
        return DistSpec(components=tuple(comps), correlation=corr)

    # -- exact sampling --------------------------------------------------------
    def sample(self, rng, n):
        """Draw ``n`` exact samples of the parameter vector, shape ``(n, d)``."""
        if self.is_mixture:
            parts = mixture_components(self)
            ws = np.array([value(w) for w, _ in parts])
            choice = rng.choice(len(parts), size=n, p=ws)
            out = np.empty((n, self.dim))
            for k, (_, part) in enumerate(parts):
                mask = choice == k
                if mask.any():
                    out[mask] = part.sample(rng, int(mask.sum()))
            return out
        d = self.dim
        out = np.empty((n, d))
        grouped = self._correlated_groups()
        in_group = {i for g in grouped for i in g}
        for i, (_, marg) in enumerate(self.components):
            if i not in in_group:
                out[:, i] = marg.sample(rng, n)
        for g in grouped:
            C = np.array([[value(self._rho_between(a, b)) for b in g] for a in g])
            L = np.linalg.cholesky(C + 1e-14 * np.eye(len(g)))
            z = rng.standard_normal((n, len(g))) @ L.T
            for k, i in enumerate(g):
                marg = self.components[i][1]
                out[:, i] = value(marg.mu) + value(marg.sigma) * z[:, k]
        return out

    def _correlated_groups(self):
        """Connected components of the correlation graph (size >= 2)."""
        if not self.correlation:
            return []
        adj = {}
        for p in self.correlation:
            adj.setdefault(self.index(p.a), set()).add(self.index(p.b))
            adj.setdefault(self.index(p.b), set()).add(self.index(p.a))
        seen, groups = set(), []
        for start in sorted(adj):
            if start in seen:
                continue
            stack, comp = [start], []
            while stack:
                u = stack.pop()
                if u in seen:
                    continue
                seen.add(u)
                comp.append(u)
                stack.extend(adj[u] - seen)
            groups.append(sorted(comp))
        return groups

    def _rho_between(self, i, j):
        if i == j:
            return 1.0
        for p in self.correlation:
            if {self.index(p.a), self.index(p.b)} == {i, j}:
                return p.rho
        return 0.0


@dataclass
class InputMoments:
    """Mean vector plus central-moment tensors of the input distribution.

    ``V`` is the (d, d) covariance, ``S`` the (d, d, d) coskewness and
    ``K`` the (d, d, d, d) cokurtosis tensor; ``S`` and ``K`` are
    supersymmetric by construction.
    """

    mean: np.ndarray
    V: np.ndarray
    S: np.ndarray
    K: np.ndarray

    @property
    def dim(self):
        return self.mean.shape[0]

    def restrict(self, idx):
        """Moment tensors over a subset of components (mean stays full)."""
        idx = list(idx)
        return InputMoments(
            self.mean,
            self.V[np.ix_(idx, idx)],
            self.S[np.ix_(idx, idx, idx)],
            self.K[np.ix_(idx, idx, idx, idx)],
        )


def moments_of(spec):
    """Exact input moments (mean, V, S, K) of an atomic spec.

    Mixtures must be decomposed with :func:`mixture_components` first: the
    propagation machinery transforms each mixture part separately before
    the mixture is reassembled at the output.
    """
    if spec.is_mixture:
        raise SpecValidationError(
            "moments_of expects an atomic spec; decompose mixtures first"
        )
    d = spec.dim
    margs = [m for _, m in spec.components]
    obj = any(
        isinstance(getattr(m, f), Dual1) for m in margs for f in m.field_names
    ) or any(isinstance(p.rho, Dual1) for p in spec.correlation)
    dt = object if obj else float

    mean = np.zeros(d, dtype=dt)
    m2 = np.zeros(d, dtype=dt)
    m3 = np.zeros(d, dtype=dt)
    m4 = np.zeros(d, dtype=dt)
    for i, m in enumerate(margs):
        mean[i] = m.mu
        m2[i], m3[i], m4[i] = m.central_moments()

    V = np.zeros((d, d), dtype=dt)
    for i in range(d):
        V[i, i] = m2[i]
    for p in spec.correlation:
        i, j = spec.index(p.a), spec.index(p.b)
        V[i, j] = V[j, i] = p.rho * margs[i].sigma * margs[j].sigma

    S = np.zeros((d, d, d), dtype=dt)
    for i in range(d):
        S[i, i, i] = m3[i]

    # Isserlis pairing is exact for the jointly normal block and reduces to
    # products of pair variances across independent components; only the
    # pure fourth moment of each non-normal marginal needs correcting.
    VV = np.multiply.outer(V, V)
    K = VV + VV.transpose(0, 2, 1, 3) + VV.transpose(0, 2, 3, 1)
    for i in range(d):
        K[i, i, i, i] = K[i, i, i, i] + (m4[i] - 3.0 * m2[i] * m2[i])
    return InputMoments(mean, V, S, K)


def mixture_components(spec):
    """Flatten a spec into ``[(weight, atomic spec)]``; atomics get weight 1."""
    if not spec.is_mixture:
        return [(1.0, spec)]
    out = []
    for w, part in spec.mixture:
        for w2, atom in mixture_components(part):
            out.append((w * w2, atom))
    return out
