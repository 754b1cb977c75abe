"""Per-family hyperparameter bundles."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

CART, FOREST, GBM, GLM, SVM = "cart", "forest", "gbm", "glm", "svm"
FAMILIES = (CART, FOREST, GBM, GLM, SVM)


class ParamError(ValueError):
    pass


@dataclass(frozen=True)
class CartParams:
    complexity: float = 0.001
    min_node_size: int = 5

    def __post_init__(self):
        if self.complexity < 0:
            raise ParamError("complexity must be >= 0")
        if self.min_node_size < 1:
            raise ParamError("min_node_size must be >= 1")


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    m: int | None = None  # None -> floor(sqrt(p)), or floor(p/3) when regression
    min_node_size: int = 5
    regression: bool = False
    max_depth: int | None = None

    def __post_init__(self):
        if self.n_trees < 1:
            raise ParamError("a forest needs at least one tree")
        if self.m is not None and self.m < 1:
            raise ParamError("m must be >= 1")
        if self.min_node_size < 1:
            raise ParamError("min_node_size must be >= 1")

    def features_per_split(self, n_features: int) -> int:
        if self.m is not None:
            return min(self.m, n_features)
        k = n_features // 3 if self.regression else int(n_features ** 0.5)
        return max(1, k)


@dataclass(frozen=True)
class GbmParams:
    learning_rate: float = 0.1
    n_stages: int = 100
    max_depth: int | None = 3
    min_node_size: int = 1
    loss: str = "squared"

    def __post_init__(self):
        if not 0 < self.learning_rate <= 1:
            raise ParamError("learning rate must lie in (0, 1]")
        if self.n_stages < 1:
            raise ParamError("GBM needs at least one stage")
        if self.loss not in ("squared", "logistic"):
            raise ParamError(f"unknown GBM loss {self.loss!r}")


@dataclass(frozen=True)
class GlmParams:
    l2_penalty: float = 0.0
    threshold: float = 0.5
    max_iter: int = 100
    separation_penalty: float = 1.0

    def __post_init__(self):
        if self.l2_penalty < 0:
            raise ParamError("L2 penalty must be >= 0")
        if not 0 <= self.threshold <= 1:
            raise ParamError("decision threshold must lie in [0, 1]")


@dataclass(frozen=True)
class SvmParams:
    C: float = 1.0
    kernel: str = "rbf"
    gamma: float = 0.1
    degree: int = 3
    tol: float = 1e-3
    max_iter: int = 200_000

    def __post_init__(self):
        if self.C <= 0:
            raise ParamError("C must be > 0")
        if self.kernel not in ("linear", "poly", "rbf"):
            raise ParamError(f"unknown kernel {self.kernel!r}")
        if self.gamma <= 0:
            raise ParamError("gamma must be > 0")
        if self.degree < 1:
            raise ParamError("polynomial degree must be >= 1")


PARAM_TYPES = {CART: CartParams, FOREST: ForestParams, GBM: GbmParams, GLM: GlmParams, SVM: SvmParams}


def _param_type(family: str):
    try:
        return PARAM_TYPES[family]
    except KeyError:
        raise ParamError(f"unknown model family {family!r}; expected one of {', '.join(FAMILIES)}") from None


def default_params(family: str):
    return _param_type(family)()


def make_params(family: str, **values):
    cls = _param_type(family)
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ParamError(f"unknown {family} hyperparameter(s): {', '.join(sorted(unknown))}")
    return cls(**values)


def params_to_dict(params) -> dict:
    return asdict(params)
