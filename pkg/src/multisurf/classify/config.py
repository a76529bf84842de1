from __future__ import annotations

from dataclasses import asdict, dataclass, field

ALGORITHMS = ("random_forest", "linear_svm")


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None  # unlimited
    min_samples_split: int = 2
    features_per_split: int | None = None  # floor(sqrt(d)) when None
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be >= 1")


@dataclass(frozen=True)
class SVMParams:
    regularization: float = 1e-4
    epochs: int = 20
    one_vs_rest: bool = True
    standardize: bool = True
    keep_best: bool = True

    def __post_init__(self):
        if not self.regularization > 0:
            raise ValueError("regularization must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.one_vs_rest:
            raise ValueError("only one-vs-rest is supported")


@dataclass(frozen=True)
class TrainConfig:
    algorithm: str = "random_forest"
    seed: int = 0
    split_fraction: float = 0.8
    rf: ForestParams = field(default_factory=ForestParams)
    svm: SVMParams = field(default_factory=SVMParams)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError("split_fraction must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(
            algorithm=d["algorithm"],
            seed=d["seed"],
            split_fraction=d["split_fraction"],
            rf=ForestParams(**d.get("rf", {})),
            svm=SVMParams(**d.get("svm", {})),
        )
