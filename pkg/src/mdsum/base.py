"""Input validation shared by the estimators."""

from __future__ import annotations

from typing import Iterable, List

from sklearn.exceptions import NotFittedError

from .corpus import Example, TokenSeq


def check_examples(X, *, allow_empty: bool = False) -> List[Example]:
    """Materialise ``X`` as a list of Examples, rejecting anything else."""
    if isinstance(X, Example):
        X = [X]
    examples = list(X)
    for i, ex in enumerate(examples):
        if not isinstance(ex, Example):
            raise TypeError(f"X[{i}] is {type(ex).__name__}, expected Example")
    if not examples and not allow_empty:
        raise ValueError("expected at least one Example")
    return examples


def check_tokens(seq: Iterable[str], name: str = "tokens") -> TokenSeq:
    tokens = list(seq)
    for tok in tokens:
        if not isinstance(tok, str) or not tok or any(c.isspace() for c in tok):
            raise ValueError(f"{name} contains an invalid token {tok!r}")
    return tokens


def check_fraction(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_is_fitted(estimator, attribute: str) -> None:
    if not hasattr(estimator, attribute):
        raise NotFittedError(f"{type(estimator).__name__} is not fitted yet; call fit first")
