"""Turn recorded judge transcripts into score-token logprob features.

A transcript arrives pre-tokenized, each token carrying its own logprob and
the top-k alternatives at that position. Finding the score position uses
three stages, tried in order: the literal "Score:" anchor, a keyword
("score"/"rating") followed closely by a rating digit, and finally a backward
scan for the last rating-digit token.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .core import DataError, FeatureVector, RatingScale

STAGE_ANCHORED = "anchored"
STAGE_KEYWORD = "keyword"
STAGE_BACKWARD = "backward"


class ExtractionFailure(Exception):
    """No rating digit could be located anywhere in the transcript."""


@dataclass(frozen=True)
class ExtractConfig:
    """Extraction knobs; defaults match common judge output formats."""

    anchor: str = "Score:"
    anchor_span: int = 3  # anchor may split across up to this many tokens
    keywords: tuple[str, ...] = ("score", "rating")
    window: int = 8  # tokens searched after a keyword for the digit
    markers: tuple[str, ...] = ("▁", "Ġ")  # sentence-piece, byte-BPE
    floor: float = -11.5  # log(1e-5), for rating tokens absent from top-k
    nan_fill: float = -100.0


def _sort_top_k(top_k) -> tuple[tuple[str, float], ...]:
    def key(pair):
        lp = pair[1]
        return (1, 0.0) if math.isnan(lp) else (0, -lp)

    return tuple(sorted(((t, float(lp)) for t, lp in top_k), key=key))


@dataclass(frozen=True)
class TokenLogprobEntry:
    """One generated token with its logprob and top-k alternatives."""

    token_text: str
    logprob: float
    top_k: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        for _, lp in self.top_k:
            if not math.isnan(lp) and lp > 0:
                raise ValueError(f"top-k logprob must be <= 0, got {lp}")
        if not math.isnan(self.logprob) and self.logprob > 0:
            raise ValueError(f"logprob must be <= 0, got {self.logprob}")
        object.__setattr__(self, "top_k", _sort_top_k(self.top_k))


@dataclass(frozen=True)
class ExtractionRecord:
    sample_id: str
    tokens: tuple[TokenLogprobEntry, ...]
    declared_score: int | None = None

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValueError("transcript has no tokens")


@dataclass(frozen=True)
class ExtractionResult:
    score_position: int
    stage_used: str
    features: FeatureVector
    extracted_score: int
    declared_mismatch: bool = False


def normalize_token(raw: str, markers: tuple[str, ...] = ExtractConfig.markers) -> str:
    """Strip leading whitespace and sentence-piece style markers."""
    text = raw
    while True:
        stripped = text.lstrip()
        for marker in markers:
            if stripped.startswith(marker):
                stripped = stripped[len(marker) :]
        if stripped == text:
            return text
        text = stripped


def _digit_value(text: str, scale: RatingScale) -> int | None:
    for label in scale.labels:
        if text == str(label):
            return label
    return None


def find_score_position(
    rec: ExtractionRecord,
    scale: RatingScale,
    cfg: ExtractConfig = ExtractConfig(),
) -> tuple[int, str]:
    """Locate the rating-digit token; returns (token index, stage name)."""
    norm = [normalize_token(t.token_text, cfg.markers) for t in rec.tokens]
    n = len(norm)

    # Stage 1: literal anchor, possibly split across adjacent tokens and
    # tolerating a trailing space. Only the first anchor occurrence counts.
    anchor_end = None
    for i in range(n):
        cat = ""
        for w in range(min(cfg.anchor_span, n - i)):
            cat += norm[i + w]
            if cat.rstrip() == cfg.anchor:
                anchor_end = i + w
                break
            if len(cat.rstrip()) >= len(cfg.anchor):
                break
        if anchor_end is not None:
            break
    if anchor_end is not None:
        for j in range(anchor_end + 1, n):
            if _digit_value(norm[j], scale) is not None:
                return j, STAGE_ANCHORED

    # Stage 2: case-insensitive keyword followed by a digit within the window.
    for i in range(n):
        low = norm[i].lower()
        if any(kw in low for kw in cfg.keywords):
            for j in range(i + 1, min(i + 1 + cfg.window, n)):
                if _digit_value(norm[j], scale) is not None:
                    return j, STAGE_KEYWORD

    # Stage 3: backward scan for the last rating digit.
    for j in range(n - 1, -1, -1):
        if _digit_value(norm[j], scale) is not None:
            return j, STAGE_BACKWARD

    raise ExtractionFailure(
        f"no rating digit in transcript {rec.sample_id!r}"
    )


def build_feature_vector(
    entry: TokenLogprobEntry,
    scale: RatingScale,
    floor: float = ExtractConfig.floor,
    nan_fill: float = ExtractConfig.nan_fill,
    markers: tuple[str, ...] = ExtractConfig.markers,
) -> FeatureVector:
    """Logprob of each rating token "1".."K" from the entry's top-k.

    Slot j always holds label j's logprob: a missing rating token gets the
    floor, a NaN logprob gets the NaN fill, so the output is always finite.
    """
    values = []
    for label in scale.labels:
        want = str(label)
        lp = None
        for text, cand in entry.top_k:
            if normalize_token(text, markers) == want:
                lp = cand
                break
        if lp is None:
            lp = floor
        elif math.isnan(lp):
            lp = nan_fill
        values.append(float(lp))
    return FeatureVector(tuple(values))


def extract(
    rec: ExtractionRecord,
    scale: RatingScale,
    cfg: ExtractConfig = ExtractConfig(),
) -> ExtractionResult:
    pos, stage = find_score_position(rec, scale, cfg)
    entry = rec.tokens[pos]
    features = build_feature_vector(entry, scale, cfg.floor, cfg.nan_fill, cfg.markers)
    score = _digit_value(normalize_token(entry.token_text, cfg.markers), scale)
    assert score is not None  # guaranteed by find_score_position
    mismatch = rec.declared_score is not None and rec.declared_score != score
    return ExtractionResult(
        score_position=pos,
        stage_used=stage,
        features=features,
        extracted_score=score,
        declared_mismatch=mismatch,
    )


# ---------------------------------------------------------------------------
# Line-delimited transcript files.
# ---------------------------------------------------------------------------


def _parse_logprob(value) -> float:
    if value is None:
        return math.nan
    return float(value)


def parse_record(obj: dict) -> ExtractionRecord:
    try:
        tokens = tuple(
            TokenLogprobEntry(
                token_text=str(t["text"]),
                logprob=_parse_logprob(t.get("logprob")),
                top_k=tuple(
                    (str(text), _parse_logprob(lp)) for text, lp in t.get("top_k", [])
                ),
            )
            for t in obj["tokens"]
        )
        declared = obj.get("declared_score")
        return ExtractionRecord(
            sample_id=str(obj["sample_id"]),
            tokens=tokens,
            declared_score=int(declared) if declared is not None else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad transcript record: {exc}") from exc


@dataclass
class ExtractionSummary:
    n_records: int = 0
    n_ok: int = 0
    n_failed: int = 0
    n_mismatch: int = 0
    stage_counts: dict | None = None
    failures: list | None = None
    parse_errors: list | None = None

    def __post_init__(self) -> None:
        self.stage_counts = self.stage_counts or {}
        self.failures = self.failures or []
        self.parse_errors = self.parse_errors or []


def extract_file(
    in_path,
    out_path,
    scale: RatingScale = RatingScale(),
    cfg: ExtractConfig = ExtractConfig(),
) -> ExtractionSummary:
    """Extract every transcript line; failures are flagged and skipped."""
    summary = ExtractionSummary()
    with open(in_path, encoding="utf-8") as fin, open(
        out_path, "w", encoding="utf-8"
    ) as fout:
        for line_no, line in enumerate(fin, start=1):
            if not line.strip():
                continue
            summary.n_records += 1
            try:
                rec = parse_record(json.loads(line))
            except (json.JSONDecodeError, DataError) as exc:
                summary.parse_errors.append((line_no, str(exc)))
                continue
            try:
                result = extract(rec, scale, cfg)
            except ExtractionFailure as exc:
                summary.n_failed += 1
                summary.failures.append((rec.sample_id, str(exc)))
                continue
            summary.n_ok += 1
            summary.stage_counts[result.stage_used] = (
                summary.stage_counts.get(result.stage_used, 0) + 1
            )
            if result.declared_mismatch:
                summary.n_mismatch += 1
            fout.write(
                json.dumps(
                    {
                        "sample_id": rec.sample_id,
                        "features": list(result.features.values),
                        "extracted_score": result.extracted_score,
                        "stage": result.stage_used,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    if summary.n_records > 0 and summary.n_ok == 0 and summary.n_failed == 0:
        raise DataError(f"no parsable transcript lines in {in_path}")
    return summary
