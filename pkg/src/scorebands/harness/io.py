"""Sample file ingestion and multi-judge feature fusion.

Sample lines carry either a ``logprobs`` object keyed by rating label
("1".."K") or a pre-built ``features`` list whose length is a multiple of K
(the fused multi-judge form). Malformed lines are collected with their line
numbers; only a file with no usable line at all is rejected outright.
"""

from __future__ import annotations

import json
import math

from ..core import DataError, FeatureVector, LabeledSample, RatingScale

REQUIRED_FIELDS = ("sample_id", "judge", "dataset", "gt_score")


def _parse_line(obj: dict, scale: RatingScale) -> LabeledSample:
    if not isinstance(obj, dict):
        raise DataError("line is not an object")
    for key in REQUIRED_FIELDS:
        if key not in obj:
            raise DataError(f"missing field {key!r}")
    gt = obj["gt_score"]
    if isinstance(gt, bool) or not isinstance(gt, int):
        raise DataError(f"gt_score must be an integer, got {gt!r}")
    if not scale.min_label <= gt <= scale.k_max:
        raise DataError(
            f"gt_score {gt} outside [{scale.min_label}, {scale.k_max}]"
        )
    if "logprobs" in obj:
        logprobs = obj["logprobs"]
        if not isinstance(logprobs, dict):
            raise DataError("logprobs must be an object")
        values = []
        for label in scale.labels:
            key = str(label)
            if key not in logprobs:
                raise DataError(f"logprobs missing label {key!r}")
            values.append(_check_logprob(logprobs[key], key))
    elif "features" in obj:
        feats = obj["features"]
        if not isinstance(feats, list) or not feats:
            raise DataError("features must be a non-empty list")
        if len(feats) % scale.k_max != 0:
            raise DataError(
                f"feature length {len(feats)} not a multiple of {scale.k_max}"
            )
        values = [_check_logprob(v, str(i)) for i, v in enumerate(feats)]
    else:
        raise DataError("line has neither 'logprobs' nor 'features'")
    group = obj.get("group")
    return LabeledSample(
        features=FeatureVector(tuple(values)),
        gt_score=gt,
        dataset_tag=str(obj["dataset"]),
        judge_tag=str(obj["judge"]),
        sample_id=str(obj["sample_id"]),
        group_tag=str(group) if group is not None else None,
    )


def _check_logprob(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DataError(f"logprob {key!r} must be a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise DataError(f"logprob {key!r} must be finite, got {v}")
    if v > 0:
        raise DataError(f"logprob {key!r} must be <= 0, got {v}")
    return v


def load_samples(
    path, scale: RatingScale = RatingScale()
) -> tuple[list[LabeledSample], list[tuple[int, str]]]:
    """Read line-delimited samples; returns (samples, per-line errors)."""
    samples: list[LabeledSample] = []
    errors: list[tuple[int, str]] = []
    n_lines = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            n_lines += 1
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append((line_no, f"invalid JSON: {exc}"))
                continue
            try:
                samples.append(_parse_line(obj, scale))
            except DataError as exc:
                errors.append((line_no, str(exc)))
    if n_lines > 0 and not samples:
        raise DataError(f"all {n_lines} lines of {path} are malformed")
    return samples, errors


def write_samples(samples: list[LabeledSample], path, scale: RatingScale) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            obj: dict = {
                "sample_id": s.sample_id,
                "judge": s.judge_tag,
                "dataset": s.dataset_tag,
                "gt_score": s.gt_score,
            }
            if len(s.features) == scale.k_max:
                obj["logprobs"] = {
                    str(label): s.features.values[i]
                    for i, label in enumerate(scale.labels)
                }
            else:
                obj["features"] = list(s.features.values)
            if s.group_tag is not None:
                obj["group"] = s.group_tag
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def fuse(
    samples_by_judge: dict[str, list[LabeledSample]],
    order: list[str] | None = None,
) -> tuple[list[LabeledSample], list[str]]:
    """Concatenate per-judge features on shared sample ids (inner join).

    Feature blocks follow the given judge order (sorted judge tags when no
    order is configured). Ids missing from any judge are dropped and
    returned; a ground-truth disagreement for a shared id is an error.
    """
    if not samples_by_judge:
        raise DataError("no judges to fuse")
    if order is None:
        order = sorted(samples_by_judge)
    if set(order) != set(samples_by_judge):
        raise DataError(
            f"judge order {order} does not match judges "
            f"{sorted(samples_by_judge)}"
        )
    by_id: dict[str, dict[str, LabeledSample]] = {}
    for judge, samples in samples_by_judge.items():
        for s in samples:
            by_id.setdefault(s.sample_id, {})[judge] = s
    first_judge = order[0]
    fused: list[LabeledSample] = []
    dropped: list[str] = []
    seen: set[str] = set()
    for s in samples_by_judge[first_judge]:
        if s.sample_id in seen:
            continue
        seen.add(s.sample_id)
        per_judge = by_id[s.sample_id]
        if len(per_judge) < len(order):
            dropped.append(s.sample_id)
            continue
        gts = {j: per_judge[j].gt_score for j in order}
        if len(set(gts.values())) > 1:
            raise DataError(
                f"ground-truth mismatch for sample {s.sample_id!r}: {gts}"
            )
        values: tuple[float, ...] = ()
        for judge in order:
            values = values + per_judge[judge].features.values
        fused.append(
            LabeledSample(
                features=FeatureVector(values),
                gt_score=s.gt_score,
                dataset_tag=s.dataset_tag,
                judge_tag="+".join(order),
                sample_id=s.sample_id,
                group_tag=s.group_tag,
            )
        )
    # ids present in other judges but absent from the first are dropped too
    for sid in by_id:
        if sid not in seen:
            dropped.append(sid)
    return fused, sorted(set(dropped))
