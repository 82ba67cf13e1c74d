"""Membership of the sum-source RD vector in the structured region, and what breaks it."""

from mdlab.region import is_member
from mdlab.region.catalog import sum_source_stage2_spec, sum_source_target
from mdlab.sperner import DecoderSet


def main(delta: float = 0.1) -> None:
    spec = sum_source_stage2_spec(delta)
    target = sum_source_target(delta)
    sum_decoder = DecoderSet.of([3], 3)
    for shift in (0.0, -0.05, -0.1):
        vector = target.replace(distortions={sum_decoder: target.distortions[sum_decoder] + shift})
        verdict = is_member(spec, vector)
        print(f"D3 shift {shift:+.2f}: feasible={verdict.feasible} slack={verdict.slack:.4f} ({verdict.method})")


if __name__ == "__main__":
    main()
