"""Screening rules, the dual-rater adjudication chain, and clip extraction."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvsops.domain import (
    ExclusionReason,
    PreAnnotation,
    SurgicalApproach,
    VideoState,
)
from cvsops.videoflow import (
    AdjudicationChain,
    ChainClosed,
    ChainStatus,
    DuplicateRater,
    NotQualified,
    WindowUnderflow,
    check_eligibility,
    extract_clip,
    iter_screening_log,
    read_intake_manifest,
    screen,
    submit_preannotation,
    verdicts_concordant,
    write_intake_manifest,
    write_screening_log,
)

from test_domain import eligible_verdict, make_case

DURATION = 3600.0


def run_screen(**kwargs):
    base = dict(
        clipping_timestamp=300.0,
        used_ioc=False,
        used_icg=False,
        approach=SurgicalApproach.LAPAROSCOPIC,
    )
    base.update(kwargs)
    return screen("dr-a", DURATION, **base)


class TestScreeningRules:
    def test_clean_case_is_eligible(self):
        v = run_screen()
        assert v.eligible
        assert v.exclusion_reason is None

    def test_short_preamble_excluded(self):
        v = run_screen(clipping_timestamp=60.0)
        assert v.exclusion_reason is ExclusionReason.NO_CONTINUOUS_90S

    def test_boundary_timestamp_is_eligible(self):
        assert run_screen(clipping_timestamp=90.0).eligible

    def test_obscured_window_excluded(self):
        v = run_screen(window_obscured=True)
        assert v.exclusion_reason is ExclusionReason.NO_CONTINUOUS_90S

    def test_no_clipping_event(self):
        v = run_screen(clipping_timestamp=None)
        assert v.exclusion_reason is ExclusionReason.INCOMPLETE_NO_CLIPPING

    def test_timestamp_beyond_recording_counts_as_no_clipping(self):
        v = run_screen(clipping_timestamp=DURATION + 1)
        assert v.exclusion_reason is ExclusionReason.INCOMPLETE_NO_CLIPPING

    def test_bailout_excluded(self):
        v = run_screen(bailout=True)
        assert v.exclusion_reason is ExclusionReason.BAILOUT

    def test_wrong_procedure_wins_over_everything(self):
        v = run_screen(is_cholecystectomy=False, bailout=True, clipping_timestamp=None)
        assert v.exclusion_reason is ExclusionReason.NOT_CHOLECYSTECTOMY

    def test_bailout_wins_over_timestamp_problems(self):
        v = run_screen(bailout=True, clipping_timestamp=None)
        assert v.exclusion_reason is ExclusionReason.BAILOUT

    def test_check_eligibility_matches_screen(self):
        rng = random.Random(11)
        for _ in range(200):
            kwargs = dict(
                clipping_timestamp=rng.choice([None, rng.uniform(0, DURATION * 1.1)]),
                is_cholecystectomy=rng.random() > 0.1,
                bailout=rng.random() < 0.1,
                window_obscured=rng.random() < 0.1,
            )
            v = run_screen(**kwargs)
            assert check_eligibility(v, DURATION) == v.exclusion_reason


class TestConcordance:
    def test_timestamps_within_tolerance_agree(self):
        a = eligible_verdict("dr-a", ts=400.0)
        b = eligible_verdict("dr-b", ts=402.0)
        assert verdicts_concordant(a, b)

    def test_timestamps_beyond_tolerance_disagree(self):
        a = eligible_verdict("dr-a", ts=400.0)
        b = eligible_verdict("dr-b", ts=402.01)
        assert not verdicts_concordant(a, b)

    def test_both_missing_timestamps_agree(self):
        a = run_screen(clipping_timestamp=None)
        b = screen(
            "dr-b",
            DURATION,
            clipping_timestamp=None,
            used_ioc=False,
            used_icg=False,
            approach=SurgicalApproach.LAPAROSCOPIC,
        )
        assert verdicts_concordant(a, b)

    def test_one_missing_timestamp_disagrees(self):
        eligible = eligible_verdict("dr-a", ts=400.0)
        missing = run_screen(clipping_timestamp=None)
        assert not verdicts_concordant(eligible, missing)

    @pytest.mark.parametrize(
        "field,value",
        [
            ("used_ioc", True),
            ("used_icg", True),
            ("approach", SurgicalApproach.ROBOTIC),
        ],
    )
    def test_each_contract_field_matters(self, field, value):
        a = eligible_verdict("dr-a")
        b = eligible_verdict("dr-b", **{field: value})
        assert not verdicts_concordant(a, b)

    def test_raw_observations_do_not_matter(self):
        # needs_blur is operational, not part of the verdict contract
        a = eligible_verdict("dr-a")
        b = eligible_verdict("dr-b", needs_blur=True)
        assert verdicts_concordant(a, b)


def random_verdict(rng: random.Random, rater: str) -> PreAnnotation:
    """Coarse verdict space so consecutive agreement happens often enough."""
    ts = rng.choice([None, 100.0, 500.0])
    return screen(
        rater,
        DURATION,
        clipping_timestamp=ts,
        used_ioc=rng.random() < 0.5,
        used_icg=rng.random() < 0.5,
        approach=rng.choice(list(SurgicalApproach)),
        bailout=rng.random() < 0.2,
    )


class TestAdjudicationChain:
    def test_two_agreeing_verdicts_close_the_chain(self):
        chain = AdjudicationChain(case_id="case-1")
        chain = submit_preannotation(chain, eligible_verdict("dr-a", ts=400.0))
        assert chain.status is ChainStatus.NEEDS_RATER
        chain = submit_preannotation(chain, eligible_verdict("dr-b", ts=401.0))
        assert chain.status is ChainStatus.CONCORDANT
        assert chain.final_metadata.rater_id == "dr-b"

    def test_disagreement_pulls_in_a_third_rater(self):
        chain = AdjudicationChain(case_id="case-1")
        chain = submit_preannotation(chain, eligible_verdict("dr-a", ts=400.0))
        chain = submit_preannotation(chain, eligible_verdict("dr-b", ts=500.0))
        assert chain.status is ChainStatus.NEEDS_RATER
        chain = submit_preannotation(chain, eligible_verdict("dr-c", ts=501.0))
        assert chain.status is ChainStatus.CONCORDANT

    def test_closed_chain_rejects_more_verdicts(self):
        chain = AdjudicationChain(case_id="case-1")
        chain = submit_preannotation(chain, eligible_verdict("dr-a"))
        chain = submit_preannotation(chain, eligible_verdict("dr-b"))
        with pytest.raises(ChainClosed):
            submit_preannotation(chain, eligible_verdict("dr-c"))

    def test_duplicate_rater_rejected(self):
        chain = AdjudicationChain(case_id="case-1")
        chain = submit_preannotation(chain, eligible_verdict("dr-a", ts=400.0))
        with pytest.raises(DuplicateRater):
            submit_preannotation(chain, eligible_verdict("dr-a", ts=500.0))

    def test_final_metadata_requires_concordance(self):
        chain = AdjudicationChain(case_id="case-1")
        with pytest.raises(ValueError):
            chain.final_metadata

    def test_stopping_rule_on_random_streams(self):
        """The chain must stop at the first index where two consecutive
        verdicts agree, and never before. 2,000 streams here; the acceptance
        suite runs the full 10,000."""
        rng = random.Random(123)
        for _ in range(2000):
            stream = [random_verdict(rng, f"dr-{i}") for i in range(12)]
            chain = AdjudicationChain(case_id="case-1")
            stopped_at = None
            for i, verdict in enumerate(stream):
                try:
                    chain = submit_preannotation(chain, verdict)
                except ChainClosed:
                    break
                if chain.status is ChainStatus.CONCORDANT:
                    stopped_at = i
                    break
            expected = None
            for i in range(1, len(stream)):
                if verdicts_concordant(stream[i - 1], stream[i]):
                    expected = i
                    break
            assert stopped_at == expected
            if expected is not None:
                assert chain.final_metadata == stream[expected]

    @given(st.lists(st.integers(min_value=0, max_value=3), min_size=2, max_size=8))
    @settings(max_examples=200, deadline=None)
    def test_chain_length_property(self, choices):
        """However the stream looks, a closed chain's last two entries agree
        and no earlier consecutive pair does."""
        palette = [
            eligible_verdict("x", ts=400.0),
            eligible_verdict("x", ts=900.0),
            run_screen(clipping_timestamp=None),
            run_screen(bailout=True),
        ]
        chain = AdjudicationChain(case_id="case-1")
        for i, c in enumerate(choices):
            v = palette[c]
            v = PreAnnotation.from_dict({**v.to_dict(), "rater_id": f"dr-{i}"})
            try:
                chain = submit_preannotation(chain, v)
            except ChainClosed:
                break
        entries = chain.entries
        if chain.status is ChainStatus.CONCORDANT:
            assert verdicts_concordant(entries[-2], entries[-1])
            for i in range(1, len(entries) - 1):
                assert not verdicts_concordant(entries[i - 1], entries[i])
        else:
            for i in range(1, len(entries)):
                assert not verdicts_concordant(entries[i - 1], entries[i])


class TestClipExtraction:
    def test_window_ends_at_clipping_event(self):
        case = make_case(
            state=VideoState.QUALIFIED,
            final_metadata=eligible_verdict(ts=412.0),
        )
        clip = extract_clip(case)
        assert clip.window_start_s == 322.0
        assert clip.window_end_s == 412.0
        assert clip.case_id == "case-1"
        assert clip.media_uri.endswith("#t=322,412")

    def test_rejects_unqualified_case(self):
        with pytest.raises(NotQualified):
            extract_clip(make_case(state=VideoState.SCREENING))

    def test_rejects_underflow_window(self):
        # Construct final metadata bypassing screen(): a timestamp below the
        # window length is normally screened out first.
        meta = eligible_verdict(ts=90.0)
        object.__setattr__(meta, "clipping_timestamp", 45.0)
        case = make_case(state=VideoState.QUALIFIED, final_metadata=meta)
        with pytest.raises(WindowUnderflow):
            extract_clip(case)


class TestManifestFiles:
    def test_intake_manifest_round_trip(self, tmp_path):
        cases = [make_case(case_id=f"case-{i}", split="train") for i in range(4)]
        path = tmp_path / "manifest.jsonl"
        write_intake_manifest(cases, path)
        back = read_intake_manifest(path)
        assert [c.case_id for c in back] == [c.case_id for c in cases]
        assert all(c.state is VideoState.RECEIVED for c in back)
        assert back[0].provenance == cases[0].provenance

    def test_screening_log_round_trip(self, tmp_path):
        case = make_case(
            preannotation_chain=(
                eligible_verdict("dr-a", ts=400.0),
                eligible_verdict("dr-b", ts=401.0),
            )
        )
        path = tmp_path / "log.jsonl"
        write_screening_log([case], path)
        rows = list(iter_screening_log(path))
        assert len(rows) == 2
        assert rows[0][0] == "case-1"
        assert rows[0][1] == case.preannotation_chain[0]
        assert rows[1][1].rater_id == "dr-b"
