"""Admission gate: drift, anchor fusion, band-pass classification."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshmem.cat7 import FieldName
from meshmem.errors import (
    AllWeightsZero,
    DimensionMismatch,
    EmptyCandidates,
    MissingField,
    ZeroVector,
)
from meshmem.svaf import (
    AnchorCandidate,
    Decision,
    RoleProfile,
    Thresholds,
    classify,
    evaluate,
    field_drift,
    fuse_anchor,
    fusion_weights,
)

from conftest import observation

E1 = (1.0, 0.0, 0.0)
E2 = (0.0, 1.0, 0.0)

UNIFORM = RoleProfile.uniform()
TH = Thresholds()


def drift_map(default, **overrides):
    out = {name: default for name in FieldName}
    for key, value in overrides.items():
        out[FieldName(key)] = value
    return out


class TestFieldDrift:
    def test_identical(self):
        assert field_drift(E1, E1) == pytest.approx(0.0)

    def test_orthogonal(self):
        assert field_drift(E1, E2) == pytest.approx(1.0)

    def test_opposite(self):
        assert field_drift(E1, tuple(-x for x in E1)) == pytest.approx(2.0)

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            field_drift((0.0, 0.0, 0.0), E1)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            field_drift(E1, (1.0, 0.0))


class TestFuseAnchor:
    def test_single_candidate_returns_it(self):
        anchor = fuse_anchor([AnchorCandidate(E1, 0)], E1, 1.0, 0.0, 100)
        assert anchor == pytest.approx(E1)

    def test_two_identical_candidates(self):
        cands = [AnchorCandidate(E1, 50), AnchorCandidate(E1, 50)]
        assert fuse_anchor(cands, E1, 2.0, 0.0, 100) == pytest.approx(E1)

    def test_orthogonal_candidate_gets_zero_weight(self):
        # hand evaluation: cos(e1, e2) = 0, so only e1 contributes
        cands = [AnchorCandidate(E1, 50, 1.0), AnchorCandidate(E2, 50, 1.0)]
        weights = fusion_weights(cands, E1, 1.0, 0.0, 100)
        assert weights == pytest.approx([1.0, 0.0])
        assert fuse_anchor(cands, E1, 1.0, 0.0, 100) == pytest.approx(E1)

    def test_empty_candidates(self):
        with pytest.raises(EmptyCandidates):
            fuse_anchor([], E1, 1.0, 0.0, 100)

    def test_all_anti_aligned(self):
        cands = [AnchorCandidate(tuple(-x for x in E1), 0)]
        with pytest.raises(AllWeightsZero):
            fuse_anchor(cands, E1, 1.0, 0.0, 100)

    def test_monotone_decay(self):
        lam = 1e-3
        cands = [AnchorCandidate(E1, 1000), AnchorCandidate(E1, 0)]
        newer, older = fusion_weights(cands, E1, 1.0, lam, 2000)
        assert older < newer

    @given(
        st.lists(
            st.tuples(
                st.floats(0.05, 1.0), st.floats(-1.0, 1.0),
                st.integers(0, 1000), st.floats(0.01, 1.0),
            ),
            min_size=1, max_size=8,
        ),
        st.floats(0.1, 5.0),
    )
    @settings(max_examples=300, deadline=None)
    def test_weights_sum_to_one(self, raw, alpha):
        cands = []
        for x, y, t, c in raw:
            n = math.sqrt(x * x + y * y)
            if n == 0:
                continue
            cands.append(AnchorCandidate((x / n, y / n), t, c))
        if not cands:
            return
        try:
            weights = fusion_weights(cands, (1.0, 0.0), alpha, 1e-6, 2000)
        except AllWeightsZero:
            return
        assert sum(weights) == pytest.approx(1.0, abs=1e-9)


class TestClassify:
    def test_all_quiet_is_redundant(self):
        total, decision = classify(drift_map(0.05), UNIFORM, TH)
        assert decision is Decision.REDUNDANT
        assert total == pytest.approx(0.05)

    def test_redundancy_is_per_field(self):
        # six quiet fields and one high-drift field is not redundancy
        total, decision = classify(drift_map(0.05, mood=0.30), UNIFORM, TH)
        assert decision is Decision.ALIGNED
        assert total == pytest.approx(0.08571428571428572)

    def test_everything_off_is_rejected(self):
        total, decision = classify(drift_map(1.0), UNIFORM, TH)
        assert decision is Decision.REJECTED
        assert total == pytest.approx(1.0)

    def test_guarded_band(self):
        total, decision = classify(drift_map(0.4), UNIFORM, TH)
        assert decision is Decision.GUARDED

    def test_missing_field(self):
        drifts = drift_map(0.1)
        del drifts[FieldName.MOOD]
        with pytest.raises(MissingField):
            classify(drifts, UNIFORM, TH)

    def test_first_clause_wins(self):
        # redundant even though the aligned clause would also match
        total, decision = classify(drift_map(0.01), UNIFORM, TH)
        assert total <= TH.t_aln
        assert decision is Decision.REDUNDANT

    def test_alpha_scale_invariance(self):
        drifts = drift_map(0.2, mood=0.9, focus=0.01)
        for scale in (0.5, 3.0, 117.0):
            scaled = RoleProfile(
                "scaled", {f: scale for f in FieldName}
            )
            t1, d1 = classify(drifts, UNIFORM, TH)
            t2, d2 = classify(drifts, scaled, TH)
            assert t1 == pytest.approx(t2)
            assert d1 is d2

    def test_threshold_ordering_enforced(self):
        with pytest.raises(ValueError):
            Thresholds(t_red=0.3, t_aln=0.2, t_grd=0.5)


class TestRoleProfile:
    def test_rejects_all_zero(self):
        with pytest.raises(ValueError):
            RoleProfile("r", {f: 0.0 for f in FieldName})

    def test_rejects_negative(self):
        alpha = {f: 1.0 for f in FieldName}
        alpha[FieldName.MOOD] = -1.0
        with pytest.raises(ValueError):
            RoleProfile("r", alpha)


def view_from(cmb, stored_at=0):
    return {
        name: [AnchorCandidate(cmb.header[name].vector, stored_at)]
        for name in FieldName
    }


class TestEvaluate:
    def test_cold_start_is_guarded(self):
        incoming = observation()
        result = evaluate({}, incoming, UNIFORM, TH, now=100)
        assert result.decision is Decision.GUARDED
        assert all(result.field_drifts[f] == 1.0 for f in FieldName)
        assert all(result.anchor_basis_size[f] == 0 for f in FieldName)

    def test_self_comparison_is_redundant(self):
        incoming = observation()
        result = evaluate(view_from(incoming), incoming, UNIFORM, TH, now=100)
        assert result.decision is Decision.REDUNDANT
        assert all(
            result.field_drifts[f] == pytest.approx(0.0, abs=1e-9)
            for f in FieldName
        )

    def test_total_consistent_with_field_drifts(self):
        incoming = observation("node-b", "other")
        stored = observation("node-a", "mine")
        result = evaluate(view_from(stored), incoming, UNIFORM, TH, now=100)
        recomputed = sum(result.field_drifts[f] for f in FieldName) / 7
        assert result.total_drift == pytest.approx(recomputed, abs=1e-9)

    def test_profile_divergence_on_same_input(self):
        # same incoming, same store; mood-heavy vs commitment-heavy weights
        stored = observation("node-a", "seed", mood="methodical")
        incoming = observation("node-b", "novel", mood="methodical")
        mood_heavy = RoleProfile(
            "mood-heavy",
            {f: (20.0 if f is FieldName.MOOD else 0.1) for f in FieldName},
        )
        commitment_heavy = RoleProfile(
            "commitment-heavy",
            {f: (20.0 if f is FieldName.COMMITMENT else 0.1) for f in FieldName},
        )
        view = view_from(stored)
        r1 = evaluate(view, incoming, mood_heavy, TH, now=100)
        r2 = evaluate(view, incoming, commitment_heavy, TH, now=100)
        assert r1.field_drifts == r2.field_drifts
        assert r1.decision is Decision.ALIGNED
        assert r2.decision is not Decision.ALIGNED
        assert r2.total_drift > r1.total_drift

    def test_purity(self):
        stored = observation("node-a", "seed")
        incoming = observation("node-b", "probe")
        view = view_from(stored)
        a = evaluate(view, incoming, UNIFORM, TH, now=100)
        b = evaluate(view, incoming, UNIFORM, TH, now=100)
        assert a == b
