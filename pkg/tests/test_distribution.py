import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rockfrag.distribution import (
    CharacteristicSizes,
    SieveAnalysis,
    SieveRecord,
    SizeDistribution,
    average_log_error,
    characteristic_size,
    default_size_grid,
    log_size_error,
    mass_passing_curve,
    percent_difference,
    percent_passing_at,
    percent_true_error,
    pool_distributions,
    sieve_to_distribution,
)

from conftest import make_particle_set


class TestSieveTypes:
    def test_record_validation(self):
        with pytest.raises(ValueError):
            SieveRecord(-1.0, 1.0)
        with pytest.raises(ValueError):
            SieveRecord(10.0, -0.5)
        assert SieveRecord(None, 1.0).is_fines

    def test_analysis_requires_increasing_meshes(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            SieveAnalysis.from_records(
                [SieveRecord(10.0, 1.0), SieveRecord(10.0, 1.0)]
            )

    def test_analysis_total_mass_must_match(self):
        with pytest.raises(ValueError, match="does not match"):
            SieveAnalysis((SieveRecord(10.0, 1.0),), 2.0)

    def test_single_fines_record_only(self):
        with pytest.raises(ValueError, match="fines"):
            SieveAnalysis.from_records(
                [SieveRecord(None, 1.0), SieveRecord(None, 1.0), SieveRecord(5.0, 1.0)]
            )

    def test_analysis_needs_a_sized_record(self):
        with pytest.raises(ValueError):
            SieveAnalysis.from_records([SieveRecord(None, 1.0)])


class TestSieveToDistribution:
    def test_lab_pile_passing_values(self, lab_sieve):
        dist = sieve_to_distribution(lab_sieve)
        # hand-checked cumulative sums of the bundled masses
        assert percent_passing_at(dist, 19.05) == pytest.approx(0.6129, abs=5e-5)
        assert percent_passing_at(dist, 4.00) == pytest.approx(0.0042, abs=5e-5)
        assert percent_passing_at(dist, 9.53) == pytest.approx(0.0854, abs=5e-5)
        assert percent_passing_at(dist, 12.70) == pytest.approx(0.1622, abs=5e-5)

    def test_single_tray_holds_all_mass(self):
        analysis = SieveAnalysis.from_records([SieveRecord(10.0, 5.0)])
        dist = sieve_to_distribution(analysis)
        assert percent_passing_at(dist, 10.0) == 0.0

    def test_hand_cumulative_sum(self):
        analysis = SieveAnalysis.from_records(
            [SieveRecord(None, 1.0), SieveRecord(10.0, 1.0), SieveRecord(20.0, 2.0)]
        )
        dist = sieve_to_distribution(analysis)
        assert percent_passing_at(dist, 10.0) == pytest.approx(0.25)
        assert percent_passing_at(dist, 20.0) == pytest.approx(0.50)

    def test_output_satisfies_invariants(self, lab_sieve):
        dist = sieve_to_distribution(lab_sieve)
        assert np.all(np.diff(dist.sizes_mm) > 0)
        assert np.all(np.diff(dist.passing) >= 0)
        assert dist.passing[-1] <= 1.0 + 1e-9


class TestSizeDistribution:
    def test_validation(self):
        with pytest.raises(ValueError):
            SizeDistribution([], [])
        with pytest.raises(ValueError):
            SizeDistribution([10.0, 5.0], [0.1, 0.2])
        with pytest.raises(ValueError):
            SizeDistribution([5.0, 10.0], [0.5, 0.2])
        with pytest.raises(ValueError):
            SizeDistribution([5.0, 10.0], [0.2, 1.5])
        with pytest.raises(ValueError):
            SizeDistribution([-5.0, 10.0], [0.2, 0.5])

    def test_immutable(self):
        dist = SizeDistribution([10.0], [0.5])
        with pytest.raises(AttributeError):
            dist.passing = np.array([1.0])
        with pytest.raises(ValueError):
            dist.sizes_mm[0] = 2.0


class TestInterpolation:
    def test_exact_at_knots(self):
        dist = SizeDistribution([10.0, 40.0], [0.2, 0.6])
        assert percent_passing_at(dist, 10.0) == 0.2
        assert percent_passing_at(dist, 40.0) == 0.6

    def test_log_midpoint(self):
        # log10(20) is the midpoint of log10(10) and log10(40)
        dist = SizeDistribution([10.0, 40.0], [0.2, 0.6])
        assert percent_passing_at(dist, 20.0) == pytest.approx(0.4, rel=1e-12)

    def test_clamps_outside_range(self):
        dist = SizeDistribution([10.0, 40.0], [0.2, 0.6])
        assert percent_passing_at(dist, 100.0) == 0.6
        assert percent_passing_at(dist, 1.0) == 0.2

    def test_rejects_non_positive_sizes(self):
        dist = SizeDistribution([10.0, 40.0], [0.2, 0.6])
        with pytest.raises(ValueError):
            percent_passing_at(dist, 0.0)
        with pytest.raises(ValueError):
            percent_passing_at(dist, -3.0)

    def test_vectorized_queries(self):
        dist = SizeDistribution([10.0, 40.0], [0.2, 0.6])
        out = percent_passing_at(dist, [10.0, 20.0, 40.0])
        assert out == pytest.approx([0.2, 0.4, 0.6])


class TestCharacteristicSize:
    def test_inverse_of_interpolation(self):
        dist = SizeDistribution([10.0, 40.0], [0.2, 0.6])
        assert characteristic_size(dist, 0.4) == pytest.approx(20.0, rel=1e-12)

    def test_knot_value_returns_knot_size(self):
        dist = SizeDistribution([10.0, 25.0, 40.0], [0.2, 0.45, 0.6])
        assert characteristic_size(dist, 0.45) == 25.0

    def test_out_of_attained_range(self):
        dist = SizeDistribution([10.0, 40.0], [0.2, 0.61])
        with pytest.raises(ValueError, match="attained"):
            characteristic_size(dist, 0.99)

    def test_flat_run_resolves_to_first_size(self):
        dist = SizeDistribution([10.0, 20.0, 40.0], [0.2, 0.2, 0.6])
        assert characteristic_size(dist, 0.2) == 10.0

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(
            st.floats(min_value=-1.0, max_value=3.0),
            min_size=2,
            max_size=8,
            unique=True,
        ),
        st.data(),
    )
    def test_round_trip_property(self, log_sizes, data):
        sizes = np.sort(10.0 ** np.asarray(log_sizes))
        if np.any(np.diff(sizes) <= 1e-9 * sizes[:-1]):
            return
        steps = data.draw(
            st.lists(
                st.floats(min_value=0.01, max_value=1.0),
                min_size=len(sizes),
                max_size=len(sizes),
            )
        )
        cum = np.cumsum(steps)
        passing = 0.05 + 0.9 * cum / cum[-1]
        dist = SizeDistribution(sizes, passing)
        t = data.draw(st.floats(min_value=0.01, max_value=0.99))
        x = math.exp(
            math.log(sizes[0]) + t * (math.log(sizes[-1]) - math.log(sizes[0]))
        )
        p = percent_passing_at(dist, x)
        assert characteristic_size(dist, p) == pytest.approx(x, rel=1e-9)

    def test_characteristic_sizes_ordering_enforced(self):
        with pytest.raises(ValueError):
            CharacteristicSizes(p80=10.0, p50=12.0, p20=5.0)
        cs = CharacteristicSizes(p80=20.0, p50=15.0, p20=5.0)
        assert cs.get("p50") == 15.0


class TestPercentTrueError:
    def test_identity_is_zero(self):
        dist = SizeDistribution([4.0, 19.05], [0.1, 0.6])
        assert percent_true_error(dist, dist, [4.0, 10.0, 19.05]) == [0.0, 0.0, 0.0]

    def test_direct_evaluation(self):
        est = SizeDistribution([19.05], [0.70])
        ref = SizeDistribution([19.05], [0.6129])
        (err,) = percent_true_error(est, ref, [19.05])
        # oracle: 100 * (70 - 61.29) / 61.29
        assert err == pytest.approx(100.0 * (0.70 - 0.6129) / 0.6129, rel=1e-12)
        assert err == pytest.approx(14.21, abs=0.01)

    def test_negative_error(self):
        est = SizeDistribution([10.0], [0.30])
        ref = SizeDistribution([10.0], [0.60])
        assert percent_true_error(est, ref, [10.0]) == [pytest.approx(-50.0)]

    def test_zero_reference_reports_none(self):
        est = SizeDistribution([10.0, 20.0], [0.1, 0.5])
        ref = SizeDistribution([10.0, 20.0], [0.0, 0.5])
        errs = percent_true_error(est, ref, [10.0, 20.0])
        assert errs[0] is None
        assert errs[1] == pytest.approx(0.0)


class TestPercentDifference:
    def test_identity_is_zero(self):
        dist = SizeDistribution([4.0, 19.05], [0.1, 0.6])
        assert percent_difference(dist, dist, [4.0, 19.05]) == [0.0, 0.0]

    def test_direct_evaluation(self):
        manual = SizeDistribution([10.0], [0.50])
        automated = SizeDistribution([10.0], [0.53])
        assert percent_difference(manual, automated, [10.0]) == [pytest.approx(6.0)]

    def test_absolute_value(self):
        manual = SizeDistribution([10.0], [0.50])
        automated = SizeDistribution([10.0], [0.47])
        assert percent_difference(manual, automated, [10.0]) == [pytest.approx(6.0)]

    def test_zero_manual_reports_none(self):
        manual = SizeDistribution([10.0, 20.0], [0.0, 0.4])
        automated = SizeDistribution([10.0, 20.0], [0.1, 0.4])
        assert percent_difference(manual, automated, [10.0])[0] is None


class TestLogSizeError:
    def test_identity_is_zero(self):
        assert log_size_error(21.14, 21.14) == 0.0

    def test_direct_evaluation_base10_oracle(self):
        # oracle computed in base 10; the function must agree regardless of base
        expected = 100.0 * (math.log10(22.0) - math.log10(21.14)) / math.log10(21.14)
        assert log_size_error(22.0, 21.14) == pytest.approx(expected, rel=1e-12)
        assert log_size_error(22.0, 21.14) == pytest.approx(1.31, abs=0.01)

    def test_base_invariance(self):
        natural = 100.0 * (math.log(22.0) - math.log(21.14)) / math.log(21.14)
        base10 = 100.0 * (math.log10(22.0) - math.log10(21.14)) / math.log10(21.14)
        assert natural == pytest.approx(base10, rel=1e-12)
        assert log_size_error(22.0, 21.14) == pytest.approx(natural, rel=1e-12)

    def test_reference_of_one_mm_rejected(self):
        with pytest.raises(ValueError):
            log_size_error(5.0, 1.0)

    def test_non_positive_sizes_rejected(self):
        with pytest.raises(ValueError):
            log_size_error(-5.0, 10.0)
        with pytest.raises(ValueError):
            log_size_error(5.0, 0.0)


class TestAverageLogError:
    def test_zeros(self):
        assert average_log_error([0.0, 0.0, 0.0]) == 0.0

    def test_arithmetic_mean(self):
        assert average_log_error([2.0, -1.0, 5.0]) == pytest.approx(2.0)

    def test_single_frame(self):
        assert average_log_error([3.7]) == pytest.approx(3.7)

    def test_constant_list(self):
        assert average_log_error([4.2] * 7) == pytest.approx(4.2)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            average_log_error([])


class TestMassPassingCurve:
    def test_single_particle_step(self):
        dist = mass_passing_curve([10.0])
        # zero at every tabulated size below the particle, one at and above it
        below = dist.sizes_mm[dist.sizes_mm < 10.0]
        assert below.size > 0
        assert all(percent_passing_at(dist, s) == 0.0 for s in below)
        assert percent_passing_at(dist, 10.0) == 1.0
        assert percent_passing_at(dist, 25.0) == 1.0

    def test_volume_weighting(self):
        dist = mass_passing_curve([10.0, 20.0], grid=[10.0, 15.0, 20.0])
        expected = 1000.0 / (1000.0 + 8000.0)
        assert percent_passing_at(dist, 15.0) == pytest.approx(expected)

    def test_reaches_one_at_largest_size(self):
        dist = mass_passing_curve([3.0, 7.0, 11.5])
        assert percent_passing_at(dist, 11.5) == pytest.approx(1.0)

    def test_default_grid_contains_mesh_sizes_and_max(self):
        grid = default_size_grid(3.0, 22.0)
        for mesh in (4.0, 9.53, 12.7, 19.05):
            assert mesh in grid
        assert 22.0 in grid
        assert grid[0] == 2.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mass_passing_curve([])


class TestPoolDistributions:
    def test_identical_frames_equal_single_frame(self):
        frame = make_particle_set([8.0, 12.0, 30.0])
        single = pool_distributions([frame])
        many = pool_distributions([frame, frame, frame])
        assert np.array_equal(single.sizes_mm, many.sizes_mm)
        assert single.passing == pytest.approx(many.passing)

    def test_pooling_is_concatenation(self):
        a = make_particle_set([10.0])
        b = make_particle_set([20.0])
        both = make_particle_set([10.0, 20.0])
        pooled = pool_distributions([a, b])
        direct = pool_distributions([both])
        assert np.array_equal(pooled.sizes_mm, direct.sizes_mm)
        assert pooled.passing == pytest.approx(direct.passing)

    def test_pooled_volume_arithmetic(self):
        pooled = pool_distributions(
            [make_particle_set([10.0]), make_particle_set([20.0])],
            grid=[10.0, 15.0, 20.0],
        )
        assert percent_passing_at(pooled, 15.0) == pytest.approx(1.0 / 9.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            pool_distributions([])
        with pytest.raises(ValueError):
            pool_distributions([make_particle_set([])])
