import math

import numpy as np
import pytest

from his_isac.utils import (
    convert_A2_to_mA2,
    convert_mA2_to_A2,
    db_to_linear,
    fix_phase,
    is_hermitian,
    linear_to_db,
    min_eigenvalue,
    sinc,
    unit_vector,
)


class TestDecibels:
    @pytest.mark.parametrize(
        "value_db,expected",
        [(0.0, 1.0), (10.0, 10.0), (20.0, 100.0), (-30.0, 1e-3), (5.0, 3.1622776601683795)],
    )
    def test_db_to_linear(self, value_db, expected):
        assert db_to_linear(value_db) == pytest.approx(expected, rel=1e-12)

    def test_linear_to_db_inverts_db_to_linear(self):
        for value_db in (-40.0, -3.0, 0.0, 9.94, 33.0):
            assert linear_to_db(db_to_linear(value_db)) == pytest.approx(value_db, abs=1e-12)

    def test_zero_maps_to_negative_infinity(self):
        assert linear_to_db(0.0) == -math.inf

    def test_negative_ratio_rejected(self):
        with pytest.raises(ValueError, match="not in range"):
            linear_to_db(-1.0)


def test_current_power_conversions():
    assert convert_mA2_to_A2(100.0) == pytest.approx(1e-4)
    assert convert_A2_to_mA2(convert_mA2_to_A2(250.0)) == pytest.approx(250.0)


def test_sinc_is_unnormalized():
    """sinc(x) = sin(x)/x, with zeros at nonzero multiples of pi."""
    x = np.array([0.0, math.pi, 2.0 * math.pi, 1.0])
    values = sinc(x)
    assert values[0] == 1.0
    assert values[1] == pytest.approx(0.0, abs=1e-15)
    assert values[2] == pytest.approx(0.0, abs=1e-15)
    assert values[3] == pytest.approx(math.sin(1.0))


class TestMatrixHelpers:
    def test_is_hermitian(self):
        a = np.array([[1.0, 1j], [-1j, 2.0]])
        assert is_hermitian(a)
        assert not is_hermitian(np.array([[1.0, 1j], [1j, 2.0]]))

    def test_min_eigenvalue(self):
        assert min_eigenvalue(np.diag([3.0, -0.5, 1.0])) == pytest.approx(-0.5)
        assert min_eigenvalue(np.zeros((0, 0))) == 0.0

    def test_unit_vector_rejects_zero(self):
        with pytest.raises(ValueError, match="zero vector"):
            unit_vector(np.zeros(3))

    def test_fix_phase_makes_largest_entry_real(self):
        v = np.array([0.1 + 0.2j, -3.0j, 0.5])
        fixed = fix_phase(v)
        assert fixed[1].real == pytest.approx(3.0)
        assert fixed[1].imag == pytest.approx(0.0, abs=1e-15)
        assert np.allclose(np.abs(fixed), np.abs(v))
