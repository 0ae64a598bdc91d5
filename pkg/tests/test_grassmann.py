"""Grassmann algebra: arithmetic examples, laws on random elements, errors."""

import numpy as np
import pytest

from supergeodesics.errors import MismatchedGeneratorCount, OddElement, ZeroBody
from supergeodesics.grassmann import (
    GrassmannElement as G,
    Parity,
    dim,
    mask_parity,
    merge_sign,
    strip_generator,
)


def random_element(rng, L, parity=None, body_min=None):
    coeffs = rng.uniform(-1.0, 1.0, dim(L))
    if parity is not None:
        coeffs[mask_parity(L) != parity] = 0.0
    if body_min is not None:
        body = rng.uniform(body_min, 1.0) * rng.choice([-1.0, 1.0])
        coeffs[0] = body
    return G(L, coeffs)


class TestArithmetic:
    def test_generators_anticommute(self):
        t1, t2 = G.generator(0, 2), G.generator(1, 2)
        assert t1 * t2 == G.basis(0b11, 2)
        assert t2 * t1 == -1.0 * G.basis(0b11, 2)

    def test_generator_squares_vanish(self):
        t1 = G.generator(0, 2)
        assert (1 + t1) * (1 + t1) == 1 + 2.0 * t1

    def test_nilpotency_truncates(self):
        a = 2 + G.basis(0b11, 2)
        b = 3 - G.basis(0b11, 2)
        assert a * b == 6 + G.basis(0b11, 2)

    def test_mismatched_generator_count(self):
        with pytest.raises(MismatchedGeneratorCount):
            G.generator(0, 1) * G.generator(0, 2)

    def test_generator_cap(self):
        with pytest.raises(ValueError):
            G(13)

    def test_scalar_ops(self):
        a = G.from_scalar(2.0, 2)
        assert 3.0 * a == G.from_scalar(6.0, 2)
        assert a / 2.0 == G.from_scalar(1.0, 2)
        assert a - 1 == G.from_scalar(1.0, 2)


class TestInversion:
    def test_identity(self):
        one = G.from_scalar(1.0, 2)
        assert one.invert() == one

    def test_neumann_series(self):
        a = 2 + G.basis(0b11, 2)
        inv = a.invert()
        assert inv == 0.5 - 0.25 * G.basis(0b11, 2)
        assert a * inv == G.from_scalar(1.0, 2)

    def test_zero_body(self):
        with pytest.raises(ZeroBody):
            G.generator(0, 2).invert()

    def test_odd_component_with_body(self):
        with pytest.raises(OddElement):
            (1 + G.generator(0, 2)).invert()

    def test_division_by_element(self):
        a = 2 + G.basis(0b11, 2)
        assert (G.from_scalar(1.0, 2) / a).equals(a.invert(), 1e-15)

    def test_random_inverses(self, rng):
        # 1000 even elements with |body| >= 0.1, product error <= 1e-10
        worst = 0.0
        for _ in range(1000):
            a = random_element(rng, 4, parity=0, body_min=0.1)
            prod = a * a.invert()
            expect = np.zeros(dim(4))
            expect[0] = 1.0
            worst = max(worst, np.max(np.abs(prod.coeffs - expect)))
        assert worst <= 1e-10


class TestParity:
    def test_examples(self):
        assert G.generator(0, 2).parity is Parity.ODD
        assert (3 + G.basis(0b11, 2)).parity is Parity.EVEN
        assert (1 + G.generator(0, 2)).parity is Parity.NONHOMOGENEOUS
        assert G.zero(2).parity is Parity.EVEN

    def test_multiplication_table(self, rng):
        for pa in (0, 1):
            for pb in (0, 1):
                for _ in range(50):
                    a = random_element(rng, 3, parity=pa)
                    b = random_element(rng, 3, parity=pb)
                    prod = a * b
                    expected = (pa + pb) % 2
                    assert prod.has_parity(
                        Parity.EVEN if expected == 0 else Parity.ODD)

    def test_graded_commutativity(self, rng):
        for pa in (0, 1):
            for pb in (0, 1):
                for _ in range(50):
                    a = random_element(rng, 3, parity=pa)
                    b = random_element(rng, 3, parity=pb)
                    sign = -1.0 if pa and pb else 1.0
                    assert (a * b).equals(sign * (b * a), 1e-13)


class TestLaws:
    def test_associativity_distributivity(self, rng):
        for _ in range(1000):
            a = random_element(rng, 3)
            b = random_element(rng, 3)
            c = random_element(rng, 3)
            assert ((a * b) * c).equals(a * (b * c), 1e-12)
            assert (a * (b + c)).equals(a * b + a * c, 1e-12)

    def test_merge_sign_by_reordering(self):
        # t2*t1*t3 needs one transposition to sort
        assert merge_sign(0b010, 0b101) == -1.0
        assert merge_sign(0b001, 0b110) == 1.0
        assert merge_sign(0b011, 0b010) == 0.0


class TestBodySoul:
    def test_examples(self):
        body, soul = (2 + G.basis(0b11, 2)).body_soul()
        assert body == 2.0
        assert soul == G.basis(0b11, 2)
        assert G.from_scalar(5.0, 2).body_soul() == (5.0, G.zero(2))
        t1 = G.generator(0, 2)
        assert t1.body_soul() == (0.0, t1)

    def test_soul_nilpotent(self, rng):
        a = random_element(rng, 4, parity=0)
        s = a.soul
        power = G.from_scalar(1.0, 4)
        for _ in range(dim(4).bit_length()):
            power = power * s
        assert power.is_zero()


class TestSerialization:
    def test_pairs_roundtrip(self, rng):
        a = random_element(rng, 3)
        again = G.from_pairs(a.to_pairs(), 3)
        assert a == again

    def test_text_rendering(self):
        a = 2 + 0.5 * G.basis(0b11, 2)
        assert str(a) == "2 + 0.5*t1^t2"
        assert str(G.zero(1)) == "0"

    def test_equality_tolerance(self):
        a = G.from_scalar(1.0, 1)
        b = G.from_scalar(1.0 + 1e-13, 1)
        assert a != b
        assert a.equals(b, 1e-12)


class TestStripGenerator:
    def test_left_derivative_sign(self):
        # d/dt2 (t1^t2) = -t1: stripping t2 passes t1
        arr = G.basis(0b11, 2).coeffs
        out = strip_generator(arr, 2, 1)
        assert out[0b01] == -1.0
        out0 = strip_generator(arr, 2, 0)
        assert out0[0b10] == 1.0

    def test_absent_generator(self):
        arr = G.basis(0b01, 2).coeffs
        assert not strip_generator(arr, 2, 1).any()
