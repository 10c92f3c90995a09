import math
from fractions import Fraction

import numpy as np
import pytest

from sofic_spectra.exact import ComplexRational
from sofic_spectra.groups import lattice_group
from sofic_spectra.measures import Alphabet, Configuration, binary_alphabet
from sofic_spectra.monotone import (
    RationalSchedule,
    ScheduleError,
    ValueSets,
    apply_schedule,
    build_schedule,
    gershgorin_psd,
    monotone_ids_report,
    schedule_step_psd_check,
    value_sets_of,
)
from sofic_spectra.operators import (
    diagonal_rule,
    schrodinger_rule,
    table_rule,
    validate_local_rule,
)
from sofic_spectra.sofic import torus_approximation
from sofic_spectra.spectral import eigen_spectrum

Z1 = lattice_group(1)
BIN = binary_alphabet()
ONE = Alphabet(symbols=("a",))


def crat(re, im=0):
    return ComplexRational(Fraction(re), Fraction(im))


def zero_config(n):
    return Configuration(values=np.zeros(n, dtype=np.int64))


def test_value_sets_validation():
    with pytest.raises(ScheduleError):
        ValueSets(f1=(crat(0),), f2=(), max_offdiag_per_row=0)
    with pytest.raises(ScheduleError):
        ValueSets(f1=(crat(1, 1),), f2=(), max_offdiag_per_row=0)
    with pytest.raises(ScheduleError):
        ValueSets(f1=(), f2=(crat(0, 1),), max_offdiag_per_row=1)  # not conj-closed
    vs = ValueSets(f1=(crat(1),), f2=(crat(0, 1), crat(0, -1)),
                   max_offdiag_per_row=1)
    assert vs.positive_representatives() == [crat(0, 1)]


def test_dyadic_schedule_examples():
    vs = ValueSets(f1=(crat(1),), f2=(), max_offdiag_per_row=0)
    sched = build_schedule(vs, 3)
    assert sched.gap_constant == 1
    assert [sched.diagonal(m, crat(1)) for m in (1, 2, 3)] == \
        [Fraction(1, 2), Fraction(7, 8), Fraction(31, 32)]
    i_val = crat(0, 1)
    vs2 = ValueSets(f1=(crat(1),), f2=(i_val, crat(0, -1)),
                    max_offdiag_per_row=1)
    sched2 = build_schedule(vs2, 2)
    assert sched2.offdiagonal(1, i_val) == crat(Fraction(1, 4), Fraction(5, 4))
    assert sched2.offdiagonal(2, i_val) == crat(Fraction(1, 16), Fraction(17, 16))
    assert sched2.offdiagonal(1, crat(0, -1)) == \
        crat(Fraction(1, 4), Fraction(-5, 4))


def test_schedule_rational_target_increases_strictly():
    q = crat(Fraction(7, 5))
    sched = build_schedule(ValueSets(f1=(q,), f2=(), max_offdiag_per_row=0), 6)
    vals = [sched.diagonal(m, q) for m in range(1, 7)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert all(v < Fraction(7, 5) for v in vals)
    assert all(v != 0 for v in vals)


def test_schedule_zero_nudge():
    # f = 1/2, c = 1: floor(2)/4 - 2/4 = 0 lands on zero and gets nudged
    f = crat(Fraction(1, 2))
    sched = build_schedule(ValueSets(f1=(f,), f2=(), max_offdiag_per_row=0), 2)
    assert sched.diagonal(1, f) == -Fraction(1, 16)
    assert sched.diagonal(2, f) > sched.diagonal(1, f)


def test_schedule_real_offdiagonal_stays_real():
    one = crat(1)
    vs = ValueSets(f1=(crat(-2),), f2=(one,), max_offdiag_per_row=2)
    sched = build_schedule(vs, 4)
    for m in range(1, 5):
        b = sched.offdiagonal(m, one)
        assert b.is_real()
        assert b.re > 1
    assert sched.offdiagonal(4, one).re - 1 == Fraction(1, 256)


def test_schedule_requires_diagonal_values():
    with pytest.raises(ScheduleError):
        build_schedule(ValueSets(f1=(), f2=(crat(1),), max_offdiag_per_row=1), 2)


def test_apply_schedule_diagonal():
    rule = diagonal_rule(Z1, ONE, [Fraction(1)])
    sched = build_schedule(value_sets_of(rule), 3)
    out = apply_schedule(rule, sched, 2)
    assert out.exact
    e = Z1.identity()
    assert out.tables[e][0] == crat(Fraction(7, 8))
    assert validate_local_rule(out).ok


def test_apply_schedule_zero_rule_vacuous():
    rule = table_rule(Z1, ONE, 0, [])
    sched = build_schedule(ValueSets(f1=(), f2=(), max_offdiag_per_row=0), 2)
    out = apply_schedule(rule, sched, 1)
    assert all(v.is_zero() for t in out.tables.values() for v in t.tolist())


def test_apply_schedule_irrational_schrodinger():
    rule = schrodinger_rule(Z1, ONE, [math.sqrt(2)])
    sched = build_schedule(value_sets_of(rule), 3)
    target = -2 + math.sqrt(2)
    diags = []
    for m in (1, 2, 3):
        out = apply_schedule(rule, sched, m)
        assert out.exact and validate_local_rule(out).ok
        diags.append(out.tables[Z1.identity()][0].re)
    assert all(b > a for a, b in zip(diags, diags[1:]))
    assert all(float(d) < target for d in diags)


def test_apply_schedule_value_mismatch():
    rule = diagonal_rule(Z1, ONE, [Fraction(2)])
    sched = build_schedule(
        ValueSets(f1=(crat(1),), f2=(), max_offdiag_per_row=0), 2)
    with pytest.raises(ScheduleError):
        apply_schedule(rule, sched, 1)


def test_gershgorin_float_examples():
    assert gershgorin_psd(np.eye(3), strict=True).certified
    assert gershgorin_psd(np.array([[2.0, 1.0], [1.0, 2.0]])).certified
    cert = gershgorin_psd(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert not cert.certified and cert.witness_row == 0
    spec = eigen_spectrum(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert np.allclose(spec.values, [-1, 3])


def test_gershgorin_exact_boundary():
    from sofic_spectra.operators import InducedOperator
    # |3+4i| = 5 exactly: boundary row certified non-strict only
    entries = {(0, 0): crat(5), (1, 1): crat(5),
               (0, 1): crat(3, 4), (1, 0): crat(3, -4)}
    op = InducedOperator(n=2, entries=entries, exact=True, hopping=1,
                         goodness_radius=0)
    assert gershgorin_psd(op).certified
    assert not gershgorin_psd(op, strict=True).certified
    assert gershgorin_psd(op).exact


def test_gershgorin_soundness_against_eigensolver():
    rng = np.random.default_rng(5)
    for _ in range(25):
        n = int(rng.integers(2, 20))
        a = rng.normal(size=(n, n))
        a = (a + a.T) / 2
        np.fill_diagonal(a, np.abs(a).sum(axis=1))
        cert = gershgorin_psd(a)
        assert cert.certified
        spec = eigen_spectrum(a)
        scale = max(1.0, float(np.max(np.abs(spec.values))))
        assert spec.values[0] >= -1e-10 * scale


def test_schedule_step_psd_diagonal_rule():
    rule = diagonal_rule(Z1, BIN, [Fraction(1), Fraction(3)])
    sched = build_schedule(value_sets_of(rule), 4)
    sig = torus_approximation(1, 10)
    rho = Configuration(values=np.arange(10) % 2)
    for m in (1, 2, 3):
        step = schedule_step_psd_check(rule, sched, m, sig, rho)
        assert step.certified
        assert step.min_eigenvalue > 0


def test_schedule_step_handbuilt_constant_offdiagonal():
    # hand-built schedule keeping rational off-diagonals fixed: differences
    # are diagonal and positive
    rule = schrodinger_rule(Z1, ONE, [Fraction(1)])
    vs = value_sets_of(rule)
    one = crat(1)
    f = crat(-1)
    sched = RationalSchedule(m_max=3, values=vs, gap_constant=Fraction(1))
    for m in (1, 2, 3):
        sched.a[(m, f)] = Fraction(-1) - Fraction(1, 2 ** m)
        sched.b[(m, one)] = one
    sig = torus_approximation(1, 8)
    step = schedule_step_psd_check(rule, sched, 1, sig, zero_config(8))
    assert step.certified and step.min_eigenvalue > 0


def test_schedule_step_zero_rows_allowed():
    # torus(1,4) has no 2-good vertices: differences are identically zero,
    # still PSD (support-strict check is vacuous)
    rule = schrodinger_rule(Z1, ONE, [Fraction(1)])
    sched = build_schedule(value_sets_of(rule), 2)
    sig = torus_approximation(1, 4)
    step = schedule_step_psd_check(rule, sched, 1, sig, zero_config(4))
    assert step.certified
    assert step.n_zero_rows == 4


def test_monotone_report_sqrt2():
    rule = schrodinger_rule(Z1, ONE, [math.sqrt(2)])
    sched = build_schedule(value_sets_of(rule), 6)
    sig = torus_approximation(1, 64)
    grid = np.linspace(-5, 2, 141)
    rep = monotone_ids_report(rule, sched, sig, zero_config(64), grid)
    assert all(s.certified and s.min_eigenvalue > 0 for s in rep.psd_steps)
    gaps = [rep.max_gap_per_m[m] for m in sorted(rep.max_gap_per_m)]
    assert gaps[-1] <= gaps[0]
    assert rep.max_gap_per_m[6] <= 0.05
    for m in rep.norm_gap_per_m:
        assert rep.norm_gap_per_m[m] <= rep.norm_bound_per_m[m]
        if m > 1:
            assert rep.norm_gap_per_m[m] < rep.norm_gap_per_m[m - 1]


def test_monotone_report_rational_target():
    rule = schrodinger_rule(Z1, ONE, [Fraction(3, 2)])
    sched = build_schedule(value_sets_of(rule), 8)
    sig = torus_approximation(1, 32)
    grid = np.linspace(-4, 4, 81)
    rep = monotone_ids_report(rule, sched, sig, zero_config(32), grid)
    assert rep.max_gap_per_m[8] <= 0.07


def test_monotone_diagonal_counting_jumps():
    rule = diagonal_rule(Z1, ONE, [Fraction(1)])
    sched = build_schedule(value_sets_of(rule), 4)
    sig = torus_approximation(1, 6)
    grid = [0.9]
    rep = monotone_ids_report(rule, sched, sig, zero_config(6), grid)
    # a(m) crosses 0.9 between m=2 (7/8) and m=3 (31/32)
    by_m = {r.m: r.count_m for r in rep.rows}
    assert by_m[1] == 6 and by_m[2] == 6
    assert by_m[3] == 0 and by_m[4] == 0
