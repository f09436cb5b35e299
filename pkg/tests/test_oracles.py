"""Verification oracles: equivalence sampling, audits, report determinism."""

import numpy as np
import pytest

from gqlin.core import contains_direct
from gqlin.oracles import (AUDIT_NAMES, EQUIVALENCE_SYSTEMS, AuditReport,
                           audit_theorem_inequalities, check_equivalence,
                           check_gradient_normals, system_harness,
                           write_reports_csv)


def test_samplers_and_violators_are_what_they_claim(rng):
    for name in EQUIVALENCE_SYSTEMS + ("entropy-rhd", "rmhd"):
        h = system_harness(name)
        for u in h.sample(100, rng):
            assert contains_direct(h.region, u), name
        for u in h.violate(100, rng):
            assert not contains_direct(h.region, u), name


@pytest.mark.parametrize("system", EQUIVALENCE_SYSTEMS)
def test_equivalence_small(system):
    rep = check_equivalence(system, 1000, seed=7, n_violators=100)
    assert rep.ok, rep.disagreements[:2]
    assert rep.excluded_degenerate <= rep.samples * 1e-3


def test_equivalence_deterministic():
    a = check_equivalence("euler", 500, seed=3, n_violators=50)
    b = check_equivalence("euler", 500, seed=3, n_violators=50)
    assert a.agreements == b.agreements
    assert a.excluded_degenerate == b.excluded_degenerate
    assert len(a.disagreements) == len(b.disagreements)


@pytest.mark.parametrize("system", ["euler", "ideal-mhd", "entropy-rhd"])
def test_gradient_normals(system):
    assert check_gradient_normals(system, 100, seed=13) <= 1e-5


@pytest.mark.parametrize("which", ["LF-5.1", "GK-5.2-splitting", "NS-5.2",
                                   "TM-5.3"])
def test_pointwise_audits(which):
    rep = audit_theorem_inequalities(which, 20_000, seed=17)
    assert rep.failures == 0
    assert rep.min_margin > 0.0 or abs(rep.min_margin) < 1e-13


def test_field_audits():
    rep = audit_theorem_inequalities("MMHD-6.1", 5, seed=19)
    assert rep.failures == 0 and rep.min_margin > 0.0
    rep = audit_theorem_inequalities("MMHD-6.2", 3, seed=19)
    assert rep.failures == 0


def test_csv_report_roundtrip(tmp_path):
    reports = [AuditReport("LF-5.1", 100, 0, 1.25e-3),
               AuditReport("MMHD-6.1", 40000, 0, 18.0)]
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    write_reports_csv(reports, str(p1))
    write_reports_csv(reports, str(p2))
    assert p1.read_bytes() == p2.read_bytes()
    lines = p1.read_text().strip().splitlines()
    assert lines[0] == "audit,trials,failures,min_margin"
    assert lines[1].startswith("LF-5.1,100,0,")


def test_unknown_names_rejected():
    with pytest.raises(ValueError):
        system_harness("nope")
    with pytest.raises(ValueError):
        audit_theorem_inequalities("nope", 10)
    assert set(AUDIT_NAMES) == {"LF-5.1", "GK-5.2-splitting", "NS-5.2",
                                "TM-5.3", "MMHD-6.1", "MMHD-6.2"}
