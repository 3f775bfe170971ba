"""Runs last: every record produced anywhere in the suite satisfies the latency identities."""

from conftest import EMITTED_RECORDS
from fogbench.metrics import identity_violations


def test_every_emitted_record_satisfies_identities():
    assert len(EMITTED_RECORDS) > 1000
    bad = [(r.key, v) for r in EMITTED_RECORDS if (v := identity_violations(r.timing, r.metrics))]
    assert bad == []
