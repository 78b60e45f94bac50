"""
Tests for the self-verification suite
"""
from tgt.core.config import VerifySettings
from tgt.services.verification import VerificationReport, run_verification


def test_report_bookkeeping():
    report = VerificationReport()
    report.record("small", 1e-13, 1e-12)
    report.record("large", 1e-3, 1e-12)
    report.record("flag", 0.0, 0.0, passed=False)
    assert report.count == 3
    assert [c.name for c in report.failures] == ["large", "flag"]
    assert not report.ok


def test_suite_passes_on_small_settings():
    report = run_verification(VerifySettings(oracle_instances=3, max_nodes=5, gradcheck_coords=3))
    failed = [(c.name, c.value, c.tolerance) for c in report.failures]
    assert report.count > 20
    assert failed == []
