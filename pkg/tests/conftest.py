import pytest

from ledgerpriv.trace import builtin_profiles, default_home, synth_trace


@pytest.fixture(scope="session")
def small_home():
    """One device per profile, ten minutes."""
    profiles = builtin_profiles()
    return synth_trace(profiles, default_home(profiles), 600.0, seed=21)


@pytest.fixture(scope="session")
def hour_home():
    profiles = builtin_profiles()
    return synth_trace(profiles, default_home(profiles), 3600.0, seed=5)


# Acceptance criteria record one verdict line each; they are echoed at the end
# of the run so they show up without ``-s``.
ACCEPTANCE: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[1])):
            terminalreporter.write_line(ACCEPTANCE[key])
