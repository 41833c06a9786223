import logging
import os

from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.register_profile("ci", deadline=None, max_examples=15)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# solver warnings about truncation tails are expected in several tests
logging.getLogger("fracspec").setLevel(logging.ERROR)

ACCEPTANCE: dict[str, str] = {}


def record(key: str, line: str) -> None:
    ACCEPTANCE[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        terminalreporter.write_line(ACCEPTANCE[key])
