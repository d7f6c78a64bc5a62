"""Run the acceptance suite and exit with its status; the summary lists each criterion."""
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    sys.exit(pytest.main([str(ROOT / "tests" / "test_acceptance.py"), "-q", "--rootdir", str(ROOT), *sys.argv[1:]]))
