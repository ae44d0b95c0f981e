import sys
from pathlib import Path

# test-local helpers (oracles.py) importable regardless of invocation cwd
sys.path.insert(0, str(Path(__file__).parent))
