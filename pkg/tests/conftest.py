import sys
from pathlib import Path

# the acceptance module reuses the random-graph generator from test_graph
sys.path.insert(0, str(Path(__file__).parent))
