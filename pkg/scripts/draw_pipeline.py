"""
Render the replication workflow as a mermaid PNG.

Usage:
    python scripts/draw_pipeline.py [output.png]
"""

import sys
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.pipeline import get_graph_image  # noqa: E402

get_graph_image(sys.argv[1] if len(sys.argv) > 1 else "replication_pipeline.png")
