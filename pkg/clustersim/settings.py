import os
from dotenv import load_dotenv

load_dotenv()

# Runtime configuration
DEFAULT_CONFIG_PATH = os.getenv(
    "CLUSTERSIM_CONFIG",
    os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config", "default.json")
)

OUTPUT_DIR = os.getenv("CLUSTERSIM_OUTPUT_DIR", "runs")

LOG_LEVEL = os.getenv("CLUSTERSIM_LOG_LEVEL", "WARNING").upper()


def get_worker_count() -> int:
    """Thread pool size for Monte-Carlo sample evaluation"""
    raw = os.getenv("CLUSTERSIM_WORKERS", "1")
    try:
        workers = int(raw)
    except ValueError:
        workers = 1
    return max(1, workers)
