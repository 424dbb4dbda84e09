import os
from dotenv import load_dotenv

load_dotenv()

TOOL_VERSION = "0.3.0"
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

# Noise models
DEFAULT_EPSILON = float(os.getenv("DEFAULT_EPSILON", "0.07"))
DEFAULT_SMOOTHING = float(os.getenv("DEFAULT_SMOOTHING", "0.1"))
DEFAULT_P_INSERT = float(os.getenv("DEFAULT_P_INSERT", "0.03"))
DEFAULT_P_DELETE = float(os.getenv("DEFAULT_P_DELETE", "0.04"))

# Corpus preparation
DEFAULT_MAX_CHARS = int(os.getenv("DEFAULT_MAX_CHARS", "128"))

# Decoders
DEFAULT_BEAM_WIDTH = int(os.getenv("DEFAULT_BEAM_WIDTH", "8"))
DEFAULT_BACKOFF_WEIGHT = float(os.getenv("DEFAULT_BACKOFF_WEIGHT", "0.7"))

# Monte Carlo estimation
DEFAULT_SAMPLES = int(os.getenv("DEFAULT_SAMPLES", "1000000"))
MC_BLOCK_SIZE = int(os.getenv("MC_BLOCK_SIZE", "4096"))
DEFAULT_SHARDS = int(os.getenv("DEFAULT_SHARDS", "1"))
DEFAULT_WORKERS = int(os.getenv("DEFAULT_WORKERS", "1"))
EXHAUSTIVE_TERM_LIMIT = int(os.getenv("EXHAUSTIVE_TERM_LIMIT", "10000000"))

# Web UI
GRADIO_HOST = os.getenv("GRADIO_HOST", "127.0.0.1")
GRADIO_PORT = int(os.getenv("GRADIO_PORT", "7860"))
