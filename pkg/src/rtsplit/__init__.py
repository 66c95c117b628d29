"""Real-time audio splitting gateway and evaluation harness for streaming ASR."""

__version__ = "0.1.0"

SAMPLE_RATE = 16000
