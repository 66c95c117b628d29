"""Binary-framed streaming transport between the audio splitter and the ASR cluster."""

from .protocol import Frame, FrameDecoder, FrameKind, decode_frame, encode_frame
from .server import serve
from .client import client_stream, stream_clip

__all__ = [
    "Frame",
    "FrameDecoder",
    "FrameKind",
    "decode_frame",
    "encode_frame",
    "serve",
    "client_stream",
    "stream_clip",
]
