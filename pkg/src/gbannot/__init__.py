"""gbannot: ground-truth annotation pipeline over recorded rendering
command streams.

A simulated game emits per-frame command streams; the engine rebuilds
persistent resource identities, replays frames into color and
resource-id images, decomposes them into mesh/texture/shader patches,
and propagates click-assigned class labels across frames and sessions.
"""

__version__ = "0.1.0"
