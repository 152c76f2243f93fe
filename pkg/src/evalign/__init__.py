"""evalign: aligning event-camera streams to a frozen transformer latent space.

The pipeline: raw event streams are parsed and windowed (``evalign.events``),
encoded as normalized voxel grids (``evalign.representation``), embedded and
pushed through a frozen backbone with trainable low-rank adapters
(``evalign.model``), and trained to match a frozen teacher's tokens under a
progressively dilated activity mask (``evalign.distill``). Frozen linear
heads (``evalign.heads``), resolution adapters (``evalign.inference``),
descriptor matching with pose recovery (``evalign.matching``), and the
evaluation stack (``evalign.metrics``) consume the aligned features.
"""

__version__ = "0.1.0"
