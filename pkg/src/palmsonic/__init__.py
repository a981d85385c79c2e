"""Trunk-vibration pest detection toolkit.

Pipeline: WAV recordings -> cepstral feature matrices -> axis-free feature
images -> horizontally fused images -> binary infested / not-infested
classifiers, with a deterministic synthetic corpus generator for offline
end-to-end runs. See the CLI in palmsonic.cli for the batch surface.
"""

__version__ = "0.1.0"
