"""Desk-scale saliency-for-driving workbench.

Subpackages:
    diffcore   -- minimal differentiable operators, losses, SGD
    simworld   -- toy top-down driving world, oracle driver, synthetic gaze
    gazeprep   -- gaze/frame alignment and saliency dataset assembly
    nets       -- network specs, forward passes, checkpoints
    trainer    -- the four training procedures
    evalreport -- held-out MSE evaluation and model comparison
    service    -- HTTP session service for the capture UI
"""

__version__ = "0.1.0"
