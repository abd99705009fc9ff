"""foldkit: garment folding simulation and closed-loop manipulation toolkit.

Submodules:
    geometry    point-cloud and computational-geometry primitives
    garments    parametric garment meshes with keypoints and fold stages
    simulation  position-based cloth dynamics with grasping
    planning    fold trajectory generation (analytic hinge + sim rollout)
    language    instruction parsing against a fold-description lexicon
    contact     contact-point synthesis from point flow, with seed ensembles
    executor    closed-loop fold execution and episode running
    metrics     rectangularity, area-ratio, and success evaluation
    dataset     trajectory record IO and dataset generation
    cli         command-line interface
"""

__version__ = "0.1.0"
