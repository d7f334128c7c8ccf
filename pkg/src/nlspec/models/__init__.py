"""Application models: vector-host Zika dynamics and multi-genotype stem cells."""

from .convergence import ConvergenceTable, LinearScalarModel, ivp_error, nonlocal_to_local_ivp_error
from .integrate import BlowupError, SemilinearSolver, Trajectory, integrate_system
from .presets import STEMCELL_PRESETS, ZIKA_PRESETS, stemcell_preset, zika_preset
from .stemcell import (StemCellClassification, StemCellModel, StemCellParams, attractor, classify_stemcell,
                       integrate_stemcell)
from .zika import (ZikaClassification, ZikaModel, ZikaParams, ZikaThresholds, classify_zika, integrate_zika,
                   zika_thresholds)
