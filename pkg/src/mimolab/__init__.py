"""MIMO detection lab: classical detectors, neural vector-quantization
detectors, the modular PIC network, and a Monte Carlo BER harness."""

from .classic import equalize, lmmse_equalize, mf_equalize, mlsd_detect, zf_equalize
from .harness import BerCurve, ExperimentSpec, evaluate, run_experiment, sweep
from .mnnet import MnnetGraph, lattice, mnnet_detect, train_mnnet
from .nn import DenseNetwork, TrainingConfig, train
from .signal import Constellation, MimoConfig, build_constellation, calibrate_noise, generate_dataset
from .vq import CodebookMapping, VqDetector, make_mapping, train_vq_detector

__version__ = "0.1.0"
