"""Compartmental epidemic models fitted with a trainable infection-rate effect network."""

from .compartments import (
    VARIANTS,
    CompartmentState,
    ModelVariant,
    RateParameters,
    default_parameters,
    get_variant,
    initial_state,
    vector_field,
)
from .data import ObservedSeries, RegionConfig, load_bundled, load_region_csv, split_train_test
from .effect_net import EffectNetwork, backward, forward, init_network
from .integrator import IntegratorConfig, Trajectory, euler_step, integrate, rk4_step

__version__ = "0.1.0"
