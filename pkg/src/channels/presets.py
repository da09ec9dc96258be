"""Named ensembles addressable from run configurations."""
from channels.ensemble import ensemble_from_channels, ensemble_from_chois, uniform_unitary_ensemble
from channels.families import (amplitude_damping, bit_flip, clock_shift_family, displayed_pauli_roots,
                               identity_channel, pauli_matrices, principal_sqrt, werner_holevo)
from utils.errors import ConfigError

PRESET_NAMES = ('pauli', 'clock_shift:d', 'sqrt_clock_shift:d', 'sqrt_pauli', 'adc_bf_id', 'werner_holevo:d')


def parse_preset(name):
    """Split 'family:d' into (family, d); d is None for fixed presets."""
    family, _, arg = name.strip().partition(':')
    if family in ('clock_shift', 'sqrt_clock_shift', 'werner_holevo'):
        try:
            d = int(arg)
        except ValueError:
            raise ConfigError(f"Preset {name!r} needs an integer dimension, e.g. {family}:3") from None
        if d < 2:
            raise ConfigError(f"Preset {name!r} needs dimension >= 2")
        return family, d
    if family in ('pauli', 'sqrt_pauli', 'adc_bf_id') and not arg:
        return family, None
    raise ConfigError(f"Unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")


def preset_unitaries(name):
    """Unitaries behind a unitary preset, or None for non-unitary families."""
    family, d = parse_preset(name)
    if family == 'pauli':
        return list(pauli_matrices())
    if family == 'sqrt_pauli':
        return [pauli_matrices()[0], *displayed_pauli_roots()]
    if family == 'clock_shift':
        return clock_shift_family(d)
    if family == 'sqrt_clock_shift':
        return [principal_sqrt(u) for u in clock_shift_family(d)]
    return None


def preset(name):
    """ChannelEnsemble for a preset name."""
    family, d = parse_preset(name)
    unitaries = preset_unitaries(name)
    if unitaries is not None:
        return uniform_unitary_ensemble(unitaries)
    if family == 'adc_bf_id':
        return ensemble_from_channels([amplitude_damping(2 / 3), bit_flip(1 / 3), identity_channel(2)])
    return ensemble_from_chois([werner_holevo(d, True), werner_holevo(d, False)])
