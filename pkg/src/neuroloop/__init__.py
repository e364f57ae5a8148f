"""Fatigue-controlled treadmill training simulation and EEG/EMG analysis."""

from .complexity import LzcResult, lz76_phrase_count, lzc, lzc_drop_rate
from .controller import (BoutSummary, Mode, Phase, SessionConfig, SessionLog,
                         SessionState, run_session, simulate_session, step)
from .dcmc import (BandSummary, DcmcResult, DominanceResult, MvarModel,
                   band_summary, dc_matrix, directed_coherence, dominance,
                   fit_mvar, mask_and_normalize, mask_and_normalize_set,
                   select_order, significance_threshold)
from .fatigue import (BaselineRule, MpfWindow, mpf, mpf_drop_rate, stream_mpf)
from .signals import (Epoch, PowerSpectrum, PreprocessConfig, SpectrumConfig,
                      TimeSeries, periodogram, preprocess, segment)
from .slope import SlopeResult, psd_slope, slope_si
from .stats import (StatResult, anova_oneway, anova_twoway, bonferroni,
                    change_rate, ks_normality, t_test)
from .synth import (FatigueState, MvarSpec, PlantConfig, gen_emg, gen_mvar,
                    gen_powerlaw_noise, plant_step, unidirectional_coupling_spec)

__version__ = "0.1.0"
