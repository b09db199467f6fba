"""irsjam: an IRS-assisted multi-user downlink simulator under hostile jamming,
with tabular learners for joint power allocation and reflect phase control."""

from .channel import (ChannelSet, DegenerateChannelError, Geometry,
                      PathlossConfig, PhaseShiftMatrix, effective_channel,
                      generate_channels, pathloss_gain, sample_fading)
from .environment import (AntiJamEnv, PowerAllocation, RawObservation,
                          StepOutcome, TransmitBeamformers, compute_sinr,
                          reward, system_rate, transmit_beamformer)
from .jammer import (JammerAction, JammerView, jam_vector, make_jammer)
from .codec import ActionCodec, DecodedAction, StateCodec
from .agents import (MixedPolicy, QLearningAgent, QTable, WolfPhcAgent,
                     epsilon_greedy, greedy_baseline, load_checkpoint,
                     optimal_pa_no_irs, phc_update, q_update, save_checkpoint,
                     wolf_phc_step)
from .config import ExperimentConfig, ConfigError, load_config
from .harness import RunRecord, run_sweep, run_training, summarize

__version__ = "0.1.0"
