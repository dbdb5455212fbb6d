"""Device-classification attacks on blockchain IoT ledgers and timestamp obfuscation."""

from .attack import (AttackKind, AttackScenario, ScenarioReport, build_dataset, run_blind,
                     run_daily, run_informed)
from .classifier import DecisionTree, TrainConfig, best_split, evaluate, gini, predict, train
from .errors import ConfigError, DataError, DomainError, LedgerPrivError, ParseError
from .features import FeatureConfig, LabeledDataset, balance_labels, extract, split_kfold
from .harness import ExperimentSpec, load_spec, run_sweep
from .ledger import (Block, LedgerChain, Transaction, export_ledger, form_blocks,
                     import_ledger, populate, verify_chain)
from .obfuscate import (ObfuscationConfig, apply, assign_multi_device, consolidate_packets,
                        delay_transform)
from .trace import (DeviceProfile, PacketRecord, TraceSet, builtin_profiles, default_home,
                    parse_trace, serialize_trace, synth_trace)

__version__ = "0.1.0"
